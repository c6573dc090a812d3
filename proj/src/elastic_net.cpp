#include "philautia/elastic_net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "philautia/errors.hpp"

namespace philautia {

namespace {

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

} // namespace

ElasticNetResult fit_elastic_net(const std::vector<std::vector<double>>& X,
                                 const std::vector<double>& y, double lambda, double alpha,
                                 double tol, int max_iter) {
    const std::size_t n = X.size();
    if (n == 0 || y.size() != n)
        throw ValidationError("elastic net needs matching non-empty X and y");
    const std::size_t p = X[0].size();
    if (p == 0) throw ValidationError("elastic net needs at least one feature");
    if (lambda < 0.0) throw ValidationError("lambda must be non-negative");
    if (alpha < 0.0 || alpha > 1.0) throw ValidationError("alpha must be in [0,1]");
    if (tol <= 0.0) throw ValidationError("tol must be positive");
    if (max_iter < 1) throw ValidationError("max_iter must be at least 1");

    for (const auto& row : X) {
        if (row.size() != p) throw ValidationError("ragged feature matrix");
        for (double v : row)
            if (!std::isfinite(v)) throw ValidationError("non-finite feature value");
    }
    for (double v : y)
        if (!std::isfinite(v)) throw ValidationError("non-finite target value");

    // Standardize features column-wise; keep the centered target.
    const double nd = static_cast<double>(n);
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= nd;

    std::vector<std::vector<double>> cols(p, std::vector<double>(n));
    std::vector<double> mu(p, 0.0), sigma(p, 0.0);
    std::vector<bool> active(p, false);
    for (std::size_t j = 0; j < p; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += X[i][j];
        m /= nd;
        double var = 0.0, biggest = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            var += (X[i][j] - m) * (X[i][j] - m);
            biggest = std::max(biggest, std::abs(X[i][j]));
        }
        const double sd = std::sqrt(var / nd);
        mu[j] = m;
        sigma[j] = sd;
        active[j] = sd > 1e-12 * std::max(1.0, biggest);
        if (active[j])
            for (std::size_t i = 0; i < n; ++i) cols[j][i] = (X[i][j] - m) / sd;
    }

    // v_j = (1/n) x_j^T x_j of the standardized column, 1 up to rounding.
    std::vector<double> v(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        if (!active[j]) continue;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += cols[j][i] * cols[j][i];
        v[j] = acc / nd;
    }

    std::vector<double> w(p, 0.0); // standardized-space coefficients
    std::vector<double> r(n);      // residual y_centered - Xw
    for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - y_mean;

    ElasticNetResult result;
    const double l1 = lambda * alpha;
    const double l2 = lambda * (1.0 - alpha);
    double delta = 0.0;
    bool converged = false;
    int sweep = 0;
    while (sweep < max_iter) {
        ++sweep;
        delta = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (!active[j]) continue;
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += cols[j][i] * r[i];
            const double rho = dot / nd + v[j] * w[j];
            const double w_new = soft_threshold(rho, l1) / (v[j] + l2);
            const double change = w_new - w[j];
            if (change != 0.0) {
                for (std::size_t i = 0; i < n; ++i) r[i] -= change * cols[j][i];
                w[j] = w_new;
            }
            delta = std::max(delta, std::abs(change));
        }
        double sse = 0.0;
        for (double e : r) sse += e * e;
        double p1 = 0.0, p2 = 0.0;
        for (double e : w) {
            p1 += std::abs(e);
            p2 += e * e;
        }
        result.objective_trace.push_back(sse / (2.0 * nd) + lambda * (alpha * p1 + (1.0 - alpha) / 2.0 * p2));
        if (delta < tol) {
            converged = true;
            break;
        }
    }
    result.sweeps = sweep;
    result.last_delta = delta;
    if (!converged)
        throw ConvergenceError("elastic net did not converge after " + std::to_string(sweep) +
                               " sweeps; last coefficient delta " + std::to_string(delta));

    result.weights.assign(p, 0.0);
    result.intercept = y_mean;
    for (std::size_t j = 0; j < p; ++j) {
        if (!active[j]) continue;
        result.weights[j] = w[j] / sigma[j];
        result.intercept -= result.weights[j] * mu[j];
    }
    return result;
}

} // namespace philautia
