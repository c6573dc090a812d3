#pragma once

#include <vector>

namespace philautia {

// Result of a converged coordinate-descent fit. Coefficients live in the
// original feature space; intercept absorbs the centering.
struct ElasticNetResult {
    std::vector<double> weights;
    double intercept = 0.0;
    int sweeps = 0;
    double last_delta = 0.0;
    // Objective of the internally standardized problem after each sweep;
    // coordinate descent makes it non-increasing.
    std::vector<double> objective_trace;
};

// Minimizes (1/2n)*||y - Xw - b||^2 + lambda*(alpha*|w|_1 + (1-alpha)/2*|w|^2)
// by cyclic coordinate descent with soft-thresholding. Features are z-scored
// internally (population std) and the penalty applies to the standardized
// coefficients, so predictions are invariant to affine feature rescaling.
// Zero-variance features get weight 0. Converges when the largest
// standardized-coefficient change in a sweep drops below tol; throws
// ConvergenceError at max_iter sweeps otherwise, ValidationError on
// non-finite input or bad hyperparameters.
ElasticNetResult fit_elastic_net(const std::vector<std::vector<double>>& X,
                                 const std::vector<double>& y, double lambda, double alpha,
                                 double tol = 1e-6, int max_iter = 10000);

} // namespace philautia
