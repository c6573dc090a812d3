#include "philautia/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace philautia {

namespace {

double population_std(const std::vector<double>& v, double mean) {
    double acc = 0.0;
    for (double e : v) acc += (e - mean) * (e - mean);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double e : v) acc += e;
    return acc / static_cast<double>(v.size());
}

bool is_degenerate_std(double sd, const std::vector<double>& v) {
    double largest = 0.0;
    for (double e : v) largest = std::max(largest, std::abs(e));
    return sd <= 1e-12 * std::max(1.0, largest);
}

std::string cell_name(const ModelId& g, const ModelId& e) {
    return "(" + g.value + ", " + e.value + ")";
}

std::vector<ModelId> shared_models(const std::vector<ModelId>& a,
                                   const std::vector<ModelId>& b) {
    std::set<ModelId> bs(b.begin(), b.end());
    std::vector<ModelId> out;
    for (const auto& id : a)
        if (bs.count(id)) out.push_back(id);
    return out;
}

std::size_t index_of(const std::vector<ModelId>& ids, const ModelId& id) {
    return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
}

std::string matrix_csv(const std::vector<ModelId>& row_ids,
                       const std::vector<ModelId>& col_ids,
                       const std::vector<double>& values) {
    std::ostringstream out;
    for (const auto& e : col_ids) out << ',' << e.value;
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
        out << row_ids[i].value;
        for (std::size_t j = 0; j < col_ids.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.6f", values[i * col_ids.size() + j]);
            out << ',' << buf;
        }
        out << '\n';
    }
    return out.str();
}

} // namespace

std::pair<std::vector<double>, bool> standardize_vector(const std::vector<double>& v) {
    const double mu = mean_of(v);
    const double sd = population_std(v, mu);
    if (is_degenerate_std(sd, v)) return {std::vector<double>(v.size(), 0.0), true};
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mu) / sd;
    return {std::move(out), false};
}

ScoreMatrix build_phi(const std::vector<ScoreRecord>& scores, const RunManifest& manifest,
                      Setting setting, double min_coverage) {
    if (std::find(manifest.settings.begin(), manifest.settings.end(), setting) ==
        manifest.settings.end())
        throw ValidationError("manifest does not include setting '" + to_string(setting) + "'");
    if (min_coverage < 0.0 || min_coverage > 1.0)
        throw ValidationError("min_coverage must be in [0,1]");

    const CoverageReport coverage = validate_dataset(manifest, scores);
    if (!coverage.duplicates.empty())
        throw ValidationError("duplicate score record for " + coverage.duplicates.front());
    if (!coverage.orphans.empty())
        throw ValidationError("score record outside manifest: " + coverage.orphans.front());

    ScoreMatrix m;
    m.generators = manifest.generators;
    m.evaluators = manifest.evaluators;
    m.setting = setting;
    m.values.assign(m.rows() * m.cols(), 0.0);
    m.counts.assign(m.rows() * m.cols(), 0);

    std::map<std::pair<ModelId, ModelId>, std::vector<std::pair<std::string, double>>> cells;
    for (const auto& r : scores)
        if (r.setting == setting) cells[{r.generator, r.evaluator}].push_back({r.image_id, r.score});

    const auto expected = static_cast<double>(manifest.images.size());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            auto it = cells.find({m.generators[i], m.evaluators[j]});
            if (it == cells.end() || it->second.empty())
                throw ValidationError("empty cell " + cell_name(m.generators[i], m.evaluators[j]) +
                                      " for setting " + to_string(setting));
            auto& cell = it->second;
            if (static_cast<double>(cell.size()) < min_coverage * expected)
                throw ValidationError(
                    "coverage below floor for " + cell_name(m.generators[i], m.evaluators[j]) +
                    ": " + std::to_string(cell.size()) + "/" +
                    std::to_string(manifest.images.size()));
            std::sort(cell.begin(), cell.end());
            double acc = 0.0;
            for (const auto& [img, s] : cell) acc += s;
            m.at(i, j) = acc / static_cast<double>(cell.size());
            m.counts[i * m.cols() + j] = static_cast<int>(cell.size());
        }
    return m;
}

StandardizedMatrix standardize(const ScoreMatrix& phi) {
    if (phi.rows() < 2 || phi.cols() < 2)
        throw ValidationError("standardize needs at least a 2x2 matrix, got " +
                              std::to_string(phi.rows()) + "x" + std::to_string(phi.cols()));
    StandardizedMatrix out;
    out.generators = phi.generators;
    out.evaluators = phi.evaluators;
    out.setting = phi.setting;
    out.values.assign(phi.rows() * phi.cols(), 0.0);

    // Pass 1: evaluator-wise (columns).
    for (std::size_t j = 0; j < phi.cols(); ++j) {
        std::vector<double> col(phi.rows());
        for (std::size_t i = 0; i < phi.rows(); ++i) col[i] = phi.at(i, j);
        auto [z, degenerate] = standardize_vector(col);
        if (degenerate) out.degenerate_columns.push_back(j);
        for (std::size_t i = 0; i < phi.rows(); ++i) out.at(i, j) = z[i];
    }
    // Pass 2: generator-wise (rows) on the column-standardized values.
    for (std::size_t i = 0; i < phi.rows(); ++i) {
        std::vector<double> row(phi.cols());
        for (std::size_t j = 0; j < phi.cols(); ++j) row[j] = out.at(i, j);
        auto [z, degenerate] = standardize_vector(row);
        if (degenerate) out.degenerate_rows.push_back(i);
        for (std::size_t j = 0; j < phi.cols(); ++j) out.at(i, j) = z[j];
    }
    return out;
}

std::map<ModelId, double> philautia_scores(const StandardizedMatrix& phi_tilde) {
    const auto shared = shared_models(phi_tilde.generators, phi_tilde.evaluators);
    if (shared.empty())
        throw ValidationError("no model appears on both axes; philautia scores undefined");
    std::map<ModelId, double> out;
    for (const auto& id : shared) {
        const std::size_t i = index_of(phi_tilde.generators, id);
        const std::size_t j = index_of(phi_tilde.evaluators, id);
        out[id] = phi_tilde.at(i, j);
    }
    return out;
}

double philautia_score(const StandardizedMatrix& phi_tilde, const ModelId& model) {
    const bool as_gen = std::find(phi_tilde.generators.begin(), phi_tilde.generators.end(),
                                  model) != phi_tilde.generators.end();
    const bool as_eval = std::find(phi_tilde.evaluators.begin(), phi_tilde.evaluators.end(),
                                   model) != phi_tilde.evaluators.end();
    if (!as_gen || !as_eval)
        throw ValidationError("model '" + model.value +
                              "' is not present on both axes; no philautia score");
    return phi_tilde.at(index_of(phi_tilde.generators, model),
                        index_of(phi_tilde.evaluators, model));
}

std::map<ModelId, DiagZScore> diagonal_zscores(const StandardizedMatrix& phi_tilde) {
    const auto shared = shared_models(phi_tilde.generators, phi_tilde.evaluators);
    if (shared.empty())
        throw ValidationError("no model appears on both axes; diagonal z-scores undefined");
    std::map<ModelId, DiagZScore> out;
    for (const auto& id : shared) {
        const std::size_t i = index_of(phi_tilde.generators, id);
        const std::size_t j = index_of(phi_tilde.evaluators, id);
        std::vector<double> col(phi_tilde.rows());
        for (std::size_t r = 0; r < phi_tilde.rows(); ++r) col[r] = phi_tilde.at(r, j);
        DiagZScore d;
        d.diag = phi_tilde.at(i, j);
        d.col_mean = mean_of(col);
        d.col_std = population_std(col, d.col_mean);
        d.defined = !is_degenerate_std(d.col_std, col);
        d.z = d.defined ? (d.diag - d.col_mean) / d.col_std : 0.0;
        out[id] = d;
    }
    return out;
}

StandardizedMatrix exclude_models(const std::vector<ScoreRecord>& scores,
                                  const RunManifest& manifest, Setting setting,
                                  const std::set<ModelId>& drop_evaluators,
                                  const std::set<ModelId>& drop_generators,
                                  double min_coverage) {
    for (const auto& id : drop_evaluators)
        if (std::find(manifest.evaluators.begin(), manifest.evaluators.end(), id) ==
            manifest.evaluators.end())
            throw ValidationError("cannot drop unknown evaluator '" + id.value + "'");
    for (const auto& id : drop_generators)
        if (std::find(manifest.generators.begin(), manifest.generators.end(), id) ==
            manifest.generators.end())
            throw ValidationError("cannot drop unknown generator '" + id.value + "'");

    RunManifest reduced = manifest;
    std::erase_if(reduced.evaluators, [&](const ModelId& id) { return drop_evaluators.count(id); });
    std::erase_if(reduced.generators, [&](const ModelId& id) { return drop_generators.count(id); });
    if (reduced.generators.size() < 2 || reduced.evaluators.size() < 2)
        throw ValidationError("exclusion leaves a " + std::to_string(reduced.generators.size()) +
                              "x" + std::to_string(reduced.evaluators.size()) +
                              " matrix; need at least 2x2");

    std::vector<ScoreRecord> kept;
    kept.reserve(scores.size());
    for (const auto& r : scores)
        if (!drop_evaluators.count(r.evaluator) && !drop_generators.count(r.generator))
            kept.push_back(r);
    return standardize(build_phi(kept, reduced, setting, min_coverage));
}

std::vector<SubsetCount> submatrix_scan(const StandardizedMatrix& phi_tilde, int k) {
    std::vector<ModelId> models = shared_models(phi_tilde.generators, phi_tilde.evaluators);
    std::sort(models.begin(), models.end());
    const int m = static_cast<int>(models.size());
    if (m == 0) throw ValidationError("no model appears on both axes; nothing to scan");
    if (k < 1 || k > m)
        throw ValidationError("subset size " + std::to_string(k) + " out of range 1.." +
                              std::to_string(m));

    unsigned long long combos = 1;
    for (int i = 0; i < k; ++i) {
        combos = combos * static_cast<unsigned long long>(m - i) /
                 static_cast<unsigned long long>(i + 1);
        if (combos > 1000000ull)
            throw ValidationError("C(" + std::to_string(m) + "," + std::to_string(k) +
                                  ") exceeds the 1e6 enumeration guard");
    }

    std::vector<std::size_t> row_of(models.size()), col_of(models.size());
    for (std::size_t a = 0; a < models.size(); ++a) {
        row_of[a] = index_of(phi_tilde.generators, models[a]);
        col_of[a] = index_of(phi_tilde.evaluators, models[a]);
    }

    std::vector<SubsetCount> out;
    out.reserve(static_cast<std::size_t>(combos));
    std::vector<int> pick(k);
    for (int i = 0; i < k; ++i) pick[i] = i;
    while (true) {
        SubsetCount sc;
        sc.ids.reserve(k);
        for (int a : pick) sc.ids.push_back(models[a]);
        for (int a : pick)
            for (int b : pick)
                if (a != b && phi_tilde.at(row_of[a], col_of[b]) > 0.0) ++sc.positive_offdiag;
        out.push_back(std::move(sc));

        int pos = k - 1;
        while (pos >= 0 && pick[pos] == m - k + pos) --pos;
        if (pos < 0) break;
        ++pick[pos];
        for (int i = pos + 1; i < k; ++i) pick[i] = pick[i - 1] + 1;
    }

    std::stable_sort(out.begin(), out.end(), [](const SubsetCount& a, const SubsetCount& b) {
        if (a.positive_offdiag != b.positive_offdiag) return a.positive_offdiag > b.positive_offdiag;
        return a.ids < b.ids;
    });
    return out;
}

std::map<ModelId, double> settings_delta(const StandardizedMatrix& ref_based,
                                         const StandardizedMatrix& ref_free) {
    if (ref_based.generators != ref_free.generators ||
        ref_based.evaluators != ref_free.evaluators)
        throw ValidationError("settings_delta requires identical axes");
    const auto based = philautia_scores(ref_based);
    const auto free = philautia_scores(ref_free);
    std::map<ModelId, double> out;
    for (const auto& [id, diag] : based) out[id] = free.at(id) - diag;
    return out;
}

ScoreMatrix minmax_baseline(const ScoreMatrix& phi) {
    ScoreMatrix out = phi;
    for (std::size_t j = 0; j < phi.cols(); ++j) {
        double lo = phi.at(0, j), hi = phi.at(0, j);
        for (std::size_t i = 1; i < phi.rows(); ++i) {
            lo = std::min(lo, phi.at(i, j));
            hi = std::max(hi, phi.at(i, j));
        }
        if (lo == hi)
            throw DegeneracyError("min-max scaling undefined for constant column '" +
                                  phi.evaluators[j].value + "'");
        for (std::size_t i = 0; i < phi.rows(); ++i)
            out.at(i, j) = (phi.at(i, j) - lo) / (hi - lo);
    }
    return out;
}

std::string to_csv(const ScoreMatrix& m) {
    return matrix_csv(m.generators, m.evaluators, m.values);
}

std::string to_csv(const StandardizedMatrix& m) {
    return matrix_csv(m.generators, m.evaluators, m.values);
}

} // namespace philautia
