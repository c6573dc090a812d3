#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "philautia/records.hpp"

namespace philautia {

// Mean score matrix. Rows are generators (i), columns evaluators (j),
// values[i][j] = mean score evaluator j gave generator i's captions.
struct ScoreMatrix {
    std::vector<ModelId> generators;
    std::vector<ModelId> evaluators;
    std::vector<double> values; // row-major, rows() * cols()
    std::vector<int> counts;    // per-cell sample sizes, same layout
    Setting setting = Setting::ReferenceBased;

    std::size_t rows() const { return generators.size(); }
    std::size_t cols() const { return evaluators.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
    int count_at(std::size_t i, std::size_t j) const { return counts[i * cols() + j]; }

    bool operator==(const ScoreMatrix&) const = default;
};

// Two-pass standardized matrix. Non-degenerate rows have mean 0 and
// population std 1; zero-variance rows/columns are all-zero and flagged.
struct StandardizedMatrix {
    std::vector<ModelId> generators;
    std::vector<ModelId> evaluators;
    std::vector<double> values;
    std::vector<std::size_t> degenerate_rows;    // indices into generators
    std::vector<std::size_t> degenerate_columns; // indices into evaluators
    Setting setting = Setting::ReferenceBased;

    std::size_t rows() const { return generators.size(); }
    std::size_t cols() const { return evaluators.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }

    bool operator==(const StandardizedMatrix&) const = default;
};

// Per-model diagonal z-score against its evaluator column.
// `defined` is false when the column is degenerate (zero std).
struct DiagZScore {
    double diag = 0.0;
    double col_mean = 0.0;
    double col_std = 0.0;
    double z = 0.0;
    bool defined = false;

    bool operator==(const DiagZScore&) const = default;
};

// z-scores a vector with the population std. Zero-variance input maps to all
// zeros and reports degenerate = true.
std::pair<std::vector<double>, bool> standardize_vector(const std::vector<double>& v);

// Builds the mean matrix for one setting. Every (generator, evaluator) cell
// must reach the coverage floor (present / |images|); duplicates and orphan
// records are rejected. Cell means sum in image_id order, so record order
// never changes the result.
ScoreMatrix build_phi(const std::vector<ScoreRecord>& scores, const RunManifest& manifest,
                      Setting setting, double min_coverage = 0.95);

// Column-wise z-scoring first, then row-wise z-scoring of the result.
// Requires at least 2 rows and 2 columns.
StandardizedMatrix standardize(const ScoreMatrix& phi);

// Diagonal entries for every model present on both axes. Throws when the
// axes share no model.
std::map<ModelId, double> philautia_scores(const StandardizedMatrix& phi_tilde);

// Single-model lookup; a model on only one axis has no diagonal entry.
double philautia_score(const StandardizedMatrix& phi_tilde, const ModelId& model);

// For each shared model j: mean/std of column j and the diagonal's z-score.
std::map<ModelId, DiagZScore> diagonal_zscores(const StandardizedMatrix& phi_tilde);

// Rebuilds Phi on the reduced axes from raw scores and re-standardizes.
// Unknown ids in the drop sets and reductions below 2x2 are errors.
StandardizedMatrix exclude_models(const std::vector<ScoreRecord>& scores,
                                  const RunManifest& manifest, Setting setting,
                                  const std::set<ModelId>& drop_evaluators,
                                  const std::set<ModelId>& drop_generators,
                                  double min_coverage = 0.95);

// One k-subset of shared models and the number of strictly positive
// off-diagonal entries in its principal submatrix.
struct SubsetCount {
    std::vector<ModelId> ids; // sorted lexicographically
    int positive_offdiag = 0;
};

// All k-subsets of the models shared by both axes, sorted by count
// descending, ties broken lexicographically by member ids.
// Guards C(M,k) <= 1e6.
std::vector<SubsetCount> submatrix_scan(const StandardizedMatrix& phi_tilde, int k);

// Per shared model: diagonal under ref-free minus diagonal under ref-based.
// Requires identical axes.
std::map<ModelId, double> settings_delta(const StandardizedMatrix& ref_based,
                                         const StandardizedMatrix& ref_free);

// Per-column min-max scaling of Phi. The critiqued comparison baseline:
// every column ends up containing both 0 and 1. Constant columns are errors.
ScoreMatrix minmax_baseline(const ScoreMatrix& phi);

// CSV with model-id headers and 6-decimal fixed values. Byte-stable.
std::string to_csv(const ScoreMatrix& m);
std::string to_csv(const StandardizedMatrix& m);

} // namespace philautia
