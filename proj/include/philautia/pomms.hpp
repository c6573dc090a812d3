#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "philautia/matrix.hpp"
#include "philautia/records.hpp"

namespace philautia {

// A fitted judge ensemble: weighted member scores plus intercept, clamped to
// [0,1] when clamp is set so the output is commensurable with raw scores.
struct EnsembleSpec {
    std::vector<ModelId> members; // selection order
    std::vector<double> weights;  // one per member
    double intercept = 0.0;
    double lambda = 0.0;
    double alpha = 0.0;
    bool clamp = true;

    // Throws ValidationError when a member score is absent.
    double predict(const std::map<ModelId, double>& member_scores) const;
};

json ensemble_to_json(const EnsembleSpec& spec);
EnsembleSpec ensemble_from_json(const json& j);
EnsembleSpec load_ensemble(const std::string& path);
void save_ensemble(const EnsembleSpec& spec, const std::string& path);

// One human-rated caption with per-evaluator scores as features.
struct SupervisedSample {
    std::string sample_id;
    std::map<ModelId, double> features;
    double target = 0.0;
};

struct SupervisedSplit {
    std::vector<SupervisedSample> train;
    std::vector<SupervisedSample> val;
    std::vector<SupervisedSample> test;
};

// samples.jsonl: {"sample_id", "features": {model: score}, "target",
// "split": "train"|"val"|"test"}. Sample ids must be unique across splits.
SupervisedSplit load_samples(const std::string& path);
void save_samples(const SupervisedSplit& split, const std::string& path);

struct HyperGrid {
    std::vector<double> lambdas;
    std::vector<double> alphas;

    // lambda: 7 points log-spaced over [1e-4, 10]; alpha: {0,.25,.5,.75,1}.
    static HyperGrid defaults();
};

// One accepted forward-selection step.
struct SfsStep {
    ModelId added;
    double val_tau_b = 0.0;
    double lambda = 0.0;
    double alpha = 0.0;
    // best validation tau_b each candidate reached this step; candidates
    // whose predictions were all tied for every grid point are omitted
    std::map<ModelId, double> candidate_scores;
};

struct SfsTrace {
    std::vector<SfsStep> steps;
    std::string stop_reason; // "no_improvement", "max_size", "exhausted_candidates"
};

// Greedy forward selection. Each step refits every remaining candidate over
// the hyper grid on train, scores validation tau_b, and keeps the best
// strictly-improving addition; ties break lexicographically (candidates are
// visited in lexicographic order, grid points lambda-major, first win kept).
std::pair<EnsembleSpec, SfsTrace> sfs_select(const std::vector<ModelId>& candidates,
                                             const SupervisedSplit& split,
                                             const HyperGrid& grid, int max_size);

struct EnsembleEvaluation {
    double tau_b = 0.0;
    double tau_c = 0.0;
};

// Kendall scores of spec predictions against human targets on the test split.
EnsembleEvaluation evaluate_ensemble(const EnsembleSpec& spec, const SupervisedSplit& split);

// Name of the appended ensemble column in augmented matrices.
inline const char* kEnsembleColumnId = "POMMS";

// Scores every (generator, image) with the ensemble, appends the mean as one
// extra evaluator column, and re-runs the two-pass standardization. Every
// member must be present in the score set; the ensemble column obeys the same
// coverage floor as the base matrix.
StandardizedMatrix augment_phi_with_ensemble(const std::vector<ScoreRecord>& scores,
                                             const RunManifest& manifest, Setting setting,
                                             const EnsembleSpec& spec,
                                             double min_coverage = 0.95);

// Mean of the ensemble column over member rows: the ensemble has no generator
// row, so its philautia-like score is aggregated from its members.
double pomms_phi_score(const StandardizedMatrix& augmented, const EnsembleSpec& spec);

} // namespace philautia
