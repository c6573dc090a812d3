#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "philautia/matrix.hpp"
#include "philautia/records.hpp"

namespace philautia {

// Synthetic evaluator panel. Evaluator j scores generator i's caption k as
//   clip(mu_j + sigma_j * (q_i + B[i][j]) + eps, 0, 1),  eps ~ Normal(0, s)
// drawn independently per (i, j, k) from a per-(i,j) substream, so output
// never depends on evaluation order.
struct SimConfig {
    int M = 0; // generators == evaluators
    int N = 0; // images
    std::vector<double> quality;          // q, per generator
    std::vector<double> evaluator_offset; // mu, per evaluator
    std::vector<double> evaluator_scale;  // sigma, per evaluator, > 0
    std::vector<double> bias;             // row-major MxM; [i*M+j] = j's bias toward i
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    std::vector<ModelId> model_ids; // optional; default sim-01..sim-<M>
    Setting setting = Setting::ReferenceFree;

    double bias_at(int i, int j) const { return bias[static_cast<std::size_t>(i) * M + j]; }
};

void check_sim_config(const SimConfig& config);

json sim_config_to_json(const SimConfig& config);
SimConfig sim_config_from_json(const json& j);
SimConfig load_sim_config(const std::string& path);
void save_sim_config(const SimConfig& config, const std::string& path);

// The panel's model ids: config.model_ids, or zero-padded defaults.
std::vector<ModelId> sim_model_ids(const SimConfig& config);

// Manifest matching simulate_scores output: same models on both axes,
// images img-0..img-<N-1>, the config's setting.
RunManifest make_manifest(const SimConfig& config);

// M*M*N records, deterministic given the seed. raw_score = round(score*100)
// and score is re-derived as raw/100. Errors when more than half of all
// draws had to be clipped into [0,1].
std::vector<ScoreRecord> simulate_scores(const SimConfig& config);

// How well the pipeline recovered the injected bias.
struct RecoveryReport {
    // fraction of generators where sign(diag) matches sign of the row-centered
    // injected self-bias B[i][i] - rowmean(B[i])
    double diag_sign_accuracy = 0.0;
    // tau_b between the diagonal and diag(B); 0 with defined=false when
    // either vector is all tied
    double diag_rank_correlation = 0.0;
    bool rank_correlation_defined = false;
};

RecoveryReport recovery_report(const StandardizedMatrix& phi_tilde, const SimConfig& config);

} // namespace philautia
