#include "philautia/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "philautia/kendall.hpp"

namespace philautia {

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

// Substream seed for cell (i, j); stable under any evaluation schedule.
std::uint64_t stream_seed(std::uint64_t seed, int i, int j) {
    std::uint64_t s = seed + 0x9E3779B97F4A7C15ull;
    s = mix64(s ^ mix64(static_cast<std::uint64_t>(i) + 1));
    s = mix64(s ^ mix64(static_cast<std::uint64_t>(j) + 0x100000001ull));
    return s;
}

// Box-Muller on engine-derived uniforms; avoids the implementation-defined
// std::normal_distribution so streams are stable across standard libraries.
double standard_normal(std::mt19937_64& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1p-53; // (0,1]
    const double u2 = static_cast<double>(rng() >> 11) * 0x1p-53;        // [0,1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError("sim config: " + what);
}

std::vector<double> number_list(const json& j, const char* key, std::size_t want) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_array())
        throw ValidationError(std::string("sim config: '") + key + "' must be an array");
    std::vector<double> out;
    for (const auto& e : *it) {
        if (!e.is_number())
            throw ValidationError(std::string("sim config: '") + key + "' entries must be numbers");
        out.push_back(e.get<double>());
    }
    if (out.size() != want)
        throw ValidationError(std::string("sim config: '") + key + "' must have " +
                              std::to_string(want) + " entries");
    return out;
}

} // namespace

void check_sim_config(const SimConfig& config) {
    require(config.M >= 2, "M must be at least 2");
    require(config.N >= 1, "N must be at least 1");
    const auto m = static_cast<std::size_t>(config.M);
    require(config.quality.size() == m, "quality must have M entries");
    require(config.evaluator_offset.size() == m, "evaluator_offset must have M entries");
    require(config.evaluator_scale.size() == m, "evaluator_scale must have M entries");
    require(config.bias.size() == m * m, "bias must be MxM");
    require(config.noise_std >= 0.0, "noise_std must be non-negative");
    for (double v : config.quality) require(std::isfinite(v), "quality must be finite");
    for (double v : config.evaluator_offset) require(std::isfinite(v), "offsets must be finite");
    for (double v : config.evaluator_scale)
        require(std::isfinite(v) && v > 0.0, "scales must be positive");
    for (double v : config.bias) require(std::isfinite(v), "bias must be finite");
    require(std::isfinite(config.noise_std), "noise_std must be finite");
    if (!config.model_ids.empty()) {
        require(config.model_ids.size() == m, "model_ids must have M entries");
        std::set<ModelId> seen;
        for (const auto& id : config.model_ids) {
            make_model_id(id.value);
            require(seen.insert(id).second, "duplicate model id '" + id.value + "'");
        }
    }
}

std::vector<ModelId> sim_model_ids(const SimConfig& config) {
    if (!config.model_ids.empty()) return config.model_ids;
    const int width = static_cast<int>(std::to_string(config.M).size());
    std::vector<ModelId> ids;
    for (int i = 1; i <= config.M; ++i) {
        std::string num = std::to_string(i);
        ids.push_back(ModelId("sim-" + std::string(width - int(num.size()), '0') + num));
    }
    return ids;
}

RunManifest make_manifest(const SimConfig& config) {
    check_sim_config(config);
    RunManifest m;
    m.generators = sim_model_ids(config);
    m.evaluators = m.generators;
    for (int k = 0; k < config.N; ++k) m.images.push_back({"img-" + std::to_string(k), ""});
    m.settings = {config.setting};
    return m;
}

std::vector<ScoreRecord> simulate_scores(const SimConfig& config) {
    check_sim_config(config);
    const auto ids = sim_model_ids(config);
    std::vector<ScoreRecord> out;
    out.reserve(static_cast<std::size_t>(config.M) * config.M * config.N);
    long long clipped = 0;
    for (int i = 0; i < config.M; ++i)
        for (int j = 0; j < config.M; ++j) {
            std::mt19937_64 rng(stream_seed(config.seed, i, j));
            const double base = config.evaluator_offset[std::size_t(j)] +
                                config.evaluator_scale[std::size_t(j)] *
                                    (config.quality[std::size_t(i)] + config.bias_at(i, j));
            for (int k = 0; k < config.N; ++k) {
                double value = base;
                if (config.noise_std > 0.0) value += config.noise_std * standard_normal(rng);
                if (value < 0.0 || value > 1.0) {
                    ++clipped;
                    value = std::clamp(value, 0.0, 1.0);
                }
                ScoreRecord r;
                r.image_id = "img-" + std::to_string(k);
                r.generator = ids[std::size_t(i)];
                r.evaluator = ids[std::size_t(j)];
                r.setting = config.setting;
                r.raw_score = static_cast<int>(std::lround(value * 100.0));
                r.score = r.raw_score / 100.0;
                out.push_back(std::move(r));
            }
        }
    const auto total = static_cast<long long>(config.M) * config.M * config.N;
    if (2 * clipped > total)
        throw ValidationError("sim config saturates: " + std::to_string(clipped) + " of " +
                              std::to_string(total) + " scores clipped into [0,1]");
    return out;
}

RecoveryReport recovery_report(const StandardizedMatrix& phi_tilde, const SimConfig& config) {
    check_sim_config(config);
    const auto ids = sim_model_ids(config);
    std::vector<double> diag(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto gi = std::find(phi_tilde.generators.begin(), phi_tilde.generators.end(), ids[i]);
        const auto ej = std::find(phi_tilde.evaluators.begin(), phi_tilde.evaluators.end(), ids[i]);
        if (gi == phi_tilde.generators.end() || ej == phi_tilde.evaluators.end())
            throw ValidationError("matrix lacks simulated model '" + ids[i].value + "'");
        diag[i] = phi_tilde.at(std::size_t(gi - phi_tilde.generators.begin()),
                               std::size_t(ej - phi_tilde.evaluators.begin()));
    }

    RecoveryReport report;
    int hits = 0;
    std::vector<double> injected(ids.size());
    for (int i = 0; i < config.M; ++i) {
        double row_mean = 0.0;
        for (int j = 0; j < config.M; ++j) row_mean += config.bias_at(i, j);
        row_mean /= config.M;
        const bool want_positive = config.bias_at(i, i) - row_mean > 0.0;
        const bool got_positive = diag[std::size_t(i)] > 0.0;
        if (want_positive == got_positive) ++hits;
        injected[std::size_t(i)] = config.bias_at(i, i);
    }
    report.diag_sign_accuracy = static_cast<double>(hits) / config.M;

    if (distinct_values(diag) >= 2 && distinct_values(injected) >= 2) {
        report.diag_rank_correlation = kendall_tau_b(diag, injected);
        report.rank_correlation_defined = true;
    }
    return report;
}

json sim_config_to_json(const SimConfig& config) {
    json j = json::object();
    j["m"] = config.M;
    j["n"] = config.N;
    j["quality"] = config.quality;
    j["evaluator_offset"] = config.evaluator_offset;
    j["evaluator_scale"] = config.evaluator_scale;
    json rows = json::array();
    for (int i = 0; i < config.M; ++i) {
        json row = json::array();
        for (int k = 0; k < config.M; ++k) row.push_back(config.bias_at(i, k));
        rows.push_back(std::move(row));
    }
    j["bias"] = std::move(rows);
    j["noise_std"] = config.noise_std;
    j["seed"] = config.seed;
    if (!config.model_ids.empty()) {
        json ids = json::array();
        for (const auto& id : config.model_ids) ids.push_back(id.value);
        j["model_ids"] = std::move(ids);
    }
    j["setting"] = to_string(config.setting);
    return j;
}

SimConfig sim_config_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("sim config: expected a JSON object");
    SimConfig config;
    auto need_int = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_number_integer())
            throw ValidationError(std::string("sim config: '") + key + "' must be an integer");
        return it->get<long long>();
    };
    config.M = static_cast<int>(need_int("m"));
    config.N = static_cast<int>(need_int("n"));
    if (config.M < 2) throw ValidationError("sim config: M must be at least 2");
    const auto m = static_cast<std::size_t>(config.M);
    config.quality = number_list(j, "quality", m);
    config.evaluator_offset = number_list(j, "evaluator_offset", m);
    config.evaluator_scale = number_list(j, "evaluator_scale", m);
    auto bias_it = j.find("bias");
    if (bias_it == j.end() || !bias_it->is_array() || bias_it->size() != m)
        throw ValidationError("sim config: 'bias' must be an MxM array of arrays");
    for (const auto& row : *bias_it) {
        if (!row.is_array() || row.size() != m)
            throw ValidationError("sim config: 'bias' must be an MxM array of arrays");
        for (const auto& e : row) {
            if (!e.is_number()) throw ValidationError("sim config: bias entries must be numbers");
            config.bias.push_back(e.get<double>());
        }
    }
    auto noise_it = j.find("noise_std");
    if (noise_it == j.end() || !noise_it->is_number())
        throw ValidationError("sim config: 'noise_std' must be a number");
    config.noise_std = noise_it->get<double>();
    auto seed_it = j.find("seed");
    if (seed_it == j.end() || !seed_it->is_number_integer())
        throw ValidationError("sim config: 'seed' must be an integer");
    config.seed = seed_it->get<std::uint64_t>();
    if (auto ids_it = j.find("model_ids"); ids_it != j.end()) {
        if (!ids_it->is_array())
            throw ValidationError("sim config: 'model_ids' must be an array");
        for (const auto& e : *ids_it) {
            if (!e.is_string())
                throw ValidationError("sim config: model ids must be strings");
            config.model_ids.push_back(make_model_id(e.get<std::string>()));
        }
    }
    if (auto s_it = j.find("setting"); s_it != j.end()) {
        if (!s_it->is_string()) throw ValidationError("sim config: 'setting' must be a string");
        config.setting = setting_from_string(s_it->get<std::string>());
    }
    check_sim_config(config);
    return config;
}

SimConfig load_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": malformed JSON (" + e.what() + ")");
    }
    return sim_config_from_json(j);
}

void save_sim_config(const SimConfig& config, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << sim_config_to_json(config).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

} // namespace philautia
