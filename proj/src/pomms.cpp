#include "philautia/pomms.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "philautia/elastic_net.hpp"
#include "philautia/kendall.hpp"

namespace philautia {

namespace {

constexpr double kNoTau = -std::numeric_limits<double>::infinity();

bool all_tied(const std::vector<double>& v) { return distinct_values(v) < 2; }

std::vector<double> targets_of(const std::vector<SupervisedSample>& samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.target);
    return out;
}

double feature_of(const SupervisedSample& s, const ModelId& m) {
    auto it = s.features.find(m);
    if (it == s.features.end())
        throw ValidationError("sample '" + s.sample_id + "' lacks a score from '" + m.value + "'");
    return it->second;
}

std::vector<std::vector<double>> feature_rows(const std::vector<SupervisedSample>& samples,
                                              const std::vector<ModelId>& members) {
    std::vector<std::vector<double>> X(samples.size(), std::vector<double>(members.size()));
    for (std::size_t i = 0; i < samples.size(); ++i)
        for (std::size_t j = 0; j < members.size(); ++j)
            X[i][j] = feature_of(samples[i], members[j]);
    return X;
}

double linear_predict(const std::vector<double>& row, const std::vector<double>& weights,
                      double intercept, bool clamp) {
    double acc = intercept;
    for (std::size_t j = 0; j < row.size(); ++j) acc += weights[j] * row[j];
    if (clamp) acc = std::clamp(acc, 0.0, 1.0);
    return acc;
}

void parse_samples_line(const json& j, const std::string& where, SupervisedSplit& split,
                        std::set<std::string>& seen_ids) {
    if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
    auto need = [&](const char* key) -> const json& {
        auto it = j.find(key);
        if (it == j.end())
            throw ValidationError(where + ": missing field '" + key + "'");
        return *it;
    };
    SupervisedSample s;
    const json& id = need("sample_id");
    if (!id.is_string()) throw ValidationError(where + ": 'sample_id' must be a string");
    s.sample_id = id.get<std::string>();
    if (!seen_ids.insert(s.sample_id).second)
        throw ValidationError(where + ": duplicate sample_id '" + s.sample_id + "'");
    const json& feats = need("features");
    if (!feats.is_object() || feats.empty())
        throw ValidationError(where + ": 'features' must be a non-empty object");
    for (auto it = feats.begin(); it != feats.end(); ++it) {
        if (!it.value().is_number() || !std::isfinite(it.value().get<double>()))
            throw ValidationError(where + ": feature '" + it.key() + "' must be a finite number");
        s.features[make_model_id(it.key())] = it.value().get<double>();
    }
    const json& target = need("target");
    if (!target.is_number() || !std::isfinite(target.get<double>()))
        throw ValidationError(where + ": 'target' must be a finite number");
    s.target = target.get<double>();
    const json& tag = need("split");
    if (!tag.is_string()) throw ValidationError(where + ": 'split' must be a string");
    const std::string name = tag.get<std::string>();
    if (name == "train") split.train.push_back(std::move(s));
    else if (name == "val") split.val.push_back(std::move(s));
    else if (name == "test") split.test.push_back(std::move(s));
    else throw ValidationError(where + ": unknown split '" + name + "'");
}

json sample_to_json(const SupervisedSample& s, const char* split_name) {
    json j = json::object();
    j["sample_id"] = s.sample_id;
    json feats = json::object();
    for (const auto& [m, v] : s.features) feats[m.value] = v;
    j["features"] = std::move(feats);
    j["target"] = s.target;
    j["split"] = split_name;
    return j;
}

} // namespace

double EnsembleSpec::predict(const std::map<ModelId, double>& member_scores) const {
    double acc = intercept;
    for (std::size_t j = 0; j < members.size(); ++j) {
        auto it = member_scores.find(members[j]);
        if (it == member_scores.end())
            throw ValidationError("missing score for ensemble member '" + members[j].value + "'");
        acc += weights[j] * it->second;
    }
    if (clamp) acc = std::clamp(acc, 0.0, 1.0);
    return acc;
}

json ensemble_to_json(const EnsembleSpec& spec) {
    json j = json::object();
    json members = json::array();
    for (const auto& m : spec.members) members.push_back(m.value);
    j["members"] = std::move(members);
    j["weights"] = spec.weights;
    j["intercept"] = spec.intercept;
    j["lambda"] = spec.lambda;
    j["alpha"] = spec.alpha;
    j["clamp"] = spec.clamp;
    return j;
}

EnsembleSpec ensemble_from_json(const json& j) {
    const std::string where = "ensemble";
    if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
    EnsembleSpec spec;
    auto need = [&](const char* key) -> const json& {
        auto it = j.find(key);
        if (it == j.end()) throw ValidationError(where + ": missing field '" + std::string(key) + "'");
        return *it;
    };
    const json& members = need("members");
    if (!members.is_array() || members.empty())
        throw ValidationError(where + ": 'members' must be a non-empty array");
    std::set<ModelId> seen;
    for (const auto& m : members) {
        if (!m.is_string()) throw ValidationError(where + ": members must be strings");
        ModelId id = make_model_id(m.get<std::string>());
        if (!seen.insert(id).second)
            throw ValidationError(where + ": duplicate member '" + id.value + "'");
        spec.members.push_back(std::move(id));
    }
    const json& weights = need("weights");
    if (!weights.is_array() || weights.size() != spec.members.size())
        throw ValidationError(where + ": 'weights' must match members in length");
    for (const auto& w : weights) {
        if (!w.is_number() || !std::isfinite(w.get<double>()))
            throw ValidationError(where + ": weights must be finite numbers");
        spec.weights.push_back(w.get<double>());
    }
    const json& intercept = need("intercept");
    if (!intercept.is_number()) throw ValidationError(where + ": 'intercept' must be a number");
    spec.intercept = intercept.get<double>();
    const json& lambda = need("lambda");
    if (!lambda.is_number() || lambda.get<double>() < 0.0)
        throw ValidationError(where + ": 'lambda' must be non-negative");
    spec.lambda = lambda.get<double>();
    const json& alpha = need("alpha");
    if (!alpha.is_number() || alpha.get<double>() < 0.0 || alpha.get<double>() > 1.0)
        throw ValidationError(where + ": 'alpha' must be in [0,1]");
    spec.alpha = alpha.get<double>();
    const json& clamp = need("clamp");
    if (!clamp.is_boolean()) throw ValidationError(where + ": 'clamp' must be a boolean");
    spec.clamp = clamp.get<bool>();
    return spec;
}

EnsembleSpec load_ensemble(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": malformed JSON (" + e.what() + ")");
    }
    return ensemble_from_json(j);
}

void save_ensemble(const EnsembleSpec& spec, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << ensemble_to_json(spec).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

SupervisedSplit load_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    SupervisedSplit split;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(where + ": malformed JSON (" + e.what() + ")");
        }
        parse_samples_line(j, where, split, seen_ids);
    }
    return split;
}

void save_samples(const SupervisedSplit& split, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& s : split.train) out << sample_to_json(s, "train").dump() << '\n';
    for (const auto& s : split.val) out << sample_to_json(s, "val").dump() << '\n';
    for (const auto& s : split.test) out << sample_to_json(s, "test").dump() << '\n';
    if (!out) throw IoError("write failed: " + path);
}

HyperGrid HyperGrid::defaults() {
    HyperGrid g;
    for (int k = 0; k <= 6; ++k) g.lambdas.push_back(std::pow(10.0, -4.0 + 5.0 * k / 6.0));
    g.alphas = {0.0, 0.25, 0.5, 0.75, 1.0};
    return g;
}

std::pair<EnsembleSpec, SfsTrace> sfs_select(const std::vector<ModelId>& candidates,
                                             const SupervisedSplit& split,
                                             const HyperGrid& grid, int max_size) {
    if (candidates.empty()) throw ValidationError("sfs needs at least one candidate");
    if (max_size < 1) throw ValidationError("max_size must be at least 1");
    if (grid.lambdas.empty() || grid.alphas.empty())
        throw ValidationError("hyper grid must be non-empty");
    if (split.train.empty() || split.val.empty())
        throw ValidationError("sfs needs non-empty train and val splits");

    std::vector<ModelId> remaining(candidates);
    std::sort(remaining.begin(), remaining.end());
    if (std::adjacent_find(remaining.begin(), remaining.end()) != remaining.end())
        throw ValidationError("duplicate candidate id");
    for (const auto& c : remaining) {
        for (const auto& s : split.train) feature_of(s, c);
        for (const auto& s : split.val) feature_of(s, c);
    }

    const std::vector<double> y_train = targets_of(split.train);
    const std::vector<double> y_val = targets_of(split.val);
    if (all_tied(y_val))
        throw DegeneracyError("validation targets are all tied; tau_b undefined");

    EnsembleSpec best_spec;
    SfsTrace trace;
    std::vector<ModelId> selected;
    double best_tau = kNoTau;

    while (static_cast<int>(selected.size()) < max_size && !remaining.empty()) {
        SfsStep step;
        double step_tau = kNoTau;
        std::size_t step_pick = remaining.size();
        EnsembleSpec step_spec;

        for (std::size_t ci = 0; ci < remaining.size(); ++ci) {
            std::vector<ModelId> members = selected;
            members.push_back(remaining[ci]);
            const auto X_train = feature_rows(split.train, members);
            const auto X_val = feature_rows(split.val, members);

            double cand_tau = kNoTau;
            EnsembleSpec cand_spec;
            for (double lambda : grid.lambdas) {
                for (double alpha : grid.alphas) {
                    const ElasticNetResult fit =
                        fit_elastic_net(X_train, y_train, lambda, alpha);
                    std::vector<double> preds(X_val.size());
                    for (std::size_t i = 0; i < X_val.size(); ++i)
                        preds[i] = linear_predict(X_val[i], fit.weights, fit.intercept, true);
                    if (all_tied(preds)) continue; // tau undefined for this grid point
                    const double tau = kendall_tau_b(preds, y_val);
                    if (tau > cand_tau) {
                        cand_tau = tau;
                        cand_spec.members = members;
                        cand_spec.weights = fit.weights;
                        cand_spec.intercept = fit.intercept;
                        cand_spec.lambda = lambda;
                        cand_spec.alpha = alpha;
                        cand_spec.clamp = true;
                    }
                }
            }
            if (cand_tau == kNoTau) continue; // every grid point degenerate
            step.candidate_scores[remaining[ci]] = cand_tau;
            if (cand_tau > step_tau) {
                step_tau = cand_tau;
                step_pick = ci;
                step_spec = cand_spec;
            }
        }

        if (step_pick == remaining.size()) {
            if (selected.empty())
                throw DegeneracyError(
                    "every candidate produced all-tied validation predictions");
            trace.stop_reason = "no_improvement";
            return {best_spec, trace};
        }
        if (step_tau <= best_tau) {
            trace.stop_reason = "no_improvement";
            return {best_spec, trace};
        }

        step.added = remaining[step_pick];
        step.val_tau_b = step_tau;
        step.lambda = step_spec.lambda;
        step.alpha = step_spec.alpha;
        trace.steps.push_back(std::move(step));

        selected.push_back(remaining[step_pick]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(step_pick));
        best_tau = step_tau;
        best_spec = std::move(step_spec);
    }

    trace.stop_reason =
        static_cast<int>(selected.size()) == max_size ? "max_size" : "exhausted_candidates";
    return {best_spec, trace};
}

EnsembleEvaluation evaluate_ensemble(const EnsembleSpec& spec, const SupervisedSplit& split) {
    if (split.test.empty()) throw ValidationError("empty test split");
    std::vector<double> preds, targets;
    preds.reserve(split.test.size());
    targets.reserve(split.test.size());
    for (const auto& s : split.test) {
        preds.push_back(spec.predict(s.features));
        targets.push_back(s.target);
    }
    if (all_tied(targets)) throw DegeneracyError("test targets are all tied; tau undefined");
    EnsembleEvaluation ev;
    ev.tau_b = kendall_tau_b(preds, targets);
    ev.tau_c = kendall_tau_c(preds, targets);
    return ev;
}

StandardizedMatrix augment_phi_with_ensemble(const std::vector<ScoreRecord>& scores,
                                             const RunManifest& manifest, Setting setting,
                                             const EnsembleSpec& spec, double min_coverage) {
    const ScoreMatrix phi = build_phi(scores, manifest, setting, min_coverage);
    const ModelId ensemble_id{kEnsembleColumnId};
    for (const auto& g : phi.generators)
        if (g == ensemble_id)
            throw ValidationError("generator id collides with the ensemble column name");
    for (const auto& e : phi.evaluators)
        if (e == ensemble_id)
            throw ValidationError("evaluator id collides with the ensemble column name");

    // (generator, image) -> member -> score, for the requested setting.
    std::map<std::pair<ModelId, std::string>, std::map<ModelId, double>> by_cell;
    const std::set<ModelId> member_set(spec.members.begin(), spec.members.end());
    std::set<ModelId> members_seen;
    for (const auto& r : scores) {
        if (r.setting != setting || !member_set.count(r.evaluator)) continue;
        by_cell[{r.generator, r.image_id}][r.evaluator] = r.score;
        members_seen.insert(r.evaluator);
    }
    for (const auto& m : spec.members)
        if (!members_seen.count(m))
            throw ValidationError("ensemble member '" + m.value + "' has no scores in the dataset");

    ScoreMatrix augmented;
    augmented.generators = phi.generators;
    augmented.evaluators = phi.evaluators;
    augmented.evaluators.push_back(ensemble_id);
    augmented.setting = phi.setting;
    const std::size_t cols = augmented.evaluators.size();
    augmented.values.assign(phi.rows() * cols, 0.0);
    augmented.counts.assign(phi.rows() * cols, 0);
    for (std::size_t i = 0; i < phi.rows(); ++i)
        for (std::size_t j = 0; j < phi.cols(); ++j) {
            augmented.values[i * cols + j] = phi.at(i, j);
            augmented.counts[i * cols + j] = phi.count_at(i, j);
        }

    const auto expected = static_cast<double>(manifest.images.size());
    for (std::size_t i = 0; i < phi.rows(); ++i) {
        // images sorted by id so summation order is fixed
        std::vector<std::pair<std::string, double>> preds;
        for (const auto& img : manifest.images) {
            auto cell = by_cell.find({phi.generators[i], img.id});
            if (cell == by_cell.end() || cell->second.size() != spec.members.size()) continue;
            preds.push_back({img.id, spec.predict(cell->second)});
        }
        if (preds.empty() || static_cast<double>(preds.size()) < min_coverage * expected)
            throw ValidationError("ensemble column coverage below floor for generator '" +
                                  phi.generators[i].value + "': " + std::to_string(preds.size()) +
                                  "/" + std::to_string(manifest.images.size()));
        std::sort(preds.begin(), preds.end());
        double acc = 0.0;
        for (const auto& [img, v] : preds) acc += v;
        augmented.values[i * cols + (cols - 1)] = acc / static_cast<double>(preds.size());
        augmented.counts[i * cols + (cols - 1)] = static_cast<int>(preds.size());
    }
    return standardize(augmented);
}

double pomms_phi_score(const StandardizedMatrix& augmented, const EnsembleSpec& spec) {
    const ModelId ensemble_id{kEnsembleColumnId};
    const auto col_it =
        std::find(augmented.evaluators.begin(), augmented.evaluators.end(), ensemble_id);
    if (col_it == augmented.evaluators.end())
        throw ValidationError("matrix has no ensemble column");
    const auto col = static_cast<std::size_t>(col_it - augmented.evaluators.begin());

    const std::set<ModelId> member_set(spec.members.begin(), spec.members.end());
    double acc = 0.0;
    int used = 0;
    for (std::size_t i = 0; i < augmented.rows(); ++i) {
        if (!member_set.count(augmented.generators[i])) continue;
        acc += augmented.at(i, col);
        ++used;
    }
    if (used == 0) throw ValidationError("no ensemble member appears as a generator");
    return acc / used;
}

} // namespace philautia
