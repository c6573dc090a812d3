// Command-line driver. One verb per pipeline operation so a full audit is
// reproducible as a shell script. Exit codes: 0 success, 1 validation or
// parse error, 2 I/O error, 3 convergence or degeneracy error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "philautia/collector.hpp"
#include "philautia/errors.hpp"
#include "philautia/heatmap.hpp"
#include "philautia/kendall.hpp"
#include "philautia/matrix.hpp"
#include "philautia/pomms.hpp"
#include "philautia/prompts.hpp"
#include "philautia/records.hpp"
#include "philautia/report.hpp"
#include "philautia/simulator.hpp"

namespace {

using namespace philautia;
namespace fs = std::filesystem;

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s(buf);
    return s == "-0.00" ? "0.00" : s;
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    std::string s(buf);
    return s == "-0.000000" ? "0.000000" : s;
}

std::size_t write_text(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.flush();
    if (!out) throw IoError("write to " + path + " failed");
    return bytes.size();
}

void emit_or_print(const std::string& csv, const std::string& out) {
    if (out.empty()) {
        std::cout << csv;
        return;
    }
    const std::size_t n = write_text(out, csv);
    std::cout << "wrote " << out << " (" << n << " bytes)\n";
}

json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

// Prompt overrides file: a JSON object whose keys mirror the bundle fields.
// Absent keys keep the built-in template.
PromptBundle load_bundle(const std::string& path) {
    PromptBundle bundle = default_prompt_bundle();
    if (path.empty()) return bundle;
    const json j = load_json_file(path);
    if (!j.is_object()) throw ValidationError(path + ": expected a JSON object of prompt templates");
    auto pick = [&](const char* key, std::string& slot) {
        if (!j.contains(key)) return;
        if (!j[key].is_string()) throw ValidationError(path + ": " + key + " must be a string");
        slot = j[key].get<std::string>();
    };
    pick("generation_prompt", bundle.generation_prompt);
    pick("eval_prompt_ref_based", bundle.eval_prompt_ref_based);
    pick("eval_prompt_ref_free", bundle.eval_prompt_ref_free);
    check_bundle(bundle);
    return bundle;
}

struct CommonInputs {
    std::string scores;
    std::string manifest;
    std::string setting = "ref-based";
    double min_coverage = 0.95;
};

void add_common(CLI::App* sub, CommonInputs& in, bool with_setting = true) {
    sub->add_option("--scores", in.scores, "score records JSONL")->required();
    sub->add_option("--manifest", in.manifest, "run manifest JSON")->required();
    if (with_setting)
        sub->add_option("--setting", in.setting, "evaluation setting")
            ->check(CLI::IsMember({"ref-based", "ref-free"}))
            ->required();
    sub->add_option("--min-coverage", in.min_coverage, "per-cell coverage floor, 0..1");
}

ScoreMatrix phi_from(const CommonInputs& in) {
    const RunManifest manifest = load_manifest(in.manifest);
    const auto scores = load_records<ScoreRecord>(in.scores);
    return build_phi(scores, manifest, setting_from_string(in.setting), in.min_coverage);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"audits generative judges for self-preference and trains mitigation ensembles"};
    app.require_subcommand(1);

    // --- validate -------------------------------------------------------
    CommonInputs val_in;
    auto* validate = app.add_subcommand("validate", "check a score set against its manifest");
    add_common(validate, val_in, false);
    validate->callback([&] {
        const RunManifest manifest = load_manifest(val_in.manifest);
        check_manifest(manifest);
        const auto scores = load_records<ScoreRecord>(val_in.scores);
        const CoverageReport report = validate_dataset(manifest, scores);
        std::cout << "manifest: " << manifest.generators.size() << " generators, "
                  << manifest.evaluators.size() << " evaluators, " << manifest.images.size()
                  << " images, " << manifest.settings.size() << " settings\n";
        std::cout << "records: " << report.total_valid << " valid\n";
        for (const auto& d : report.duplicates) std::cout << "duplicate: " << d << "\n";
        for (const auto& o : report.orphans) std::cout << "orphan: " << o << "\n";
        std::size_t low = 0;
        for (const auto& cell : report.cells) {
            if (cell.fraction() >= val_in.min_coverage) continue;
            ++low;
            std::cout << "low coverage: " << cell.generator.value << " x " << cell.evaluator.value
                      << " (" << to_string(cell.setting) << "): " << cell.present << "/"
                      << cell.expected << "\n";
        }
        if (!report.ok() || low > 0)
            throw ValidationError("dataset failed validation: " +
                                  std::to_string(report.duplicates.size()) + " duplicates, " +
                                  std::to_string(report.orphans.size()) + " orphans, " +
                                  std::to_string(low) + " low-coverage cells");
        std::cout << "ok\n";
    });

    // --- collect ----------------------------------------------------------
    struct {
        std::string manifest;
        std::string endpoints;
        std::string prompts;
        std::string captions;
        std::string captions_out;
        std::string out;
        bool serial = false;
    } col;
    auto* collect = app.add_subcommand("collect", "gather captions and scores from endpoints");
    collect->add_option("--manifest", col.manifest, "run manifest JSON")->required();
    collect->add_option("--endpoints", col.endpoints, "endpoint config JSON")->required();
    collect->add_option("--prompts", col.prompts, "prompt template overrides JSON");
    collect->add_option("--captions", col.captions, "existing caption records JSONL");
    collect->add_option("--captions-out", col.captions_out, "caption journal to collect into");
    collect->add_option("--out", col.out, "score journal to collect into");
    collect->add_flag("--serial", col.serial, "one request at a time in canonical order");
    collect->callback([&] {
        if (!col.captions.empty() && !col.captions_out.empty())
            throw ValidationError("pass --captions or --captions-out, not both");
        if (col.captions.empty() && col.captions_out.empty())
            throw ValidationError("collect needs --captions (existing) or --captions-out (journal)");
        const RunManifest manifest = load_manifest(col.manifest);
        const EndpointMap endpoints = load_endpoints(col.endpoints);
        const PromptBundle bundle = load_bundle(col.prompts);
        const CollectOptions options{col.serial};

        std::vector<CaptionRecord> captions;
        if (!col.captions_out.empty()) {
            captions = collect_captions(manifest, endpoints, bundle, col.captions_out, options);
            std::cout << "captions: " << captions.size() << " collected in " << col.captions_out
                      << "\n";
        } else {
            captions = load_records<CaptionRecord>(col.captions);
            std::cout << "captions: " << captions.size() << " loaded from " << col.captions << "\n";
        }
        if (col.out.empty()) return;
        const auto scores = collect_scores(manifest, endpoints, bundle, captions, col.out, options);
        std::cout << "scores: " << scores.size() << " collected in " << col.out << "\n";
    });

    // --- phi / standardize ------------------------------------------------
    CommonInputs phi_in;
    std::string phi_out;
    auto* phi_cmd = app.add_subcommand("phi", "build the mean score matrix as CSV");
    add_common(phi_cmd, phi_in);
    phi_cmd->add_option("--out", phi_out, "output CSV path (default: stdout)");
    phi_cmd->callback([&] { emit_or_print(to_csv(phi_from(phi_in)), phi_out); });

    CommonInputs std_in;
    std::string std_out;
    auto* std_cmd = app.add_subcommand("standardize", "build the standardized matrix as CSV");
    add_common(std_cmd, std_in);
    std_cmd->add_option("--out", std_out, "output CSV path (default: stdout)");
    std_cmd->callback([&] { emit_or_print(to_csv(standardize(phi_from(std_in))), std_out); });

    // --- audit --------------------------------------------------------------
    CommonInputs audit_in;
    std::string audit_dir;
    auto* audit = app.add_subcommand("audit", "full per-setting audit into a directory");
    add_common(audit, audit_in);
    audit->add_option("--out-dir", audit_dir, "directory receiving all artifacts")->required();
    audit->callback([&] {
        const RunManifest manifest = load_manifest(audit_in.manifest);
        const auto scores = load_records<ScoreRecord>(audit_in.scores);
        const AuditReport report = build_audit_report(
            scores, manifest, setting_from_string(audit_in.setting), audit_in.min_coverage);
        std::error_code ec;
        fs::create_directories(audit_dir, ec);
        if (ec) throw IoError("cannot create " + audit_dir + ": " + ec.message());
        const fs::path dir(audit_dir);
        auto note = [](const fs::path& p, std::size_t n) {
            std::cout << "wrote " << p.string() << " (" << n << " bytes)\n";
        };
        fs::path p = dir / "phi.csv";
        note(p, write_text(p.string(), to_csv(report.phi)));
        p = dir / "phi_tilde.csv";
        note(p, write_text(p.string(), to_csv(report.phi_tilde)));
        p = dir / "report.json";
        note(p, emit_report(report, "json", p.string()));
        p = dir / "report.md";
        note(p, emit_report(report, "markdown", p.string()));
        p = dir / "phi.svg";
        note(p, render_heatmap_svg(report.phi, p.string()));
        p = dir / "phi_tilde.svg";
        note(p, render_heatmap_svg(report.phi_tilde, p.string()));
    });

    // --- scan -----------------------------------------------------------------
    CommonInputs scan_in;
    int scan_k = 0;
    std::string scan_out;
    auto* scan = app.add_subcommand("scan", "count positive off-diagonals over model subsets");
    add_common(scan, scan_in);
    scan->add_option("--k", scan_k, "subset size")->required()->check(CLI::PositiveNumber);
    scan->add_option("--out", scan_out, "output CSV path (default: stdout)");
    scan->callback([&] {
        const auto subsets = submatrix_scan(standardize(phi_from(scan_in)), scan_k);
        std::string csv = "members,positive_offdiag\n";
        for (const auto& s : subsets) {
            for (std::size_t i = 0; i < s.ids.size(); ++i) {
                if (i) csv += ';';
                csv += s.ids[i].value;
            }
            csv += ',' + std::to_string(s.positive_offdiag) + '\n';
        }
        emit_or_print(csv, scan_out);
    });

    // --- delta ------------------------------------------------------------------
    CommonInputs delta_in;
    std::string delta_out;
    auto* delta = app.add_subcommand("delta", "per-model diagonal shift between settings");
    add_common(delta, delta_in, false);
    delta->add_option("--out", delta_out, "output CSV path (default: stdout)");
    delta->callback([&] {
        const RunManifest manifest = load_manifest(delta_in.manifest);
        const auto scores = load_records<ScoreRecord>(delta_in.scores);
        const auto based = standardize(
            build_phi(scores, manifest, Setting::ReferenceBased, delta_in.min_coverage));
        const auto free = standardize(
            build_phi(scores, manifest, Setting::ReferenceFree, delta_in.min_coverage));
        std::string csv = "model,delta\n";
        for (const auto& [model, d] : settings_delta(based, free))
            csv += model.value + ',' + fmt6(d) + '\n';
        emit_or_print(csv, delta_out);
    });

    // --- correlate -----------------------------------------------------------------
    struct {
        std::string samples;
        std::string split = "all";
        std::string out;
    } corr;
    auto* correlate = app.add_subcommand("correlate", "rank-correlate judge scores with human targets");
    correlate->add_option("--samples", corr.samples, "supervised samples JSONL")->required();
    correlate->add_option("--split", corr.split, "which split to use")
        ->check(CLI::IsMember({"train", "val", "test", "all"}));
    correlate->add_option("--out", corr.out, "output CSV path (default: stdout)");
    correlate->callback([&] {
        const SupervisedSplit split = load_samples(corr.samples);
        std::vector<const SupervisedSample*> pool;
        auto take = [&](const std::vector<SupervisedSample>& v) {
            for (const auto& s : v) pool.push_back(&s);
        };
        if (corr.split == "train" || corr.split == "all") take(split.train);
        if (corr.split == "val" || corr.split == "all") take(split.val);
        if (corr.split == "test" || corr.split == "all") take(split.test);
        if (pool.size() < 2)
            throw ValidationError("correlation needs at least 2 samples in split '" + corr.split +
                                  "'");
        std::vector<double> target;
        for (const auto* s : pool) target.push_back(s->target);
        if (distinct_values(target) < 2)
            throw DegeneracyError("human targets are all tied, correlation is undefined");

        std::set<ModelId> features;
        for (const auto* s : pool)
            for (const auto& [model, value] : s->features) features.insert(model);

        std::string csv = "model,tau_b,tau_c,n\n";
        for (const auto& model : features) {
            std::vector<double> x, y;
            for (const auto* s : pool) {
                const auto it = s->features.find(model);
                if (it == s->features.end()) continue;
                x.push_back(it->second);
                y.push_back(s->target);
            }
            std::string tb = "n/a", tc = "n/a";
            if (x.size() >= 2) {
                try {
                    tb = fmt6(kendall_tau_b(x, y));
                    tc = fmt6(kendall_tau_c(x, y));
                } catch (const DegeneracyError&) {
                    // constant column or locally constant target: no rank signal
                }
            }
            csv += model.value + ',' + tb + ',' + tc + ',' + std::to_string(x.size()) + '\n';
        }
        emit_or_print(csv, corr.out);
    });

    // --- pomms-train ------------------------------------------------------------------
    struct {
        std::string samples;
        std::string out;
        int max_size = 0;
    } train;
    auto* pomms_train = app.add_subcommand("pomms-train", "forward-select a judge ensemble");
    pomms_train->add_option("--samples", train.samples, "supervised samples JSONL")->required();
    pomms_train->add_option("--out", train.out, "ensemble spec JSON path")->required();
    pomms_train->add_option("--max-size", train.max_size,
                            "largest ensemble to grow (default: all candidates)");
    pomms_train->callback([&] {
        const SupervisedSplit split = load_samples(train.samples);
        std::set<ModelId> seen;
        for (const auto& s : split.train)
            for (const auto& [model, value] : s.features) seen.insert(model);
        const std::vector<ModelId> candidates(seen.begin(), seen.end());
        if (candidates.empty()) throw ValidationError("training split has no feature columns");
        const int cap = train.max_size > 0 ? train.max_size : int(candidates.size());
        const auto [spec, trace] = sfs_select(candidates, split, HyperGrid::defaults(), cap);
        for (std::size_t i = 0; i < trace.steps.size(); ++i) {
            const SfsStep& step = trace.steps[i];
            std::cout << "step " << (i + 1) << ": + " << step.added.value
                      << " (val tau_b=" << fmt2(step.val_tau_b) << ", lambda=" << step.lambda
                      << ", alpha=" << step.alpha << ")\n";
        }
        std::cout << "stop: " << trace.stop_reason << "\n";
        save_ensemble(spec, train.out);
        std::cout << "wrote " << train.out << " (" << spec.members.size() << " members)\n";
    });

    // --- pomms-eval --------------------------------------------------------------------
    struct {
        std::string samples;
        std::string ensemble;
        std::string out;
    } peval;
    auto* pomms_eval = app.add_subcommand("pomms-eval", "score an ensemble on the test split");
    pomms_eval->add_option("--samples", peval.samples, "supervised samples JSONL")->required();
    pomms_eval->add_option("--ensemble", peval.ensemble, "ensemble spec JSON")->required();
    pomms_eval->add_option("--out", peval.out, "write tau scores as JSON");
    pomms_eval->callback([&] {
        const EnsembleSpec spec = load_ensemble(peval.ensemble);
        const EnsembleEvaluation eval = evaluate_ensemble(spec, load_samples(peval.samples));
        std::cout << "test tau_b: " << fmt2(eval.tau_b) << "\n";
        std::cout << "test tau_c: " << fmt2(eval.tau_c) << "\n";
        if (peval.out.empty()) return;
        const json j{{"tau_b", eval.tau_b}, {"tau_c", eval.tau_c}};
        const std::size_t n = write_text(peval.out, j.dump(2) + "\n");
        std::cout << "wrote " << peval.out << " (" << n << " bytes)\n";
    });

    // --- augment ---------------------------------------------------------------------
    CommonInputs aug_in;
    struct {
        std::string ensemble;
        std::string out;
        std::string svg;
    } aug;
    auto* augment = app.add_subcommand("augment", "append the ensemble column and re-standardize");
    add_common(augment, aug_in);
    augment->add_option("--ensemble", aug.ensemble, "ensemble spec JSON")->required();
    augment->add_option("--out", aug.out, "output CSV path (default: stdout)");
    augment->add_option("--svg", aug.svg, "also render the augmented matrix as SVG");
    augment->callback([&] {
        const RunManifest manifest = load_manifest(aug_in.manifest);
        const auto scores = load_records<ScoreRecord>(aug_in.scores);
        const EnsembleSpec spec = load_ensemble(aug.ensemble);
        const StandardizedMatrix augmented =
            augment_phi_with_ensemble(scores, manifest, setting_from_string(aug_in.setting), spec,
                                      aug_in.min_coverage);
        if (!aug.svg.empty()) {
            const std::size_t n = render_heatmap_svg(augmented, aug.svg);
            std::cout << "wrote " << aug.svg << " (" << n << " bytes)\n";
        }
        std::cout << "ensemble column score: " << fmt2(pomms_phi_score(augmented, spec)) << "\n";
        emit_or_print(to_csv(augmented), aug.out);
    });

    // --- simulate ---------------------------------------------------------------------
    struct {
        std::string config;
        std::string out;
        std::string manifest_out;
        std::uint64_t seed = 0;
        bool recovery = false;
    } sim;
    auto* simulate = app.add_subcommand("simulate", "draw a synthetic judge panel");
    simulate->add_option("--config", sim.config, "panel config JSON")->required();
    simulate->add_option("--out", sim.out, "score records JSONL path")->required();
    simulate->add_option("--manifest-out", sim.manifest_out, "also write the matching manifest");
    auto* seed_opt = simulate->add_option("--seed", sim.seed, "override the config seed");
    simulate->add_flag("--recovery", sim.recovery, "report how well the bias was recovered");
    simulate->callback([&] {
        SimConfig config = load_sim_config(sim.config);
        if (seed_opt->count() > 0) config.seed = sim.seed;
        const auto records = simulate_scores(config);
        save_records(records, sim.out);
        std::cout << "wrote " << sim.out << " (" << records.size() << " records)\n";
        const RunManifest manifest = make_manifest(config);
        if (!sim.manifest_out.empty()) {
            save_manifest(manifest, sim.manifest_out);
            std::cout << "wrote " << sim.manifest_out << "\n";
        }
        if (!sim.recovery) return;
        const auto tilde = standardize(build_phi(records, manifest, config.setting, 1.0));
        const RecoveryReport recovery = recovery_report(tilde, config);
        std::cout << "diag sign accuracy: " << fmt2(recovery.diag_sign_accuracy) << "\n";
        std::cout << "diag rank tau_b: "
                  << (recovery.rank_correlation_defined ? fmt2(recovery.diag_rank_correlation)
                                                        : std::string("n/a"))
                  << "\n";
    });

    // --- report -----------------------------------------------------------------------
    CommonInputs rep_in;
    struct {
        std::string format = "json";
        std::string out;
    } rep;
    auto* report_cmd = app.add_subcommand("report", "emit the audit report in one format");
    add_common(report_cmd, rep_in);
    report_cmd->add_option("--format", rep.format, "json, markdown, or csv")
        ->check(CLI::IsMember({"json", "markdown", "csv"}));
    report_cmd->add_option("--out", rep.out, "output path")->required();
    report_cmd->callback([&] {
        const RunManifest manifest = load_manifest(rep_in.manifest);
        const auto scores = load_records<ScoreRecord>(rep_in.scores);
        const AuditReport report = build_audit_report(
            scores, manifest, setting_from_string(rep_in.setting), rep_in.min_coverage);
        const std::size_t n = emit_report(report, rep.format, rep.out);
        std::cout << "wrote " << rep.out << " (" << n << " bytes)\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DegeneracyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
