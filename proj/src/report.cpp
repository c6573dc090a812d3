#include "philautia/report.hpp"

#include "philautia/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace philautia {

namespace {

// Full binary64 round-trip precision for machine-readable output.
std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Display precision. Tiny negatives render as 0.00, not -0.00.
std::string num2(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    std::string s = buf;
    if (s == "-0.00") s = "0.00";
    return s;
}

json matrix_to_json(const ScoreMatrix& m) {
    return json{
        {"generators", [&] {
             json a = json::array();
             for (const ModelId& g : m.generators) a.push_back(g.value);
             return a;
         }()},
        {"evaluators", [&] {
             json a = json::array();
             for (const ModelId& e : m.evaluators) a.push_back(e.value);
             return a;
         }()},
        {"values", m.values},
        {"counts", m.counts},
        {"setting", to_string(m.setting)},
    };
}

json matrix_to_json(const StandardizedMatrix& m) {
    return json{
        {"generators", [&] {
             json a = json::array();
             for (const ModelId& g : m.generators) a.push_back(g.value);
             return a;
         }()},
        {"evaluators", [&] {
             json a = json::array();
             for (const ModelId& e : m.evaluators) a.push_back(e.value);
             return a;
         }()},
        {"values", m.values},
        {"degenerate_rows", m.degenerate_rows},
        {"degenerate_columns", m.degenerate_columns},
        {"setting", to_string(m.setting)},
    };
}

void fail_report(const std::string& what) { throw ParseError("report: " + what); }

std::vector<ModelId> ids_from(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_array()) fail_report(std::string("'") + key + "' must be an array");
    std::vector<ModelId> out;
    for (const json& e : *it) {
        if (!e.is_string()) fail_report(std::string("'") + key + "' entries must be strings");
        out.push_back(make_model_id(e.get<std::string>()));
    }
    return out;
}

template <class T>
std::vector<T> vec_from(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_array()) fail_report(std::string("'") + key + "' must be an array");
    return it->get<std::vector<T>>();
}

ScoreMatrix score_matrix_from_json(const json& j) {
    if (!j.is_object()) fail_report("matrix must be an object");
    ScoreMatrix m;
    m.generators = ids_from(j, "generators");
    m.evaluators = ids_from(j, "evaluators");
    m.values = vec_from<double>(j, "values");
    m.counts = vec_from<int>(j, "counts");
    m.setting = setting_from_string(j.at("setting").get<std::string>());
    if (m.values.size() != m.rows() * m.cols() || m.counts.size() != m.values.size())
        fail_report("matrix shape mismatch");
    return m;
}

StandardizedMatrix std_matrix_from_json(const json& j) {
    if (!j.is_object()) fail_report("matrix must be an object");
    StandardizedMatrix m;
    m.generators = ids_from(j, "generators");
    m.evaluators = ids_from(j, "evaluators");
    m.values = vec_from<double>(j, "values");
    m.degenerate_rows = vec_from<std::size_t>(j, "degenerate_rows");
    m.degenerate_columns = vec_from<std::size_t>(j, "degenerate_columns");
    m.setting = setting_from_string(j.at("setting").get<std::string>());
    if (m.values.size() != m.rows() * m.cols()) fail_report("matrix shape mismatch");
    return m;
}

void csv_matrix_rows(std::string& out, const std::string& label,
                     const std::vector<ModelId>& generators, const std::vector<double>& values,
                     std::size_t cols) {
    for (std::size_t i = 0; i < generators.size(); ++i) {
        out += label;
        out += ',';
        out += generators[i].value;
        for (std::size_t j = 0; j < cols; ++j) {
            out += ',';
            out += num17(values[i * cols + j]);
        }
        out += '\n';
    }
}

} // namespace

AuditReport build_audit_report(const std::vector<ScoreRecord>& scores,
                               const RunManifest& manifest, Setting setting,
                               double min_coverage) {
    AuditReport r;
    r.setting = setting;
    r.phi = build_phi(scores, manifest, setting, min_coverage);
    r.phi_tilde = standardize(r.phi);
    r.philautia = philautia_scores(r.phi_tilde);
    r.zscores = diagonal_zscores(r.phi_tilde);
    for (const std::size_t i : r.phi_tilde.degenerate_rows)
        r.notes.push_back("generator " + r.phi_tilde.generators[i].value +
                          ": constant row standardized to zeros");
    for (const std::size_t j : r.phi_tilde.degenerate_columns)
        r.notes.push_back("evaluator " + r.phi_tilde.evaluators[j].value +
                          ": constant column standardized to zeros");
    for (const auto& [model, z] : r.zscores)
        if (!z.defined)
            r.notes.push_back("model " + model.value +
                              ": column has zero spread, diagonal z-score undefined");
    return r;
}

json report_to_json(const AuditReport& report) {
    json philautia = json::object();
    for (const auto& [model, v] : report.philautia) philautia[model.value] = v;
    json zscores = json::object();
    for (const auto& [model, z] : report.zscores)
        zscores[model.value] = json{{"diag", z.diag},
                                    {"col_mean", z.col_mean},
                                    {"col_std", z.col_std},
                                    {"z", z.z},
                                    {"defined", z.defined}};
    return json{
        {"setting", to_string(report.setting)},
        {"phi", matrix_to_json(report.phi)},
        {"phi_tilde", matrix_to_json(report.phi_tilde)},
        {"philautia", philautia},
        {"zscores", zscores},
        {"notes", report.notes},
    };
}

AuditReport report_from_json(const json& j) {
    if (!j.is_object()) fail_report("expected a JSON object");
    AuditReport r;
    try {
        r.setting = setting_from_string(j.at("setting").get<std::string>());
        r.phi = score_matrix_from_json(j.at("phi"));
        r.phi_tilde = std_matrix_from_json(j.at("phi_tilde"));
        for (const auto& [key, value] : j.at("philautia").items())
            r.philautia[make_model_id(key)] = value.get<double>();
        for (const auto& [key, value] : j.at("zscores").items()) {
            DiagZScore z;
            z.diag = value.at("diag").get<double>();
            z.col_mean = value.at("col_mean").get<double>();
            z.col_std = value.at("col_std").get<double>();
            z.z = value.at("z").get<double>();
            z.defined = value.at("defined").get<bool>();
            r.zscores[make_model_id(key)] = z;
        }
        r.notes = j.at("notes").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        fail_report(e.what());
    }
    return r;
}

std::string report_to_markdown(const AuditReport& report) {
    std::string out = "# Judge audit (" + to_string(report.setting) + ")\n\n";
    out += std::to_string(report.phi.rows()) + " generators, " +
           std::to_string(report.phi.cols()) + " evaluators.\n\n";

    out += "## Philautia scores\n\n";
    out += "| Model | Philautia | Diagonal z | Flag |\n";
    out += "|---|---:|---:|---|\n";
    std::vector<std::pair<ModelId, double>> order(report.philautia.begin(),
                                                  report.philautia.end());
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [model, score] : order) {
        const auto zit = report.zscores.find(model);
        const bool has_z = zit != report.zscores.end() && zit->second.defined;
        out += "| " + model.value + " | " + num2(score) + " | " +
               (has_z ? num2(zit->second.z) : std::string("n/a")) + " | " +
               (has_z && zit->second.z > 2.0 ? "z > 2" : "") + " |\n";
    }

    out += "\n## Degeneracy notes\n\n";
    if (report.notes.empty()) {
        out += "None.\n";
    } else {
        for (const std::string& note : report.notes) out += "- " + note + "\n";
    }
    return out;
}

std::string report_to_csv(const AuditReport& report) {
    if (report.phi.evaluators != report.phi_tilde.evaluators ||
        report.phi.generators != report.phi_tilde.generators)
        throw ValidationError("report matrices disagree on axes");
    std::string out = "matrix,generator";
    for (const ModelId& e : report.phi.evaluators) {
        out += ',';
        out += e.value;
    }
    out += '\n';
    csv_matrix_rows(out, "phi", report.phi.generators, report.phi.values, report.phi.cols());
    csv_matrix_rows(out, "phi_tilde", report.phi_tilde.generators, report.phi_tilde.values,
                    report.phi_tilde.cols());
    return out;
}

std::size_t emit_report(const AuditReport& report, const std::string& format,
                        const std::string& path) {
    std::string payload;
    if (format == "json")
        payload = report_to_json(report).dump(2) + "\n";
    else if (format == "markdown")
        payload = report_to_markdown(report);
    else if (format == "csv")
        payload = report_to_csv(report);
    else
        throw ValidationError("unknown report format '" + format +
                              "' (expected json, markdown, or csv)");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << payload;
    out.flush();
    if (!out) throw IoError("write failed: " + path);
    return payload.size();
}

} // namespace philautia
