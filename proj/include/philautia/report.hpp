#pragma once

#include "philautia/matrix.hpp"
#include "philautia/records.hpp"

#include <map>
#include <string>
#include <vector>

namespace philautia {

// Everything the audit of one setting produces: the mean matrix, its
// standardization, the per-model diagnostics, and any degeneracy warnings.
struct AuditReport {
    Setting setting = Setting::ReferenceBased;
    ScoreMatrix phi;
    StandardizedMatrix phi_tilde;
    std::map<ModelId, double> philautia;
    std::map<ModelId, DiagZScore> zscores;
    std::vector<std::string> notes;

    bool operator==(const AuditReport&) const = default;
};

// Runs the full per-setting analysis over raw score records.
AuditReport build_audit_report(const std::vector<ScoreRecord>& scores,
                               const RunManifest& manifest, Setting setting,
                               double min_coverage = 0.95);

// Lossless JSON round trip: report_from_json(report_to_json(r)) equals r.
json report_to_json(const AuditReport& report);
AuditReport report_from_json(const json& j);

// Human summary: philautia table sorted descending, diagonal z-scores with
// models beyond two standard deviations flagged, then the degeneracy notes.
// Values display at 2 decimals.
std::string report_to_markdown(const AuditReport& report);

// Machine table: phi and phi_tilde stacked long-wise under a matrix label
// column, evaluator columns in matrix (manifest) order, full %.17g precision.
std::string report_to_csv(const AuditReport& report);

// Writes the report in one format ("json", "markdown", or "csv") and returns
// the number of bytes written. Emission is deterministic byte for byte.
std::size_t emit_report(const AuditReport& report, const std::string& format,
                        const std::string& path);

} // namespace philautia
