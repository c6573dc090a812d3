#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "philautia/errors.hpp"

namespace philautia {

using json = nlohmann::json;

// Identifier of a generator or evaluator model. Non-empty, no whitespace.
// Ordering is lexicographic everywhere ids need a stable order.
struct ModelId {
    std::string value;

    ModelId() = default;
    explicit ModelId(std::string v) : value(std::move(v)) {}

    auto operator<=>(const ModelId&) const = default;
};

// Throws ValidationError unless `v` is a non-empty whitespace-free token.
ModelId make_model_id(const std::string& v);

enum class Setting {
    ReferenceBased,
    ReferenceFree,
};

std::string to_string(Setting s);                 // "ref-based" / "ref-free"
Setting setting_from_string(const std::string&);  // inverse, throws ValidationError

// One generated caption for one image.
struct CaptionRecord {
    std::string image_id;
    ModelId generator;
    std::string caption;
    json extras = json::object(); // unknown fields, preserved on round-trip
};

// One evaluator's normalized score for one (image, generator, setting) triple.
// Invariant: score * 100 == raw_score exactly.
struct ScoreRecord {
    std::string image_id;
    ModelId generator;
    ModelId evaluator;
    Setting setting = Setting::ReferenceBased;
    int raw_score = 0;                       // integer 0..100
    double score = 0.0;                      // raw_score / 100
    std::optional<std::string> raw_response; // the full evaluator reply, if kept
    json extras = json::object();
};

// A human-rated candidate caption, used to benchmark judges.
struct HumanJudgmentRecord {
    std::string image_id;
    std::string candidate;
    std::vector<std::string> references;
    double human_score = 0.0;
    json extras = json::object();
};

struct ImageRef {
    std::string id;
    std::string source; // optional file path or URL; empty when absent
};

// The universe of a run: which models, images, references, and settings exist.
struct RunManifest {
    std::vector<ModelId> generators;
    std::vector<ModelId> evaluators;
    std::vector<ImageRef> images;
    std::map<std::string, std::vector<std::string>> references; // image_id -> refs
    std::vector<Setting> settings;
};

RunManifest manifest_from_json(const json& j);
json manifest_to_json(const RunManifest& m);
RunManifest load_manifest(const std::string& path);
void save_manifest(const RunManifest& m, const std::string& path);

// Basic structural checks: unique ids, non-empty axes, unique image ids.
void check_manifest(const RunManifest& m);

// --- JSONL record I/O -------------------------------------------------------
//
// One JSON object per line. The canonical writer emits objects with keys in
// lexicographic order and shortest round-trip float formatting, so
// save(load(file)) is byte-identical for canonical files. Unknown fields are
// kept in `extras` and written back verbatim.

json record_to_json(const CaptionRecord&);
json record_to_json(const ScoreRecord&);
json record_to_json(const HumanJudgmentRecord&);

// `where` names the source (e.g. "scores.jsonl:17") for error messages.
CaptionRecord caption_from_json(const json&, const std::string& where);
ScoreRecord score_from_json(const json&, const std::string& where);
HumanJudgmentRecord judgment_from_json(const json&, const std::string& where);

// Journal tombstone: a scores journal line with "missing": true marks a cell
// that exhausted its retries. Record loaders skip such lines.
bool is_missing_marker(const json& line);

template <class R>
std::vector<R> load_records(const std::string& path);

template <class R>
void save_records(const std::vector<R>& records, const std::string& path);

std::string record_line(const json& j); // canonical single-line serialization

// --- Coverage accounting ----------------------------------------------------

struct CellCoverage {
    ModelId generator;
    ModelId evaluator;
    Setting setting = Setting::ReferenceBased;
    int present = 0;
    int expected = 0;

    double fraction() const { return expected == 0 ? 0.0 : double(present) / double(expected); }
};

struct CoverageReport {
    std::vector<CellCoverage> cells;       // one per (generator, evaluator, setting)
    std::vector<std::string> duplicates;   // human-readable duplicate keys
    std::vector<std::string> orphans;      // records referencing unknown ids
    int total_valid = 0;                   // records counted into cells

    bool ok() const { return duplicates.empty() && orphans.empty(); }
};

// Counts per-cell coverage against the manifest and flags duplicate and
// orphan records. Does not throw on data problems; callers inspect ok().
CoverageReport validate_dataset(const RunManifest& manifest,
                                const std::vector<ScoreRecord>& scores);

} // namespace philautia
