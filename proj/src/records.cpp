#include "philautia/records.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace philautia {

namespace {

bool has_whitespace(const std::string& s) {
    return std::any_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ValidationError(where.empty() ? what : where + ": " + what);
}

const json* find_field(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

std::string require_string(const json& j, const char* key, const std::string& where) {
    const json* f = find_field(j, key);
    if (!f) fail(where, std::string("missing field '") + key + "'");
    if (!f->is_string()) fail(where, std::string("field '") + key + "' must be a string");
    return f->get<std::string>();
}

double require_number(const json& j, const char* key, const std::string& where) {
    const json* f = find_field(j, key);
    if (!f) fail(where, std::string("missing field '") + key + "'");
    if (!f->is_number()) fail(where, std::string("field '") + key + "' must be a number");
    return f->get<double>();
}

int require_int(const json& j, const char* key, const std::string& where) {
    const json* f = find_field(j, key);
    if (!f) fail(where, std::string("missing field '") + key + "'");
    if (!f->is_number_integer()) fail(where, std::string("field '") + key + "' must be an integer");
    return f->get<int>();
}

// Collects every key not consumed by the typed fields.
json collect_extras(const json& j, std::initializer_list<const char*> known) {
    json extras = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool is_known = false;
        for (const char* k : known)
            if (it.key() == k) { is_known = true; break; }
        if (!is_known) extras[it.key()] = it.value();
    }
    return extras;
}

void merge_extras(json& out, const json& extras) {
    for (auto it = extras.begin(); it != extras.end(); ++it)
        if (!out.contains(it.key())) out[it.key()] = it.value();
}

} // namespace

ModelId make_model_id(const std::string& v) {
    if (v.empty()) throw ValidationError("model id must be non-empty");
    if (has_whitespace(v)) throw ValidationError("model id must not contain whitespace: '" + v + "'");
    return ModelId(v);
}

std::string to_string(Setting s) {
    return s == Setting::ReferenceBased ? "ref-based" : "ref-free";
}

Setting setting_from_string(const std::string& s) {
    if (s == "ref-based") return Setting::ReferenceBased;
    if (s == "ref-free") return Setting::ReferenceFree;
    throw ValidationError("unknown setting '" + s + "' (expected ref-based or ref-free)");
}

// --- records <-> json --------------------------------------------------------

json record_to_json(const CaptionRecord& r) {
    json j = json::object();
    j["image_id"] = r.image_id;
    j["generator"] = r.generator.value;
    j["caption"] = r.caption;
    merge_extras(j, r.extras);
    return j;
}

json record_to_json(const ScoreRecord& r) {
    json j = json::object();
    j["image_id"] = r.image_id;
    j["generator"] = r.generator.value;
    j["evaluator"] = r.evaluator.value;
    j["setting"] = to_string(r.setting);
    j["raw_score"] = r.raw_score;
    j["score"] = r.score;
    if (r.raw_response) j["raw_response"] = *r.raw_response;
    merge_extras(j, r.extras);
    return j;
}

json record_to_json(const HumanJudgmentRecord& r) {
    json j = json::object();
    j["image_id"] = r.image_id;
    j["candidate"] = r.candidate;
    j["references"] = r.references;
    j["human_score"] = r.human_score;
    merge_extras(j, r.extras);
    return j;
}

CaptionRecord caption_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) fail(where, "expected a JSON object");
    CaptionRecord r;
    r.image_id = require_string(j, "image_id", where);
    try {
        r.generator = make_model_id(require_string(j, "generator", where));
    } catch (const ValidationError& e) {
        fail(where, e.what());
    }
    r.caption = require_string(j, "caption", where);
    if (r.caption.empty()) fail(where, "caption must be non-empty");
    r.extras = collect_extras(j, {"image_id", "generator", "caption"});
    return r;
}

ScoreRecord score_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) fail(where, "expected a JSON object");
    ScoreRecord r;
    r.image_id = require_string(j, "image_id", where);
    try {
        r.generator = make_model_id(require_string(j, "generator", where));
        r.evaluator = make_model_id(require_string(j, "evaluator", where));
    } catch (const ValidationError& e) {
        fail(where, e.what());
    }
    r.setting = setting_from_string(require_string(j, "setting", where));
    r.raw_score = require_int(j, "raw_score", where);
    if (r.raw_score < 0 || r.raw_score > 100)
        fail(where, "raw_score " + std::to_string(r.raw_score) + " outside 0..100");
    r.score = require_number(j, "score", where);
    if (r.score != r.raw_score / 100.0)
        fail(where, "score must equal raw_score / 100 exactly");
    if (const json* f = find_field(j, "raw_response")) {
        if (!f->is_string()) fail(where, "field 'raw_response' must be a string");
        r.raw_response = f->get<std::string>();
    }
    r.extras = collect_extras(j, {"image_id", "generator", "evaluator", "setting",
                                  "raw_score", "score", "raw_response"});
    return r;
}

HumanJudgmentRecord judgment_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) fail(where, "expected a JSON object");
    HumanJudgmentRecord r;
    r.image_id = require_string(j, "image_id", where);
    r.candidate = require_string(j, "candidate", where);
    const json* refs = find_field(j, "references");
    if (!refs) fail(where, "missing field 'references'");
    if (!refs->is_array()) fail(where, "field 'references' must be an array");
    for (const auto& e : *refs) {
        if (!e.is_string()) fail(where, "references must be strings");
        r.references.push_back(e.get<std::string>());
    }
    r.human_score = require_number(j, "human_score", where);
    r.extras = collect_extras(j, {"image_id", "candidate", "references", "human_score"});
    return r;
}

bool is_missing_marker(const json& line) {
    auto it = line.find("missing");
    return it != line.end() && it->is_boolean() && it->get<bool>();
}

std::string record_line(const json& j) {
    return j.dump();
}

// --- JSONL file I/O ----------------------------------------------------------

namespace {

template <class R>
R parse_record(const json& j, const std::string& where) {
    if constexpr (std::is_same_v<R, CaptionRecord>)
        return caption_from_json(j, where);
    else if constexpr (std::is_same_v<R, ScoreRecord>)
        return score_from_json(j, where);
    else
        return judgment_from_json(j, where);
}

} // namespace

template <class R>
std::vector<R> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<R> out;
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
        if (is_missing_marker(j)) continue; // journal tombstone
        out.push_back(parse_record<R>(j, where));
    }
    return out;
}

template <class R>
void save_records(const std::vector<R>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const R& r : records)
        out << record_line(record_to_json(r)) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

template std::vector<CaptionRecord> load_records<CaptionRecord>(const std::string&);
template std::vector<ScoreRecord> load_records<ScoreRecord>(const std::string&);
template std::vector<HumanJudgmentRecord> load_records<HumanJudgmentRecord>(const std::string&);
template void save_records<CaptionRecord>(const std::vector<CaptionRecord>&, const std::string&);
template void save_records<ScoreRecord>(const std::vector<ScoreRecord>&, const std::string&);
template void save_records<HumanJudgmentRecord>(const std::vector<HumanJudgmentRecord>&, const std::string&);

// --- manifest ----------------------------------------------------------------

RunManifest manifest_from_json(const json& j) {
    const std::string where = "manifest";
    if (!j.is_object()) fail(where, "expected a JSON object");
    RunManifest m;
    for (const char* axis : {"generators", "evaluators"}) {
        const json* f = find_field(j, axis);
        if (!f || !f->is_array()) fail(where, std::string("'") + axis + "' must be an array");
        auto& dst = std::string(axis) == "generators" ? m.generators : m.evaluators;
        for (const auto& e : *f) {
            if (!e.is_string()) fail(where, std::string(axis) + " entries must be strings");
            dst.push_back(make_model_id(e.get<std::string>()));
        }
    }
    const json* imgs = find_field(j, "images");
    if (!imgs || !imgs->is_array()) fail(where, "'images' must be an array");
    for (const auto& e : *imgs) {
        ImageRef ref;
        if (e.is_string()) {
            ref.id = e.get<std::string>();
        } else if (e.is_object()) {
            ref.id = require_string(e, "id", where);
            if (const json* s = find_field(e, "source")) {
                if (!s->is_string()) fail(where, "image 'source' must be a string");
                ref.source = s->get<std::string>();
            }
        } else {
            fail(where, "image entries must be strings or objects");
        }
        if (ref.id.empty()) fail(where, "image id must be non-empty");
        m.images.push_back(std::move(ref));
    }
    if (const json* refs = find_field(j, "references")) {
        if (!refs->is_object()) fail(where, "'references' must be an object");
        for (auto it = refs->begin(); it != refs->end(); ++it) {
            if (!it.value().is_array()) fail(where, "reference lists must be arrays");
            std::vector<std::string> lst;
            for (const auto& e : it.value()) {
                if (!e.is_string()) fail(where, "references must be strings");
                lst.push_back(e.get<std::string>());
            }
            m.references[it.key()] = std::move(lst);
        }
    }
    const json* settings = find_field(j, "settings");
    if (!settings || !settings->is_array()) fail(where, "'settings' must be an array");
    for (const auto& e : *settings) {
        if (!e.is_string()) fail(where, "settings entries must be strings");
        m.settings.push_back(setting_from_string(e.get<std::string>()));
    }
    check_manifest(m);
    return m;
}

json manifest_to_json(const RunManifest& m) {
    json j = json::object();
    json gens = json::array(), evals = json::array();
    for (const auto& g : m.generators) gens.push_back(g.value);
    for (const auto& e : m.evaluators) evals.push_back(e.value);
    j["generators"] = std::move(gens);
    j["evaluators"] = std::move(evals);
    json imgs = json::array();
    for (const auto& img : m.images) {
        json o = json::object();
        o["id"] = img.id;
        if (!img.source.empty()) o["source"] = img.source;
        imgs.push_back(std::move(o));
    }
    j["images"] = std::move(imgs);
    json refs = json::object();
    for (const auto& [id, lst] : m.references) refs[id] = lst;
    j["references"] = std::move(refs);
    json settings = json::array();
    for (Setting s : m.settings) settings.push_back(to_string(s));
    j["settings"] = std::move(settings);
    return j;
}

RunManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": malformed JSON (" + e.what() + ")");
    }
    return manifest_from_json(j);
}

void save_manifest(const RunManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << manifest_to_json(m).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

void check_manifest(const RunManifest& m) {
    if (m.generators.empty()) throw ValidationError("manifest: generators must be non-empty");
    if (m.evaluators.empty()) throw ValidationError("manifest: evaluators must be non-empty");
    if (m.images.empty()) throw ValidationError("manifest: images must be non-empty");
    if (m.settings.empty()) throw ValidationError("manifest: settings must be non-empty");
    auto check_unique = [](const std::vector<ModelId>& ids, const char* axis) {
        std::set<ModelId> seen;
        for (const auto& id : ids)
            if (!seen.insert(id).second)
                throw ValidationError(std::string("manifest: duplicate ") + axis + " id '" + id.value + "'");
    };
    check_unique(m.generators, "generator");
    check_unique(m.evaluators, "evaluator");
    std::set<std::string> img_seen;
    for (const auto& img : m.images)
        if (!img_seen.insert(img.id).second)
            throw ValidationError("manifest: duplicate image id '" + img.id + "'");
    std::set<Setting> s_seen;
    for (Setting s : m.settings)
        if (!s_seen.insert(s).second)
            throw ValidationError("manifest: duplicate setting '" + to_string(s) + "'");
}

// --- coverage ----------------------------------------------------------------

CoverageReport validate_dataset(const RunManifest& manifest,
                                const std::vector<ScoreRecord>& scores) {
    check_manifest(manifest);
    CoverageReport report;

    std::set<ModelId> gens(manifest.generators.begin(), manifest.generators.end());
    std::set<ModelId> evals(manifest.evaluators.begin(), manifest.evaluators.end());
    std::set<std::string> images;
    for (const auto& img : manifest.images) images.insert(img.id);
    std::set<Setting> settings(manifest.settings.begin(), manifest.settings.end());

    using Key = std::tuple<std::string, std::string, std::string, Setting>;
    std::set<Key> seen;
    std::map<std::tuple<std::string, std::string, Setting>, int> present;

    for (const auto& r : scores) {
        const bool known = gens.count(r.generator) && evals.count(r.evaluator) &&
                           images.count(r.image_id) && settings.count(r.setting);
        std::string key = r.generator.value + "/" + r.evaluator.value + "/" +
                          r.image_id + "/" + to_string(r.setting);
        if (!known) {
            report.orphans.push_back(key);
            continue;
        }
        if (!seen.insert({r.generator.value, r.evaluator.value, r.image_id, r.setting}).second) {
            report.duplicates.push_back(key);
            continue;
        }
        present[{r.generator.value, r.evaluator.value, r.setting}] += 1;
        report.total_valid += 1;
    }

    const int expected = static_cast<int>(manifest.images.size());
    for (Setting s : manifest.settings)
        for (const auto& g : manifest.generators)
            for (const auto& e : manifest.evaluators) {
                CellCoverage cell;
                cell.generator = g;
                cell.evaluator = e;
                cell.setting = s;
                cell.expected = expected;
                auto it = present.find({g.value, e.value, s});
                cell.present = it == present.end() ? 0 : it->second;
                report.cells.push_back(std::move(cell));
            }
    return report;
}

} // namespace philautia
