#include "philautia/collector.hpp"

#include "philautia/errors.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace philautia {

namespace {

// Retryable wire failure, distinct from ParseError only for messages; both
// count toward the consecutive-failure budget.
struct TransportFailure : Error {
    using Error::Error;
};

void fail_config(const std::string& where, const std::string& what) {
    throw ValidationError(where + ": " + what);
}

// --- journal -----------------------------------------------------------------

// Append-only JSONL sink. Appends are serialized and flushed line by line, so
// the file grows in whole lines and any prefix is a valid resumable state.
class Journal {
  public:
    explicit Journal(const std::string& path) : path_(path) {
        out_.open(path, std::ios::binary | std::ios::app);
        if (!out_) throw IoError("cannot open " + path + " for appending");
    }

    void append(const json& j) {
        const std::string line = record_line(j);
        std::lock_guard<std::mutex> lock(mu_);
        out_ << line << '\n';
        out_.flush();
        if (!out_) throw IoError("journal write failed: " + path_);
    }

  private:
    std::string path_;
    std::ofstream out_;
    std::mutex mu_;
};

using CellKey = std::tuple<std::string, std::string, std::string, std::string>;

// Keys already settled by a previous run, whether scored or tombstoned.
template <class KeyFn>
std::set<CellKey> scan_journal(const std::string& path, KeyFn&& key_of) {
    std::set<CellKey> done;
    std::ifstream in(path);
    if (!in) return done; // no journal yet
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(where + ": malformed JSON: " + e.what());
        }
        done.insert(key_of(j, where));
    }
    return done;
}

std::string field_str(const json& j, const char* name, const std::string& where) {
    auto it = j.find(name);
    if (it == j.end() || !it->is_string())
        throw ParseError(where + ": missing string field '" + std::string(name) + "'");
    return it->get<std::string>();
}

int field_int(const json& j, const char* name, const std::string& where) {
    auto it = j.find(name);
    if (it == j.end() || !it->is_number_integer())
        throw ValidationError(where + ": field '" + std::string(name) + "' must be an integer");
    return it->get<int>();
}

double field_num(const json& j, const char* name, const std::string& where) {
    auto it = j.find(name);
    if (it == j.end() || !it->is_number())
        throw ValidationError(where + ": field '" + std::string(name) + "' must be a number");
    return it->get<double>();
}

// --- rate limiting -----------------------------------------------------------

// Spaces request starts 60/rpm seconds apart. Each caller claims the next
// free slot under the lock, then sleeps outside it until the slot arrives.
class RateLimiter {
  public:
    explicit RateLimiter(int requests_per_minute)
        : interval_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
              std::chrono::duration<double>(60.0 / requests_per_minute))) {}

    void acquire() {
        std::chrono::steady_clock::time_point slot;
        {
            std::lock_guard<std::mutex> lock(mu_);
            const auto now = std::chrono::steady_clock::now();
            slot = std::max(now, next_);
            next_ = slot + interval_;
        }
        std::this_thread::sleep_until(slot);
    }

  private:
    std::chrono::steady_clock::duration interval_;
    std::chrono::steady_clock::time_point next_ = std::chrono::steady_clock::now();
    std::mutex mu_;
};

// --- HTTP --------------------------------------------------------------------

std::unique_ptr<httplib::Client> make_client(const EndpointConfig& cfg) {
    auto cli = std::make_unique<httplib::Client>(cfg.base_url);
    cli->set_connection_timeout(10, 0);
    cli->set_read_timeout(300, 0);
    if (!cfg.api_key_env.empty()) {
        if (const char* token = std::getenv(cfg.api_key_env.c_str()); token && *token)
            cli->set_bearer_token_auth(token);
    }
    return cli;
}

const char kBase64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::string& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const unsigned v = (unsigned(static_cast<unsigned char>(bytes[i])) << 16) |
                           (unsigned(static_cast<unsigned char>(bytes[i + 1])) << 8) |
                           unsigned(static_cast<unsigned char>(bytes[i + 2]));
        out.push_back(kBase64Alphabet[(v >> 18) & 63]);
        out.push_back(kBase64Alphabet[(v >> 12) & 63]);
        out.push_back(kBase64Alphabet[(v >> 6) & 63]);
        out.push_back(kBase64Alphabet[v & 63]);
    }
    if (i < bytes.size()) {
        unsigned v = unsigned(static_cast<unsigned char>(bytes[i])) << 16;
        const bool two = i + 1 < bytes.size();
        if (two) v |= unsigned(static_cast<unsigned char>(bytes[i + 1])) << 8;
        out.push_back(kBase64Alphabet[(v >> 18) & 63]);
        out.push_back(kBase64Alphabet[(v >> 12) & 63]);
        out.push_back(two ? kBase64Alphabet[(v >> 6) & 63] : '=');
        out.push_back('=');
    }
    return out;
}

std::string mime_for(const std::string& path) {
    const auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    if (ext == "png") return "image/png";
    if (ext == "gif") return "image/gif";
    if (ext == "webp") return "image/webp";
    return "image/jpeg";
}

std::string data_uri(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read image file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return "data:" + mime_for(path) + ";base64," + base64_encode(buf.str());
}

json build_request(const EndpointConfig& cfg, const std::string& prompt, const ImageRef& image) {
    json msg;
    msg["role"] = "user";
    if (cfg.image_transport == ImageTransport::Omit) {
        msg["content"] = prompt;
    } else {
        const std::string url = cfg.image_transport == ImageTransport::Url
                                    ? image.source
                                    : data_uri(image.source);
        msg["content"] = json::array({
            json{{"type", "text"}, {"text", prompt}},
            json{{"type", "image_url"}, {"image_url", json{{"url", url}}}},
        });
    }
    json req;
    req["model"] = cfg.model_name;
    req["temperature"] = cfg.temperature;
    req["top_p"] = cfg.top_p;
    req["messages"] = json::array({std::move(msg)});
    return req;
}

std::string post_chat(httplib::Client& cli, const json& req) {
    auto res = cli.Post("/v1/chat/completions", req.dump(), "application/json");
    if (!res) throw TransportFailure("transport error: " + httplib::to_string(res.error()));
    if (res->status != 200) throw TransportFailure("http status " + std::to_string(res->status));
    return res->body;
}

std::string extract_content(const std::string& body) {
    const json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw ParseError("reply body is not JSON");
    const auto choices = j.find("choices");
    if (choices == j.end() || !choices->is_array() || choices->empty())
        throw ParseError("reply has no choices");
    const json& first = (*choices)[0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string())
        throw ParseError("reply has no message content");
    return first["message"]["content"].get<std::string>();
}

// Runs one request with the consecutive-failure budget. Returns false (with
// the last error) when the budget is spent; max_retries = 0 never sends.
template <class Send>
bool with_retries(const EndpointConfig& cfg, Send&& send, std::string& error_out) {
    error_out = "retries disabled";
    for (int failures = 0; failures < cfg.max_retries;) {
        try {
            send();
            return true;
        } catch (const ParseError& e) {
            ++failures;
            error_out = e.what();
        } catch (const TransportFailure& e) {
            ++failures;
            error_out = e.what();
        }
    }
    return false;
}

// --- orchestration -----------------------------------------------------------

// Runs `perform(client, limiter, task)` over every task of one endpoint with
// at most max_parallel workers sharing one rate limiter. The first
// non-retryable exception cancels the rest.
template <class Task, class Perform>
void run_endpoint_tasks(const EndpointConfig& cfg, const std::vector<Task>& tasks,
                        bool serial, Perform&& perform) {
    if (tasks.empty()) return;
    RateLimiter limiter(cfg.requests_per_minute);
    const std::size_t workers =
        serial ? 1 : std::min<std::size_t>(std::size_t(cfg.max_parallel), tasks.size());
    if (workers == 1) {
        auto cli = make_client(cfg);
        for (const Task& t : tasks) perform(*cli, limiter, t);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            auto cli = make_client(cfg);
            while (!failed.load()) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) break;
                try {
                    perform(*cli, limiter, tasks[i]);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mu);
                    if (!failure) failure = std::current_exception();
                    failed.store(true);
                    break;
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

// Endpoint groups run concurrently with each other unless serial, in which
// case they run one after another in key order (the canonical order).
template <class Task, class Perform>
void run_all_endpoints(const std::map<ModelId, std::vector<Task>>& groups,
                       const EndpointMap& endpoints, bool serial, Perform&& perform) {
    if (serial) {
        for (const auto& [id, tasks] : groups) {
            const EndpointConfig& cfg = endpoints.at(id);
            run_endpoint_tasks(cfg, tasks, true,
                               [&](httplib::Client& cli, RateLimiter& limiter, const Task& t) {
                                   perform(cli, cfg, limiter, t);
                               });
        }
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(groups.size());
    std::size_t slot = 0;
    for (const auto& [id, tasks] : groups) {
        const EndpointConfig& cfg = endpoints.at(id);
        std::exception_ptr& failure = failures[slot++];
        pool.emplace_back([&cfg, &tasks, &failure, &perform] {
            try {
                run_endpoint_tasks(cfg, tasks, false,
                                   [&](httplib::Client& cli, RateLimiter& limiter, const Task& t) {
                                       perform(cli, cfg, limiter, t);
                                   });
            } catch (...) {
                failure = std::current_exception();
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& failure : failures)
        if (failure) std::rethrow_exception(failure);
}

std::vector<ModelId> sorted_ids(const std::vector<ModelId>& ids) {
    std::vector<ModelId> out = ids;
    std::sort(out.begin(), out.end());
    return out;
}

void warn_missing(const std::string& what, const std::string& error) {
    std::cerr << "warning: " << what << " journaled as missing: " << error << '\n';
}

} // namespace

// --- config ------------------------------------------------------------------

std::string to_string(ImageTransport t) {
    switch (t) {
        case ImageTransport::Url: return "url";
        case ImageTransport::Base64: return "base64";
        case ImageTransport::Omit: return "omit";
    }
    throw ValidationError("unknown image transport");
}

ImageTransport image_transport_from_string(const std::string& s) {
    if (s == "url") return ImageTransport::Url;
    if (s == "base64") return ImageTransport::Base64;
    if (s == "omit") return ImageTransport::Omit;
    throw ValidationError("unknown image transport '" + s + "' (expected url, base64, or omit)");
}

void check_endpoint(const EndpointConfig& cfg) {
    if (cfg.base_url.empty()) fail_config("endpoint", "base_url is empty");
    if (cfg.model_name.empty()) fail_config("endpoint", "model_name is empty");
    if (cfg.max_parallel < 1) fail_config("endpoint", "max_parallel must be positive");
    if (cfg.requests_per_minute < 1) fail_config("endpoint", "requests_per_minute must be positive");
    if (cfg.max_retries < 0) fail_config("endpoint", "max_retries must be non-negative");
    if (!(cfg.temperature >= 0.0)) fail_config("endpoint", "temperature must be non-negative");
    if (!(cfg.top_p > 0.0 && cfg.top_p <= 1.0)) fail_config("endpoint", "top_p must be in (0, 1]");
}

json endpoint_to_json(const EndpointConfig& cfg) {
    return json{
        {"base_url", cfg.base_url},
        {"model_name", cfg.model_name},
        {"api_key_env", cfg.api_key_env},
        {"max_parallel", cfg.max_parallel},
        {"requests_per_minute", cfg.requests_per_minute},
        {"max_retries", cfg.max_retries},
        {"temperature", cfg.temperature},
        {"top_p", cfg.top_p},
        {"image_transport", to_string(cfg.image_transport)},
    };
}

EndpointConfig endpoint_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) fail_config(where, "endpoint must be a JSON object");
    EndpointConfig cfg;
    cfg.base_url = field_str(j, "base_url", where);
    cfg.model_name = field_str(j, "model_name", where);
    if (j.contains("api_key_env")) cfg.api_key_env = field_str(j, "api_key_env", where);
    if (j.contains("max_parallel")) cfg.max_parallel = field_int(j, "max_parallel", where);
    if (j.contains("requests_per_minute"))
        cfg.requests_per_minute = field_int(j, "requests_per_minute", where);
    if (j.contains("max_retries")) cfg.max_retries = field_int(j, "max_retries", where);
    if (j.contains("temperature")) cfg.temperature = field_num(j, "temperature", where);
    if (j.contains("top_p")) cfg.top_p = field_num(j, "top_p", where);
    if (j.contains("image_transport"))
        cfg.image_transport = image_transport_from_string(field_str(j, "image_transport", where));
    check_endpoint(cfg);
    return cfg;
}

EndpointMap endpoints_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("endpoints: expected a JSON object keyed by model id");
    EndpointMap out;
    for (const auto& [key, value] : j.items())
        out.emplace(make_model_id(key), endpoint_from_json(value, "endpoints['" + key + "']"));
    if (out.empty()) throw ValidationError("endpoints: no endpoints defined");
    return out;
}

json endpoints_to_json(const EndpointMap& endpoints) {
    json out = json::object();
    for (const auto& [id, cfg] : endpoints) out[id.value] = endpoint_to_json(cfg);
    return out;
}

EndpointMap load_endpoints(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": malformed JSON: " + e.what());
    }
    return endpoints_from_json(j);
}

void save_endpoints(const EndpointMap& endpoints, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << endpoints_to_json(endpoints).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

// --- caption collection --------------------------------------------------------

namespace {

struct CaptionTask {
    ModelId generator;
    const ImageRef* image;
};

} // namespace

std::vector<CaptionRecord> collect_captions(const RunManifest& manifest,
                                            const EndpointMap& endpoints,
                                            const PromptBundle& bundle,
                                            const std::string& journal_path,
                                            const CollectOptions& options) {
    check_manifest(manifest);
    check_bundle(bundle);
    for (const ModelId& g : manifest.generators) {
        const auto it = endpoints.find(g);
        if (it == endpoints.end())
            throw ValidationError("no endpoint configured for generator " + g.value);
        check_endpoint(it->second);
        if (it->second.image_transport != ImageTransport::Omit)
            for (const ImageRef& img : manifest.images)
                if (img.source.empty())
                    throw ValidationError("image " + img.id + " has no source but " + g.value +
                                          " transmits images");
    }

    const std::set<CellKey> done =
        scan_journal(journal_path, [](const json& j, const std::string& where) {
            return CellKey{field_str(j, "generator", where), field_str(j, "image_id", where), "", ""};
        });

    std::map<ModelId, std::vector<CaptionTask>> groups;
    for (const ModelId& g : sorted_ids(manifest.generators))
        for (const ImageRef& img : manifest.images)
            if (!done.count({g.value, img.id, "", ""}))
                groups[g].push_back(CaptionTask{g, &img});

    Journal journal(journal_path);
    run_all_endpoints(groups, endpoints, options.serial,
                      [&](httplib::Client& cli, const EndpointConfig& cfg, RateLimiter& limiter,
                          const CaptionTask& t) {
                          std::string error;
                          std::string caption;
                          const bool ok = with_retries(cfg, [&] {
                              limiter.acquire();
                              const json req = build_request(cfg, bundle.generation_prompt, *t.image);
                              caption = extract_content(post_chat(cli, req));
                          }, error);
                          if (ok) {
                              journal.append(record_to_json(
                                  CaptionRecord{t.image->id, t.generator, caption, json::object()}));
                          } else {
                              journal.append(json{{"missing", true},
                                                  {"image_id", t.image->id},
                                                  {"generator", t.generator.value},
                                                  {"error", error}});
                              warn_missing("caption (" + t.generator.value + ", " + t.image->id + ")",
                                           error);
                          }
                      });

    return load_records<CaptionRecord>(journal_path);
}

// --- score collection ----------------------------------------------------------

namespace {

struct ScoreTask {
    ModelId generator;
    ModelId evaluator;
    const ImageRef* image;
    Setting setting;
    const std::string* caption;
};

} // namespace

std::vector<ScoreRecord> collect_scores(const RunManifest& manifest,
                                        const EndpointMap& endpoints,
                                        const PromptBundle& bundle,
                                        const std::vector<CaptionRecord>& captions,
                                        const std::string& journal_path,
                                        const CollectOptions& options) {
    check_manifest(manifest);
    check_bundle(bundle);
    for (const ModelId& e : manifest.evaluators) {
        const auto it = endpoints.find(e);
        if (it == endpoints.end())
            throw ValidationError("no endpoint configured for evaluator " + e.value);
        check_endpoint(it->second);
        if (it->second.image_transport != ImageTransport::Omit)
            for (const ImageRef& img : manifest.images)
                if (img.source.empty())
                    throw ValidationError("image " + img.id + " has no source but " + e.value +
                                          " transmits images");
    }
    const bool wants_refs = std::count(manifest.settings.begin(), manifest.settings.end(),
                                       Setting::ReferenceBased) > 0;
    if (wants_refs)
        for (const ImageRef& img : manifest.images) {
            const auto it = manifest.references.find(img.id);
            if (it == manifest.references.end() || it->second.empty())
                throw ValidationError("image " + img.id +
                                      " has no reference captions for the ref-based setting");
        }

    std::map<std::pair<std::string, std::string>, const std::string*> caption_of;
    for (const CaptionRecord& c : captions)
        if (!caption_of.emplace(std::make_pair(c.generator.value, c.image_id), &c.caption).second)
            throw ValidationError("duplicate caption for (" + c.generator.value + ", " + c.image_id + ")");

    const std::set<CellKey> done =
        scan_journal(journal_path, [](const json& j, const std::string& where) {
            return CellKey{field_str(j, "evaluator", where), field_str(j, "setting", where),
                           field_str(j, "generator", where), field_str(j, "image_id", where)};
        });

    std::map<ModelId, std::vector<ScoreTask>> groups;
    std::size_t pending = 0;
    std::size_t captionless = 0;
    std::set<std::string> captionless_pairs;
    for (const ModelId& e : sorted_ids(manifest.evaluators))
        for (const Setting s : manifest.settings)
            for (const ModelId& g : sorted_ids(manifest.generators))
                for (const ImageRef& img : manifest.images) {
                    if (done.count({e.value, to_string(s), g.value, img.id})) continue;
                    ++pending;
                    const auto cap = caption_of.find({g.value, img.id});
                    if (cap == caption_of.end()) {
                        ++captionless;
                        captionless_pairs.insert("(" + g.value + ", " + img.id + ")");
                        continue;
                    }
                    groups[e].push_back(ScoreTask{g, e, &img, s, cap->second});
                }
    if (pending > 0 && captionless == pending)
        throw ValidationError("captions cover none of the pending cells");
    for (const std::string& pair : captionless_pairs)
        std::cerr << "warning: no caption for " << pair << ", its cells stay uncollected\n";

    Journal journal(journal_path);
    run_all_endpoints(groups, endpoints, options.serial,
                      [&](httplib::Client& cli, const EndpointConfig& cfg, RateLimiter& limiter,
                          const ScoreTask& t) {
                          const std::optional<std::vector<std::string>> refs =
                              t.setting == Setting::ReferenceBased
                                  ? std::optional(manifest.references.at(t.image->id))
                                  : std::nullopt;
                          const std::string prompt =
                              render_prompt(bundle, t.setting, *t.caption, refs);
                          std::string error;
                          int raw = 0;
                          std::string reply;
                          const bool ok = with_retries(cfg, [&] {
                              limiter.acquire();
                              const json req = build_request(cfg, prompt, *t.image);
                              reply = extract_content(post_chat(cli, req));
                              raw = parse_score(reply);
                          }, error);
                          if (ok) {
                              ScoreRecord rec;
                              rec.image_id = t.image->id;
                              rec.generator = t.generator;
                              rec.evaluator = t.evaluator;
                              rec.setting = t.setting;
                              rec.raw_score = raw;
                              rec.score = raw / 100.0;
                              rec.raw_response = reply;
                              journal.append(record_to_json(rec));
                          } else {
                              journal.append(json{{"missing", true},
                                                  {"image_id", t.image->id},
                                                  {"generator", t.generator.value},
                                                  {"evaluator", t.evaluator.value},
                                                  {"setting", to_string(t.setting)},
                                                  {"error", error}});
                              warn_missing("score (" + t.generator.value + ", " + t.evaluator.value +
                                               ", " + t.image->id + ", " + to_string(t.setting) + ")",
                                           error);
                          }
                      });

    return load_records<ScoreRecord>(journal_path);
}

} // namespace philautia
