#pragma once

#include "philautia/prompts.hpp"
#include "philautia/records.hpp"

#include <map>
#include <string>
#include <vector>

namespace philautia {

// How the image reaches the endpoint: as its source URL, inlined as a base64
// data URI read from the source path, or left out entirely.
enum class ImageTransport {
    Url,
    Base64,
    Omit,
};

std::string to_string(ImageTransport t);
ImageTransport image_transport_from_string(const std::string& s);

// One chat-completion endpoint serving one model.
struct EndpointConfig {
    std::string base_url;        // e.g. "http://127.0.0.1:8080"
    std::string model_name;      // wire-level model identifier
    std::string api_key_env;     // env var holding the bearer token; empty = none
    int max_parallel = 1;        // in-flight request cap
    int requests_per_minute = 60;
    int max_retries = 3;         // consecutive failures before the cell goes missing
    double temperature = 1.0;    // judging runs sample at temperature and top-p 1
    double top_p = 1.0;
    ImageTransport image_transport = ImageTransport::Url;
};

void check_endpoint(const EndpointConfig& cfg);

json endpoint_to_json(const EndpointConfig& cfg);
EndpointConfig endpoint_from_json(const json& j, const std::string& where);

// Model id -> endpoint. Keys must cover whichever axis a collection run uses.
using EndpointMap = std::map<ModelId, EndpointConfig>;

EndpointMap endpoints_from_json(const json& j);
json endpoints_to_json(const EndpointMap& endpoints);
EndpointMap load_endpoints(const std::string& path);
void save_endpoints(const EndpointMap& endpoints, const std::string& path);

struct CollectOptions {
    // Serial mode sends one request at a time in canonical order (evaluator,
    // setting, generator, image), so the journal is byte-reproducible.
    bool serial = false;
};

// Asks every generator endpoint to caption every manifest image, appending
// CaptionRecords to the journal. Already-journaled (generator, image) pairs
// are skipped, so reruns are idempotent and interrupted runs resume. Cells
// that exhaust their retries are journaled as missing markers. Returns the
// journal's surviving records.
std::vector<CaptionRecord> collect_captions(const RunManifest& manifest,
                                            const EndpointMap& endpoints,
                                            const PromptBundle& bundle,
                                            const std::string& journal,
                                            const CollectOptions& options = {});

// Asks every evaluator endpoint to judge every caption under every manifest
// setting, appending ScoreRecords to the journal with the same resume,
// retry, and missing-marker behavior as collect_captions.
std::vector<ScoreRecord> collect_scores(const RunManifest& manifest,
                                        const EndpointMap& endpoints,
                                        const PromptBundle& bundle,
                                        const std::vector<CaptionRecord>& captions,
                                        const std::string& journal,
                                        const CollectOptions& options = {});

} // namespace philautia
