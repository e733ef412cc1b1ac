#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "patchcue/geometry.hpp"

// Prompt builders and response parsers for the three annotation stages
// (cue extraction, cue grounding, reasoning construction), plus the
// transport boundary they talk through. Templates live in assets/prompts/
// and are embedded at build time; a checksum test pins their bytes.

namespace patchcue {

enum class TemplateId { extraction, grounding, reasoning };

/// The raw template text, placeholders unfilled.
std::string_view prompt_template(TemplateId id);

/// FNV-1a 64-bit. Used to key mock-transport fixtures and to pin the
/// template assets.
std::uint64_t fnv1a64(std::string_view data);

struct PromptRequest {
    TemplateId template_id = TemplateId::extraction;
    std::string rendered_text;
    std::string image_ref;  // opaque handle, e.g. a URL; may be empty
};

/// Fills {question} and {answer}. Throws std::invalid_argument when either
/// is empty or whitespace-only.
PromptRequest build_extraction_prompt(std::string_view question,
                                      std::string_view answer,
                                      std::string_view image_ref = {});

/// Fills {cues} with one <label> line per entry, order preserved. Label
/// text is entity-escaped (&, <, >) so it cannot inject tags. Throws
/// std::invalid_argument unless 1 to 5 labels are given.
PromptRequest build_grounding_prompt(const std::vector<std::string>& labels,
                                     std::string_view image_ref = {});

struct LabeledBox {
    std::string label;
    PixelBBox box;  // must be normalized
};

/// Fills {question}, {answer} and {clues}; the two worked examples in the
/// template stay verbatim. Throws std::invalid_argument unless 1 to 5 cues
/// are given, each with a normalized box in [0, 1].
PromptRequest build_reasoning_prompt(std::string_view question,
                                     std::string_view answer,
                                     const std::vector<LabeledBox>& cues,
                                     std::string_view image_ref = {});

struct LabelParse {
    std::vector<std::string> labels;
    std::vector<std::string> diagnostics;
};

/// Collects <label>...</label> payloads in order, ignoring surrounding
/// prose. Keeps at most 5, with a diagnostic on overflow or when nothing
/// matched. Entity escapes are reversed, so builder output round-trips.
LabelParse parse_label_response(std::string_view raw);

struct BBoxParse {
    bool ok = false;
    std::vector<PixelBBox> boxes;  // normalized, exactly `expected` on success
    std::string error;
    std::vector<std::string> diagnostics;
};

/// Collects <bbox>[x_min, y_min, x_max, y_max]</bbox> tags in order.
/// Values are clamped to [0, 1] with a diagnostic. Fails (ok=false) on a
/// count mismatch, malformed numbers, or min > max after clamping; the
/// caller rejects the sample. Throws std::invalid_argument when expected
/// is 0.
BBoxParse parse_bbox_response(std::string_view raw, std::size_t expected);

/// Request/response boundary to an annotator model endpoint.
class Transport {
  public:
    virtual ~Transport() = default;
    virtual std::string send(const PromptRequest& request) = 0;
    /// Concurrency cap honored by pipeline drivers.
    virtual int max_in_flight() const { return 4; }
};

/// Deterministic transport for tests: canned responses keyed by a hash of
/// the request. Unknown requests throw std::out_of_range.
class MockTransport final : public Transport {
  public:
    static std::string request_key(const PromptRequest& request);

    void add_response(const PromptRequest& request, std::string response);
    /// Loads a JSON object file mapping request keys to responses.
    void load_fixtures(const std::string& path);

    std::string send(const PromptRequest& request) override;

  private:
    std::map<std::string, std::string> responses_;
};

struct AnnotatorConfig {
    std::string endpoint;  // scheme://host[:port]
    std::string api_key;
    std::string model;
    int timeout_secs = 30;
    int max_retries = 3;
    int backoff_ms = 250;  // doubles per retry
};

/// Reads ANNOTATOR_ENDPOINT, ANNOTATOR_API_KEY, ANNOTATOR_MODEL and
/// ANNOTATOR_TIMEOUT_SECS. Throws std::invalid_argument on an unparseable
/// timeout.
AnnotatorConfig annotator_config_from_env();

/// Talks to any chat-completion-style endpoint: POST
/// {endpoint}/v1/chat/completions, returns choices[0].message.content.
/// Retries on transport errors with exponential backoff. Throws
/// std::runtime_error when all attempts fail or the response shape is
/// wrong.
class HttpChatTransport final : public Transport {
  public:
    explicit HttpChatTransport(AnnotatorConfig config);
    std::string send(const PromptRequest& request) override;

  private:
    AnnotatorConfig config_;
};

}  // namespace patchcue
