#include "patchcue/annotation.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace patchcue {
namespace detail {
extern const unsigned char kExtractionPrompt[];
extern const std::size_t kExtractionPromptSize;
extern const unsigned char kGroundingPrompt[];
extern const std::size_t kGroundingPromptSize;
extern const unsigned char kReasoningPrompt[];
extern const std::size_t kReasoningPromptSize;
}  // namespace detail

namespace {

using nlohmann::json;

std::string_view template_name(TemplateId id) {
    switch (id) {
        case TemplateId::extraction: return "extraction";
        case TemplateId::grounding: return "grounding";
        case TemplateId::reasoning: return "reasoning";
    }
    return "unknown";
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isspace(c) != 0;
    });
}

// Single pass so placeholder-shaped text inside substituted values is never
// re-expanded.
std::string render(std::string_view tmpl,
                   const std::vector<std::pair<std::string_view,
                                               std::string_view>>& subs) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        std::size_t brace = tmpl.find('{', pos);
        if (brace == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, brace - pos));
        bool matched = false;
        for (const auto& [key, value] : subs) {
            if (tmpl.compare(brace, key.size(), key) == 0) {
                out.append(value);
                pos = brace + key.size();
                matched = true;
                break;
            }
        }
        if (!matched) {
            out.push_back('{');
            pos = brace + 1;
        }
    }
    return out;
}

std::string escape_label(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string unescape_label(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t pos = 0;
    while (pos < s.size()) {
        if (s[pos] == '&') {
            if (s.compare(pos, 4, "&lt;") == 0) {
                out.push_back('<');
                pos += 4;
                continue;
            }
            if (s.compare(pos, 4, "&gt;") == 0) {
                out.push_back('>');
                pos += 4;
                continue;
            }
            if (s.compare(pos, 5, "&amp;") == 0) {
                out.push_back('&');
                pos += 5;
                continue;
            }
        }
        out.push_back(s[pos++]);
    }
    return out;
}

std::string format_coord(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string format_bbox(const PixelBBox& b) {
    return "[" + format_coord(b.x1) + ", " + format_coord(b.y1) + ", " +
           format_coord(b.x2) + ", " + format_coord(b.y2) + "]";
}

// Payloads of <tag>...</tag> occurrences, in order, prose ignored.
std::vector<std::string_view> tag_payloads(std::string_view raw,
                                           std::string_view open,
                                           std::string_view close) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t b = raw.find(open, pos);
        if (b == std::string_view::npos) break;
        std::size_t e = raw.find(close, b + open.size());
        if (e == std::string_view::npos) break;
        out.push_back(raw.substr(b + open.size(), e - b - open.size()));
        pos = e + close.size();
    }
    return out;
}

bool parse_four_doubles(std::string_view s, double out[4]) {
    std::size_t i = 0;
    auto skip = [&] {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
            ++i;
    };
    skip();
    if (i >= s.size() || s[i] != '[') return false;
    ++i;
    for (int k = 0; k < 4; ++k) {
        skip();
        auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + s.size(),
                                         out[k]);
        if (ec != std::errc()) return false;
        i = static_cast<std::size_t>(ptr - s.data());
        skip();
        const char sep = k == 3 ? ']' : ',';
        if (i >= s.size() || s[i] != sep) return false;
        ++i;
    }
    skip();
    return i == s.size();
}

}  // namespace

std::string_view prompt_template(TemplateId id) {
    switch (id) {
        case TemplateId::extraction:
            return {reinterpret_cast<const char*>(detail::kExtractionPrompt),
                    detail::kExtractionPromptSize};
        case TemplateId::grounding:
            return {reinterpret_cast<const char*>(detail::kGroundingPrompt),
                    detail::kGroundingPromptSize};
        case TemplateId::reasoning:
            return {reinterpret_cast<const char*>(detail::kReasoningPrompt),
                    detail::kReasoningPromptSize};
    }
    throw std::invalid_argument("prompt_template: unknown template id");
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

PromptRequest build_extraction_prompt(std::string_view question,
                                      std::string_view answer,
                                      std::string_view image_ref) {
    if (blank(question))
        throw std::invalid_argument("build_extraction_prompt: empty question");
    if (blank(answer))
        throw std::invalid_argument("build_extraction_prompt: empty answer");
    PromptRequest req;
    req.template_id = TemplateId::extraction;
    req.rendered_text = render(prompt_template(TemplateId::extraction),
                               {{"{question}", question}, {"{answer}", answer}});
    req.image_ref = std::string(image_ref);
    return req;
}

PromptRequest build_grounding_prompt(const std::vector<std::string>& labels,
                                     std::string_view image_ref) {
    if (labels.empty() || labels.size() > 5)
        throw std::invalid_argument(
            "build_grounding_prompt: need 1 to 5 labels");
    std::string cue_lines;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i > 0) cue_lines += "\n";
        cue_lines += "<label>" + escape_label(labels[i]) + "</label>";
    }
    PromptRequest req;
    req.template_id = TemplateId::grounding;
    req.rendered_text = render(prompt_template(TemplateId::grounding),
                               {{"{cues}", cue_lines}});
    req.image_ref = std::string(image_ref);
    return req;
}

PromptRequest build_reasoning_prompt(std::string_view question,
                                     std::string_view answer,
                                     const std::vector<LabeledBox>& cues,
                                     std::string_view image_ref) {
    if (blank(question))
        throw std::invalid_argument("build_reasoning_prompt: empty question");
    if (blank(answer))
        throw std::invalid_argument("build_reasoning_prompt: empty answer");
    if (cues.empty() || cues.size() > 5)
        throw std::invalid_argument("build_reasoning_prompt: need 1 to 5 cues");

    std::string cue_lines;
    for (std::size_t i = 0; i < cues.size(); ++i) {
        const auto& [label, box] = cues[i];
        if (!box.normalized || box.x1 < 0 || box.y1 < 0 || box.x2 > 1.0 ||
            box.y2 > 1.0 || box.x1 > box.x2 || box.y1 > box.y2)
            throw std::invalid_argument(
                "build_reasoning_prompt: cue boxes must be normalized");
        if (i > 0) cue_lines += "\n";
        cue_lines += "<label>" + escape_label(label) + "</label> <bbox>" +
                     format_bbox(box) + "</bbox>";
    }
    PromptRequest req;
    req.template_id = TemplateId::reasoning;
    req.rendered_text = render(prompt_template(TemplateId::reasoning),
                               {{"{question}", question},
                                {"{answer}", answer},
                                {"{clues}", cue_lines}});
    req.image_ref = std::string(image_ref);
    return req;
}

LabelParse parse_label_response(std::string_view raw) {
    LabelParse out;
    auto payloads = tag_payloads(raw, "<label>", "</label>");
    if (payloads.empty()) {
        out.diagnostics.push_back("no labels found");
        return out;
    }
    if (payloads.size() > 5) {
        out.diagnostics.push_back("response contained " +
                                  std::to_string(payloads.size()) +
                                  " labels; keeping the first 5");
        payloads.resize(5);
    }
    for (auto p : payloads) out.labels.push_back(unescape_label(p));
    return out;
}

BBoxParse parse_bbox_response(std::string_view raw, std::size_t expected) {
    if (expected == 0)
        throw std::invalid_argument("parse_bbox_response: expected must be >= 1");
    BBoxParse out;
    auto payloads = tag_payloads(raw, "<bbox>", "</bbox>");
    if (payloads.size() != expected) {
        out.error = "expected " + std::to_string(expected) +
                    " bbox tags, found " + std::to_string(payloads.size());
        return out;
    }
    for (std::size_t i = 0; i < payloads.size(); ++i) {
        double v[4];
        if (!parse_four_doubles(payloads[i], v)) {
            out.error = "malformed bbox at index " + std::to_string(i);
            out.boxes.clear();
            return out;
        }
        bool clamped = false;
        for (double& x : v) {
            const double c = std::clamp(x, 0.0, 1.0);
            if (c != x) clamped = true;
            x = c;
        }
        if (clamped)
            out.diagnostics.push_back("bbox " + std::to_string(i) +
                                      ": values clamped to [0, 1]");
        if (v[0] > v[2] || v[1] > v[3]) {
            out.error = "bbox " + std::to_string(i) +
                        ": min exceeds max after clamping";
            out.boxes.clear();
            return out;
        }
        PixelBBox box;
        box.x1 = v[0];
        box.y1 = v[1];
        box.x2 = v[2];
        box.y2 = v[3];
        box.normalized = true;
        out.boxes.push_back(box);
    }
    out.ok = true;
    return out;
}

std::string MockTransport::request_key(const PromptRequest& request) {
    std::string material;
    material += template_name(request.template_id);
    material += '\n';
    material += request.rendered_text;
    material += '\x1f';
    material += request.image_ref;
    const std::uint64_t h = fnv1a64(material);
    char buf[17];
    for (int i = 0; i < 16; ++i)
        buf[i] = "0123456789abcdef"[(h >> (60 - 4 * i)) & 0xf];
    buf[16] = '\0';
    return std::string(buf, 16);
}

void MockTransport::add_response(const PromptRequest& request,
                                 std::string response) {
    responses_[request_key(request)] = std::move(response);
}

void MockTransport::load_fixtures(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("mock transport: cannot open fixture file '" +
                                 path + "'");
    json doc = json::parse(in);
    if (!doc.is_object())
        throw std::runtime_error(
            "mock transport: fixture file must hold a JSON object");
    for (auto& [key, value] : doc.items())
        responses_[key] = value.get<std::string>();
}

std::string MockTransport::send(const PromptRequest& request) {
    const std::string key = request_key(request);
    auto it = responses_.find(key);
    if (it == responses_.end())
        throw std::out_of_range("mock transport: no fixture for request key " +
                                key);
    return it->second;
}

AnnotatorConfig annotator_config_from_env() {
    AnnotatorConfig config;
    if (const char* v = std::getenv("ANNOTATOR_ENDPOINT")) config.endpoint = v;
    if (const char* v = std::getenv("ANNOTATOR_API_KEY")) config.api_key = v;
    if (const char* v = std::getenv("ANNOTATOR_MODEL")) config.model = v;
    if (const char* v = std::getenv("ANNOTATOR_TIMEOUT_SECS")) {
        int secs = 0;
        auto [ptr, ec] = std::from_chars(v, v + std::char_traits<char>::length(v),
                                         secs);
        if (ec != std::errc() || *ptr != '\0' || secs <= 0)
            throw std::invalid_argument(
                "ANNOTATOR_TIMEOUT_SECS must be a positive integer");
        config.timeout_secs = secs;
    }
    return config;
}

HttpChatTransport::HttpChatTransport(AnnotatorConfig config)
    : config_(std::move(config)) {
    if (config_.endpoint.empty())
        throw std::invalid_argument("http transport: endpoint is required");
}

std::string HttpChatTransport::send(const PromptRequest& request) {
    json content;
    if (request.image_ref.empty()) {
        content = request.rendered_text;
    } else {
        content = json::array(
            {{{"type", "text"}, {"text", request.rendered_text}},
             {{"type", "image_url"},
              {"image_url", {{"url", request.image_ref}}}}});
    }
    json body;
    body["model"] = config_.model;
    body["messages"] = json::array({{{"role", "user"}, {"content", content}}});
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(
                config_.backoff_ms << (attempt - 1)));

        httplib::Client client(config_.endpoint);
        client.set_connection_timeout(config_.timeout_secs, 0);
        client.set_read_timeout(config_.timeout_secs, 0);
        client.set_write_timeout(config_.timeout_secs, 0);

        auto res = client.Post("/v1/chat/completions", headers, payload,
                               "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status);
            // Client errors other than rate limiting will not heal on retry.
            if (res->status >= 400 && res->status < 500 && res->status != 429)
                break;
            continue;
        }
        json doc = json::parse(res->body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("choices") ||
            !doc["choices"].is_array() || doc["choices"].empty() ||
            !doc["choices"][0].contains("message") ||
            !doc["choices"][0]["message"].contains("content") ||
            !doc["choices"][0]["message"]["content"].is_string())
            throw std::runtime_error(
                "annotator response missing choices[0].message.content");
        return doc["choices"][0]["message"]["content"].get<std::string>();
    }
    throw std::runtime_error("annotator request failed: " + last_error);
}

}  // namespace patchcue
