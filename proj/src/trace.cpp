#include "patchcue/trace.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <stdexcept>

namespace patchcue {
namespace {

enum class Tag {
    None,
    ThinkOpen,
    ThinkClose,
    CueOpen,
    CueClose,
    AnswerOpen,
    AnswerClose,
};

struct TagLiteral {
    Tag tag;
    std::string_view text;
};

// Tag vocabulary is case-sensitive; anything else starting with '<' is
// ordinary text.
constexpr TagLiteral kTags[] = {
    {Tag::ThinkOpen, "<think>"},   {Tag::ThinkClose, "</think>"},
    {Tag::CueOpen, "<cue>"},       {Tag::CueClose, "</cue>"},
    {Tag::AnswerOpen, "<answer>"}, {Tag::AnswerClose, "</answer>"},
};

Tag match_tag(std::string_view text, std::size_t pos, std::size_t* len) {
    for (const auto& t : kTags) {
        if (text.compare(pos, t.text.size(), t.text) == 0) {
            *len = t.text.size();
            return t.tag;
        }
    }
    *len = 1;
    return Tag::None;
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
}

bool all_space(std::string_view s) {
    return std::all_of(s.begin(), s.end(), is_space);
}

void skip_space(std::string_view s, std::size_t& i) {
    while (i < s.size() && is_space(s[i])) ++i;
}

bool parse_uint(std::string_view s, std::size_t& i, long long* out) {
    skip_space(s, i);
    if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i])))
        return false;
    long long value = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
        value = value * 10 + (s[i] - '0');
        if (value > 1'000'000'000) return false;
        ++i;
    }
    *out = value;
    return true;
}

bool expect(std::string_view s, std::size_t& i, char c) {
    skip_space(s, i);
    if (i >= s.size() || s[i] != c) return false;
    ++i;
    return true;
}

// Accepts the canonical form [[r1,c1],[r2,c2]] and the lenient forms
// (r1,c1),(r2,c2) and (r1,c1)-(r2,c2), with arbitrary whitespace between
// tokens. Coordinates are unsigned integers; r1<=r2 and c1<=c2 must hold.
std::optional<PatchBBox> parse_cue_payload(std::string_view s) {
    std::size_t i = 0;
    skip_space(s, i);
    if (i >= s.size()) return std::nullopt;

    char open, close;
    bool bracketed;
    if (s[i] == '[') {
        bracketed = true;
        open = '[';
        close = ']';
        ++i;
    } else if (s[i] == '(') {
        bracketed = false;
        open = '(';
        close = ')';
    } else {
        return std::nullopt;
    }

    long long v[4];
    for (int pair = 0; pair < 2; ++pair) {
        if (!expect(s, i, open)) return std::nullopt;
        if (!parse_uint(s, i, &v[pair * 2])) return std::nullopt;
        if (!expect(s, i, ',')) return std::nullopt;
        if (!parse_uint(s, i, &v[pair * 2 + 1])) return std::nullopt;
        if (!expect(s, i, close)) return std::nullopt;
        if (pair == 0) {
            skip_space(s, i);
            if (i >= s.size() || (s[i] != ',' && s[i] != '-'))
                return std::nullopt;
            ++i;
        }
    }
    if (bracketed && !expect(s, i, ']')) return std::nullopt;
    skip_space(s, i);
    if (i != s.size()) return std::nullopt;
    if (v[0] > v[2] || v[1] > v[3]) return std::nullopt;

    PatchBBox box;
    box.r1 = v[0];
    box.c1 = v[1];
    box.r2 = v[2];
    box.c2 = v[3];
    return box;
}

enum class State { Outside, Think, Cue, Answer };

struct Parser {
    std::string_view text;
    ReasoningTrace out;
    State state = State::Outside;
    State cue_outer = State::Outside;  // state to return to at </cue>
    bool cue_recorded = true;          // false for cues opened outside think
    std::size_t cue_begin = 0;         // byte offset of '<' in "<cue>"
    std::size_t cue_payload_begin = 0;
    int think_count = 0;
    int answer_count = 0;
    bool in_first_answer = false;

    void diag(std::string message, std::size_t at) {
        out.diagnostics.push_back(std::move(message) + " at byte " +
                                  std::to_string(at));
    }

    void close_cue(std::size_t payload_end, std::size_t tag_end) {
        std::string_view payload =
            text.substr(cue_payload_begin, payload_end - cue_payload_begin);
        auto box = parse_cue_payload(payload);
        if (!box) {
            diag("unparseable cue payload", cue_begin);
        } else if (cue_recorded) {
            CueSpan span;
            span.patch_bbox = *box;
            span.raw_text = std::string(payload);
            span.begin = cue_begin;
            span.end = tag_end;
            span.think_offset = out.think_text.size();
            out.cues.push_back(std::move(span));
        }
        state = cue_outer;
    }

    void run() {
        std::size_t pos = 0;
        while (pos < text.size()) {
            if (text[pos] != '<') {
                std::size_t next = text.find('<', pos);
                if (next == std::string_view::npos) next = text.size();
                on_text(pos, next);
                pos = next;
                continue;
            }
            std::size_t len = 0;
            Tag tag = match_tag(text, pos, &len);
            if (tag == Tag::None) {
                on_text(pos, pos + 1);
                ++pos;
                continue;
            }
            if (on_tag(tag, pos, pos + len)) pos += len;
            // otherwise the tag is reprocessed in the new state
        }
        finish();
    }

    void on_text(std::size_t begin, std::size_t end) {
        std::string_view chunk = text.substr(begin, end - begin);
        switch (state) {
            case State::Outside:
                if (!all_space(chunk)) diag("stray text outside blocks", begin);
                break;
            case State::Think:
                out.think_text.append(chunk);
                break;
            case State::Cue:
                break;  // payload is sliced out of the source at </cue>
            case State::Answer:
                if (in_first_answer) out.answer_text.append(chunk);
                break;
        }
    }

    // Returns true when the tag was consumed, false to reprocess it after a
    // forced block close.
    bool on_tag(Tag tag, std::size_t begin, std::size_t end) {
        switch (state) {
            case State::Outside:
                switch (tag) {
                    case Tag::ThinkOpen:
                        if (think_count > 0) diag("multiple think blocks", begin);
                        if (answer_count > 0)
                            diag("think block after answer block", begin);
                        ++think_count;
                        state = State::Think;
                        return true;
                    case Tag::AnswerOpen:
                        if (answer_count > 0)
                            diag("multiple answer blocks", begin);
                        if (think_count == 0)
                            diag("answer block before think block", begin);
                        in_first_answer = answer_count == 0;
                        ++answer_count;
                        state = State::Answer;
                        return true;
                    case Tag::CueOpen:
                        diag("cue outside think", begin);
                        open_cue(begin, end, State::Outside, false);
                        return true;
                    case Tag::ThinkClose:
                        diag("unbalanced think tag", begin);
                        return true;
                    case Tag::CueClose:
                        diag("unbalanced cue tag", begin);
                        return true;
                    case Tag::AnswerClose:
                        diag("unbalanced answer tag", begin);
                        return true;
                    default:
                        return true;
                }
            case State::Think:
                switch (tag) {
                    case Tag::ThinkClose:
                        state = State::Outside;
                        return true;
                    case Tag::CueOpen:
                        open_cue(begin, end, State::Think, true);
                        return true;
                    case Tag::ThinkOpen:
                        diag("unbalanced think tag", begin);
                        return true;
                    case Tag::CueClose:
                        diag("unbalanced cue tag", begin);
                        return true;
                    case Tag::AnswerOpen:
                        // e.g. "<think>...<answer>": the think block was
                        // never closed.
                        diag("unbalanced think tag", begin);
                        state = State::Outside;
                        return false;
                    case Tag::AnswerClose:
                        diag("unbalanced answer tag", begin);
                        return true;
                    default:
                        return true;
                }
            case State::Cue:
                if (tag == Tag::CueClose) {
                    close_cue(begin, end);
                    return true;
                }
                // Any other tag interrupts the cue; discard it and let the
                // outer state handle the tag.
                diag("unbalanced cue tag", cue_begin);
                state = cue_outer;
                return false;
            case State::Answer:
                if (tag == Tag::AnswerClose) {
                    state = State::Outside;
                    in_first_answer = false;
                    return true;
                }
                if (tag == Tag::AnswerOpen) {
                    diag("unbalanced answer tag", begin);
                    return true;
                }
                diag("unbalanced answer tag", begin);
                state = State::Outside;
                in_first_answer = false;
                return false;
        }
        return true;
    }

    void open_cue(std::size_t begin, std::size_t end, State outer,
                  bool recorded) {
        state = State::Cue;
        cue_outer = outer;
        cue_recorded = recorded;
        cue_begin = begin;
        cue_payload_begin = end;
    }

    void finish() {
        if (state == State::Cue) {
            diag("unbalanced cue tag", cue_begin);
            state = cue_outer;
        }
        if (state == State::Think) diag("unbalanced think tag", text.size());
        if (state == State::Answer) diag("unbalanced answer tag", text.size());
        if (think_count == 0) diag("missing think block", text.size());
        if (answer_count == 0) diag("missing answer block", text.size());
        out.well_formed = out.diagnostics.empty();
    }
};

bool contains_tag(std::string_view s) {
    for (const auto& t : kTags)
        if (s.find(t.text) != std::string_view::npos) return true;
    return false;
}

}  // namespace

ReasoningTrace parse_trace(std::string_view text) {
    Parser p;
    p.text = text;
    p.run();
    return std::move(p.out);
}

int format_reward(std::string_view text) {
    return parse_trace(text).well_formed ? 1 : 0;
}

std::vector<PatchBBox> extract_cues(const ReasoningTrace& trace) {
    std::vector<PatchBBox> boxes;
    boxes.reserve(trace.cues.size());
    for (const auto& cue : trace.cues) boxes.push_back(cue.patch_bbox);
    return boxes;
}

std::string render_trace(const ReasoningTrace& trace) {
    if (!trace.well_formed)
        throw std::invalid_argument("render_trace: trace is not well-formed");
    if (contains_tag(trace.think_text) || contains_tag(trace.answer_text))
        throw std::invalid_argument(
            "render_trace: text contains a reserved tag");

    std::size_t prev = 0;
    for (const auto& cue : trace.cues) {
        if (cue.think_offset < prev || cue.think_offset > trace.think_text.size())
            throw std::invalid_argument(
                "render_trace: cue offsets are not monotone within think text");
        prev = cue.think_offset;
        const auto& b = cue.patch_bbox;
        if (b.r1 < 0 || b.c1 < 0 || b.r1 > b.r2 || b.c1 > b.c2)
            throw std::invalid_argument("render_trace: invalid cue box");
    }

    std::string result = "<think>";
    std::size_t cursor = 0;
    for (const auto& cue : trace.cues) {
        result.append(trace.think_text, cursor, cue.think_offset - cursor);
        cursor = cue.think_offset;
        const auto& b = cue.patch_bbox;
        result += "<cue>[[" + std::to_string(b.r1) + "," +
                  std::to_string(b.c1) + "],[" + std::to_string(b.r2) + "," +
                  std::to_string(b.c2) + "]]</cue>";
    }
    result.append(trace.think_text, cursor,
                  trace.think_text.size() - cursor);
    result += "</think><answer>";
    result += trace.answer_text;
    result += "</answer>";
    return result;
}

}  // namespace patchcue
