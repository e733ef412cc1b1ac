#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "patchcue/geometry.hpp"

// Parser and serializer for structured reasoning traces:
//
//   <think> ...prose... <cue>[[r1,c1],[r2,c2]]</cue> ...prose... </think>
//   <answer> ... </answer>
//
// Exactly one think block followed by exactly one answer block; cue tags
// appear only inside think; only whitespace is allowed outside the blocks.
// The full grammar, including the accepted cue payload syntaxes, is written
// up in docs/trace_format.md.

namespace patchcue {

/// One <cue> tag: its parsed patch box, the verbatim payload text, the byte
/// range of the whole tag in the source string, and the insertion point
/// within the surrounding think text (used when re-rendering).
struct CueSpan {
    PatchBBox patch_bbox;
    std::string raw_text;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t think_offset = 0;
};

struct ReasoningTrace {
    std::string think_text;  // cue tags elided
    std::vector<CueSpan> cues;
    std::string answer_text;
    bool well_formed = false;
    std::vector<std::string> diagnostics;
};

/// Total function: never fails. Malformed input yields well_formed=false,
/// best-effort extractions, and one diagnostic per grammar violation.
ReasoningTrace parse_trace(std::string_view text);

/// 1 iff parse_trace(text).well_formed.
int format_reward(std::string_view text);

/// The parsed cue boxes in source order (malformed payloads were already
/// dropped at parse time, with diagnostics).
std::vector<PatchBBox> extract_cues(const ReasoningTrace& trace);

/// Canonical serialization. parse_trace(render_trace(t)) reproduces t's
/// cues, answer and well-formedness. Throws std::invalid_argument for
/// traces that are not well-formed or whose text would collide with the tag
/// vocabulary.
std::string render_trace(const ReasoningTrace& trace);

}  // namespace patchcue
