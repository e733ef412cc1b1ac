#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "patchcue/annotation.hpp"
#include "patchcue/geometry.hpp"
#include "patchcue/grpo.hpp"
#include "patchcue/hungarian.hpp"
#include "patchcue/pipeline.hpp"
#include "patchcue/reward.hpp"
#include "patchcue/trace.hpp"
#include "patchcue/version.hpp"

namespace py = pybind11;
using namespace patchcue;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Patch-grid visual-cue rewards, trace parsing and GRPO math";
    m.attr("__version__") = kVersion;
    m.attr("DEFAULT_PATCH_SIZE") = kDefaultPatchSize;
    m.attr("DEFAULT_TAU") = kDefaultTau;
    m.attr("DEFAULT_STD_FLOOR") = kDefaultStdFloor;

    py::class_<PatchGrid>(m, "PatchGrid")
        .def(py::init<>())
        .def_readwrite("image_height", &PatchGrid::image_height)
        .def_readwrite("image_width", &PatchGrid::image_width)
        .def_readwrite("patch_height", &PatchGrid::patch_height)
        .def_readwrite("patch_width", &PatchGrid::patch_width)
        .def("rows", &PatchGrid::rows)
        .def("cols", &PatchGrid::cols)
        .def("cell_count", &PatchGrid::cell_count)
        .def(py::self == py::self)
        .def("__repr__", [](const PatchGrid& g) {
            return "PatchGrid(" + std::to_string(g.image_height) + "x" +
                   std::to_string(g.image_width) + ", patch " +
                   std::to_string(g.patch_height) + "x" +
                   std::to_string(g.patch_width) + ")";
        });

    py::class_<PixelPoint>(m, "PixelPoint")
        .def(py::init<>())
        .def(py::init([](int x, int y) {
                 PixelPoint p;
                 p.x = x;
                 p.y = y;
                 return p;
             }),
             py::arg("x"), py::arg("y"))
        .def_readwrite("x", &PixelPoint::x)
        .def_readwrite("y", &PixelPoint::y);

    py::class_<PixelBBox>(m, "PixelBBox")
        .def(py::init<>())
        .def(py::init([](double x1, double y1, double x2, double y2,
                         bool normalized) {
                 PixelBBox b;
                 b.x1 = x1;
                 b.y1 = y1;
                 b.x2 = x2;
                 b.y2 = y2;
                 b.normalized = normalized;
                 return b;
             }),
             py::arg("x1"), py::arg("y1"), py::arg("x2"), py::arg("y2"),
             py::arg("normalized") = false)
        .def_readwrite("x1", &PixelBBox::x1)
        .def_readwrite("y1", &PixelBBox::y1)
        .def_readwrite("x2", &PixelBBox::x2)
        .def_readwrite("y2", &PixelBBox::y2)
        .def_readwrite("normalized", &PixelBBox::normalized)
        .def(py::self == py::self)
        .def("__repr__", [](const PixelBBox& b) {
            return "PixelBBox(" + std::to_string(b.x1) + ", " +
                   std::to_string(b.y1) + ", " + std::to_string(b.x2) + ", " +
                   std::to_string(b.y2) + (b.normalized ? ", normalized" : "") +
                   ")";
        });

    py::class_<PatchCoord>(m, "PatchCoord")
        .def(py::init<>())
        .def(py::init([](int r, int c) {
                 PatchCoord p;
                 p.r = r;
                 p.c = c;
                 return p;
             }),
             py::arg("r"), py::arg("c"))
        .def_readwrite("r", &PatchCoord::r)
        .def_readwrite("c", &PatchCoord::c)
        .def(py::self == py::self)
        .def(py::self < py::self)
        .def("__repr__", [](const PatchCoord& p) {
            return "PatchCoord(" + std::to_string(p.r) + ", " +
                   std::to_string(p.c) + ")";
        });

    py::class_<PatchBBox>(m, "PatchBBox")
        .def(py::init<>())
        .def(py::init([](int r1, int c1, int r2, int c2) {
                 PatchBBox b;
                 b.r1 = r1;
                 b.c1 = c1;
                 b.r2 = r2;
                 b.c2 = c2;
                 return b;
             }),
             py::arg("r1"), py::arg("c1"), py::arg("r2"), py::arg("c2"))
        .def_readwrite("r1", &PatchBBox::r1)
        .def_readwrite("c1", &PatchBBox::c1)
        .def_readwrite("r2", &PatchBBox::r2)
        .def_readwrite("c2", &PatchBBox::c2)
        .def("cell_count", &PatchBBox::cell_count)
        .def(py::self == py::self)
        .def("__repr__", [](const PatchBBox& b) {
            return "PatchBBox(" + std::to_string(b.r1) + ", " +
                   std::to_string(b.c1) + ", " + std::to_string(b.r2) + ", " +
                   std::to_string(b.c2) + ")";
        });

    py::class_<PatchSet>(m, "PatchSet")
        .def(py::init<>())
        .def(py::init<std::vector<PatchCoord>>(), py::arg("cells"))
        .def("cells", &PatchSet::cells)
        .def("__len__", &PatchSet::size)
        .def("contains", &PatchSet::contains)
        .def(py::self == py::self);

    m.def("make_grid", &make_grid, py::arg("raw_height"), py::arg("raw_width"),
          py::arg("patch_h") = kDefaultPatchSize,
          py::arg("patch_w") = kDefaultPatchSize);
    m.def("pixel_to_patch", &pixel_to_patch, py::arg("point"),
          py::arg("grid"));
    m.def("pixel_bbox_to_patch_bbox", &pixel_bbox_to_patch_bbox,
          py::arg("bbox"), py::arg("grid"));
    m.def("expand_patch_set", &expand_patch_set, py::arg("patch_bbox"));
    m.def("patch_bbox_to_pixel_bbox", &patch_bbox_to_pixel_bbox,
          py::arg("patch_bbox"), py::arg("grid"));
    m.def("iou", &iou, py::arg("a"), py::arg("b"));
    m.def("area_fraction", &area_fraction, py::arg("patch_bbox"),
          py::arg("grid"));
    m.def("in_grid", &in_grid, py::arg("patch_bbox"), py::arg("grid"));

    py::class_<CueSpan>(m, "CueSpan")
        .def_readonly("patch_bbox", &CueSpan::patch_bbox)
        .def_readonly("raw_text", &CueSpan::raw_text)
        .def_readonly("begin", &CueSpan::begin)
        .def_readonly("end", &CueSpan::end)
        .def_readonly("think_offset", &CueSpan::think_offset);

    py::class_<ReasoningTrace>(m, "ReasoningTrace")
        .def(py::init<>())
        .def_readwrite("think_text", &ReasoningTrace::think_text)
        .def_readwrite("cues", &ReasoningTrace::cues)
        .def_readwrite("answer_text", &ReasoningTrace::answer_text)
        .def_readwrite("well_formed", &ReasoningTrace::well_formed)
        .def_readwrite("diagnostics", &ReasoningTrace::diagnostics);

    m.def("parse_trace", [](std::string_view text) { return parse_trace(text); },
          py::arg("text"));
    m.def("format_reward",
          [](std::string_view text) { return format_reward(text); },
          py::arg("text"));
    m.def("extract_cues", &extract_cues, py::arg("trace"));
    m.def("render_trace", &render_trace, py::arg("trace"));

    py::class_<Assignment>(m, "Assignment")
        .def_readonly("pairs", &Assignment::pairs)
        .def_readonly("total_cost", &Assignment::total_cost);
    m.def("assign", &assign, py::arg("cost"));

    py::class_<MatchScore>(m, "MatchScore")
        .def_readonly("tp", &MatchScore::tp)
        .def_readonly("fp", &MatchScore::fp)
        .def_readonly("fn", &MatchScore::fn)
        .def_readonly("precision", &MatchScore::precision)
        .def_readonly("recall", &MatchScore::recall)
        .def_readonly("f1", &MatchScore::f1)
        .def_readonly("both_empty", &MatchScore::both_empty);
    m.def("patch_f1", &patch_f1, py::arg("pred"), py::arg("gt"));
    m.def("cost_matrix", &cost_matrix, py::arg("pred"), py::arg("gt"));

    py::class_<MatchDetail>(m, "MatchDetail")
        .def_readonly("pred_index", &MatchDetail::pred_index)
        .def_readonly("gt_index", &MatchDetail::gt_index)
        .def_readonly("f1", &MatchDetail::f1)
        .def_readonly("successful", &MatchDetail::successful);

    py::class_<CueRewardResult>(m, "CueRewardResult")
        .def_readonly("reward", &CueRewardResult::reward)
        .def_readonly("assignment", &CueRewardResult::assignment)
        .def_readonly("successful_matches", &CueRewardResult::successful_matches)
        .def_readonly("details", &CueRewardResult::details);
    m.def("cue_reward", &cue_reward, py::arg("pred"), py::arg("gt"),
          py::arg("grid"), py::arg("tau") = kDefaultTau);

    m.def("accuracy_reward",
          [](std::string_view p, std::string_view e) {
              return accuracy_reward(p, e);
          },
          py::arg("predicted"), py::arg("expected"));

    py::class_<RewardBreakdown>(m, "RewardBreakdown")
        .def_readonly("r_acc", &RewardBreakdown::r_acc)
        .def_readonly("r_format", &RewardBreakdown::r_format)
        .def_readonly("r_cue", &RewardBreakdown::r_cue)
        .def_readonly("r_total", &RewardBreakdown::r_total)
        .def_readonly("matches", &RewardBreakdown::matches)
        .def_readonly("successful_matches", &RewardBreakdown::successful_matches)
        .def_readonly("details", &RewardBreakdown::details)
        .def_readonly("diagnostics", &RewardBreakdown::diagnostics);
    m.def("total_reward",
          [](std::string_view trace, std::string_view answer,
             const std::vector<PatchBBox>& cues, const PatchGrid& grid,
             double tau) { return total_reward(trace, answer, cues, grid, tau); },
          py::arg("trace_text"), py::arg("expected_answer"),
          py::arg("gt_cues"), py::arg("grid"), py::arg("tau") = kDefaultTau);

    m.def("group_advantages", &group_advantages, py::arg("rewards"),
          py::arg("std_floor") = kDefaultStdFloor);
    m.def("clipped_surrogate", &clipped_surrogate, py::arg("ratio"),
          py::arg("advantage"), py::arg("epsilon"));
    m.def("kl_estimate", &kl_estimate, py::arg("logp_new"),
          py::arg("logp_ref"));

    py::class_<TokenLogProbs>(m, "TokenLogProbs")
        .def(py::init<>())
        .def(py::init([](double lp_new, double lp_old, double lp_ref) {
                 TokenLogProbs t;
                 t.logp_new = lp_new;
                 t.logp_old = lp_old;
                 t.logp_ref = lp_ref;
                 return t;
             }),
             py::arg("logp_new"), py::arg("logp_old"), py::arg("logp_ref"))
        .def_readwrite("logp_new", &TokenLogProbs::logp_new)
        .def_readwrite("logp_old", &TokenLogProbs::logp_old)
        .def_readwrite("logp_ref", &TokenLogProbs::logp_ref);

    py::class_<GrpoGroup>(m, "GrpoGroup")
        .def(py::init<>())
        .def_readwrite("rewards", &GrpoGroup::rewards)
        .def_readwrite("completions", &GrpoGroup::completions);

    py::class_<GrpoConfig>(m, "GrpoConfig")
        .def(py::init<>())
        .def_readwrite("epsilon", &GrpoConfig::epsilon)
        .def_readwrite("beta", &GrpoConfig::beta)
        .def_readwrite("std_floor", &GrpoConfig::std_floor);
    m.def("grpo_objective", &grpo_objective, py::arg("group"),
          py::arg("config") = GrpoConfig{});

    py::class_<AttemptRecord>(m, "AttemptRecord")
        .def(py::init<>())
        .def(py::init([](std::string id, std::vector<int> attempts) {
                 AttemptRecord r;
                 r.sample_id = std::move(id);
                 r.attempts = std::move(attempts);
                 return r;
             }),
             py::arg("sample_id"), py::arg("attempts"))
        .def_readwrite("sample_id", &AttemptRecord::sample_id)
        .def_readwrite("attempts", &AttemptRecord::attempts);
    m.def("sft_difficulty_filter", &sft_difficulty_filter, py::arg("record"));
    m.def("rl_difficulty_filter", &rl_difficulty_filter, py::arg("record"));

    py::class_<ConsensusConfig>(m, "ConsensusConfig")
        .def(py::init<>())
        .def_readwrite("iou_threshold", &ConsensusConfig::iou_threshold)
        .def_readwrite("patch_height", &ConsensusConfig::patch_height)
        .def_readwrite("patch_width", &ConsensusConfig::patch_width);

    py::class_<ConsensusInput>(m, "ConsensusInput")
        .def(py::init<>())
        .def_readwrite("sample_id", &ConsensusInput::sample_id)
        .def_readwrite("image_width", &ConsensusInput::image_width)
        .def_readwrite("image_height", &ConsensusInput::image_height)
        .def_readwrite("candidates", &ConsensusInput::candidates);

    py::class_<ConsensusResult>(m, "ConsensusResult")
        .def_readonly("sample_id", &ConsensusResult::sample_id)
        .def_readonly("retained", &ConsensusResult::retained)
        .def_readonly("reason", &ConsensusResult::reason)
        .def_readonly("fused", &ConsensusResult::fused)
        .def_readonly("fused_patch", &ConsensusResult::fused_patch)
        .def_readonly("diagnostics", &ConsensusResult::diagnostics);
    m.def("consensus_filter", &consensus_filter, py::arg("input"),
          py::arg("config") = ConsensusConfig{});

    py::class_<StatsRecord>(m, "StatsRecord")
        .def(py::init<>())
        .def_readwrite("sample_id", &StatsRecord::sample_id)
        .def_readwrite("grid", &StatsRecord::grid)
        .def_readwrite("cues", &StatsRecord::cues);

    py::class_<DatasetStats>(m, "DatasetStats")
        .def(py::init<>())
        .def_readonly("samples", &DatasetStats::samples)
        .def_readonly("cues", &DatasetStats::cues)
        .def_readonly("skipped", &DatasetStats::skipped)
        .def_readonly("cue_count_histogram", &DatasetStats::cue_count_histogram)
        .def_readonly("area_histogram", &DatasetStats::area_histogram)
        .def_readonly("diagnostics", &DatasetStats::diagnostics)
        .def("add", &DatasetStats::add, py::arg("record"))
        .def("merge", &DatasetStats::merge, py::arg("other"));

    py::enum_<TemplateId>(m, "TemplateId")
        .value("extraction", TemplateId::extraction)
        .value("grounding", TemplateId::grounding)
        .value("reasoning", TemplateId::reasoning);

    m.def("prompt_template",
          [](TemplateId id) { return std::string(prompt_template(id)); },
          py::arg("template_id"));
    m.def("fnv1a64",
          [](std::string_view data) { return fnv1a64(data); },
          py::arg("data"));

    py::class_<PromptRequest>(m, "PromptRequest")
        .def_readonly("template_id", &PromptRequest::template_id)
        .def_readonly("rendered_text", &PromptRequest::rendered_text)
        .def_readonly("image_ref", &PromptRequest::image_ref);

    py::class_<LabeledBox>(m, "LabeledBox")
        .def(py::init<>())
        .def(py::init([](std::string label, PixelBBox box) {
                 LabeledBox lb;
                 lb.label = std::move(label);
                 lb.box = box;
                 return lb;
             }),
             py::arg("label"), py::arg("box"))
        .def_readwrite("label", &LabeledBox::label)
        .def_readwrite("box", &LabeledBox::box);

    m.def("build_extraction_prompt",
          [](std::string_view q, std::string_view a, std::string_view img) {
              return build_extraction_prompt(q, a, img);
          },
          py::arg("question"), py::arg("answer"), py::arg("image_ref") = "");
    m.def("build_grounding_prompt",
          [](const std::vector<std::string>& labels, std::string_view img) {
              return build_grounding_prompt(labels, img);
          },
          py::arg("labels"), py::arg("image_ref") = "");
    m.def("build_reasoning_prompt",
          [](std::string_view q, std::string_view a,
             const std::vector<LabeledBox>& cues, std::string_view img) {
              return build_reasoning_prompt(q, a, cues, img);
          },
          py::arg("question"), py::arg("answer"), py::arg("cues"),
          py::arg("image_ref") = "");

    py::class_<LabelParse>(m, "LabelParse")
        .def_readonly("labels", &LabelParse::labels)
        .def_readonly("diagnostics", &LabelParse::diagnostics);
    m.def("parse_label_response",
          [](std::string_view raw) { return parse_label_response(raw); },
          py::arg("raw"));

    py::class_<BBoxParse>(m, "BBoxParse")
        .def_readonly("ok", &BBoxParse::ok)
        .def_readonly("boxes", &BBoxParse::boxes)
        .def_readonly("error", &BBoxParse::error)
        .def_readonly("diagnostics", &BBoxParse::diagnostics);
    m.def("parse_bbox_response",
          [](std::string_view raw, std::size_t expected) {
              return parse_bbox_response(raw, expected);
          },
          py::arg("raw"), py::arg("expected"));
}
