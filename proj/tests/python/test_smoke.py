"""End-to-end sanity checks of the compiled module.

Depth lives in the C++ test suite; this only proves the bindings expose the
main operations with working conversions in both directions.
"""

import math

import pytest

import patchcue as pc


def test_version_and_defaults():
    assert pc.__version__ == "0.1.0"
    assert pc.DEFAULT_PATCH_SIZE == 28
    assert pc.DEFAULT_TAU == 0.5


def test_grid_and_conversions():
    grid = pc.make_grid(50, 100)
    assert (grid.image_height, grid.image_width) == (56, 112)
    assert (grid.rows(), grid.cols()) == (2, 4)

    big = pc.make_grid(280, 280)
    cell = pc.pixel_to_patch(pc.PixelPoint(x=100, y=50), big)
    assert (cell.r, cell.c) == (1, 3)

    box = pc.pixel_bbox_to_patch_bbox(pc.PixelBBox(0, 0, 55, 55), grid)
    assert box == pc.PatchBBox(0, 0, 1, 1)
    back = pc.patch_bbox_to_pixel_bbox(box, grid)
    assert (back.x1, back.y1, back.x2, back.y2) == (0.0, 0.0, 55.0, 55.0)

    norm = pc.pixel_bbox_to_patch_bbox(
        pc.PixelBBox(0.0, 0.0, 1.0, 1.0, normalized=True), grid
    )
    assert norm == pc.PatchBBox(0, 0, 1, 3)

    assert pc.iou(pc.PixelBBox(0, 0, 10, 10), pc.PixelBBox(0, 0, 10, 10)) == 1.0
    assert len(pc.expand_patch_set(pc.PatchBBox(0, 0, 1, 1))) == 4


def test_domain_errors_translate():
    with pytest.raises(ValueError):
        pc.make_grid(0, 10)
    with pytest.raises(IndexError):
        pc.pixel_to_patch(pc.PixelPoint(999, 0), pc.make_grid(28, 28))


def test_trace_parsing_round_trip():
    text = (
        "<think>Row one has <cue>[[0,0],[0,9]]</cue> ten flowers."
        "</think><answer>87</answer>"
    )
    trace = pc.parse_trace(text)
    assert trace.well_formed
    assert trace.answer_text == "87"
    assert pc.extract_cues(trace) == [pc.PatchBBox(0, 0, 0, 9)]

    rendered = pc.render_trace(trace)
    assert pc.parse_trace(rendered).well_formed
    assert pc.format_reward(text) == 1
    assert pc.format_reward("no tags at all") == 0


def test_rewards():
    assert pc.accuracy_reward("(A) 87", "(a) 87") == 1
    assert pc.accuracy_reward("88", "87") == 0

    grid = pc.make_grid(280, 280)
    assert pc.cue_reward([], [], grid).reward == 1.0

    text = (
        "<think>Count the row: <cue>[[0,0],[0,9]]</cue>."
        "</think><answer>87</answer>"
    )
    breakdown = pc.total_reward(text, "87", [pc.PatchBBox(0, 0, 0, 9)], grid)
    assert breakdown.r_total == 3.0
    assert breakdown.details[0].successful


def test_assignment():
    result = pc.assign([[0.4, 0.1], [0.3, 0.2]])
    assert result.pairs == [(0, 1), (1, 0)]
    assert math.isclose(result.total_cost, 0.4, rel_tol=0, abs_tol=1e-12)


def test_grpo():
    assert pc.group_advantages([1.0, 0.0]) == [1.0, -1.0]

    group = pc.GrpoGroup()
    group.rewards = [1.0, 0.0]
    token = pc.TokenLogProbs(logp_new=-0.5, logp_old=-0.5, logp_ref=-0.5)
    group.completions = [[token], [token]]
    assert pc.grpo_objective(group) == 0.0
    assert pc.kl_estimate(-0.5, -0.5) == 0.0


def test_pipeline():
    assert pc.sft_difficulty_filter(pc.AttemptRecord("s", [1, 0]))
    assert not pc.rl_difficulty_filter(pc.AttemptRecord("s", [1, 1]))

    inp = pc.ConsensusInput()
    inp.sample_id = "s"
    inp.image_height = 280
    inp.image_width = 280
    inp.candidates = [pc.PixelBBox(10, 10, 60, 60), pc.PixelBBox(10, 10, 60, 60)]
    verdict = pc.consensus_filter(inp)
    assert verdict.retained
    assert verdict.fused_patch == pc.PatchBBox(0, 0, 2, 2)

    stats = pc.DatasetStats()
    record = pc.StatsRecord()
    record.sample_id = "s"
    record.grid = pc.make_grid(56, 56)
    record.cues = [pc.PatchBBox(0, 0, 0, 0)]
    stats.add(record)
    assert stats.samples == 1
    assert stats.cue_count_histogram == {1: 1}


def test_prompts():
    prompt = pc.build_extraction_prompt("How many flowers?", "87")
    assert "at most 5 cues" in prompt.rendered_text
    assert "How many flowers?" in prompt.rendered_text

    template = pc.prompt_template(pc.TemplateId.extraction)
    assert pc.fnv1a64(template) == 5326505217022429233

    labels = pc.parse_label_response("<label>red flower</label>")
    assert labels.labels == ["red flower"]
    parsed = pc.parse_bbox_response("<bbox>[0.1, 0.2, 0.5, 0.9]</bbox>", 1)
    assert parsed.ok
    assert parsed.boxes[0].normalized
