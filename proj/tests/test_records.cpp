#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "patchcue/records.hpp"

using namespace patchcue;
using nlohmann::json;

TEST_CASE("round6 pins six decimal places") {
    CHECK(round6(0.1234564) == 0.123456);
    CHECK(round6(0.1234567) == 0.123457);
    CHECK(round6(2.0) == 2.0);
    CHECK(round6(-0.0000004) == 0.0);
}

TEST_CASE("resolve_grid falls back to the service defaults") {
    const ScoringDefaults defaults;
    const PatchGrid fallback = resolve_grid(std::nullopt, defaults);
    CHECK(fallback.rows() == 36);
    CHECK(fallback.cols() == 36);
    CHECK(fallback.patch_height == kDefaultPatchSize);

    GridSpec spec;
    spec.height = 50;
    spec.width = 100;
    const PatchGrid g = resolve_grid(spec, defaults);
    CHECK(g.image_height == 56);
    CHECK(g.image_width == 112);

    spec.patch_h = 10;
    spec.patch_w = 20;
    const PatchGrid custom = resolve_grid(spec, defaults);
    CHECK(custom.patch_height == 10);
    CHECK(custom.patch_width == 20);
    CHECK(custom.image_height == 50);
    CHECK(custom.image_width == 100);

    GridSpec bad;
    bad.height = -5;
    bad.width = 10;
    CHECK_THROWS_AS(resolve_grid(bad, defaults), std::invalid_argument);
}

TEST_CASE("score requests parse from the wire shape") {
    const json j = json::parse(R"({
        "id": "s1",
        "prediction": "<think>x</think><answer>87</answer>",
        "ground_truth": {"answer": "87", "cues": [[0, 0, 1, 1]]},
        "grid": {"height": 56, "width": 56}
    })");
    const ScoreRequest r = score_request_from_json(j);
    CHECK(r.id == "s1");
    CHECK(r.ground_truth.answer == "87");
    REQUIRE(r.ground_truth.cues.size() == 1);
    CHECK(r.ground_truth.cues[0] == PatchBBox{0, 0, 1, 1});
    REQUIRE(r.grid.has_value());
    CHECK(r.grid->height == 56);
    CHECK(!r.grid->patch_h.has_value());
}

TEST_CASE("shape violations raise ParseError, not domain errors") {
    CHECK_THROWS_AS(score_request_from_json(json::parse("[]")), ParseError);
    CHECK_THROWS_AS(score_request_from_json(json::parse(R"({"id":"x"})")),
                    ParseError);
    CHECK_THROWS_AS(score_request_from_json(json::parse(
                        R"({"id":"x","prediction":7,
                            "ground_truth":{"answer":"a","cues":[]}})")),
                    ParseError);
    CHECK_THROWS_AS(score_request_from_json(json::parse(
                        R"({"id":"x","prediction":"p",
                            "ground_truth":{"answer":"a","cues":[[1,2,3]]}})")),
                    ParseError);
    // Inverted cue is well-shaped: the domain check fires later.
    const json inverted = json::parse(
        R"({"id":"x","prediction":"p",
            "ground_truth":{"answer":"a","cues":[[3,3,1,1]]}})");
    const ScoreRequest r = score_request_from_json(inverted);
    CHECK_THROWS_AS(score_one(r, ScoringDefaults{}), std::invalid_argument);
}

TEST_CASE("score responses serialize with fixed precision and sorted keys") {
    const json j = json::parse(R"({
        "id": "s2",
        "prediction":
            "<think>a <cue>[[0,0],[0,0]]</cue> b</think><answer>87</answer>",
        "ground_truth": {"answer": "87",
                          "cues": [[0, 0, 0, 0], [1, 1, 1, 1], [0, 1, 0, 1]]},
        "grid": {"height": 56, "width": 56}
    })");
    const ScoreResponse res = score_one(score_request_from_json(j),
                                        ScoringDefaults{});
    const json out = score_response_to_json(res);
    CHECK(out.at("id") == "s2");
    CHECK(out.at("r_acc") == 1);
    CHECK(out.at("r_format") == 1);
    CHECK(out.at("r_cue").get<double>() == doctest::Approx(1.0 / 3.0));
    CHECK(out.at("r_cue").get<double>() == 0.333333);  // round6 applied
    CHECK(out.at("r_total").get<double>() == 2.333333);
    REQUIRE(out.at("matches").size() == 1);
    CHECK(out.at("matches")[0].at("pred_index") == 0);
    CHECK(out.at("matches")[0].at("gt_index") == 0);
    CHECK(out.at("matches")[0].at("successful") == true);
    CHECK(out.dump() ==
          score_response_to_json(score_one(score_request_from_json(j),
                                           ScoringDefaults{}))
              .dump());
}

TEST_CASE("trace and gt records parse and validate") {
    const TraceRecord t = trace_record_from_json(
        json::parse(R"({"id":"a","prediction":"text"})"));
    CHECK(t.id == "a");
    CHECK_THROWS_AS(trace_record_from_json(json::parse(R"({"id":"a"})")),
                    ParseError);

    const GtRecord g = gt_record_from_json(json::parse(
        R"({"id":"a","answer":"87","cues":[[0,0,1,1]],
            "grid":{"height":56,"width":56,"patch_h":28,"patch_w":28}})"));
    CHECK(g.ground_truth.answer == "87");
    REQUIRE(g.grid.has_value());
    CHECK(g.grid->patch_h.value() == 28);
    CHECK_THROWS_AS(
        gt_record_from_json(json::parse(R"({"id":"a","answer":"b"})")),
        ParseError);
}

TEST_CASE("pixel/patch conversion records round trip") {
    const ScoringDefaults defaults;
    const json line = json::parse(
        R"({"id":"b1","image":{"height":56,"width":84},
            "bbox":[0,0,55,55]})");
    const json patch = convert_pixel_to_patch(line, defaults);
    CHECK(patch.at("patch_bbox") == json::array({0, 0, 1, 1}));
    CHECK(patch.at("image").at("height") == 56);
    CHECK(patch.at("patch").at("height") == 28);

    const json back = convert_patch_to_pixel(patch, defaults);
    CHECK(back.at("bbox") == json::array({0.0, 0.0, 55.0, 55.0}));
    CHECK(back.at("normalized") == false);
    // A second conversion reproduces the same patch box.
    CHECK(convert_pixel_to_patch(back, defaults).at("patch_bbox") ==
          patch.at("patch_bbox"));
}

TEST_CASE("conversion records validate their shape") {
    const ScoringDefaults defaults;
    CHECK_THROWS_AS(
        convert_pixel_to_patch(json::parse(R"({"id":"x"})"), defaults),
        ParseError);
    CHECK_THROWS_AS(convert_pixel_to_patch(
                        json::parse(R"({"id":"x",
                                        "image":{"height":56,"width":56},
                                        "bbox":[0,0]})"),
                        defaults),
                    ParseError);
    // Well-shaped but out of bounds: domain error.
    CHECK_THROWS_AS(convert_pixel_to_patch(
                        json::parse(R"({"id":"x",
                                        "image":{"height":56,"width":56},
                                        "bbox":[0,0,99,99]})"),
                        defaults),
                    std::invalid_argument);
}

TEST_CASE("attempt records accept only booleans") {
    const AttemptRecord r = attempt_record_from_json(
        json::parse(R"({"sample_id":"s","attempts":[true,false,true]})"));
    CHECK(r.sample_id == "s");
    CHECK(r.attempts == std::vector<int>{1, 0, 1});
    CHECK(attempt_record_to_json(r) ==
          json::parse(R"({"sample_id":"s","attempts":[true,false,true]})"));
    CHECK_THROWS_AS(attempt_record_from_json(json::parse(
                        R"({"sample_id":"s","attempts":[1,0]})")),
                    ParseError);
}

TEST_CASE("consensus samples parse the pinned candidate schema") {
    const json j = json::parse(R"({
        "sample_id": "s9",
        "image": {"height": 280, "width": 280},
        "cues": [
            {"label": "heater",
             "candidates": [
                 {"source": "m1", "bbox": [10, 10, 60, 60]},
                 {"source": "m2", "bbox": [12, 10, 62, 60]}]},
            {"label": "window",
             "candidates": [
                 {"source": "m1", "bbox": [0, 0, 30, 30]},
                 {"source": "m2", "bbox": [200, 200, 250, 250]}]}
        ]})");
    const ConsensusSample s = consensus_sample_from_json(j);
    REQUIRE(s.cues.size() == 2);
    CHECK(s.cues[0].label == "heater");
    CHECK(s.cues[0].candidates.size() == 2);

    const ConsensusSampleResult verdict =
        consensus_sample_filter(s, ConsensusConfig{0.5, 28, 28});
    CHECK(!verdict.retained);  // the window cue disagrees
    REQUIRE(verdict.kept_cues.size() == 1);
    CHECK(verdict.kept_cues[0].first == "heater");
    REQUIRE(verdict.rejected_reasons.size() == 1);
    CHECK(verdict.rejected_reasons[0] == "window: iou_below_threshold");

    const json out = consensus_result_to_json(verdict);
    CHECK(out.at("sample_id") == "s9");
    CHECK(out.at("cues")[0].at("label") == "heater");
    CHECK(out.at("rejected")[0] == "window: iou_below_threshold");
}

TEST_CASE("a sample with all cues agreeing is retained") {
    const json j = json::parse(R"({
        "sample_id": "ok",
        "image": {"height": 56, "width": 56},
        "cues": [{"label": "dial",
                  "candidates": [{"bbox": [0, 0, 55, 55]},
                                  {"bbox": [0, 0, 55, 55]}]}]})");
    const ConsensusSampleResult verdict = consensus_sample_filter(
        consensus_sample_from_json(j), ConsensusConfig{0.5, 28, 28});
    CHECK(verdict.retained);
    REQUIRE(verdict.kept_cues.size() == 1);
    CHECK(verdict.kept_cues[0].second == PatchBBox{0, 0, 1, 1});
}

TEST_CASE("stats records parse with an optional grid") {
    const ScoringDefaults defaults;
    const StatsRecord with = stats_record_from_json(
        json::parse(R"({"sample_id":"a",
                        "image":{"height":56,"width":56},
                        "cues":[[0,0,0,0]]})"),
        defaults);
    REQUIRE(with.grid.has_value());
    CHECK(with.grid->rows() == 2);

    const StatsRecord without = stats_record_from_json(
        json::parse(R"({"sample_id":"b","cues":[]})"), defaults);
    CHECK(!without.grid.has_value());
}

TEST_CASE("dataset stats serialize with string-keyed count histogram") {
    DatasetStats stats;
    const PatchGrid g = make_grid(56, 56, 28, 28);
    stats.add({"a", g, {{0, 0, 0, 0}, {1, 1, 1, 1}}});
    const json j = dataset_stats_to_json(stats);
    CHECK(j.at("samples") == 1);
    CHECK(j.at("cues") == 2);
    CHECK(j.at("cue_count_histogram").at("2") == 1);
    REQUIRE(j.at("area_histogram").size() == 20);
    CHECK(j.at("area_histogram")[5] == 2);
}

TEST_CASE("group records parse and results round to six decimals") {
    const json j = json::parse(R"({
        "group_id": "g1",
        "rewards": [3, 1, 2],
        "completions": [
            {"tokens": [{"logp_new": -0.5, "logp_old": -0.5,
                          "logp_ref": -0.5}]},
            {"tokens": [{"logp_new": -0.5, "logp_old": -0.5,
                          "logp_ref": -0.5}]},
            {"tokens": [{"logp_new": -0.5, "logp_old": -0.5,
                          "logp_ref": -0.5}]}
        ]})");
    const GroupRecord r = group_record_from_json(j);
    CHECK(r.group_id == "g1");
    CHECK(r.group.rewards == std::vector<double>{3.0, 1.0, 2.0});
    REQUIRE(r.group.completions.size() == 3);

    const auto adv = group_advantages(r.group.rewards);
    const json out =
        group_result_to_json(r.group_id, adv, grpo_objective(r.group));
    CHECK(out.at("advantages")[0].get<double>() == 1.224745);
    CHECK(out.at("advantages")[1].get<double>() == -1.224745);
    CHECK(out.at("advantages")[2].get<double>() == 0.0);

    CHECK_THROWS_AS(group_record_from_json(json::parse(R"({"group_id":"g"})")),
                    ParseError);
    CHECK_THROWS_AS(
        group_record_from_json(json::parse(
            R"({"group_id":"g","rewards":["x"],"completions":[]})")),
        ParseError);
}
