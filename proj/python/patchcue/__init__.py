"""Patch-grid visual-cue rewards, trace parsing and GRPO math.

Thin re-export of the compiled core; see the project README for the
coordinate conventions and reward semantics.
"""

from patchcue._core import (  # noqa: F401
    DEFAULT_PATCH_SIZE,
    DEFAULT_STD_FLOOR,
    DEFAULT_TAU,
    Assignment,
    AttemptRecord,
    BBoxParse,
    ConsensusConfig,
    ConsensusInput,
    ConsensusResult,
    CueRewardResult,
    CueSpan,
    DatasetStats,
    GrpoConfig,
    GrpoGroup,
    LabelParse,
    LabeledBox,
    MatchDetail,
    MatchScore,
    PatchBBox,
    PatchCoord,
    PatchGrid,
    PatchSet,
    PixelBBox,
    PixelPoint,
    PromptRequest,
    ReasoningTrace,
    RewardBreakdown,
    StatsRecord,
    TemplateId,
    TokenLogProbs,
    __version__,
    accuracy_reward,
    area_fraction,
    assign,
    build_extraction_prompt,
    build_grounding_prompt,
    build_reasoning_prompt,
    clipped_surrogate,
    consensus_filter,
    cost_matrix,
    cue_reward,
    expand_patch_set,
    extract_cues,
    fnv1a64,
    format_reward,
    group_advantages,
    grpo_objective,
    in_grid,
    iou,
    kl_estimate,
    make_grid,
    parse_bbox_response,
    parse_label_response,
    parse_trace,
    patch_bbox_to_pixel_bbox,
    patch_f1,
    pixel_bbox_to_patch_bbox,
    pixel_to_patch,
    prompt_template,
    render_trace,
    rl_difficulty_filter,
    sft_difficulty_filter,
    total_reward,
)
