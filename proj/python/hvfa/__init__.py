"""Python bindings for the hvfa C++ core."""

from ._hvfa import (
    FormatError,
    NumericError,
    boundary_index,
    cost_compare,
    cost_estimate,
    coverage,
    final_loss,
    gradcheck,
    hvfa_forward,
    iou_aligned,
    load_hvft,
    parse_ptp_answer,
    percent,
    pyramid_plan,
    rtpp_generate,
    save_hvft,
    score_grids,
    select_grid,
    toy_train,
    whitespace_tokenize,
)

__all__ = [
    "FormatError",
    "NumericError",
    "boundary_index",
    "cost_compare",
    "cost_estimate",
    "coverage",
    "final_loss",
    "gradcheck",
    "hvfa_forward",
    "iou_aligned",
    "load_hvft",
    "parse_ptp_answer",
    "percent",
    "pyramid_plan",
    "rtpp_generate",
    "save_hvft",
    "score_grids",
    "select_grid",
    "toy_train",
    "whitespace_tokenize",
]
