"""Debiased inference for sparse reduced-rank regression layers.

Layer indices are 0-based, as in the C++ API.
"""

from ._sofari import (
    InvalidArgument,
    SingularInnerMatrix,
    SofariError,
    bh_fdr,
    ci,
    coverage,
    diagnose,
    exp_map,
    fit,
    infer,
    kde,
    log_map,
    nodewise_precision,
    normal_quantile,
    pvalue_two_sided,
    simulate,
    standardized_stat,
)

__all__ = [
    "InvalidArgument",
    "SingularInnerMatrix",
    "SofariError",
    "bh_fdr",
    "ci",
    "coverage",
    "diagnose",
    "exp_map",
    "fit",
    "infer",
    "kde",
    "log_map",
    "nodewise_precision",
    "normal_quantile",
    "pvalue_two_sided",
    "simulate",
    "standardized_stat",
]
