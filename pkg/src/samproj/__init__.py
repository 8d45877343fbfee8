"""Sampling projections onto finite-dimensional function spaces.

Pipeline: D-optimal design on a candidate grid, Caratheodory support
reduction, subsampling to about ``2n`` points, and least-squares
projection on the selected points.
"""
from .design import (
    DesignCertificate,
    DesignMeasure,
    caratheodory_reduce,
    dim_product_space,
    kw_certificate,
    optimize_design,
)
from .project import (
    ChebyshevFit,
    ProjectionOperator,
    apply_projection,
    best_uniform_error,
    build_least_squares,
    least_maximum_fit,
    operator_norm,
)
from .space import (
    BasisSpec,
    CandidateSet,
    EvalMatrix,
    RankDeficientError,
    SingularGramError,
    build_candidate_set,
    evaluate_basis,
    gram,
    select_invertible_points,
)
from .subsample import (
    SampleMultiset,
    SubsampleError,
    discretization_constant,
    draw_iid,
    subsample_to,
    union_multisets,
)

__version__ = "0.1.0"
