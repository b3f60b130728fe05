"""S-metric spaces, natural density and (rough) statistical convergence."""

from .core import (
    Ball,
    ConvergenceVerdict,
    SMetricSpec,
    Verdict,
    ball_contains,
    check_axioms,
    custom,
    eval_s,
    is_cauchy_prefix,
    is_convergent_prefix,
    is_s_bounded_prefix,
    metric_sum,
    norm_sum,
    random_quadruples,
    rough_limit_check,
    symmetry_defect,
)
from .density import (
    NON_SQUARES,
    SQUARES,
    Complement,
    DensityEstimate,
    DensityVerdict,
    Explicit,
    Finite,
    IndexSet,
    Intersection,
    PolynomialImage,
    Residue,
    Union,
    exact_density,
    membership,
    natural_density,
    parse_index_set,
    prefix_count,
    union_density_bound,
)
from .errors import ConfigError, DimensionError, DomainError, SMetricError, UsageError
from .limitset import (
    Region,
    RoughLimitSet,
    ball_characterization_check,
    bounded_iff_nonempty_check,
    cluster_ball_cover_check,
    diam_bound_check,
    estimate_rough_limit_set,
    limit_set_closed_check,
    perturbation_equivalence_check,
    subsequence_limitset_check,
)
from .sequences import (
    SequenceFamily,
    constant,
    exceedance_set,
    from_array,
    from_rule,
    linear,
    paper_example_3_1,
    paper_example_4_1,
    parametric_family,
    parse_family,
    periodic,
    perturbed,
    reciprocal,
    spike_on,
    subsequence,
)
from .statistical import (
    StConvergenceVerdict,
    ae_modification,
    cluster_point_check,
    convergent_subsequence,
    rough_st_converges,
    st_bounded,
    st_cauchy,
    st_converges,
    st_limit_unique_check,
)
from .suite import implication_suite, verify_suite

example3_1 = paper_example_3_1
example4_1 = paper_example_4_1

__version__ = "0.1.0"
