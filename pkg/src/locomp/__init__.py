"""Counting, sampling and large-part asymptotics for locally restricted
integer compositions."""

__version__ = "0.1.0"

from .restriction import (  # noqa: E402
    Alternating,
    FreenessReport,
    GeneralizedCarlitz,
    PartWindow,
    PeriodicChain,
    RestrictionSpec,
    SpecError,
    Unrestricted,
    build_spec,
    check_freeness,
    custom_spec,
    is_valid_composition,
    spec_from_dict,
    spec_from_json,
)
from .enumeration import (  # noqa: E402
    BudgetError,
    CountTable,
    EmptyClassError,
    MomentTable,
    PLAIN,
    Variant,
    avoid_part,
    brute_force,
    count,
    distinct_parts_expectation,
    max_part_distribution,
    moments,
    parts_cap,
)
from .constants import (  # noqa: E402
    ConstantEstimates,
    ConvergenceError,
    FitError,
    build_transfer_matrix,
    check_A_equals_C,
    estimate_B_C,
    estimate_constants,
    estimate_r_A,
    spectral_r,
)
from .sampler import (  # noqa: E402
    SampleStats,
    SamplerTable,
    build_sampler,
    collect_stats,
    poisson_check,
    sample,
)
from .asymptotics import (  # noqa: E402
    AsymptoticModel,
    gamma_complex,
    jvz_ratios,
    pm_sequence,
)
