"""Sharp utilization thresholds for fixed-priority real-time scheduling."""

__version__ = "0.1.0"

from .workload import (  # noqa: F401
    Job,
    JobStream,
    Task,
    TaskSet,
    assemble_taskset,
    gen_barely_schedulable,
    gen_equal_split,
    gen_periods,
    gen_periods_from_set,
    gen_uunisort,
    utilization,
)
from .analysis import (  # noqa: F401
    EXCEEDS_DEADLINE,
    brute_force_schedulable,
    dm_order,
    ll_bound,
    response_time,
    rm_order,
    rm_schedulable,
)
from .threshold import (  # noqa: F401
    PeriodRule,
    ThresholdCurve,
    ThresholdEstimate,
    estimate_mu,
    locate_threshold,
    sweep,
    width_scaling,
    wilson_interval,
)
