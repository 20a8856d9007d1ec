from mfbench.disturbance.families import (
    CATEGORY,
    FAMILIES,
    SUPPORTED_RATIOS,
    DisturbanceContext,
    DisturbanceSpec,
    apply_disturbance,
    sample_params,
)
from mfbench.disturbance.plan import (
    DisturbancePlan,
    PlanPlayer,
    TemporalSchedule,
    plan_trial,
    schedule_mask,
)
from mfbench.disturbance.rng import SplitMix64, derive_trial_seed, fnv1a64

__all__ = [
    "CATEGORY", "FAMILIES", "SUPPORTED_RATIOS", "DisturbanceContext", "DisturbancePlan",
    "DisturbanceSpec", "PlanPlayer", "SplitMix64", "TemporalSchedule", "apply_disturbance",
    "derive_trial_seed", "fnv1a64", "plan_trial", "sample_params", "schedule_mask",
]
