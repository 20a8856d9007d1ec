from mfbench.simenv.dataset import (
    EpisodeRecord,
    generate_dataset,
    load_dataset,
    rollout_expert,
    window,
    window_indices,
)
from mfbench.simenv.expert import expert_action, expert_subgoal
from mfbench.simenv.world import (
    HORIZON,
    N_INSTRUCTIONS,
    TASKS,
    WorldState,
    render,
    reset,
    step,
    task_of,
)

__all__ = [
    "EpisodeRecord", "HORIZON", "N_INSTRUCTIONS", "TASKS", "WorldState", "expert_action",
    "expert_subgoal", "generate_dataset", "load_dataset", "render", "reset", "rollout_expert",
    "step", "task_of", "window", "window_indices",
]
