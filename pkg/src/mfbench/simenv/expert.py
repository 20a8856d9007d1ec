from __future__ import annotations

import numpy as np

from mfbench.simenv.world import HOME, MOVE_GAIN, WorldState


def expert_subgoal(state: WorldState) -> tuple[float, float]:
    if state.task == "pick_place":
        return state.goal if state.holding else state.objects[0]
    if state.returning:
        return HOME
    return state.objects[state.order[sum(state.pressed)]]


def expert_action(state: WorldState) -> np.ndarray:
    """Proportional controller toward the current subgoal.

    Reads the true state (including pressed flags and the return-home
    waypoint), so it is Markov where an image-only policy is not.
    Interact fires on the step that lands the agent on a press/grasp/release
    target.
    """
    target = expert_subgoal(state)
    delta = np.array([target[0] - state.agent[0], target[1] - state.agent[1]])
    move = np.clip(delta / MOVE_GAIN, -1.0, 1.0)
    lands = bool(np.all(np.abs(delta) <= MOVE_GAIN))
    fire = lands and not (state.task == "button_order" and state.returning)
    return np.array([move[0], move[1], 1.0 if fire else -1.0])
