"""Flat-shaded 64x64 manipulation world with two tasks.

``pick_place``: carry an object onto a triangular goal.
``button_order``: press red/yellow/green buttons in an instructed order.  A
pressed button flashes white for two frames and then renders exactly like an
unpressed one, so single frames cannot tell pressed from unpressed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from mfbench.errors import ConfigError, StateError

IMAGE_SIZE = 64
HORIZON = 60
MOVE_GAIN = 0.08
REACH = 0.08
GOAL_TOL = 0.06
FLASH_FRAMES = 2
HOME = (0.5, 0.5)
HOME_TOL = 0.04
MIN_OBJECT_GOAL = 0.2

TASKS = ("pick_place", "button_order")
BUTTON_ORDERS = tuple(itertools.permutations(range(3)))
N_INSTRUCTIONS = 1 + len(BUTTON_ORDERS)

BACKGROUND = (90, 90, 90)
BUTTON_COLORS = ((220, 40, 40), (230, 210, 40), (40, 190, 60))  # red, yellow, green
FLASH_COLOR = (255, 255, 255)
AGENT_COLOR = (40, 80, 230)
OBJECT_COLOR = (240, 140, 30)
GOAL_COLOR = (170, 60, 200)
BUTTON_RADIUS = 5.0
AGENT_HALF = 3.5
OBJECT_HALF = 2.5
GOAL_HALF = 5.0


def instruction_for(task: str, order: tuple[int, ...] | None = None) -> int:
    if task == "pick_place":
        return 0
    if task == "button_order":
        return 1 + BUTTON_ORDERS.index(tuple(order))
    raise ConfigError(f"unknown task {task!r}")


def task_of(instruction: int) -> str:
    if not 0 <= instruction < N_INSTRUCTIONS:
        raise ConfigError(f"instruction id {instruction} out of range")
    return "pick_place" if instruction == 0 else "button_order"


@dataclass(frozen=True)
class WorldState:
    task: str
    instruction: int
    agent: tuple[float, float]
    objects: tuple[tuple[float, float], ...]
    goal: tuple[float, float] | None = None
    holding: bool = False
    pressed: tuple[bool, ...] = ()
    flash: tuple[int, ...] = ()
    returning: bool = False  # expert waypoint flag: head home after a press
    step_count: int = 0
    seed: int = 0
    done: bool = False
    success: bool = False
    order: tuple[int, ...] = field(default=())


def _clip01(p):
    return (float(np.clip(p[0], 0.0, 1.0)), float(np.clip(p[1], 0.0, 1.0)))


def _dist(a, b) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def reset(task: str, seed: int) -> tuple[WorldState, np.ndarray]:
    """Seeded initial layout; the agent always starts at the image centre."""
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}")
    rng = np.random.default_rng(seed)
    if task == "pick_place":
        while True:
            obj = tuple(rng.uniform(0.12, 0.88, 2))
            goal = tuple(rng.uniform(0.12, 0.88, 2))
            if _dist(obj, goal) >= MIN_OBJECT_GOAL + 0.05 and _dist(obj, HOME) > 0.1:
                break
        state = WorldState(task, 0, HOME, (_clip01(obj),), goal=_clip01(goal), seed=seed)
    else:
        while True:
            ang = rng.uniform(0, 2 * np.pi, 3)
            rad = rng.uniform(0.22, 0.36, 3)
            pts = tuple(_clip01((HOME[0] + r * np.cos(a), HOME[1] + r * np.sin(a)))
                        for a, r in zip(ang, rad))
            if all(_dist(p, q) >= 0.25 for p, q in itertools.combinations(pts, 2)):
                break
        order = BUTTON_ORDERS[int(rng.integers(len(BUTTON_ORDERS)))]
        state = WorldState(task, instruction_for(task, order), HOME, pts,
                           pressed=(False,) * 3, flash=(0,) * 3, seed=seed, order=order)
    return state, render(state)


def step(state: WorldState, action) -> tuple[WorldState, np.ndarray, bool, bool]:
    if state.done:
        raise StateError("step called on a finished episode")
    a = np.clip(np.asarray(action, dtype=np.float64).reshape(3), -1.0, 1.0)
    agent = _clip01((state.agent[0] + MOVE_GAIN * a[0], state.agent[1] + MOVE_GAIN * a[1]))
    interact = a[2] > 0.5
    s = replace(state, agent=agent, step_count=state.step_count + 1)
    if state.task == "pick_place":
        s = _step_pick_place(s, interact)
    else:
        s = _step_buttons(s, interact)
    if not s.done and s.step_count >= HORIZON:
        s = replace(s, done=True)
    return s, render(s), s.done, s.success


def _step_pick_place(s: WorldState, interact: bool) -> WorldState:
    obj = s.agent if s.holding else s.objects[0]
    holding = s.holding
    done = success = False
    if interact:
        if holding:
            holding = False
            if _dist(obj, s.goal) <= GOAL_TOL:
                done = success = True
        elif _dist(s.agent, obj) <= REACH:
            holding = True
            obj = s.agent
    return replace(s, objects=(obj,), holding=holding, done=done, success=success)


def _step_buttons(s: WorldState, interact: bool) -> WorldState:
    flash = tuple(max(0, f - 1) for f in s.flash)
    pressed = list(s.pressed)
    returning = s.returning
    done = success = False
    if interact:
        d = [_dist(s.agent, b) for b in s.objects]
        i = int(np.argmin(d))
        if d[i] <= REACH:
            expected = s.order[sum(pressed)]
            if pressed[i] or i != expected:
                done = True
            else:
                pressed[i] = True
                flash = tuple(FLASH_FRAMES if j == i else f for j, f in enumerate(flash))
                returning = True
                if all(pressed):
                    done = success = True
    if returning and _dist(s.agent, HOME) <= HOME_TOL:
        returning = False
    return replace(s, pressed=tuple(pressed), flash=flash, returning=returning,
                   done=done, success=success)


# -- rendering ---------------------------------------------------------------

_yy, _xx = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE].astype(np.float64) + 0.5


def _px(p) -> tuple[float, float]:
    return p[0] * IMAGE_SIZE, p[1] * IMAGE_SIZE


def _disk(p, r):
    cx, cy = _px(p)
    return (_xx - cx) ** 2 + (_yy - cy) ** 2 <= r * r


def _square(p, half):
    cx, cy = _px(p)
    return (np.abs(_xx - cx) <= half) & (np.abs(_yy - cy) <= half)


def _triangle(p, half):
    cx, cy = _px(p)
    dy = _yy - (cy - half)
    return (dy >= 0) & (dy <= 2 * half) & (np.abs(_xx - cx) <= dy / 2)


def render(state: WorldState) -> np.ndarray:
    """Pure function of the state: (64, 64, 3) uint8, row = y, col = x."""
    img = np.empty((IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.uint8)
    img[...] = BACKGROUND
    if state.task == "pick_place":
        img[_triangle(state.goal, GOAL_HALF)] = GOAL_COLOR
        if not state.holding:
            img[_square(state.objects[0], OBJECT_HALF)] = OBJECT_COLOR
    else:
        for i, b in enumerate(state.objects):
            img[_disk(b, BUTTON_RADIUS)] = FLASH_COLOR if state.flash[i] > 0 else BUTTON_COLORS[i]
    img[_square(state.agent, AGENT_HALF)] = AGENT_COLOR
    if state.task == "pick_place" and state.holding:
        img[_square(state.agent, OBJECT_HALF - 0.5)] = OBJECT_COLOR
    return img
