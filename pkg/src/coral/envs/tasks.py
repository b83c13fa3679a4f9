"""Task registry for the grid-world families.

Every task produces the same observation encoding: an egocentric 7x7
forward-facing window, 9 entity classes one-hot per cell, plus one
carried-key flag (7*7*9 + 1 = 442 entries, all 0/1). The agent has 7
discrete actions: turn-left, turn-right, forward, pickup, drop, toggle,
done. A uniform observation size lets one information agent serve the whole
task family.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import UnknownTask

VIEW = 7
N_CLASSES = 9
OBS_DIM = VIEW * VIEW * N_CLASSES + 1
N_ACTIONS = 7

# Grid cell codes (int8 grid array).
EMPTY, WALL, GOAL, LAVA, KEY, BALL, DOOR_LOCKED, DOOR_CLOSED, DOOR_OPEN = range(9)

# Observation classes: empty, wall, out-of-bounds, goal, lava, key, ball,
# door-closed-or-locked, door-open.
CELL_CLASS = {
    EMPTY: 0,
    WALL: 1,
    GOAL: 3,
    LAVA: 4,
    KEY: 5,
    BALL: 6,
    DOOR_LOCKED: 7,
    DOOR_CLOSED: 7,
    DOOR_OPEN: 8,
}
OOB_CLASS = 2

ACTION_LEFT, ACTION_RIGHT, ACTION_FORWARD, ACTION_PICKUP, ACTION_DROP, ACTION_TOGGLE, ACTION_DONE = range(7)


@dataclass(frozen=True)
class TaskSpec:
    """Fully parameterized description of one environment family member."""

    name: str
    kind: str  # empty | gotodoor | fourrooms | crossing | lavagap | dynobs | doorkey
    width: int
    height: int
    max_steps: int
    random_start: bool = False
    random_goal: bool = False
    n_crossings: int = 0
    n_obstacles: int = 0
    obs_dim: int = OBS_DIM

    @property
    def has_dynamic_obstacles(self) -> bool:
        return self.kind == "dynobs"

    @property
    def done_action_goal(self) -> bool:
        # GoToDoor succeeds via the done action while facing the door.
        return self.kind == "gotodoor"


def _nav_steps(w: int, h: int) -> int:
    return 4 * w * h


def _doorkey_steps(w: int, h: int) -> int:
    return 10 * w * h


_REGISTRY: dict[str, TaskSpec] = {}


def _register(spec: TaskSpec) -> TaskSpec:
    _REGISTRY[spec.name] = spec
    return spec


# Pre-training distribution (7 tasks).
_register(TaskSpec("Empty-Random-8x8", "empty", 8, 8, _nav_steps(8, 8), random_start=True, random_goal=True))
_register(TaskSpec("GoToDoor8x8", "gotodoor", 8, 8, _nav_steps(8, 8), random_start=True))
_register(TaskSpec("FourRooms", "fourrooms", 19, 19, _nav_steps(19, 19), random_start=True, random_goal=True))
_register(TaskSpec("CrossingS9N3", "crossing", 9, 9, _nav_steps(9, 9), n_crossings=3))
_register(TaskSpec("LavaGapS6", "lavagap", 6, 6, _nav_steps(6, 6)))
_register(TaskSpec("Dynamic-Obstacles-5x5", "dynobs", 5, 5, _nav_steps(5, 5), n_obstacles=2))
_register(TaskSpec("DoorKey-Random-6x6", "doorkey", 6, 6, _doorkey_steps(6, 6), random_start=True, random_goal=True))

PRETRAIN_TASKS = (
    "Empty-Random-8x8",
    "GoToDoor8x8",
    "FourRooms",
    "CrossingS9N3",
    "LavaGapS6",
    "Dynamic-Obstacles-5x5",
    "DoorKey-Random-6x6",
)

# Evaluation tasks (larger / unseen variants).
_register(TaskSpec("DoorKey8x8", "doorkey", 8, 8, _doorkey_steps(8, 8), random_start=True))
_register(TaskSpec("CrossingsS11N5", "crossing", 11, 11, _nav_steps(11, 11), n_crossings=5))
_register(TaskSpec("DynObs6x6-Random", "dynobs", 6, 6, _nav_steps(6, 6), n_obstacles=3, random_start=True))
_register(TaskSpec("LavaGapS7", "lavagap", 7, 7, _nav_steps(7, 7)))
_register(TaskSpec("Empty16x16", "empty", 16, 16, _nav_steps(16, 16)))
_register(TaskSpec("DynObs16x16", "dynobs", 16, 16, _nav_steps(16, 16), n_obstacles=8))

EVAL_TASKS = (
    "DoorKey8x8",
    "CrossingsS11N5",
    "DynObs6x6-Random",
    "LavaGapS7",
    "Empty16x16",
    "DynObs16x16",
)

# Zero-shot source tasks.
_register(TaskSpec("DoorKey6x6", "doorkey", 6, 6, _doorkey_steps(6, 6), random_start=True))


def make_task(name: str) -> TaskSpec:
    """Look up a task by its exact registry name."""
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownTask(f"unknown task {name!r}; known: {sorted(_REGISTRY)}") from None


def task_names() -> list[str]:
    return sorted(_REGISTRY)


def task_manifest() -> dict[str, dict]:
    """Machine-readable registry dump (for docs, tests, and the CLI)."""
    return {
        name: {
            "kind": spec.kind,
            "width": spec.width,
            "height": spec.height,
            "obs_dim": spec.obs_dim,
            "max_steps": spec.max_steps,
            "n_actions": N_ACTIONS,
            "random_start": spec.random_start,
            "random_goal": spec.random_goal,
            "n_obstacles": spec.n_obstacles,
            "n_crossings": spec.n_crossings,
        }
        for name, spec in sorted(_REGISTRY.items())
    }
