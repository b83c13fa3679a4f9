"""Single-environment grid engine: layout sampling, stepping, observation.

Stepping is deterministic given (task, seed, action sequence); the only
randomness inside an episode is obstacle motion, fed by pre-drawn uniforms
so the compiled and fallback kernels trace identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections import deque

import numpy as np

from ..errors import LayoutUnsolvable, StepAfterTerminal
from . import kernels
from .tasks import (
    BALL,
    DOOR_CLOSED,
    DOOR_LOCKED,
    DOOR_OPEN,
    EMPTY,
    GOAL,
    KEY,
    LAVA,
    OBS_DIM,
    TaskSpec,
    WALL,
)

RESET_RETRIES = 100


@dataclass
class StepOutcome:
    obs: np.ndarray  # observation after the step (terminal obs if done)
    reward: float
    done: bool
    truncated: bool


class GridState:
    """Mutable world state of one environment instance."""

    __slots__ = ("task", "grid", "agent", "balls", "step_count", "terminal", "rng")

    def __init__(self, task: TaskSpec, grid: np.ndarray, agent: np.ndarray, balls: np.ndarray, rng: np.random.Generator):
        self.task = task
        self.grid = grid
        self.agent = agent  # [x, y, dir, carrying] int64
        self.balls = balls  # (K, 2) int64
        self.step_count = 0
        self.terminal = False
        self.rng = rng

    @property
    def agent_pos(self) -> tuple[int, int]:
        return int(self.agent[0]), int(self.agent[1])

    @property
    def carrying(self) -> bool:
        return bool(self.agent[3])

    def clone(self) -> "GridState":
        c = GridState(self.task, self.grid.copy(), self.agent.copy(), self.balls.copy(), self.rng)
        c.step_count = self.step_count
        c.terminal = self.terminal
        return c


# ---------------------------------------------------------------------------
# Layout generation
# ---------------------------------------------------------------------------


def _empty_room(w: int, h: int) -> np.ndarray:
    grid = np.zeros((h, w), dtype=np.int8)
    grid[0, :] = WALL
    grid[-1, :] = WALL
    grid[:, 0] = WALL
    grid[:, -1] = WALL
    return grid


def _free_cells(grid: np.ndarray, exclude: set[tuple[int, int]] = frozenset()) -> list[tuple[int, int]]:
    ys, xs = np.nonzero(grid == EMPTY)
    return [(int(x), int(y)) for x, y in zip(xs, ys) if (int(x), int(y)) not in exclude]


def _place_agent(grid: np.ndarray, rng: np.random.Generator, task: TaskSpec, forbidden: set[tuple[int, int]], region=None) -> tuple[int, int, int]:
    if task.random_start:
        cells = _free_cells(grid, forbidden)
        if region is not None:
            cells = [c for c in cells if region(c)]
        x, y = cells[rng.integers(len(cells))]
        d = int(rng.integers(4))
    else:
        x, y, d = 1, 1, 1  # top-left corner facing east
    return x, y, d


def _generate(task: TaskSpec, rng: np.random.Generator) -> tuple[np.ndarray, tuple[int, int, int], np.ndarray]:
    """Sample one layout; returns (grid, (ax, ay, dir), balls)."""
    w, h = task.width, task.height
    grid = _empty_room(w, h)
    balls = np.zeros((0, 2), dtype=np.int64)

    if task.kind == "empty":
        gx, gy = (w - 2, h - 2)
        if task.random_goal:
            cells = _free_cells(grid)
            gx, gy = cells[rng.integers(len(cells))]
        grid[gy, gx] = GOAL
        ax, ay, ad = _place_agent(grid, rng, task, {(gx, gy)})

    elif task.kind == "gotodoor":
        # One closed door set into a random border wall (not a corner).
        side = int(rng.integers(4))
        if side in (0, 1):  # top / bottom
            dx, dy = int(rng.integers(2, w - 2)), (0 if side == 0 else h - 1)
        else:  # left / right
            dx, dy = (0 if side == 2 else w - 1), int(rng.integers(2, h - 2))
        grid[dy, dx] = DOOR_CLOSED
        ax, ay, ad = _place_agent(grid, rng, task, set())

    elif task.kind == "fourrooms":
        mx, my = w // 2, h // 2
        grid[my, 1:-1] = WALL
        grid[1:-1, mx] = WALL
        # One opening per half-wall.
        grid[my, int(rng.integers(1, mx))] = EMPTY
        grid[my, int(rng.integers(mx + 1, w - 1))] = EMPTY
        grid[int(rng.integers(1, my)), mx] = EMPTY
        grid[int(rng.integers(my + 1, h - 1)), mx] = EMPTY
        cells = _free_cells(grid)
        gx, gy = cells[rng.integers(len(cells))]
        grid[gy, gx] = GOAL
        ax, ay, ad = _place_agent(grid, rng, task, {(gx, gy)})

    elif task.kind == "crossing":
        # Wall "rivers" on even interior lines; one opening per river, placed
        # along a monotone top-left -> bottom-right room path so the layout is
        # connected by construction.
        cand = [("v", x) for x in range(2, w - 2, 2)] + [("h", y) for y in range(2, h - 2, 2)]
        order = rng.permutation(len(cand))
        chosen = [cand[int(i)] for i in order[: min(task.n_crossings, len(cand))]]
        rivers_v = sorted(p for o, p in chosen if o == "v")
        rivers_h = sorted(p for o, p in chosen if o == "h")
        for x in rivers_v:
            grid[1:-1, x] = WALL
        for y in rivers_h:
            grid[y, 1:-1] = WALL
        xs_limits = [0] + rivers_v + [w - 1]
        ys_limits = [0] + rivers_h + [h - 1]
        path = ["h"] * len(rivers_v) + ["v"] * len(rivers_h)
        rng.shuffle(path)
        room_i = room_j = 0
        for d in path:
            if d == "h":  # cross the next vertical river inside the current row band
                x = rivers_v[room_i]
                y = int(rng.integers(ys_limits[room_j] + 1, ys_limits[room_j + 1]))
                room_i += 1
            else:
                y = rivers_h[room_j]
                x = int(rng.integers(xs_limits[room_i] + 1, xs_limits[room_i + 1]))
                room_j += 1
            grid[y, x] = EMPTY
        grid[h - 2, w - 2] = GOAL
        ax, ay, ad = 1, 1, 1

    elif task.kind == "lavagap":
        col = w // 2
        grid[1:-1, col] = LAVA
        grid[int(rng.integers(1, h - 1)), col] = EMPTY
        grid[h - 2, w - 2] = GOAL
        ax, ay, ad = 1, 1, 1

    elif task.kind == "dynobs":
        grid[h - 2, w - 2] = GOAL
        ax, ay, ad = _place_agent(grid, rng, task, {(w - 2, h - 2)})
        cells = _free_cells(grid, {(ax, ay)})
        pick = rng.choice(len(cells), size=min(task.n_obstacles, len(cells)), replace=False)
        balls = np.array([cells[int(i)] for i in pick], dtype=np.int64).reshape(-1, 2)
        for bx, by in balls:
            grid[by, bx] = BALL

    elif task.kind == "doorkey":
        split = int(rng.integers(2, w - 2))
        grid[1:-1, split] = WALL
        door_y = int(rng.integers(1, h - 1))
        grid[door_y, split] = DOOR_LOCKED
        left = [(x, y) for x in range(1, split) for y in range(1, h - 1)]
        kx, ky = left[rng.integers(len(left))]
        grid[ky, kx] = KEY
        gx, gy = (w - 2, h - 2)
        if task.random_goal:
            right = [(x, y) for x in range(split + 1, w - 1) for y in range(1, h - 1)]
            gx, gy = right[rng.integers(len(right))]
        grid[gy, gx] = GOAL
        if task.random_start:
            cells = [c for c in left if grid[c[1], c[0]] == EMPTY]
            ax, ay = cells[rng.integers(len(cells))]
            ad = int(rng.integers(4))
        else:
            ax, ay, ad = 1, 1, 1

    else:
        raise ValueError(f"unhandled task kind {task.kind!r}")

    return grid, (ax, ay, ad), balls


# ---------------------------------------------------------------------------
# Solvability
# ---------------------------------------------------------------------------


def _reachable(grid: np.ndarray, start: tuple[int, int], passable: set[int]) -> np.ndarray:
    h, w = grid.shape
    seen = np.zeros((h, w), dtype=bool)
    q: deque[tuple[int, int]] = deque([start])
    seen[start[1], start[0]] = True
    while q:
        x, y = q.popleft()
        for dx, dy in ((0, -1), (1, 0), (0, 1), (-1, 0)):
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and not seen[ny, nx] and int(grid[ny, nx]) in passable:
                seen[ny, nx] = True
                q.append((nx, ny))
    return seen


def check_solvable(task: TaskSpec, grid: np.ndarray, agent_pos: tuple[int, int]) -> bool:
    """Flood-fill reachability from the start, honoring key/door dependency.

    Lava never counts as passable (stepping in is fatal); dynamic obstacles
    are treated as free space since they move.
    """
    base_passable = {EMPTY, GOAL, DOOR_CLOSED, DOOR_OPEN, BALL}
    reach = _reachable(grid, agent_pos, base_passable)

    if task.kind == "doorkey":
        kys, kxs = np.nonzero(grid == KEY)
        key_ok = any(
            reach[ky + dy, kx + dx]
            for kx, ky in zip(kxs, kys)
            for dx, dy in ((0, -1), (1, 0), (0, 1), (-1, 0))
            if 0 <= kx + dx < grid.shape[1] and 0 <= ky + dy < grid.shape[0]
        )
        if not key_ok:
            return False
        reach = _reachable(grid, agent_pos, base_passable | {KEY, DOOR_LOCKED})

    if task.done_action_goal:
        dys, dxs = np.nonzero((grid == DOOR_CLOSED) | (grid == DOOR_LOCKED) | (grid == DOOR_OPEN))
        return any(
            reach[dy + oy, dx + ox]
            for dx, dy in zip(dxs, dys)
            for ox, oy in ((0, -1), (1, 0), (0, 1), (-1, 0))
            if 0 <= dx + ox < grid.shape[1] and 0 <= dy + oy < grid.shape[0]
        )

    gys, gxs = np.nonzero(grid == GOAL)
    return any(reach[gy, gx] for gx, gy in zip(gxs, gys))


# ---------------------------------------------------------------------------
# Reset / step / observe
# ---------------------------------------------------------------------------


def reset(task: TaskSpec, rng: np.random.Generator) -> tuple[GridState, np.ndarray]:
    """Sample a solvable layout (bounded retries) and return its first obs."""
    for _ in range(RESET_RETRIES):
        grid, (ax, ay, ad), balls = _generate(task, rng)
        if check_solvable(task, grid, (ax, ay)):
            agent = np.array([ax, ay, ad, 0], dtype=np.int64)
            state = GridState(task, grid, agent, balls, rng)
            return state, observe(state)
    raise LayoutUnsolvable(f"no solvable layout for {task.name} in {RESET_RETRIES} tries")


def observe(state: GridState) -> np.ndarray:
    out = np.empty(OBS_DIM, dtype=np.float32)
    kernels.observe_kernel(
        state.grid, int(state.agent[0]), int(state.agent[1]), int(state.agent[2]), int(state.agent[3]), out
    )
    return out


def step(state: GridState, action: int) -> tuple[GridState, StepOutcome]:
    """Advance the episode one action (mutates and returns the same state)."""
    if state.terminal:
        raise StepAfterTerminal(f"episode already ended for {state.task.name}")
    if not 0 <= int(action) < 7:
        raise ValueError(f"action {action} outside 0..6")
    n_balls = state.balls.shape[0]
    uniforms = state.rng.random(n_balls) if n_balls else np.empty(0, dtype=np.float64)
    state.step_count += 1
    reward, done, truncated = kernels.step_kernel(
        state.grid,
        state.agent,
        state.balls,
        int(action),
        uniforms,
        state.step_count,
        state.task.max_steps,
        int(state.task.done_action_goal),
    )
    state.terminal = bool(done)
    return state, StepOutcome(observe(state), float(reward), bool(done), bool(truncated))
