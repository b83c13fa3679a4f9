"""Pure-Python/numpy stepping kernels (reference implementation).

The compiled Cython module `_grid_cy` implements the same two functions with
identical semantics; both consume pre-drawn uniforms for obstacle motion so
their trajectories are bit-identical. Backend selection happens in
`coral.envs.kernels`.
"""

from __future__ import annotations

import numpy as np

from .tasks import (
    ACTION_DONE,
    ACTION_DROP,
    ACTION_FORWARD,
    ACTION_LEFT,
    ACTION_PICKUP,
    ACTION_RIGHT,
    ACTION_TOGGLE,
    BALL,
    DOOR_CLOSED,
    DOOR_LOCKED,
    DOOR_OPEN,
    EMPTY,
    GOAL,
    KEY,
    LAVA,
    OOB_CLASS,
    N_CLASSES,
    VIEW,
    WALL,
)

# Heading order N, E, S, W; (dx, dy) with y growing downward.
DIR_DX = (0, 1, 0, -1)
DIR_DY = (-1, 0, 1, 0)

_CLASS_OF_CODE = np.array([0, 1, 3, 4, 5, 6, 7, 7, 8], dtype=np.int64)


def step_kernel(grid, agent, balls, action, uniforms, step_count, max_steps, done_action_goal):
    """Advance one environment by one action.

    Mutates `grid` (H, W int8), `agent` ([x, y, dir, carrying] int64), and
    `balls` ((K, 2) int64 xy) in place. `uniforms` supplies one float in
    [0, 1) per ball for its move. `step_count` already counts this step.
    Returns (reward, done, truncated).
    """
    h, w = grid.shape
    ax, ay, adir, carrying = int(agent[0]), int(agent[1]), int(agent[2]), int(agent[3])

    # Dynamic obstacles drift to a random free 4-adjacent cell first.
    for i in range(balls.shape[0]):
        bx, by = int(balls[i, 0]), int(balls[i, 1])
        free = []
        for dx, dy in ((0, -1), (1, 0), (0, 1), (-1, 0)):
            nx, ny = bx + dx, by + dy
            if 0 <= nx < w and 0 <= ny < h and grid[ny, nx] == EMPTY and not (nx == ax and ny == ay):
                free.append((nx, ny))
        if free:
            nx, ny = free[int(uniforms[i] * len(free))]
            grid[by, bx] = EMPTY
            grid[ny, nx] = BALL
            balls[i, 0] = nx
            balls[i, 1] = ny

    reward = 0.0
    done = False
    truncated = False

    if action == ACTION_LEFT:
        adir = (adir + 3) % 4
    elif action == ACTION_RIGHT:
        adir = (adir + 1) % 4
    elif action == ACTION_FORWARD:
        fx, fy = ax + DIR_DX[adir], ay + DIR_DY[adir]
        cell = grid[fy, fx]
        if cell == BALL:
            reward = -1.0
            done = True
        elif cell == GOAL:
            ax, ay = fx, fy
            reward = 1.0 - 0.9 * (step_count / max_steps)
            done = True
        elif cell == LAVA:
            ax, ay = fx, fy
            done = True
        elif cell == EMPTY or cell == DOOR_OPEN:
            ax, ay = fx, fy
    elif action == ACTION_PICKUP:
        fx, fy = ax + DIR_DX[adir], ay + DIR_DY[adir]
        if grid[fy, fx] == KEY and not carrying:
            grid[fy, fx] = EMPTY
            carrying = 1
    elif action == ACTION_DROP:
        fx, fy = ax + DIR_DX[adir], ay + DIR_DY[adir]
        if carrying and grid[fy, fx] == EMPTY:
            grid[fy, fx] = KEY
            carrying = 0
    elif action == ACTION_TOGGLE:
        fx, fy = ax + DIR_DX[adir], ay + DIR_DY[adir]
        cell = grid[fy, fx]
        if cell == DOOR_LOCKED:
            if carrying:
                grid[fy, fx] = DOOR_OPEN
        elif cell == DOOR_CLOSED:
            grid[fy, fx] = DOOR_OPEN
        elif cell == DOOR_OPEN:
            grid[fy, fx] = DOOR_CLOSED
    elif action == ACTION_DONE:
        if done_action_goal:
            fx, fy = ax + DIR_DX[adir], ay + DIR_DY[adir]
            cell = grid[fy, fx]
            if cell in (DOOR_CLOSED, DOOR_LOCKED, DOOR_OPEN):
                reward = 1.0 - 0.9 * (step_count / max_steps)
                done = True

    if not done and step_count >= max_steps:
        done = True
        truncated = True

    agent[0], agent[1], agent[2], agent[3] = ax, ay, adir, carrying
    return reward, done, truncated


def observe_kernel(grid, ax, ay, adir, carrying, out):
    """Fill `out` (float32, 7*7*9+1) with the egocentric one-hot view.

    The agent sits at the bottom-center of a 7x7 window facing up; cells
    outside the grid map to the out-of-bounds class. No occlusion.
    """
    h, w = grid.shape
    fdx, fdy = DIR_DX[adir], DIR_DY[adir]
    rdx, rdy = -fdy, fdx

    fwd = (VIEW - 1) - np.arange(VIEW)  # view row 6 is the agent row
    right = np.arange(VIEW) - VIEW // 2
    wx = ax + fdx * fwd[:, None] + rdx * right[None, :]
    wy = ay + fdy * fwd[:, None] + rdy * right[None, :]
    valid = (wx >= 0) & (wx < w) & (wy >= 0) & (wy < h)
    classes = np.full((VIEW, VIEW), OOB_CLASS, dtype=np.int64)
    classes[valid] = _CLASS_OF_CODE[grid[wy[valid], wx[valid]]]

    out[:] = 0.0
    cells = out[: VIEW * VIEW * N_CLASSES].reshape(VIEW * VIEW, N_CLASSES)
    cells[np.arange(VIEW * VIEW), classes.ravel()] = 1.0
    out[-1] = 1.0 if carrying else 0.0
