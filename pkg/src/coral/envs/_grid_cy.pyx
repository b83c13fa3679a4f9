# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled stepping kernels; semantics identical to `_grid_py`."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

# Cell codes (keep in sync with coral.envs.tasks).
DEF EMPTY = 0
DEF WALL = 1
DEF GOAL = 2
DEF LAVA = 3
DEF KEY = 4
DEF BALL = 5
DEF DOOR_LOCKED = 6
DEF DOOR_CLOSED = 7
DEF DOOR_OPEN = 8

DEF VIEW = 7
DEF N_CLASSES = 9
DEF OOB_CLASS = 2

cdef int[4] DIR_DX = [0, 1, 0, -1]
cdef int[4] DIR_DY = [-1, 0, 1, 0]
cdef int[9] CLASS_OF_CODE = [0, 1, 3, 4, 5, 6, 7, 7, 8]


def step_kernel(cnp.int8_t[:, :] grid,
                cnp.int64_t[:] agent,
                cnp.int64_t[:, :] balls,
                int action,
                double[:] uniforms,
                int step_count,
                int max_steps,
                int done_action_goal):
    cdef int h = grid.shape[0]
    cdef int w = grid.shape[1]
    cdef int ax = <int> agent[0]
    cdef int ay = <int> agent[1]
    cdef int adir = <int> agent[2]
    cdef int carrying = <int> agent[3]
    cdef int i, bx, by, nx, ny, k, nfree, fx, fy
    cdef int cell
    cdef int done = 0
    cdef int truncated = 0
    cdef double reward = 0.0
    cdef int[4] fxs
    cdef int[4] fys

    for i in range(balls.shape[0]):
        bx = <int> balls[i, 0]
        by = <int> balls[i, 1]
        nfree = 0
        # neighbor order must match _grid_py: N, E, S, W
        for k in range(4):
            if k == 0:
                nx = bx; ny = by - 1
            elif k == 1:
                nx = bx + 1; ny = by
            elif k == 2:
                nx = bx; ny = by + 1
            else:
                nx = bx - 1; ny = by
            if 0 <= nx < w and 0 <= ny < h and grid[ny, nx] == EMPTY and not (nx == ax and ny == ay):
                fxs[nfree] = nx
                fys[nfree] = ny
                nfree += 1
        if nfree > 0:
            k = <int>(uniforms[i] * nfree)
            grid[by, bx] = EMPTY
            grid[fys[k], fxs[k]] = BALL
            balls[i, 0] = fxs[k]
            balls[i, 1] = fys[k]

    if action == 0:
        adir = (adir + 3) % 4
    elif action == 1:
        adir = (adir + 1) % 4
    elif action == 2:
        fx = ax + DIR_DX[adir]
        fy = ay + DIR_DY[adir]
        cell = grid[fy, fx]
        if cell == BALL:
            reward = -1.0
            done = 1
        elif cell == GOAL:
            ax = fx; ay = fy
            reward = 1.0 - 0.9 * (<double> step_count / <double> max_steps)
            done = 1
        elif cell == LAVA:
            ax = fx; ay = fy
            done = 1
        elif cell == EMPTY or cell == DOOR_OPEN:
            ax = fx; ay = fy
    elif action == 3:
        fx = ax + DIR_DX[adir]
        fy = ay + DIR_DY[adir]
        if grid[fy, fx] == KEY and carrying == 0:
            grid[fy, fx] = EMPTY
            carrying = 1
    elif action == 4:
        fx = ax + DIR_DX[adir]
        fy = ay + DIR_DY[adir]
        if carrying == 1 and grid[fy, fx] == EMPTY:
            grid[fy, fx] = KEY
            carrying = 0
    elif action == 5:
        fx = ax + DIR_DX[adir]
        fy = ay + DIR_DY[adir]
        cell = grid[fy, fx]
        if cell == DOOR_LOCKED:
            if carrying == 1:
                grid[fy, fx] = DOOR_OPEN
        elif cell == DOOR_CLOSED:
            grid[fy, fx] = DOOR_OPEN
        elif cell == DOOR_OPEN:
            grid[fy, fx] = DOOR_CLOSED
    elif action == 6:
        if done_action_goal:
            fx = ax + DIR_DX[adir]
            fy = ay + DIR_DY[adir]
            cell = grid[fy, fx]
            if cell == DOOR_CLOSED or cell == DOOR_LOCKED or cell == DOOR_OPEN:
                reward = 1.0 - 0.9 * (<double> step_count / <double> max_steps)
                done = 1

    if done == 0 and step_count >= max_steps:
        done = 1
        truncated = 1

    agent[0] = ax
    agent[1] = ay
    agent[2] = adir
    agent[3] = carrying
    return reward, done != 0, truncated != 0


def observe_kernel(cnp.int8_t[:, :] grid,
                   int ax, int ay, int adir, int carrying,
                   cnp.float32_t[:] out):
    cdef int h = grid.shape[0]
    cdef int w = grid.shape[1]
    cdef int fdx = DIR_DX[adir]
    cdef int fdy = DIR_DY[adir]
    cdef int rdx = -fdy
    cdef int rdy = fdx
    cdef int vr, vc, wx, wy, cls, base, fwd, right
    cdef int n = VIEW * VIEW * N_CLASSES + 1

    for vr in range(n):
        out[vr] = 0.0
    for vr in range(VIEW):
        fwd = (VIEW - 1) - vr
        for vc in range(VIEW):
            right = vc - VIEW // 2
            wx = ax + fdx * fwd + rdx * right
            wy = ay + fdy * fwd + rdy * right
            if 0 <= wx < w and 0 <= wy < h:
                cls = CLASS_OF_CODE[grid[wy, wx]]
            else:
                cls = OOB_CLASS
            base = (vr * VIEW + vc) * N_CLASSES
            out[base + cls] = 1.0
    out[n - 1] = 1.0 if carrying else 0.0
