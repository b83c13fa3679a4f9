"""Benchmark the compiled stepping kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--steps 20000]

Also cross-checks that both backends trace bit-identically on the benchmark
workload before timing them.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from coral.envs import OBS_DIM, make_task, reset
from coral.envs.kernels import backends


def bench_backend(impl, task_name: str, steps: int, seed: int = 0) -> dict:
    task = make_task(task_name)
    state, _ = reset(task, np.random.default_rng(seed))
    rng = np.random.default_rng(seed + 1)
    act_rng = np.random.default_rng(seed + 2)
    obs = np.empty(OBS_DIM, dtype=np.float32)
    trace = 0.0
    t0 = time.perf_counter()
    t = 0
    for _ in range(steps):
        if state.terminal:
            state, _ = reset(task, np.random.default_rng(seed))
            state.terminal = False
            t = 0
        t += 1
        uniforms = rng.random(state.balls.shape[0])
        reward, done, trunc = impl.step_kernel(
            state.grid, state.agent, state.balls, int(act_rng.integers(7)), uniforms, t, task.max_steps, 0
        )
        state.terminal = bool(done)
        impl.observe_kernel(state.grid, int(state.agent[0]), int(state.agent[1]), int(state.agent[2]), int(state.agent[3]), obs)
        trace += reward + float(obs[:8].sum())
    elapsed = time.perf_counter() - t0
    return {"steps_per_s": steps / elapsed, "elapsed": elapsed, "trace": trace}


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=20_000)
    parser.add_argument("--tasks", default="Empty-Random-8x8,DynObs16x16,DoorKey-Random-6x6")
    args = parser.parse_args()

    impls = backends()
    print(f"available backends: {', '.join(impls)}")
    for task_name in args.tasks.split(","):
        results = {name: bench_backend(impl, task_name, args.steps) for name, impl in impls.items()}
        traces = {r["trace"] for r in results.values()}
        assert len(traces) == 1, f"backends diverged on {task_name}: {traces}"
        line = f"{task_name:24s}"
        for name, r in sorted(results.items()):
            line += f"  {name}: {r['steps_per_s']:>10.0f} steps/s"
        if len(results) == 2:
            line += f"  speedup: {results['cython']['steps_per_s'] / results['python']['steps_per_s']:.1f}x"
        print(line)


if __name__ == "__main__":
    main()
