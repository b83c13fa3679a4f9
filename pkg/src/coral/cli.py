"""Command-line entry point.

Subcommands: pretrain, deploy, zeroshot, baseline, ablate, analyze, manifest.
Runs read an optional key=value config file; command-line flags override it.
Exit codes: 0 success, 2 config error, 3 checkpoint error, 4 numerical
failure. CORAL_OUT overrides the output root.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .envs import PRETRAIN_TASKS, make_task, task_manifest
from .errors import (
    ConfigInvalid,
    IncompatibleCheckpoint,
    MissingCheckpoint,
    NonFiniteLoss,
    NonFiniteValue,
    UnknownTask,
)
from .training.config import HyperParams
from .training.trainer import Trainer

ABLATIONS = ("no-coh", "gru", "msgdim-16", "msgdim-32", "msgdim-64")


def _parse_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"{path}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


_HP_FIELDS = {f.name: f.type for f in dataclasses.fields(HyperParams)}


def _coerce(name: str, value: str):
    kind = _HP_FIELDS[name]
    if kind in ("bool", bool):
        if value.lower() in ("1", "true", "yes"):
            return True
        if value.lower() in ("0", "false", "no"):
            return False
        raise ConfigInvalid(f"{name}: cannot parse boolean from {value!r}")
    if kind in ("int", int):
        return int(float(value))
    if kind in ("float", float):
        return float(value)
    return value


def _build_hp(mode: str, file_kv: dict[str, str], overrides: list[str]) -> HyperParams:
    hp = HyperParams.defaults_for(mode)
    for source in (file_kv, dict(kv.split("=", 1) for kv in overrides)):
        for key, value in source.items():
            if key in ("envs", "env", "seeds", "ia_ckpt", "ca_ckpt", "out"):
                continue
            if key not in _HP_FIELDS:
                raise ConfigInvalid(f"unknown hyperparameter {key!r}")
            if key == "mode":
                continue
            setattr(hp, key, _coerce(key, value))
    hp.mode = mode
    hp.validate()
    return hp


def _seeds(arg: str) -> list[int]:
    seeds = [int(s) for s in arg.split(",") if s.strip() != ""]
    if not seeds:
        raise ConfigInvalid("seed list is empty")
    return seeds


def _out_root(arg: str | None) -> Path:
    return Path(os.environ.get("CORAL_OUT", arg or "runs"))


def _run_one(payload: dict) -> str:
    hp = HyperParams(**payload["hp"])
    trainer = Trainer(
        hp,
        payload["envs"],
        payload["seed"],
        payload["out_dir"],
        run_id=payload["run_id"],
        ia_ckpt=payload.get("ia_ckpt"),
        ca_ckpt=payload.get("ca_ckpt"),
    )
    trainer.run()
    return payload["out_dir"]


def _launch(jobs: list[dict], parallel: int) -> list[str]:
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(job) for job in jobs]


def _training_jobs(args, mode: str, envs: list[str], label: str, hp_extra: dict | None = None) -> list[dict]:
    file_kv = _parse_config_file(args.config) if args.config else {}
    hp = _build_hp(mode, file_kv, args.set or [])
    for key, value in (hp_extra or {}).items():
        setattr(hp, key, value)
    hp.validate()
    for name in envs:
        make_task(name)  # fail fast on unknown tasks
    out_root = _out_root(args.out)
    jobs = []
    for seed in _seeds(args.seeds):
        run_id = f"{label}-{'+'.join(envs)}-s{seed}"
        jobs.append(
            {
                "hp": hp.to_dict(),
                "envs": envs,
                "seed": seed,
                "out_dir": str(out_root / run_id),
                "run_id": run_id,
                "ia_ckpt": getattr(args, "ia_ckpt", None),
                "ca_ckpt": getattr(args, "ca_ckpt", None),
            }
        )
    return jobs


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE", help="hyperparameter override")
    sub.add_argument("--seeds", default="0", help="comma-separated seed list")
    sub.add_argument("--out", default=None, help="output root (CORAL_OUT overrides)")
    sub.add_argument("--parallel-seeds", type=int, default=1, dest="parallel")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coral", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="joint IA+CA training over a task mixture")
    _add_common(p)
    p.add_argument("--envs", default=",".join(PRETRAIN_TASKS), help="comma-separated task names")

    p = sub.add_parser("deploy", help="frozen IA + fresh CA on one task")
    _add_common(p)
    p.add_argument("--env", required=True)
    p.add_argument("--ia-ckpt", required=True, dest="ia_ckpt")

    p = sub.add_parser("zeroshot", help="frozen IA + frozen CA evaluation")
    _add_common(p)
    p.add_argument("--env", required=True)
    p.add_argument("--ia-ckpt", required=True, dest="ia_ckpt")
    p.add_argument("--ca-ckpt", required=True, dest="ca_ckpt")

    p = sub.add_parser("baseline", help="ppo / wm / random-msg baselines")
    _add_common(p)
    p.add_argument("--algo", required=True, choices=("ppo", "wm", "random-msg"))
    p.add_argument("--env", required=True)

    p = sub.add_parser("ablate", help="pretraining ablations")
    _add_common(p)
    p.add_argument("--variant", required=True, choices=ABLATIONS)
    p.add_argument("--envs", default=",".join(PRETRAIN_TASKS))

    p = sub.add_parser("analyze", help="TTT / Welch / CI / ICE over a metrics directory")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--window-episodes", type=int, default=100)

    sub.add_parser("manifest", help="print the task registry as JSON")
    return parser


def run_command(args) -> int:
    if args.command == "manifest":
        print(json.dumps(task_manifest(), indent=2, sort_keys=True))
        return 0
    if args.command == "analyze":
        from .analysis import analyze_directory

        report = analyze_directory(args.in_dir, args.out_dir, window_episodes=args.window_episodes)
        print(json.dumps(report, indent=2, sort_keys=True, default=float))
        return 0

    if args.command == "pretrain":
        envs = [e for e in args.envs.split(",") if e]
        jobs = _training_jobs(args, "pretrain", envs, "pretrain")
    elif args.command == "deploy":
        jobs = _training_jobs(args, "deploy", [args.env], "deploy")
    elif args.command == "zeroshot":
        jobs = _training_jobs(args, "zeroshot", [args.env], "zeroshot")
    elif args.command == "baseline":
        mode = f"baseline-{args.algo}"
        jobs = _training_jobs(args, mode, [args.env], mode)
    elif args.command == "ablate":
        envs = [e for e in args.envs.split(",") if e]
        extra: dict = {}
        if args.variant == "no-coh":
            extra["lambda_coh"] = 0.0
        elif args.variant == "gru":
            extra["gru_ia"] = True
        else:
            extra["message_dim"] = int(args.variant.split("-")[1])
        jobs = _training_jobs(args, "pretrain", envs, f"ablate-{args.variant}", hp_extra=extra)
    else:  # pragma: no cover
        raise ConfigInvalid(f"unknown command {args.command}")

    for out_dir in _launch(jobs, getattr(args, "parallel", 1)):
        print(out_dir)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run_command(args)
    except (ConfigInvalid, UnknownTask) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (MissingCheckpoint, IncompatibleCheckpoint) as err:
        print(f"checkpoint error: {err}", file=sys.stderr)
        return 3
    except (NonFiniteLoss, NonFiniteValue) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
