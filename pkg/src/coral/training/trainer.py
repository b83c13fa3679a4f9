"""Training orchestration: run modes, updates, metrics, checkpoints.

Modes
-----
pretrain             joint IA + CA training over a task mixture; every
                     rollout re-draws one task per env from the pool
deploy               frozen IA from checkpoint, fresh CA trained with PPO
zeroshot             frozen IA + frozen CA, evaluation only
baseline-ppo         CA alone, zero message
baseline-wm          IA-architecture agent trained end-to-end (PPO + dynamics)
baseline-random-msg  CA with uniform random messages
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np

from .. import __version__
from ..agents.ca import init_ca_params
from ..agents.gru import gru_window_forward, init_gru_ia_params
from ..agents.ia import IAConfig, ia_forward, init_ia_params
from ..agents.wm import init_wm_params, wm_heads
from ..envs import OBS_DIM, VecGridEnv, make_task
from ..envs.kernels import BACKEND
from ..errors import ConfigInvalid, IncompatibleCheckpoint, NonFiniteLoss
from ..tensor import ParamStore, adam_step, checkpoint, clip_global_norm, lr_schedule
from .config import HyperParams
from .gae import compute_gae
from .losses import (
    causal_loss,
    coherence_loss,
    dynamics_loss,
    ppo_loss,
    ppo_loss_from_outputs,
    utility,
)
from .rollout import Collector, RolloutBatch

METRICS_COLUMNS = (
    "run_id", "mode", "env_name", "seed", "global_step",
    "episodic_return_mean", "episodic_return_count",
    "ppo_loss", "value_loss", "entropy",
    "l_dyn", "l_coh", "l_causal",
    "ice_mean", "utility_mean", "lr", "sps",
)


def _fmt(x) -> str:
    if isinstance(x, float):
        return "%.10g" % x
    return str(x)


def params_digest(store: ParamStore) -> str:
    h = hashlib.sha256()
    for name, t in store.items():
        h.update(name.encode())
        h.update(np.ascontiguousarray(t.data).tobytes())
    return h.hexdigest()


class Trainer:
    def __init__(
        self,
        cfg: HyperParams,
        env_names: list[str],
        seed: int,
        out_dir,
        run_id: str | None = None,
        ia_ckpt: str | None = None,
        ca_ckpt: str | None = None,
    ):
        cfg.validate()
        self.cfg = cfg
        self.env_names = list(env_names)
        self.seed = int(seed)
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.run_id = run_id or f"{cfg.mode}-{'+'.join(env_names)}-s{seed}"
        self.env_label = "+".join(env_names)

        if cfg.mode in ("deploy", "zeroshot") and not ia_ckpt:
            raise ConfigInvalid(f"{cfg.mode} requires an information-agent checkpoint")
        if cfg.mode == "zeroshot" and not ca_ckpt:
            raise ConfigInvalid("zeroshot requires a control-agent checkpoint")

        ss = np.random.SeedSequence(self.seed)
        env_seed, ia_seed, ca_seed, pol_seed, task_seed, upd_seed, msg_seed = ss.spawn(7)
        self.policy_rng = np.random.default_rng(pol_seed)
        self.task_rng = np.random.default_rng(task_seed)
        self.update_rng = np.random.default_rng(upd_seed)
        self.msg_rng = np.random.default_rng(msg_seed)

        self.tasks_pool = [make_task(n) for n in env_names]
        if cfg.mode == "pretrain":
            initial = [self.tasks_pool[i] for i in self.task_rng.integers(len(self.tasks_pool), size=cfg.n_envs)]
        else:
            if len(self.tasks_pool) != 1:
                raise ConfigInvalid(f"{cfg.mode} expects exactly one environment, got {env_names}")
            initial = [self.tasks_pool[0]] * cfg.n_envs
        self.envs = VecGridEnv(initial, seed=int(env_seed.generate_state(1)[0]))

        self.ia_cfg = IAConfig(
            obs_dim=OBS_DIM,
            hidden_dim=cfg.hidden_dim,
            message_dim=cfg.message_dim,
            context_len=cfg.context_len,
            num_heads=cfg.num_heads,
        )

        # Parameter stores per mode.
        self.ia: ParamStore | None = None
        self.ca: ParamStore | None = None
        self.agent_kind = {"baseline-ppo": "ppo", "baseline-wm": "wm", "baseline-random-msg": "random"}.get(
            cfg.mode, "gru" if cfg.gru_ia else "coral"
        )
        ia_rng = np.random.default_rng(ia_seed)
        ca_rng = np.random.default_rng(ca_seed)

        if self.agent_kind == "wm":
            self.ia = init_wm_params(self.ia_cfg, ia_rng)
        elif self.agent_kind in ("coral", "gru"):
            if ia_ckpt:
                self._load_ia(ia_ckpt)
            elif cfg.gru_ia:
                self.ia = init_gru_ia_params(self.ia_cfg, ia_rng)
            else:
                self.ia = init_ia_params(self.ia_cfg, ia_rng)
        if self.agent_kind != "wm":
            self.ca = init_ca_params(OBS_DIM, cfg.message_dim, ca_rng, hidden_dim=cfg.hidden_dim)
            if ca_ckpt:
                ck = checkpoint.load(ca_ckpt)
                self._check_meta(ck.meta, {"obs_dim": OBS_DIM, "message_dim": cfg.message_dim}, ca_ckpt)
                checkpoint.load_into(ck, self.ca, with_moments=False)

        self.train_ia = cfg.mode == "pretrain"
        self.train_policy = cfg.mode in ("pretrain", "deploy", "baseline-ppo", "baseline-wm", "baseline-random-msg")

        self.collector = Collector(
            self.envs,
            self.agent_kind,
            OBS_DIM,
            cfg.context_len,
            cfg.hidden_dim,
            cfg.message_dim,
            cfg.num_heads,
            self.policy_rng,
            self.msg_rng,
            persistent_context=cfg.persistent_context,
        )

        self.global_step = 0
        self.episodes_done = 0
        self.recent_returns: list[float] = []
        self.last_diagnostics: dict = {}
        self.ia_digest_start = params_digest(self.ia) if self.ia is not None else None
        self._sps_accum: list[float] = []

    # ------------------------------------------------------------------

    def _load_ia(self, path: str) -> None:
        ck = checkpoint.load(path)
        kind = ck.meta.get("kind")
        if kind not in ("ia", "gru"):
            raise IncompatibleCheckpoint(f"{path}: not an information-agent checkpoint (kind={kind!r})")
        self._check_meta(
            ck.meta,
            {
                "obs_dim": OBS_DIM,
                "message_dim": self.cfg.message_dim,
                "hidden_dim": self.cfg.hidden_dim,
                "context_len": self.cfg.context_len,
            },
            path,
        )
        self.agent_kind = "coral" if kind == "ia" else "gru"
        rng = np.random.default_rng(0)
        self.ia = init_ia_params(self.ia_cfg, rng) if kind == "ia" else init_gru_ia_params(self.ia_cfg, rng)
        checkpoint.load_into(ck, self.ia, with_moments=False)

    @staticmethod
    def _check_meta(meta: dict, expected: dict, path) -> None:
        for key, want in expected.items():
            got = meta.get(key)
            if got != want:
                raise IncompatibleCheckpoint(f"{path}: {key}={got} but this run requires {key}={want}")

    # ------------------------------------------------------------------

    def _assign_tasks(self) -> None:
        picks = self.task_rng.integers(len(self.tasks_pool), size=self.cfg.n_envs)
        self.collector.reset([self.tasks_pool[int(i)] for i in picks])

    def _derive(self, batch: RolloutBatch) -> None:
        adv, rets = compute_gae(
            batch.rewards,
            batch.values,
            batch.dones,
            batch.bootstrap_value,
            self.cfg.gamma,
            self.cfg.gae_lambda,
            truncated=batch.truncs,
            truncated_values=batch.trunc_values,
        )
        batch.advantages = adv.astype(np.float32)
        batch.returns = rets.astype(np.float32)
        batch.utilities = utility(batch.delta_v.reshape(-1), batch.advantages.reshape(-1), self.cfg.alpha).reshape(
            batch.delta_v.shape
        )

    def _check_finite(self, value: float, name: str, extra: dict) -> None:
        if not np.isfinite(value):
            dump = {"failed_loss": name, "value": repr(value), "global_step": self.global_step, **extra}
            path = self.out_dir / "diagnostics_failure.json"
            path.write_text(json.dumps(dump, indent=2, sort_keys=True, default=str))
            raise NonFiniteLoss(f"{name} is {value} at step {self.global_step}; diagnostics in {path}")

    def _update(self, batch: RolloutBatch, update_idx: int) -> dict:
        cfg = self.cfg
        lr = lr_schedule(update_idx, cfg.total_updates, cfg.base_lr) if cfg.lr_decay else cfg.base_lr
        n, t = batch.n_envs, batch.rollout_len
        b_total = n * t

        obs = batch.obs.reshape(b_total, -1)
        windows = batch.windows.reshape(b_total, cfg.context_len, -1)
        win_mask = batch.win_mask.reshape(b_total, cfg.context_len)
        msgs = batch.messages.reshape(b_total, -1)
        next_msgs = batch.next_messages.reshape(b_total, -1)
        actions = batch.actions.reshape(b_total)
        old_logp = batch.log_probs.reshape(b_total)
        old_values = batch.values.reshape(b_total)
        advantages = batch.advantages.reshape(b_total)
        returns = batch.returns.reshape(b_total)
        rewards = batch.rewards.reshape(b_total)
        dones = batch.dones.reshape(b_total)
        next_obs_true = batch.next_obs_true.reshape(b_total, -1)
        logits_zero = batch.logits_zero.reshape(b_total, -1)
        utilities = batch.utilities.reshape(b_total)
        coh_valid = (~dones).astype(np.float32)
        h_init = batch.gru_h_init.reshape(b_total, -1) if batch.gru_h_init is not None else None

        # Control-agent weights as constants for the causal branch; Adam
        # rebinds parameter arrays, so these references stay at the
        # collection-time values for the whole update.
        ca_const = self.ca.constants() if (self.train_ia and cfg.lambda_causal != 0.0) else None

        acc: dict[str, list[float]] = {}

        def log(name, value):
            acc.setdefault(name, []).append(float(value))

        mb_size = b_total // cfg.minibatches
        for _ in range(cfg.epochs):
            perm = self.update_rng.permutation(b_total)
            for k in range(cfg.minibatches):
                mb = perm[k * mb_size : (k + 1) * mb_size]

                if self.agent_kind == "wm":
                    self.ia.zero_grad()
                    m, _ = ia_forward(self.ia, windows[mb], win_mask[mb], num_heads=cfg.num_heads)
                    logits, value = wm_heads(self.ia, m)
                    pl, diags = ppo_loss_from_outputs(
                        logits, value, actions[mb], old_logp[mb], advantages[mb], returns[mb], old_values[mb],
                        cfg.clip_eps, cfg.vf_coef, cfg.entropy_coef,
                    )
                    dyn, terms, _ = dynamics_loss(
                        self.ia, m, actions[mb], next_obs_true[mb], rewards[mb], dones[mb], cfg.obs_loss_mean
                    )
                    total = pl + dyn * cfg.lambda_dyn
                    self._check_finite(float(total.data), "wm_loss", {"ppo": diags, "dyn": terms})
                    total.backward()
                    grads, gnorm = clip_global_norm(self.ia.grads(), cfg.max_grad_norm)
                    adam_step(self.ia, grads, lr)
                    for key, val in diags.items():
                        log(key, val)
                    log("l_dyn", float(dyn.data))
                    log("grad_norm_wm", gnorm)
                    continue

                if self.train_policy:
                    self.ca.zero_grad()
                    loss, diags = ppo_loss(
                        self.ca, obs[mb], msgs[mb], actions[mb], old_logp[mb], advantages[mb], returns[mb],
                        old_values[mb], cfg.clip_eps, cfg.vf_coef, cfg.entropy_coef,
                    )
                    self._check_finite(float(loss.data), "ppo_loss", diags)
                    loss.backward()
                    grads, gnorm = clip_global_norm(self.ca.grads(), cfg.max_grad_norm)
                    adam_step(self.ca, grads, lr)
                    for key, val in diags.items():
                        log(key, val)
                    log("grad_norm_ca", gnorm)

                if self.train_ia:
                    self.ia.zero_grad()
                    if self.agent_kind == "gru":
                        m, _ = gru_window_forward(self.ia, windows[mb], win_mask[mb], h_init[mb])
                    else:
                        m, _ = ia_forward(self.ia, windows[mb], win_mask[mb], num_heads=cfg.num_heads)
                    dyn, terms, preds = dynamics_loss(
                        self.ia, m, actions[mb], next_obs_true[mb], rewards[mb], dones[mb], cfg.obs_loss_mean
                    )
                    coh = coherence_loss(self.ia, m, actions[mb], next_msgs[mb], coh_valid[mb], preds)
                    total = dyn * cfg.lambda_dyn + coh * cfg.lambda_coh
                    causal_val = 0.0
                    if ca_const is not None:
                        caus, _ = causal_loss(ca_const, obs[mb], m, logits_zero[mb], utilities[mb])
                        total = total + caus * cfg.lambda_causal
                        causal_val = float(caus.data)
                    self._check_finite(float(total.data), "ia_loss", {"dyn": terms, "coh": float(coh.data)})
                    total.backward()
                    grads, gnorm = clip_global_norm(self.ia.grads(), cfg.max_grad_norm)
                    adam_step(self.ia, grads, lr)
                    log("l_dyn", float(dyn.data))
                    log("l_coh", float(coh.data))
                    log("l_causal", causal_val)
                    for key, val in terms.items():
                        log(key, val)
                    log("grad_norm_ia", gnorm)

        out = {name: float(np.mean(vals)) for name, vals in acc.items()}
        out["lr"] = lr
        return out

    # ------------------------------------------------------------------

    def run(self) -> dict:
        cfg = self.cfg
        self._write_config()
        metrics_path = self.out_dir / "metrics.csv"
        t_start = time.perf_counter()
        with open(metrics_path, "w") as metrics:
            metrics.write(",".join(METRICS_COLUMNS) + "\n")
            if cfg.mode == "pretrain":
                self._assign_tasks()
            else:
                self.collector.reset()
            for update_idx in range(cfg.total_updates):
                t0 = time.perf_counter()
                if cfg.mode == "pretrain" and update_idx > 0:
                    self._assign_tasks()
                batch = self.collector.collect(self.ia, self.ca, cfg.rollout_len)
                self._derive(batch)
                if self.train_policy or self.train_ia:
                    diag = self._update(batch, update_idx)
                else:
                    diag = {"lr": 0.0}
                self.global_step += cfg.batch_size
                elapsed = time.perf_counter() - t0
                sps = cfg.batch_size / max(elapsed, 1e-9)
                self._sps_accum.append(sps)
                self._emit_row(metrics, batch, diag, sps)
                self.last_diagnostics = diag
                if cfg.checkpoint_every and (update_idx + 1) % cfg.checkpoint_every == 0:
                    self._save_checkpoints(tag=f"u{update_idx + 1:06d}")
        self._save_checkpoints()
        summary = self._write_summary(time.perf_counter() - t_start)
        return {"metrics": str(metrics_path), "out_dir": str(self.out_dir), "summary": summary}

    def _emit_row(self, fh, batch: RolloutBatch, diag: dict, sps: float) -> None:
        returns = [r for r, _ in batch.episodes]
        self.episodes_done += len(returns)
        self.recent_returns.extend(returns)
        if len(self.recent_returns) > 100:
            self.recent_returns = self.recent_returns[-100:]
        row = {
            "run_id": self.run_id,
            "mode": self.cfg.mode,
            "env_name": self.env_label,
            "seed": self.seed,
            "global_step": self.global_step,
            "episodic_return_mean": float(np.mean(returns)) if returns else float("nan"),
            "episodic_return_count": len(returns),
            "ppo_loss": diag.get("policy_loss", float("nan")),
            "value_loss": diag.get("value_loss", float("nan")),
            "entropy": diag.get("entropy", float("nan")),
            "l_dyn": diag.get("l_dyn", float("nan")),
            "l_coh": diag.get("l_coh", float("nan")),
            "l_causal": diag.get("l_causal", float("nan")),
            "ice_mean": float(batch.ice.mean()),
            "utility_mean": float(batch.utilities.mean()),
            "lr": diag.get("lr", 0.0),
            "sps": sps,
        }
        fh.write(",".join(_fmt(row[c]) for c in METRICS_COLUMNS) + "\n")
        fh.flush()

    # ------------------------------------------------------------------

    def _ia_meta(self) -> dict:
        return {
            "kind": {"coral": "ia", "gru": "gru", "wm": "wm"}.get(self.agent_kind, "ia"),
            "obs_dim": OBS_DIM,
            "hidden_dim": self.cfg.hidden_dim,
            "message_dim": self.cfg.message_dim,
            "context_len": self.cfg.context_len,
            "num_heads": self.cfg.num_heads,
            "action_dim": 7,
        }

    def _ca_meta(self) -> dict:
        return {
            "kind": "ca",
            "obs_dim": OBS_DIM,
            "hidden_dim": self.cfg.hidden_dim,
            "message_dim": self.cfg.message_dim,
            "action_dim": 7,
        }

    def _save_checkpoints(self, tag: str = "") -> None:
        suffix = f"_{tag}" if tag else ""
        rng_state = {"policy": self.policy_rng.bit_generator.state, "update": self.update_rng.bit_generator.state}
        if self.ia is not None:
            name = "wm" if self.agent_kind == "wm" else "ia"
            checkpoint.save(self.out_dir / f"{name}{suffix}.ckpt", self.ia, self._ia_meta(), rng_state)
        if self.ca is not None:
            checkpoint.save(self.out_dir / f"ca{suffix}.ckpt", self.ca, self._ca_meta(), rng_state)

    def _write_config(self) -> None:
        lines = [f"{k}={v}" for k, v in sorted(self.cfg.to_dict().items())]
        lines += [f"env_names={'+'.join(self.env_names)}", f"seed={self.seed}", f"run_id={self.run_id}"]
        (self.out_dir / "config.txt").write_text("\n".join(lines) + "\n")

    def _write_summary(self, wall_time: float) -> dict:
        summary = {
            "run_id": self.run_id,
            "mode": self.cfg.mode,
            "env_names": self.env_names,
            "seed": self.seed,
            "version": __version__,
            "kernel_backend": BACKEND,
            "global_steps": self.global_step,
            "episodes": self.episodes_done,
            "recent_return_mean": float(np.mean(self.recent_returns)) if self.recent_returns else None,
            "wall_time_s": wall_time,
            "sps_mean": float(np.mean(self._sps_accum)) if self._sps_accum else 0.0,
            "ia_digest_start": self.ia_digest_start,
            "ia_digest_end": params_digest(self.ia) if self.ia is not None else None,
            "config": self.cfg.to_dict(),
        }
        (self.out_dir / "run_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
        return summary
