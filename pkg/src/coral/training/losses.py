"""PPO surrogate for the control agent and the composite information-agent
losses (dynamics, coherence, causal influence)."""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..agents.ca import ca_forward, log_softmax_np
from ..agents.ia import ia_world_forward
from ..tensor import Tensor


def ppo_loss_from_outputs(logits, value, actions, old_log_probs, advantages, returns, old_values, clip_eps, vf_coef, entropy_coef):
    """Clipped-surrogate PPO loss given policy outputs on one minibatch.

    Advantages are z-scored per minibatch here. Value loss is clipped against
    the old values by the same epsilon. Returns (loss, diagnostics).
    """
    adv = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    adv_t = T.tensor(adv.astype(logits.data.dtype))

    logp_all = T.log_softmax(logits)
    logp = T.gather_rows(logp_all, actions)
    old_logp = T.tensor(old_log_probs.astype(logp.data.dtype))
    ratio = T.exp(logp - old_logp)

    surr = T.minimum(T.mul(ratio, adv_t), T.mul(T.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps), adv_t))
    policy_loss = T.mul(T.mean(surr), -1.0)

    ret_t = T.tensor(returns[:, None].astype(logp.data.dtype))
    old_v = T.tensor(old_values[:, None].astype(logp.data.dtype))
    v_clipped = old_v + T.clip(value - old_v, -clip_eps, clip_eps)
    v_loss = T.mul(T.mean(T.maximum(T.square(value - ret_t), T.square(v_clipped - ret_t))), 0.5)

    probs = T.exp(logp_all)
    entropy = T.mean(T.mul(T.sum_(T.mul(probs, logp_all), axis=1), -1.0))

    loss = policy_loss + T.mul(v_loss, vf_coef) + T.mul(entropy, -entropy_coef)

    with np.errstate(over="ignore"):
        ratio_np = np.exp(logp.data - old_log_probs)
    diags = {
        "policy_loss": float(policy_loss.data),
        "value_loss": float(v_loss.data),
        "entropy": float(entropy.data),
        "approx_kl": float(np.mean(old_log_probs - logp.data)),
        "clip_frac": float(np.mean(np.abs(ratio_np - 1.0) > clip_eps)),
    }
    return loss, diags


def ppo_loss(ca_params, obs, messages, actions, old_log_probs, advantages, returns, old_values, clip_eps, vf_coef, entropy_coef):
    """PPO loss for the control agent: forward with the stored messages
    (gradients blocked at the message input), then the clipped surrogate."""
    logits, value = ca_forward(ca_params, obs, messages)
    return ppo_loss_from_outputs(
        logits, value, actions, old_log_probs, advantages, returns, old_values, clip_eps, vf_coef, entropy_coef
    )


def dynamics_loss(ia_params, message: Tensor, actions, next_obs, rewards, dones, obs_loss_mean: bool = True):
    """Next-observation / reward / termination regression from (m_t, a_t).

    Returns (loss, terms) where terms holds the three components: mean
    squared observation error (mean or sum over components per the config),
    squared reward error, and binary cross-entropy on the done probability.
    """
    preds = ia_world_forward(ia_params, message, actions)
    dtype = message.data.dtype

    obs_err = T.square(preds["next_obs"] - T.tensor(next_obs.astype(dtype)))
    if obs_loss_mean:
        term_obs = T.mean(obs_err)
    else:
        term_obs = T.mean(T.sum_(obs_err, axis=1))

    r_t = T.tensor(rewards[:, None].astype(dtype))
    term_rew = T.mean(T.square(preds["reward"] - r_t))

    d_t = T.tensor(dones[:, None].astype(dtype))
    d_hat = preds["done"]
    bce = T.mul(T.mean(T.mul(d_t, T.log(d_hat)) + T.mul(1.0 - d_t, T.log(1.0 - d_hat))), -1.0)

    loss = term_obs + term_rew + bce
    terms = {"dyn_obs": float(term_obs.data), "dyn_reward": float(term_rew.data), "dyn_done": float(bce.data)}
    return loss, terms, preds


def coherence_loss(ia_params, message: Tensor, actions, next_messages, valid, preds=None):
    """Mean squared next-message prediction error, masked at episode ends.

    The target is the message the agent actually emitted at t+1, treated as
    a constant; predictions paired across an episode boundary are dropped.
    """
    if preds is None:
        preds = ia_world_forward(ia_params, message, actions)
    dtype = message.data.dtype
    target = T.tensor(next_messages.astype(dtype))
    sq = T.square(preds["next_msg"] - target)
    per_sample = T.mean(sq, axis=1)
    mask = valid.astype(dtype)
    denom = max(1.0, float(mask.sum()))
    return T.mul(T.sum_(T.mul(per_sample, T.tensor(mask))), 1.0 / denom)


def ice_np(logits_zero: np.ndarray, logits_msg: np.ndarray) -> np.ndarray:
    """Per-step reverse KL D(pi(.|o,0) || pi(.|o,m)), computed in log space."""
    lp0 = log_softmax_np(logits_zero)
    lpm = log_softmax_np(logits_msg)
    return (np.exp(lp0) * (lp0 - lpm)).sum(axis=-1)


def zscore(x: np.ndarray) -> np.ndarray:
    """Population z-score with an epsilon guard; constant input maps to zeros."""
    return (x - x.mean()) / (x.std() + 1e-8)


def utility(delta_v: np.ndarray, advantages: np.ndarray, alpha: float) -> np.ndarray:
    """Hybrid utility: clipped convex mix of z-scored value shift and GAE.

    Computed outside the autodiff graph; it enters the causal loss as a
    constant weight.
    """
    return np.maximum(0.0, alpha * zscore(delta_v) + (1.0 - alpha) * zscore(advantages))


def causal_loss(ca_const, obs, message: Tensor, logits_zero: np.ndarray, utilities: np.ndarray):
    """Utility-weighted negative ICE; gradient flows only through the
    message-conditioned branch into the message (the control agent's weights
    enter as constants, the zero-message branch is pre-computed data)."""
    dtype = message.data.dtype
    logits_msg, _ = ca_forward(ca_const, obs.astype(dtype), message)
    lpm = T.log_softmax(logits_msg)
    lp0 = log_softmax_np(logits_zero.astype(np.float64)).astype(dtype)
    p0 = np.exp(lp0)
    ice = T.sum_(T.mul(T.tensor(p0), T.tensor(lp0) - lpm), axis=1)
    u = T.tensor(utilities.astype(dtype))
    return T.mul(T.mean(T.mul(u, ice)), -1.0), float(ice.data.mean())
