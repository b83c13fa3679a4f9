"""Confidence intervals and Welch's t-test with a self-contained Student-t
CDF (continued-fraction incomplete beta), so the analysis pipeline carries no
stats dependency."""

from __future__ import annotations

import math

import numpy as np

from ..errors import TooFewSamples

_TINY = 1e-300
_CF_TOL = 1e-12
_CF_MAXIT = 500


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta (Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            break
    return h


def _betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log(1.0 - x)
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, dof: float) -> float:
    """CDF of Student's t distribution with `dof` degrees of freedom."""
    if dof <= 0:
        raise ValueError("dof must be positive")
    x = dof / (dof + t * t)
    tail = 0.5 * _betainc(dof / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def confidence_interval(samples) -> tuple[float, float]:
    """Mean and 95% halfwidth 1.96 * s / sqrt(N) (sample std, N-1)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise TooFewSamples(f"need >= 2 samples, got {x.size}")
    return float(x.mean()), float(1.96 * x.std(ddof=1) / math.sqrt(x.size))


def welch_t_test(a, b) -> tuple[float, float, float]:
    """Independent two-sample Welch's t-test.

    Returns (t, dof, p_two_sided) with Welch-Satterthwaite degrees of
    freedom. Two zero-variance samples degenerate to p=1 when the means
    agree and p=0 otherwise.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.size < 2 or y.size < 2:
        raise TooFewSamples("both samples need >= 2 observations")
    vx = x.var(ddof=1) / x.size
    vy = y.var(ddof=1) / y.size
    if vx + vy == 0.0:
        dof = float(x.size + y.size - 2)
        if x.mean() == y.mean():
            return 0.0, dof, 1.0
        return math.copysign(math.inf, x.mean() - y.mean()), dof, 0.0
    t = float((x.mean() - y.mean()) / math.sqrt(vx + vy))
    dof = float((vx + vy) ** 2 / (vx**2 / (x.size - 1) + vy**2 / (y.size - 1)))
    p = 2.0 * (1.0 - student_t_cdf(abs(t), dof))
    return t, dof, min(1.0, max(0.0, p))
