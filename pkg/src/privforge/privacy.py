"""DP-SGD mechanics and the Rényi-DP accountant for the subsampled Gaussian.

Clipping bounds each per-sample gradient's influence; Poisson subsampling
amplifies privacy; Gaussian noise (per-coordinate std sigma * C) makes each
aggregate release private. The accountant composes integer-order Rényi bounds
across steps and converts to (epsilon, delta) at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class NonFiniteGradient(ValueError):
    """A gradient with NaN/inf entries reached the clipper."""


class EmptyBatch(ValueError):
    """noisy_aggregate needs at least one clipped gradient."""


class SigmaZero(ValueError):
    """The accountant needs sigma > 0."""


class Unreachable(ValueError):
    """No sigma on the search interval meets the target epsilon."""


DEFAULT_ORDERS: tuple[int, ...] = tuple(range(2, 257))


@dataclass(frozen=True)
class DpConfig:
    clip_norm: float = 1.0
    noise_scale: float = 1.0  # multiplier of clip_norm
    sampling_rate: float = 0.1
    max_steps: int = 100
    delta: float = 1e-5
    rng_seed: int = 0

    def __post_init__(self):
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be > 0")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")
        if not 0 < self.sampling_rate <= 1:
            raise ValueError("sampling_rate must be in (0, 1]")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if not 0 < self.delta < 1:
            raise ValueError("delta must be in (0, 1)")


@dataclass(frozen=True)
class RdpCurve:
    orders: tuple[int, ...]
    rdp_values: tuple[float, ...]

    def __post_init__(self):
        if len(self.orders) != len(self.rdp_values):
            raise ValueError("orders and rdp_values must align")
        if any(a <= 1 for a in self.orders):
            raise ValueError("RDP orders must exceed 1")


@dataclass(frozen=True)
class PrivacyReport:
    epsilon: float
    delta: float
    best_order: int

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


def clip_gradient(g: np.ndarray, clip_norm: float) -> np.ndarray:
    """Scale g to norm clip_norm when it exceeds it: g / max(1, ||g|| / C)."""
    if clip_norm <= 0:
        raise ValueError("clip_norm must be > 0")
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient("gradient has non-finite entries")
    norm = float(np.linalg.norm(g))
    scale = max(1.0, norm / clip_norm)
    if scale == 1.0:
        return g
    return g / scale


def poisson_sample(n: int, q: float, rng: np.random.Generator) -> np.ndarray:
    """Each index enters independently with probability q; sorted output."""
    if not 0 < q <= 1:
        raise ValueError("q must be in (0, 1]")
    return np.nonzero(rng.random(n) < q)[0]


def noisy_aggregate(
    clipped: list[np.ndarray], clip_norm: float, sigma: float, rng: np.random.Generator
) -> np.ndarray:
    """Mean of (sum of clipped gradients + N(0, (sigma*C)^2 I))."""
    if len(clipped) == 0:
        raise EmptyBatch("need at least one gradient")
    total = np.sum(clipped, axis=0, dtype=np.float64)
    noise = rng.normal(0.0, sigma * clip_norm, size=total.shape)
    return (total + noise) / len(clipped)


def dp_sgd_step(
    params: np.ndarray,
    per_sample_grads: list[np.ndarray],
    cfg: DpConfig,
    lr: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Clip each gradient, noisy-aggregate, and apply params - lr * g_hat.

    An empty batch still consumes one Gaussian draw and applies a pure-noise
    step (divisor 1), keeping the subsampled-Gaussian accounting exact and
    the RNG stream step-deterministic.
    """
    if len(per_sample_grads) == 0:
        noise = rng.normal(0.0, cfg.noise_scale * cfg.clip_norm, size=params.shape)
        return params - lr * noise
    clipped = [clip_gradient(g, cfg.clip_norm) for g in per_sample_grads]
    g_hat = noisy_aggregate(clipped, cfg.clip_norm, cfg.noise_scale, rng)
    return params - lr * g_hat


# --- accountant --------------------------------------------------------------


def _log_add(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a > b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _rdp_one_step(q: float, sigma: float, alpha: int) -> float:
    """Single-step RDP of the Poisson-subsampled Gaussian at integer order."""
    if q == 1.0:
        return alpha / (2 * sigma * sigma)
    log_q, log_1mq = math.log(q), math.log1p(-q)
    acc = -math.inf
    for k in range(alpha + 1):
        term = (
            _log_comb(alpha, k)
            + k * log_q
            + (alpha - k) * log_1mq
            + (k * k - k) / (2 * sigma * sigma)
        )
        acc = _log_add(acc, term)
    return acc / (alpha - 1)


def rdp_subsampled_gaussian(
    q: float,
    sigma: float,
    steps: int,
    orders: tuple[int, ...] = DEFAULT_ORDERS,
) -> RdpCurve:
    """Composed RDP curve: steps * per-step bound at each integer order."""
    if sigma <= 0:
        raise SigmaZero("sigma must be > 0")
    if not 0 < q <= 1:
        raise ValueError("q must be in (0, 1]")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    values = tuple(steps * _rdp_one_step(q, sigma, a) for a in orders)
    return RdpCurve(orders=tuple(orders), rdp_values=values)


def rdp_to_eps(curve: RdpCurve, delta: float, conversion: str = "classic") -> PrivacyReport:
    """Convert an RDP curve to (epsilon, delta), minimizing over orders.

    conversion="classic": eps = rdp + ln(1/delta)/(alpha-1).
    conversion="improved": the tighter ln-corrected form
        eps = rdp + ln(1 - 1/alpha) - (ln delta + ln alpha)/(alpha - 1).
    """
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    if len(curve.orders) == 0:
        raise ValueError("curve is empty")
    best_eps, best_order = math.inf, curve.orders[0]
    for alpha, rdp in zip(curve.orders, curve.rdp_values):
        if conversion == "classic":
            eps = rdp + math.log(1 / delta) / (alpha - 1)
        elif conversion == "improved":
            eps = rdp + math.log1p(-1 / alpha) - (math.log(delta) + math.log(alpha)) / (
                alpha - 1
            )
        else:
            raise ValueError(f"unknown conversion {conversion!r}")
        if eps < best_eps:
            best_eps, best_order = eps, alpha
    return PrivacyReport(epsilon=max(0.0, best_eps), delta=delta, best_order=best_order)


def compute_epsilon(
    q: float,
    sigma: float,
    steps: int,
    delta: float,
    orders: tuple[int, ...] = DEFAULT_ORDERS,
    conversion: str = "classic",
) -> PrivacyReport:
    """rdp_to_eps(rdp_subsampled_gaussian(...)) in one call; steps=0 or an
    effectively-infinite noise scale short-circuits to the all-zero curve."""
    if steps == 0:
        zero = RdpCurve(orders=tuple(orders), rdp_values=(0.0,) * len(orders))
        return rdp_to_eps(zero, delta, conversion)
    return rdp_to_eps(rdp_subsampled_gaussian(q, sigma, steps, orders), delta, conversion)


def calibrate_sigma(
    q: float,
    steps: int,
    delta: float,
    target_eps: float,
    orders: tuple[int, ...] = DEFAULT_ORDERS,
    conversion: str = "classic",
    tol: float = 1e-3,
) -> float:
    """Minimal sigma (within tol) whose accounted epsilon is <= target_eps."""
    if target_eps <= 0:
        raise ValueError("target_eps must be > 0")

    def eps_at(sigma: float) -> float:
        return compute_epsilon(q, sigma, steps, delta, orders, conversion).epsilon

    lo, hi = 1e-4, 1.0
    while eps_at(hi) > target_eps:
        hi *= 2.0
        if hi > 1e6:
            raise Unreachable(f"target epsilon {target_eps} unreachable")
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if eps_at(mid) <= target_eps:
            hi = mid
        else:
            lo = mid
    return hi
