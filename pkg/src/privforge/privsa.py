"""Stage-1 training: the structurally regularized DP fine-tuning loop.

Each step Poisson-samples a batch, takes per-sample gradients of
L_CE + lambda * L_KL (KL against a frozen reference snapshot of the model at
training start, evaluated at structural-token positions), clips, noises, and
applies the update. lambda decays exponentially on a plateau schedule. A
plain non-private trainer for the downstream model lives here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import BYTE_VOCAB, Dataset, Vocabulary
from .lm import LmConfig, init_params, per_sample_gradient
from .minilang.nodes import StructuralSpan
from .minilang.parser import ParseFailure
from .minilang.summary import extract_structural_tokens
from .privacy import (
    DEFAULT_ORDERS,
    DpConfig,
    PrivacyReport,
    compute_epsilon,
    dp_sgd_step,
    poisson_sample,
)


@dataclass(frozen=True)
class LambdaSchedule:
    lambda_max: float = 1000.0
    lambda_min: float = 0.01
    decay_rate: float = 0.01
    step_interval: int = 20

    def __post_init__(self):
        if not self.lambda_max >= self.lambda_min >= 0:
            raise ValueError("need lambda_max >= lambda_min >= 0")
        if self.decay_rate <= 0:
            raise ValueError("decay_rate must be > 0")
        if self.step_interval < 1:
            raise ValueError("step_interval must be >= 1")


def lambda_at(t: int, s: LambdaSchedule) -> float:
    """Piecewise-constant exponential decay: the step index is floored to the
    start of its plateau of length step_interval before decaying."""
    if t < 0:
        raise ValueError("t must be >= 0")
    t_prime = (t // s.step_interval) * s.step_interval
    return s.lambda_min + (s.lambda_max - s.lambda_min) * math.exp(
        -s.decay_rate * t_prime
    )


def snapshot_reference(params_j: np.ndarray) -> np.ndarray:
    """Bit-identical frozen copy; the returned array is read-only."""
    params_rf = params_j.copy()
    params_rf.setflags(write=False)
    return params_rf


@dataclass(frozen=True)
class TrainConfig:
    schedule: LambdaSchedule = LambdaSchedule()
    dp: DpConfig = DpConfig()
    learning_rate: float = 0.1
    batch_expectation: int | None = None  # L; when set, q = L / len(dataset)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_expectation is not None and self.batch_expectation < 1:
            raise ValueError("batch_expectation must be >= 1")


@dataclass(frozen=True)
class StepRecord:
    t: int
    lam: float
    l_ce: float
    l_kl: float
    l_total: float
    batch_size: int
    mean_grad_norm: float
    max_grad_norm: float


@dataclass
class TrainTrace:
    steps: list[StepRecord] = field(default_factory=list)
    report: PrivacyReport | None = None
    sampling_rate: float = 0.0


def effective_sampling_rate(cfg: TrainConfig, n_records: int) -> float:
    if cfg.batch_expectation is not None:
        return min(1.0, cfg.batch_expectation / n_records)
    return cfg.dp.sampling_rate


def _final_report(q: float, dp: DpConfig) -> PrivacyReport:
    if dp.max_steps == 0:
        return PrivacyReport(epsilon=0.0, delta=dp.delta, best_order=DEFAULT_ORDERS[-1])
    if dp.noise_scale == 0.0:
        return PrivacyReport(
            epsilon=math.inf, delta=dp.delta, best_order=DEFAULT_ORDERS[-1]
        )
    return compute_epsilon(q, dp.noise_scale, dp.max_steps, dp.delta)


def dataset_spans(ds: Dataset) -> list[list[StructuralSpan]]:
    """Structural spans per snippet; parse failures degrade to empty lists so
    every record keeps participating in sampling (q's denominator is fixed)."""
    spans: list[list[StructuralSpan]] = []
    for pair in ds.pairs:
        try:
            spans.append(extract_structural_tokens(pair.snippet.source))
        except ParseFailure:
            spans.append([])
    return spans


def privsa_train(
    ds: Dataset,
    cfg: TrainConfig,
    lm_cfg: LmConfig,
    vocab: Vocabulary = BYTE_VOCAB,
    init: np.ndarray | None = None,
) -> tuple[np.ndarray, TrainTrace]:
    """Run exactly cfg.dp.max_steps DP-SGD steps of the structural objective.

    One RNG stream drives each step in a declared order: batch indices first,
    then the Gaussian noise draw. The trace records the schedule, the loss
    breakdown, and pre-clip gradient norm statistics per step.
    """
    if len(ds.pairs) == 0:
        raise ValueError("dataset must be non-empty")
    params = init_params(lm_cfg) if init is None else np.array(init, dtype=np.float64)
    params_rf = snapshot_reference(params)
    spans = dataset_spans(ds)
    q = effective_sampling_rate(cfg, len(ds.pairs))
    rng = np.random.default_rng(cfg.dp.rng_seed)
    trace = TrainTrace(sampling_rate=q)

    for t in range(cfg.dp.max_steps):
        lam = lambda_at(t, cfg.schedule)
        batch_idx = poisson_sample(len(ds.pairs), q, rng)
        grads: list[np.ndarray] = []
        ce_terms: list[float] = []
        kl_terms: list[float] = []
        for i in batch_idx:
            g, breakdown = per_sample_gradient(
                params, params_rf, lm_cfg, ds.pairs[i], spans[i], lam, vocab
            )
            grads.append(g)
            ce_terms.append(breakdown.l_ce)
            kl_terms.append(breakdown.l_kl)
        norms = [float(np.linalg.norm(g)) for g in grads]
        params = dp_sgd_step(params, grads, cfg.dp, cfg.learning_rate, rng)
        l_ce = float(np.mean(ce_terms)) if ce_terms else 0.0
        l_kl = float(np.mean(kl_terms)) if kl_terms else 0.0
        trace.steps.append(
            StepRecord(
                t=t,
                lam=lam,
                l_ce=l_ce,
                l_kl=l_kl,
                l_total=l_ce + lam * l_kl,
                batch_size=len(batch_idx),
                mean_grad_norm=float(np.mean(norms)) if norms else 0.0,
                max_grad_norm=max(norms) if norms else 0.0,
            )
        )

    trace.report = _final_report(q, cfg.dp)
    return params, trace


def plain_train(
    ds: Dataset,
    lm_cfg: LmConfig,
    epochs: int,
    batch_size: int,
    learning_rate: float,
    seed: int = 0,
    init: np.ndarray | None = None,
    vocab: Vocabulary = BYTE_VOCAB,
) -> np.ndarray:
    """Deterministic non-private minibatch SGD on the cross-entropy loss."""
    if len(ds.pairs) == 0:
        raise ValueError("dataset must be non-empty")
    params = init_params(lm_cfg) if init is None else np.array(init, dtype=np.float64)
    rng = np.random.default_rng(seed)
    n = len(ds.pairs)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            total = np.zeros_like(params)
            for i in batch:
                g, _ = per_sample_gradient(
                    params, params, lm_cfg, ds.pairs[i], [], 0.0, vocab
                )
                total += g
            params = params - learning_rate * (total / len(batch))
    return params
