"""Two-stage synthesis workflow: orchestration, baselines, config, reports.

Stage boundaries are materialized as files inside the run directory so the
data flow is auditable after the fact: the stage-2 fine-tune reads the
filtered synthetic set back from disk and never touches the protected
training snippets.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, replace

import numpy as np

from .corpus import CodeSnippet, Dataset, PromptCodePair, load_dataset, save_dataset
from .evaluation import (
    EvalReport,
    LeakageReport,
    inject_canaries,
    load_canaries,
    load_tasks,
    measure_leakage,
    run_benchmark,
)
from .filters import (
    RoundTripConfig,
    ValidationStats,
    execution_validate,
    round_trip_validate,
)
from .lm import CheckpointStamp, LmConfig, n_params, save_checkpoint
from .minilang.interp import ExecBudget
from .privacy import DEFAULT_ORDERS, DpConfig, PrivacyReport
from .privsa import LambdaSchedule, TrainConfig, plain_train, privsa_train
from .synth import SamplingConfig, batch_generate

MODES = ("privcode", "dpft", "jft", "nondpft")

REPORT_DIR_ENV = "PRIVFORGE_REPORT_DIR"


class ConfigError(ValueError):
    """Unknown, missing, or malformed configuration key."""


class StageError(RuntimeError):
    """A pipeline stage failed; the message carries the stage label."""


# --- secret detector ---------------------------------------------------------


@dataclass(frozen=True)
class SecretRule:
    category: str
    pattern: str
    mask: str


@dataclass(frozen=True)
class SecretDetector:
    """Ordered regex rules, one per PII category, with a mask token each.

    Rule order matters only for overlapping matches; each mask token is
    chosen so no rule can re-match it, which makes masking idempotent.
    """

    rules: tuple[SecretRule, ...]

    def finditer(self, text: str):
        for rule in self.rules:
            for m in re.finditer(rule.pattern, text):
                yield rule.category, m.group(0)

    def match_counts(self, text: str) -> dict[str, int]:
        counts = {rule.category: 0 for rule in self.rules}
        for category, _ in self.finditer(text):
            counts[category] += 1
        return counts


def default_detector() -> SecretDetector:
    return SecretDetector(
        rules=(
            SecretRule(
                "Email", r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}", "<EMAIL>"
            ),
            SecretRule("IpAddress", r"\b\d{1,3}(?:\.\d{1,3}){3}\b", "<IPADDRESS>"),
            SecretRule("Password", r"\b(?:pw|pwd|pass)[-_][A-Za-z0-9]{8,}\b", "<PASSWORD>"),
            SecretRule("Username", r"\buser_[a-z0-9]{4,}\b", "<USERNAME>"),
            SecretRule("Name", r"\b[A-Z][a-z]+ [A-Z][a-z]+\b", "<NAME>"),
        )
    )


def mask_pii(text: str, det: SecretDetector | None = None) -> str:
    """Replace every detector match with its category mask, to a fixpoint."""
    det = det if det is not None else default_detector()
    for _ in range(16):
        masked = text
        for rule in det.rules:
            masked = re.sub(rule.pattern, rule.mask, masked)
        if masked == text:
            return masked
        text = masked
    raise StageError("masking failed to reach a fixpoint")


# --- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    mode: str
    master_seed: int
    corpus_path: str
    prompts_path: str
    tasks_path: str
    canaries_path: str  # empty string disables the leakage audit
    out_dir: str
    junior: LmConfig
    premium: LmConfig
    stage1: TrainConfig
    stage2_epochs: int
    stage2_batch_size: int
    stage2_learning_rate: float
    sampling: SamplingConfig
    samples_per_prompt: int
    roundtrip: RoundTripConfig
    budget: ExecBudget
    audit_samples: int

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if n_params(self.premium) <= n_params(self.junior):
            raise ConfigError(
                "premium model must have strictly more parameters than junior"
            )
        if self.stage2_epochs < 1 or self.stage2_batch_size < 1:
            raise ConfigError("stage2 epochs and batch size must be >= 1")
        if self.stage2_learning_rate <= 0:
            raise ConfigError("stage2 learning rate must be > 0")
        if self.samples_per_prompt < 1:
            raise ConfigError("samples_per_prompt must be >= 1")
        if self.audit_samples < 1:
            raise ConfigError("audit.samples must be >= 1")


_CONFIG_KEYS: dict[str, str] = {
    "mode": "privcode",
    "seed": "0",
    "corpus": "",
    "prompts": "",
    "tasks": "",
    "canaries": "",
    "out_dir": "runs",
    "junior.embed_dim": "8",
    "junior.context_window": "8",
    "junior.hidden_dim": "16",
    "premium.embed_dim": "16",
    "premium.context_window": "8",
    "premium.hidden_dim": "32",
    "stage1.clip_norm": "1.0",
    "stage1.noise_scale": "1.0",
    "stage1.sampling_rate": "0.1",
    "stage1.max_steps": "100",
    "stage1.delta": "1e-5",
    "stage1.learning_rate": "0.1",
    "stage1.batch_expectation": "",
    "stage1.lambda_max": "1000.0",
    "stage1.lambda_min": "0.01",
    "stage1.decay_rate": "0.01",
    "stage1.step_interval": "20",
    "stage2.epochs": "4",
    "stage2.batch_size": "16",
    "stage2.learning_rate": "0.05",
    "sampling.strategy": "greedy",
    "sampling.k": "5",
    "sampling.temperature": "1.0",
    "sampling.max_tokens": "256",
    "samples_per_prompt": "1",
    "roundtrip.threshold": "0.88",
    "roundtrip.summaries": "1",
    "budget.max_steps": "10000",
    "budget.max_output_bytes": "65536",
    "audit.samples": "100",
}

_REQUIRED_KEYS = ("corpus", "tasks")


def parse_config_text(text: str) -> dict[str, str]:
    """Flat `key = value` lines; blank lines and full-line # comments only.

    Unknown keys are hard errors so a typo cannot silently fall back to a
    default.
    """
    values = dict(_CONFIG_KEYS)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        values[key] = value
    return values


def _as_int(values: dict[str, str], key: str) -> int:
    try:
        return int(values[key])
    except ValueError as e:
        raise ConfigError(f"{key} must be an integer, got {values[key]!r}") from e


def _as_float(values: dict[str, str], key: str) -> float:
    try:
        return float(values[key])
    except ValueError as e:
        raise ConfigError(f"{key} must be a number, got {values[key]!r}") from e


def build_config(values: dict[str, str]) -> PipelineConfig:
    for key in _REQUIRED_KEYS:
        if not values[key]:
            raise ConfigError(f"missing required key {key!r}")
    if values["mode"] == "privcode" and not values["prompts"]:
        raise ConfigError("privcode mode requires the 'prompts' key")
    seed = _as_int(values, "seed")
    junior = LmConfig(
        embed_dim=_as_int(values, "junior.embed_dim"),
        context_window=_as_int(values, "junior.context_window"),
        hidden_dim=_as_int(values, "junior.hidden_dim"),
        seed=seed,
    )
    premium = LmConfig(
        embed_dim=_as_int(values, "premium.embed_dim"),
        context_window=_as_int(values, "premium.context_window"),
        hidden_dim=_as_int(values, "premium.hidden_dim"),
        seed=seed + 1,
    )
    batch_expectation = (
        _as_int(values, "stage1.batch_expectation")
        if values["stage1.batch_expectation"]
        else None
    )
    stage1 = TrainConfig(
        schedule=LambdaSchedule(
            lambda_max=_as_float(values, "stage1.lambda_max"),
            lambda_min=_as_float(values, "stage1.lambda_min"),
            decay_rate=_as_float(values, "stage1.decay_rate"),
            step_interval=_as_int(values, "stage1.step_interval"),
        ),
        dp=DpConfig(
            clip_norm=_as_float(values, "stage1.clip_norm"),
            noise_scale=_as_float(values, "stage1.noise_scale"),
            sampling_rate=_as_float(values, "stage1.sampling_rate"),
            max_steps=_as_int(values, "stage1.max_steps"),
            delta=_as_float(values, "stage1.delta"),
            rng_seed=seed + 2,
        ),
        learning_rate=_as_float(values, "stage1.learning_rate"),
        batch_expectation=batch_expectation,
    )
    out_dir = os.environ.get(REPORT_DIR_ENV) or values["out_dir"]
    return PipelineConfig(
        mode=values["mode"],
        master_seed=seed,
        corpus_path=values["corpus"],
        prompts_path=values["prompts"],
        tasks_path=values["tasks"],
        canaries_path=values["canaries"],
        out_dir=out_dir,
        junior=junior,
        premium=premium,
        stage1=stage1,
        stage2_epochs=_as_int(values, "stage2.epochs"),
        stage2_batch_size=_as_int(values, "stage2.batch_size"),
        stage2_learning_rate=_as_float(values, "stage2.learning_rate"),
        sampling=SamplingConfig(
            strategy=values["sampling.strategy"],
            k=_as_int(values, "sampling.k"),
            temperature=_as_float(values, "sampling.temperature"),
            max_tokens=_as_int(values, "sampling.max_tokens"),
            seed=seed + 3,
        ),
        samples_per_prompt=_as_int(values, "samples_per_prompt"),
        roundtrip=RoundTripConfig(
            threshold=_as_float(values, "roundtrip.threshold"),
            summaries_per_snippet=_as_int(values, "roundtrip.summaries"),
        ),
        budget=ExecBudget(
            max_steps=_as_int(values, "budget.max_steps"),
            max_output_bytes=_as_int(values, "budget.max_output_bytes"),
        ),
        audit_samples=_as_int(values, "audit.samples"),
    )


def load_config(path: str) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as f:
        return build_config(parse_config_text(f.read()))


def config_echo(cfg: PipelineConfig) -> dict:
    """Stable, JSON-serializable dump of every setting that shapes a run."""
    return {
        "mode": cfg.mode,
        "seed": cfg.master_seed,
        "corpus": cfg.corpus_path,
        "prompts": cfg.prompts_path,
        "tasks": cfg.tasks_path,
        "canaries": cfg.canaries_path,
        "junior": {
            "vocab_size": cfg.junior.vocab_size,
            "embed_dim": cfg.junior.embed_dim,
            "context_window": cfg.junior.context_window,
            "hidden_dim": cfg.junior.hidden_dim,
            "n_params": n_params(cfg.junior),
        },
        "premium": {
            "vocab_size": cfg.premium.vocab_size,
            "embed_dim": cfg.premium.embed_dim,
            "context_window": cfg.premium.context_window,
            "hidden_dim": cfg.premium.hidden_dim,
            "n_params": n_params(cfg.premium),
        },
        "stage1": {
            "clip_norm": cfg.stage1.dp.clip_norm,
            "noise_scale": cfg.stage1.dp.noise_scale,
            "sampling_rate": cfg.stage1.dp.sampling_rate,
            "max_steps": cfg.stage1.dp.max_steps,
            "delta": cfg.stage1.dp.delta,
            "learning_rate": cfg.stage1.learning_rate,
            "batch_expectation": cfg.stage1.batch_expectation,
            "lambda_max": cfg.stage1.schedule.lambda_max,
            "lambda_min": cfg.stage1.schedule.lambda_min,
            "decay_rate": cfg.stage1.schedule.decay_rate,
            "step_interval": cfg.stage1.schedule.step_interval,
        },
        "stage2": {
            "epochs": cfg.stage2_epochs,
            "batch_size": cfg.stage2_batch_size,
            "learning_rate": cfg.stage2_learning_rate,
        },
        "sampling": {
            "strategy": cfg.sampling.strategy,
            "k": cfg.sampling.k,
            "temperature": cfg.sampling.temperature,
            "max_tokens": cfg.sampling.max_tokens,
            "samples_per_prompt": cfg.samples_per_prompt,
        },
        "roundtrip": {
            "threshold": cfg.roundtrip.threshold,
            "summaries": cfg.roundtrip.summaries_per_snippet,
        },
        "budget": {
            "max_steps": cfg.budget.max_steps,
            "max_output_bytes": cfg.budget.max_output_bytes,
        },
        "audit_samples": cfg.audit_samples,
    }


def config_hash(cfg: PipelineConfig) -> str:
    blob = json.dumps(config_echo(cfg), sort_keys=True).encode("utf-8")
    return hashlib.md5(blob).hexdigest()[:16]


# --- reports -----------------------------------------------------------------


@dataclass(frozen=True)
class RunReport:
    data: dict

    def core(self) -> dict:
        """Everything except wall-clock timings, for determinism comparisons."""
        return {k: v for k, v in self.data.items() if k != "timings"}


def write_report(report: RunReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.data, f, indent=2, sort_keys=True)
        f.write("\n")


def load_report(path: str) -> RunReport:
    with open(path, "r", encoding="utf-8") as f:
        return RunReport(data=json.load(f))


def _privacy_dict(report: PrivacyReport) -> dict:
    return {
        "epsilon": report.epsilon,
        "delta": report.delta,
        "best_order": report.best_order,
    }


def _stats_dict(stats: ValidationStats) -> dict:
    return {
        "total": stats.total,
        "counts": dict(stats.counts),
        "acceptance_rate": stats.acceptance_rate,
    }


def _eval_dict(report: EvalReport) -> dict:
    return {
        "pass_at_1": report.pass_at_1,
        "compile_pass_rate": report.compile_pass_rate,
        "execution_pass_rate": report.execution_pass_rate,
        "per_task": [
            {
                "task_id": o.task_id,
                "status": o.status,
                "fail_tests": list(o.fail_tests),
                "compiled": o.compiled,
            }
            for o in report.per_task
        ],
    }


def _leakage_dict(report: LeakageReport) -> dict:
    return {"counts": dict(report.counts), "leakage_rate": report.leakage_rate}


# --- orchestration -----------------------------------------------------------


def load_prompts(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as f:
        prompts = [line.rstrip("\n") for line in f]
    prompts = [p for p in prompts if p.strip()]
    if not prompts:
        raise StageError(f"prompt file {path!r} holds no prompts")
    return prompts


def _stage(label: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as e:
        raise StageError(f"{label}: {e}") from e


def _load_training_set(cfg: PipelineConfig) -> tuple[Dataset, list]:
    ds = load_dataset(cfg.corpus_path)
    specs = []
    if cfg.canaries_path:
        specs = load_canaries(cfg.canaries_path)
        ds = inject_canaries(ds, specs, seed=cfg.master_seed + 5)
    return ds, specs


def _audit(cfg: PipelineConfig, params: np.ndarray, lm_cfg: LmConfig, specs) -> dict:
    """Sample from each canary's own prompt and count verbatim reproductions."""
    sampling = SamplingConfig(
        strategy="temperature", temperature=1.0, max_tokens=cfg.sampling.max_tokens,
        seed=cfg.master_seed + 6,
    )
    generations = []
    for spec in specs:
        generations.extend(
            batch_generate(
                params, lm_cfg, [spec.sample.prompt], sampling, cfg.audit_samples
            )
        )
    return _leakage_dict(measure_leakage(generations, specs))


def _stamp(cfg: PipelineConfig, report: PrivacyReport) -> CheckpointStamp:
    return CheckpointStamp(
        config_hash=config_hash(cfg), epsilon=report.epsilon, delta=report.delta
    )


_INFINITE = PrivacyReport(
    epsilon=float("inf"), delta=0.0, best_order=DEFAULT_ORDERS[-1]
)


def _zero_lambda(cfg: TrainConfig) -> TrainConfig:
    """Plain DP-SGD: the structural regularizer switched off for baselines."""
    return replace(
        cfg,
        schedule=LambdaSchedule(
            lambda_max=0.0,
            lambda_min=0.0,
            decay_rate=cfg.schedule.decay_rate,
            step_interval=cfg.schedule.step_interval,
        ),
    )


def run_privcode(cfg: PipelineConfig) -> RunReport:
    """DP-train the junior model, synthesize, filter twice, then fine-tune
    the premium model on the filtered set only and evaluate it."""
    if cfg.mode != "privcode":
        raise ValueError(f"run_privcode needs mode 'privcode', got {cfg.mode!r}")
    os.makedirs(cfg.out_dir, exist_ok=True)
    timings: dict[str, float] = {}
    paths = {
        "junior_checkpoint": os.path.join(cfg.out_dir, "junior.ckpt"),
        "premium_checkpoint": os.path.join(cfg.out_dir, "premium.ckpt"),
        "d_synthetic": os.path.join(cfg.out_dir, "d_synthetic.jsonl"),
        "d_exec": os.path.join(cfg.out_dir, "d_exec.jsonl"),
        "d_filtered": os.path.join(cfg.out_dir, "d_filtered.jsonl"),
        "report": os.path.join(cfg.out_dir, "report.json"),
    }

    t0 = time.perf_counter()
    ds, specs = _stage("stage-1 (load corpus)", _load_training_set, cfg)
    params_j, trace = _stage(
        "stage-1 (dp training)", privsa_train, ds, cfg.stage1, cfg.junior
    )
    stamp = _stamp(cfg, trace.report)
    save_checkpoint(paths["junior_checkpoint"], params_j, cfg.junior, stamp)
    timings["stage1_train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    prompts = _stage("generation (load prompts)", load_prompts, cfg.prompts_path)
    records = _stage(
        "generation",
        batch_generate,
        params_j,
        cfg.junior,
        prompts,
        cfg.sampling,
        cfg.samples_per_prompt,
    )
    d_syn = Dataset(
        pairs=[PromptCodePair(r.prompt, r.snippet) for r in records], id="d_synthetic"
    )
    save_dataset(d_syn, paths["d_synthetic"])
    timings["generation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    d_syn = load_dataset(paths["d_synthetic"])
    d_exec, stats = _stage("filter (execution)", execution_validate, d_syn, cfg.budget)
    save_dataset(d_exec, paths["d_exec"])
    d_filtered, scores = _stage(
        "filter (round trip)", round_trip_validate, d_exec, cfg.roundtrip
    )
    save_dataset(d_filtered, paths["d_filtered"])
    if not (len(d_filtered) <= len(d_exec) <= len(d_syn)):
        raise StageError("filter: containment |D_f| <= |D_e| <= |D| violated")
    timings["filter"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    d_stage2 = load_dataset(paths["d_filtered"])  # the only stage-2 input
    params_p = _stage(
        "stage-2 (fine-tune)",
        plain_train,
        d_stage2,
        cfg.premium,
        cfg.stage2_epochs,
        cfg.stage2_batch_size,
        cfg.stage2_learning_rate,
        cfg.master_seed + 4,
    )
    save_checkpoint(paths["premium_checkpoint"], params_p, cfg.premium, stamp)
    timings["stage2_train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    tasks = _stage("evaluation (load tasks)", load_tasks, cfg.tasks_path)
    eval_report = _stage(
        "evaluation",
        run_benchmark,
        params_p,
        cfg.premium,
        tasks,
        SamplingConfig(strategy="greedy"),
        cfg.budget,
    )
    leakage = None
    if specs:
        leakage = _stage("audit", _audit, cfg, params_p, cfg.premium, specs)
    timings["evaluation"] = time.perf_counter() - t0

    report = RunReport(
        data={
            "mode": cfg.mode,
            "seed": cfg.master_seed,
            "config": config_echo(cfg),
            "config_hash": config_hash(cfg),
            "sizes": {
                "d": len(d_syn),
                "d_e": len(d_exec),
                "d_f": len(d_filtered),
            },
            "filter_stats": _stats_dict(stats),
            "round_trip_f1": [score.f1 for score in scores],
            "privacy": {"stage1": _privacy_dict(trace.report)},
            "evaluation": _eval_dict(eval_report),
            "leakage": leakage,
            "artifacts": {k: os.path.basename(p) for k, p in paths.items()},
            "timings": timings,
        }
    )
    write_report(report, paths["report"])
    return report


def run_baseline(cfg: PipelineConfig) -> RunReport:
    """Single-model baselines: DPFT (DP fine-tune of the premium model),
    JFT (plain pass on masked data, then DP pass on originals), and NonDPFT
    (plain training, reported at infinite epsilon)."""
    if cfg.mode == "privcode":
        raise ValueError("run_baseline handles the non-privcode modes")
    os.makedirs(cfg.out_dir, exist_ok=True)
    timings: dict[str, float] = {}
    paths = {
        "premium_checkpoint": os.path.join(cfg.out_dir, "premium.ckpt"),
        "report": os.path.join(cfg.out_dir, "report.json"),
    }

    t0 = time.perf_counter()
    ds, specs = _stage("train (load corpus)", _load_training_set, cfg)
    extra: dict = {}
    if cfg.mode == "dpft":
        params_p, trace = _stage(
            "train (dp fine-tune)",
            privsa_train,
            ds,
            _zero_lambda(cfg.stage1),
            cfg.premium,
        )
        privacy = trace.report
    elif cfg.mode == "jft":
        detector = default_detector()
        masked = Dataset(
            pairs=[
                PromptCodePair(
                    prompt=mask_pii(pair.prompt, detector),
                    snippet=CodeSnippet(
                        source=mask_pii(pair.snippet.source, detector),
                        language_tag=pair.snippet.language_tag,
                    ),
                )
                for pair in ds.pairs
            ],
            id=ds.id + "-masked",
        )
        residual = sum(
            sum(detector.match_counts(p.prompt).values())
            + sum(detector.match_counts(p.snippet.source).values())
            for p in masked.pairs
        )
        if residual:
            raise StageError("train (jft phase 1): masked corpus still matches")
        phase1 = _stage(
            "train (jft phase 1)",
            plain_train,
            masked,
            cfg.premium,
            cfg.stage2_epochs,
            cfg.stage2_batch_size,
            cfg.stage2_learning_rate,
            cfg.master_seed + 4,
        )
        params_p, trace = _stage(
            "train (jft phase 2)",
            privsa_train,
            ds,
            _zero_lambda(cfg.stage1),
            cfg.premium,
            init=phase1,
        )
        privacy = trace.report  # phase 2 only; phase 1 never sees raw PII
        extra["jft_masked_records"] = len(masked)
    else:  # nondpft
        params_p = _stage(
            "train (plain)",
            plain_train,
            ds,
            cfg.premium,
            cfg.stage2_epochs,
            cfg.stage2_batch_size,
            cfg.stage2_learning_rate,
            cfg.master_seed + 4,
        )
        privacy = _INFINITE
    save_checkpoint(paths["premium_checkpoint"], params_p, cfg.premium, _stamp(cfg, privacy))
    timings["train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    tasks = _stage("evaluation (load tasks)", load_tasks, cfg.tasks_path)
    eval_report = _stage(
        "evaluation",
        run_benchmark,
        params_p,
        cfg.premium,
        tasks,
        SamplingConfig(strategy="greedy"),
        cfg.budget,
    )
    leakage = None
    if specs:
        leakage = _stage("audit", _audit, cfg, params_p, cfg.premium, specs)
    timings["evaluation"] = time.perf_counter() - t0

    report = RunReport(
        data={
            "mode": cfg.mode,
            "seed": cfg.master_seed,
            "config": config_echo(cfg),
            "config_hash": config_hash(cfg),
            "sizes": {"d_training": len(ds)},
            "privacy": {"premium": _privacy_dict(privacy)},
            "evaluation": _eval_dict(eval_report),
            "leakage": leakage,
            "artifacts": {k: os.path.basename(p) for k, p in paths.items()},
            "timings": timings,
            **extra,
        }
    )
    write_report(report, paths["report"])
    return report


def run_pipeline(cfg: PipelineConfig) -> RunReport:
    if cfg.mode == "privcode":
        return run_privcode(cfg)
    return run_baseline(cfg)
