"""Utility metrics over the bundled mini-benchmark and the canary audit."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import CodeSnippet, Dataset, PromptCodePair
from .filters import classify_execution
from .lm import LmConfig
from .minilang.interp import ExecBudget, interpret
from .synth import GenerationRecord, SamplingConfig, generate

CANARY_CATEGORIES = ("Email", "Name", "IpAddress", "Password", "Username")


class PiiCollision(ValueError):
    """A canary pii_string already occurs in the target dataset."""


@dataclass(frozen=True)
class BenchmarkTask:
    task_id: str
    prompt: str
    tests: tuple  # of (call-expression source, expected stdout value)

    def __post_init__(self):
        if len(self.tests) == 0:
            raise ValueError("a task needs at least one test")


@dataclass(frozen=True)
class TaskOutcome:
    """Per-task result following the status/fail_tests convention: a failed
    status with an empty fail_tests list means the snippet never compiled."""

    task_id: str
    status: str  # pass | fail
    fail_tests: tuple
    compiled: bool
    snippet: str = ""

    def __post_init__(self):
        if self.status not in ("pass", "fail"):
            raise ValueError(f"status must be 'pass' or 'fail', got {self.status!r}")
        if self.status == "pass" and (self.fail_tests or not self.compiled):
            raise ValueError("a pass has no failed tests and must have compiled")
        if not self.compiled and self.fail_tests:
            raise ValueError("an uncompiled snippet reaches no tests")


@dataclass(frozen=True)
class EvalReport:
    pass_at_1: float
    compile_pass_rate: float
    execution_pass_rate: float
    per_task: tuple


def report_from_outcomes(outcomes: list[TaskOutcome]) -> EvalReport:
    """Assemble the three rates from per-task outcomes.

    pass@1 counts full passes over all tasks; the compile rate counts
    parse-and-define successes over all tasks; the execution rate is their
    ratio (full passes among compiled tasks).
    """
    total = len(outcomes)
    if total == 0:
        raise ValueError("no outcomes")
    n_pass = sum(1 for o in outcomes if o.status == "pass")
    n_compiled = sum(1 for o in outcomes if o.compiled)
    pass_at_1 = n_pass / total
    compile_rate = n_compiled / total
    exec_rate = (n_pass / n_compiled) if n_compiled else 0.0
    return EvalReport(
        pass_at_1=pass_at_1,
        compile_pass_rate=compile_rate,
        execution_pass_rate=exec_rate,
        per_task=tuple(outcomes),
    )


def evaluate_snippet(task: BenchmarkTask, source: str, budget: ExecBudget) -> TaskOutcome:
    """Run one candidate snippet against a task's tests.

    The snippet compiles when it parses and its top-level run (which defines
    its functions) completes cleanly. Each test appends a print of its call
    expression and compares full stdout against the expected value.
    """
    if classify_execution(CodeSnippet(source), budget).category != "Pass":
        return TaskOutcome(task.task_id, "fail", (), compiled=False, snippet=source)
    fail_tests = []
    for index, (call, expected) in enumerate(task.tests):
        program = source + "\n" + f"print({call})"
        result = interpret(program, budget)
        if result.status != "Ok" or result.stdout != expected + "\n":
            fail_tests.append(index)
    status = "pass" if not fail_tests else "fail"
    return TaskOutcome(task.task_id, status, tuple(fail_tests), compiled=True, snippet=source)


def run_benchmark(
    params: np.ndarray,
    cfg: LmConfig,
    tasks: list[BenchmarkTask],
    sampling: SamplingConfig = SamplingConfig(strategy="greedy"),
    budget: ExecBudget = ExecBudget(),
) -> EvalReport:
    """Generate once per task (greedy by default) and score."""
    if len(tasks) == 0:
        raise ValueError("tasks must be non-empty")
    outcomes = []
    for task in tasks:
        record = generate(params, cfg, task.prompt, sampling)
        outcomes.append(evaluate_snippet(task, record.snippet.source, budget))
    return report_from_outcomes(outcomes)


def load_tasks(path: str) -> list[BenchmarkTask]:
    """Read the line-delimited task file (task_id, prompt, tests)."""
    tasks = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            tests = tuple((t["call"], t["expected"]) for t in rec["tests"])
            tasks.append(BenchmarkTask(rec["task_id"], rec["prompt"], tests))
    return tasks


# --- canary audit ------------------------------------------------------------


@dataclass(frozen=True)
class CanarySpec:
    category: str
    pii_string: str
    sample: PromptCodePair
    repetition_rate: int

    def __post_init__(self):
        if self.category not in CANARY_CATEGORIES:
            raise ValueError(f"unknown canary category {self.category!r}")
        if self.pii_string not in self.sample.snippet.source:
            raise ValueError("pii_string must occur in the canary snippet")
        if self.repetition_rate < 0:
            raise ValueError("repetition_rate must be >= 0")


@dataclass(frozen=True)
class LeakageReport:
    counts: dict  # category -> total occurrences across generations
    leakage_rate: float  # fraction of the five categories with count >= 1


def load_canaries(path: str) -> list[CanarySpec]:
    specs = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            specs.append(
                CanarySpec(
                    category=rec["category"],
                    pii_string=rec["pii"],
                    sample=PromptCodePair(rec["prompt"], CodeSnippet(rec["code"])),
                    repetition_rate=rec["repetition_rate"],
                )
            )
    return specs


def inject_canaries(ds: Dataset, specs: list[CanarySpec], seed: int = 0) -> Dataset:
    """Insert repetition_rate bit-identical copies of each canary sample at
    seed-deterministic positions; original records pass through untouched."""
    for spec in specs:
        for pair in ds.pairs:
            if spec.pii_string in pair.snippet.source or spec.pii_string in pair.prompt:
                raise PiiCollision(
                    f"{spec.category} pii already present in dataset {ds.id!r}"
                )
    rng = np.random.default_rng(seed)
    pairs = list(ds.pairs)
    for spec in specs:
        for _ in range(spec.repetition_rate):
            copy = PromptCodePair(
                prompt=spec.sample.prompt,
                snippet=CodeSnippet(
                    source=spec.sample.snippet.source,
                    language_tag=spec.sample.snippet.language_tag,
                ),
                extras=dict(spec.sample.extras),
            )
            position = int(rng.integers(0, len(pairs) + 1))
            pairs.insert(position, copy)
    return Dataset(pairs=pairs, id=ds.id)


def measure_leakage(
    generations: list[GenerationRecord], specs: list[CanarySpec]
) -> LeakageReport:
    """Exact substring counts of each pii_string over all generated snippets;
    the rate's denominator is always the five categories."""
    counts = {category: 0 for category in CANARY_CATEGORIES}
    for spec in specs:
        total = sum(rec.snippet.source.count(spec.pii_string) for rec in generations)
        counts[spec.category] += total
    leaked = sum(1 for category in CANARY_CATEGORIES if counts[category] >= 1)
    return LeakageReport(counts=counts, leakage_rate=leaked / len(CANARY_CATEGORIES))
