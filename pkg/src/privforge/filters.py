"""Post-processing filters: execution validation with the five-way failure
taxonomy, and round-trip validation against the original prompt."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import CodeSnippet, Dataset
from .minilang.interp import ExecBudget, interpret
from .minilang.parser import ParseFailure
from .minilang.summary import summarize_ast


class EmptyText(ValueError):
    """Similarity scoring needs at least one whitespace-delimited token."""


CATEGORIES = (
    "Pass",
    "EnvironmentError",
    "CompileError",
    "RuntimeError",
    "LanguageMismatch",
    "Other",
)

_STATUS_TO_CATEGORY = {
    "Ok": ("Pass", ""),
    "EmptySource": ("Other", "Empty"),
    "ForeignSyntax": ("LanguageMismatch", ""),
    "ParseFailure": ("CompileError", ""),
    "RequireFailed": ("EnvironmentError", ""),
    "UndefinedName": ("RuntimeError", ""),
    "TypeFault": ("RuntimeError", ""),
    "DivisionByZero": ("RuntimeError", ""),
    "StepLimitExceeded": ("Other", "Timeout"),
    "HostFault": ("Other", "Unspecified"),
}


@dataclass(frozen=True)
class ExecutionOutcome:
    category: str
    sub: str = ""  # Empty | Timeout | Unspecified, only for Other


@dataclass(frozen=True)
class ValidationStats:
    total: int
    counts: dict
    acceptance_rate: float


@dataclass(frozen=True)
class RoundTripConfig:
    threshold: float = 0.88
    summaries_per_snippet: int = 1

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        if self.summaries_per_snippet < 1:
            raise ValueError("summaries_per_snippet must be >= 1")


@dataclass(frozen=True)
class SimilarityScore:
    precision: float
    recall: float
    f1: float


def classify_execution(snippet: CodeSnippet, budget: ExecBudget = ExecBudget()) -> ExecutionOutcome:
    """Total, deterministic five-way classification of a sandboxed run.

    Precedence is fixed by the check order inside the interpreter: empty
    source, then foreign-syntax heuristics (before parsing), then parse
    failure, then the runtime statuses.
    """
    result = interpret(snippet.source, budget)
    category, sub = _STATUS_TO_CATEGORY[result.status]
    return ExecutionOutcome(category=category, sub=sub)


def execution_validate(
    ds: Dataset, budget: ExecBudget = ExecBudget()
) -> tuple[Dataset, ValidationStats]:
    """Keep exactly the Pass pairs, untouched; tally the taxonomy."""
    counts = Counter({c: 0 for c in CATEGORIES})
    kept = []
    for pair in ds.pairs:
        outcome = classify_execution(pair.snippet, budget)
        counts[outcome.category] += 1
        if outcome.category == "Pass":
            kept.append(pair)
    total = len(ds.pairs)
    rate = counts["Pass"] / total if total else 0.0
    return (
        Dataset(pairs=kept, id=ds.id),
        ValidationStats(total=total, counts=dict(counts), acceptance_rate=rate),
    )


def _trigram_vector(token: str) -> Counter:
    padded = "^" + token + "$"
    return Counter(padded[i : i + 3] for i in range(max(1, len(padded) - 2)))


def _cosine(a: Counter, b: Counter) -> float:
    dot = sum(count * b[key] for key, count in a.items())
    if dot == 0:
        return 0.0
    norm_a = sum(c * c for c in a.values()) ** 0.5
    norm_b = sum(c * c for c in b.values()) ** 0.5
    return dot / (norm_a * norm_b)


def token_match_similarity(a: str, b: str) -> SimilarityScore:
    """Greedy maximum-cosine matching over per-token character-trigram
    count vectors. Precision: mean over a's tokens of the best cosine against
    b's tokens; recall is the mirror; f1 the harmonic mean."""
    tokens_a = a.split()
    tokens_b = b.split()
    if not tokens_a or not tokens_b:
        raise EmptyText("both texts need at least one token")
    vecs_a = [_trigram_vector(t) for t in tokens_a]
    vecs_b = [_trigram_vector(t) for t in tokens_b]
    sims = np.array([[_cosine(va, vb) for vb in vecs_b] for va in vecs_a])
    precision = float(sims.max(axis=1).mean())
    recall = float(sims.max(axis=0).mean())
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return SimilarityScore(precision=precision, recall=recall, f1=f1)


def round_trip_score(prompt: str, source: str, summaries_per_snippet: int = 1) -> SimilarityScore:
    """Best score over the snippet's summaries against the original prompt.

    The summarizer is deterministic, so multiple summaries coincide; the
    max-pooling seam stays in place for pluggable stochastic summarizers.
    """
    best = SimilarityScore(0.0, 0.0, 0.0)
    for _ in range(summaries_per_snippet):
        try:
            summary = summarize_ast(source)
        except ParseFailure:
            continue
        score = token_match_similarity(prompt, summary)
        if score.f1 > best.f1:
            best = score
    return best


def round_trip_validate(
    ds: Dataset, cfg: RoundTripConfig = RoundTripConfig()
) -> tuple[Dataset, list[SimilarityScore]]:
    """Keep pairs whose summary-vs-prompt f1 strictly exceeds the threshold."""
    kept = []
    log: list[SimilarityScore] = []
    for pair in ds.pairs:
        score = round_trip_score(
            pair.prompt, pair.snippet.source, cfg.summaries_per_snippet
        )
        log.append(score)
        if score.f1 > cfg.threshold:
            kept.append(pair)
    return Dataset(pairs=kept, id=ds.id), log
