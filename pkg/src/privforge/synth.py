"""Prompted code generation: decoding strategies and batch synthesis."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .corpus import BYTE_VOCAB, CodeSnippet, Vocabulary, detokenize, tokenize
from .lm import LmConfig, forward


@dataclass(frozen=True)
class SamplingConfig:
    strategy: str = "greedy"  # greedy | topk | temperature
    k: int = 1
    temperature: float = 1.0
    max_tokens: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in ("greedy", "topk", "temperature"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class GenerationRecord:
    prompt: str
    snippet: CodeSnippet
    tokens_emitted: int
    stop_reason: str  # EOS | MaxTokens


def _candidate_mask(vocab: Vocabulary) -> np.ndarray:
    """Byte ids plus EOS are candidates; BOS/PAD/SEP can never be emitted."""
    mask = np.zeros(vocab.size, dtype=bool)
    mask[: vocab.n_bytes] = True
    mask[vocab.eos] = True
    return mask


def _select(
    probs: np.ndarray,
    sampling: SamplingConfig,
    rng: np.random.Generator,
    mask: np.ndarray,
) -> int:
    p = np.where(mask, probs, 0.0)
    if sampling.strategy == "greedy":
        # argmax takes the first maximum, which is the lowest token id.
        return int(np.argmax(p))
    if sampling.strategy == "temperature":
        logp = np.full_like(p, -np.inf)
        logp[p > 0] = np.log(p[p > 0]) / sampling.temperature
        logp -= logp.max()
        weights = np.exp(logp)
        weights /= weights.sum()
        return int(rng.choice(len(p), p=weights))
    # topk: order by probability descending, ties broken by lowest id.
    order = np.lexsort((np.arange(len(p)), -p))
    top = order[: sampling.k]
    weights = p[top]
    if weights.sum() == 0.0:
        return int(top[0])
    weights = weights / weights.sum()
    return int(top[rng.choice(len(top), p=weights)])


def generate(
    params: np.ndarray,
    cfg: LmConfig,
    prompt: str,
    sampling: SamplingConfig,
    vocab: Vocabulary = BYTE_VOCAB,
) -> GenerationRecord:
    """Decode one snippet. Greedy decoding is deterministic; stochastic modes
    are deterministic per sampling.seed. EOS stops decoding and is never
    written into the snippet."""
    rng = np.random.default_rng(sampling.seed)
    mask = _candidate_mask(vocab)
    w = cfg.context_window
    ids = [vocab.bos] + tokenize(prompt, vocab) + [vocab.sep]
    emitted: list[int] = []
    stop_reason = "MaxTokens"
    for _ in range(sampling.max_tokens):
        window = ids[-w:]
        if len(window) < w:
            window = [vocab.pad] * (w - len(window)) + window
        probs = forward(params, cfg, window)
        token = _select(probs, sampling, rng, mask)
        if token == vocab.eos:
            stop_reason = "EOS"
            break
        ids.append(token)
        emitted.append(token)
    return GenerationRecord(
        prompt=prompt,
        snippet=CodeSnippet(source=detokenize(emitted, vocab)),
        tokens_emitted=len(emitted),
        stop_reason=stop_reason,
    )


def _record_seed(master_seed: int, prompt: str, sample_index: int) -> int:
    """Content-keyed per-record seed: stable under prompt reordering."""
    digest = hashlib.sha256(
        f"{master_seed}|{sample_index}|".encode() + prompt.encode("utf-8", "surrogateescape")
    ).digest()
    return int.from_bytes(digest[:8], "little")


def batch_generate(
    params: np.ndarray,
    cfg: LmConfig,
    prompts: list[str],
    sampling: SamplingConfig,
    samples_per_prompt: int = 1,
    vocab: Vocabulary = BYTE_VOCAB,
) -> list[GenerationRecord]:
    """One record per (prompt, sample index), prompt-major order. Each record
    gets its own derived seed, so permuting the prompt list permutes the
    output without changing any individual record."""
    if len(prompts) == 0:
        raise ValueError("prompts must be non-empty")
    if samples_per_prompt < 1:
        raise ValueError("samples_per_prompt must be >= 1")
    records: list[GenerationRecord] = []
    for prompt in prompts:
        for s in range(samples_per_prompt):
            per_record = replace(
                sampling, seed=_record_seed(sampling.seed, prompt, s)
            )
            records.append(generate(params, cfg, prompt, per_record, vocab))
    return records
