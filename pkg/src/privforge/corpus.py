"""Dataset model, byte-level tokenization, dataset I/O, and corpus statistics."""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field


class SpecialTokenInOutput(ValueError):
    """A special (non-byte) token id reached a byte-only boundary."""


class EmptyCorpus(ValueError):
    """The corpus holds no snippet tokens."""


class DatasetParseError(ValueError):
    """A dataset line failed to parse; carries the 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class MissingField(DatasetParseError):
    """A dataset record lacks a required field."""

    def __init__(self, line_no: int, field_name: str):
        super().__init__(line_no, f"missing required field {field_name!r}")
        self.field_name = field_name


@dataclass(frozen=True)
class Vocabulary:
    """Byte-level token alphabet: ids 0..255 are raw bytes, then four specials.

    SEP joins a prompt to its snippet in one training sequence; BOS opens a
    sequence; EOS is the generation stop signal; PAD left-fills short contexts.
    """

    n_bytes: int = 256
    bos: int = 256
    eos: int = 257
    pad: int = 258
    sep: int = 259

    @property
    def size(self) -> int:
        return self.n_bytes + 4

    def is_byte(self, token_id: int) -> bool:
        return 0 <= token_id < self.n_bytes


BYTE_VOCAB = Vocabulary()


def tokenize(text: str, vocab: Vocabulary = BYTE_VOCAB) -> list[int]:
    """Map text to byte token ids. Total on all strings; never emits specials."""
    return list(text.encode("utf-8", "surrogateescape"))


def detokenize(ids: list[int], vocab: Vocabulary = BYTE_VOCAB) -> str:
    """Inverse of tokenize on byte ids; rejects special ids loudly."""
    for i in ids:
        if not vocab.is_byte(i):
            raise SpecialTokenInOutput(f"token id {i} is not a byte id")
    return bytes(ids).decode("utf-8", "surrogateescape")


@dataclass
class CodeSnippet:
    source: str
    language_tag: str = "MiniLang"


@dataclass
class PromptCodePair:
    """A public prompt paired with a protected snippet.

    The prompt side never passes through any privacy mechanism; only the
    snippet participates in DP training. Unknown file fields ride along in
    `extras` so round trips preserve them.
    """

    prompt: str
    snippet: CodeSnippet
    extras: dict = field(default_factory=dict)


@dataclass
class Dataset:
    pairs: list[PromptCodePair]
    id: str = ""

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def corpus_entropy(ds: Dataset, vocab: Vocabulary = BYTE_VOCAB) -> float:
    """Shannon entropy (bits per token) of the snippet byte distribution."""
    counts: Counter = Counter()
    for pair in ds.pairs:
        counts.update(tokenize(pair.snippet.source, vocab))
    total = sum(counts.values())
    if total == 0:
        raise EmptyCorpus("no snippet tokens in dataset")
    h = 0.0
    for c in counts.values():
        p = c / total
        h -= p * math.log2(p)
    return h


_KNOWN_FIELDS = ("prompt", "code", "language_tag")


def load_dataset(path: str) -> Dataset:
    """Read a line-delimited record file; one JSON object per line.

    Required fields `prompt` and `code`; optional `language_tag` (default
    "MiniLang"); any other fields are preserved verbatim on the pair.
    """
    pairs: list[PromptCodePair] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetParseError(line_no, f"invalid record: {e.msg}") from e
            if not isinstance(rec, dict):
                raise DatasetParseError(line_no, "record is not an object")
            for name in ("prompt", "code"):
                if name not in rec:
                    raise MissingField(line_no, name)
            extras = {k: v for k, v in rec.items() if k not in _KNOWN_FIELDS}
            pairs.append(
                PromptCodePair(
                    prompt=rec["prompt"],
                    snippet=CodeSnippet(
                        source=rec["code"],
                        language_tag=rec.get("language_tag", "MiniLang"),
                    ),
                    extras=extras,
                )
            )
    stem = os.path.splitext(os.path.basename(path))[0]
    return Dataset(pairs=pairs, id=stem)


def save_dataset(ds: Dataset, path: str) -> None:
    """Write the canonical line-delimited form (fixed key order, sorted extras)."""
    with open(path, "w", encoding="utf-8") as f:
        for pair in ds.pairs:
            rec = {
                "prompt": pair.prompt,
                "code": pair.snippet.source,
                "language_tag": pair.snippet.language_tag,
            }
            for k in sorted(pair.extras):
                rec[k] = pair.extras[k]
            f.write(json.dumps(rec, ensure_ascii=True) + "\n")
