"""Compact autoregressive byte-level language model with exact gradients.

Architecture: a fixed-window neural probabilistic LM. The `w` most recent
token embeddings are concatenated, pushed through one tanh hidden layer, and
projected to vocabulary logits. All trainable parameters live in a single
flat float64 vector with named segments, so per-sample gradients are plain
vectors that can be clipped, noised, and finite-difference checked.

Training sequences are laid out as [BOS] + prompt bytes + [SEP] + snippet
bytes; the cross-entropy loss averages over snippet positions only (prompt
positions condition but contribute no loss).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .corpus import BYTE_VOCAB, PromptCodePair, Vocabulary, tokenize
from .minilang.nodes import StructuralSpan


class TokenOutOfRange(ValueError):
    """A context token id falls outside the configured vocabulary."""


class EmptySnippet(ValueError):
    """The pair's snippet tokenizes to zero tokens."""


class CheckpointFormatError(ValueError):
    """The checkpoint file is malformed or has a foreign magic/version."""


@dataclass(frozen=True)
class LmConfig:
    vocab_size: int = BYTE_VOCAB.size
    embed_dim: int = 8
    context_window: int = 8
    hidden_dim: int = 16
    seed: int = 0

    def __post_init__(self):
        if min(self.vocab_size, self.embed_dim, self.context_window, self.hidden_dim) < 1:
            raise ValueError("all model dimensions must be >= 1")


def segments(cfg: LmConfig) -> dict[str, tuple[int, tuple[int, ...]]]:
    """Named parameter segments: {name: (flat offset, shape)}."""
    v, d, w, h = cfg.vocab_size, cfg.embed_dim, cfg.context_window, cfg.hidden_dim
    shapes = {
        "embedding": (v, d),
        "w_in": (w * d, h),
        "b_hidden": (h,),
        "w_out": (h, v),
        "b_out": (v,),
    }
    out: dict[str, tuple[int, tuple[int, ...]]] = {}
    offset = 0
    for name, shape in shapes.items():
        out[name] = (offset, shape)
        offset += int(np.prod(shape))
    return out


def n_params(cfg: LmConfig) -> int:
    return sum(int(np.prod(shape)) for _, shape in segments(cfg).values())


def unpack(params: np.ndarray, cfg: LmConfig):
    """Reshaped views (embedding, w_in, b_hidden, w_out, b_out) of the flat vector."""
    if params.shape != (n_params(cfg),):
        raise ValueError(f"params length {params.shape} != {n_params(cfg)}")
    views = []
    for name, (offset, shape) in segments(cfg).items():
        size = int(np.prod(shape))
        views.append(params[offset : offset + size].reshape(shape))
    return tuple(views)


def init_params(cfg: LmConfig) -> np.ndarray:
    """Uniform [-0.05, 0.05] draw, deterministic in cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    return rng.uniform(-0.05, 0.05, size=n_params(cfg))


@dataclass(frozen=True)
class LossBreakdown:
    l_ce: float
    l_kl: float
    lam: float

    @property
    def l_total(self) -> float:
        return self.l_ce + self.lam * self.l_kl


# --- forward machinery -------------------------------------------------------


def _contexts(ids: np.ndarray, positions: np.ndarray, w: int, pad_id: int) -> np.ndarray:
    """Context matrix: row p holds the w tokens preceding position p, left-padded."""
    padded = np.concatenate([np.full(w, pad_id, dtype=np.int64), ids])
    return np.stack([padded[p : p + w] for p in positions])


def _forward_batch(params: np.ndarray, cfg: LmConfig, ctx: np.ndarray):
    """Forward pass over a [P, w] context matrix.

    Returns (x, h, log_probs) with shapes [P, w*d], [P, h], [P, V].
    """
    emb, w_in, b_hidden, w_out, b_out = unpack(params, cfg)
    if ctx.min() < 0 or ctx.max() >= cfg.vocab_size:
        raise TokenOutOfRange(f"context ids outside [0, {cfg.vocab_size})")
    x = emb[ctx].reshape(ctx.shape[0], cfg.context_window * cfg.embed_dim)
    h = np.tanh(x @ w_in + b_hidden)
    logits = h @ w_out + b_out
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return x, h, shifted - log_z


def forward(params: np.ndarray, cfg: LmConfig, context) -> np.ndarray:
    """Next-token probability distribution for one length-w context."""
    ctx = np.asarray(context, dtype=np.int64)
    if ctx.shape != (cfg.context_window,):
        raise ValueError(f"context length {ctx.shape} != w={cfg.context_window}")
    _, _, log_probs = _forward_batch(params, cfg, ctx[None, :])
    return np.exp(log_probs[0])


def encode_pair(
    pair: PromptCodePair, vocab: Vocabulary = BYTE_VOCAB
) -> tuple[np.ndarray, int]:
    """Joined token sequence [BOS] + prompt + [SEP] + snippet and the index of
    the first snippet position."""
    prompt_ids = tokenize(pair.prompt, vocab)
    snippet_ids = tokenize(pair.snippet.source, vocab)
    ids = np.array(
        [vocab.bos] + prompt_ids + [vocab.sep] + snippet_ids, dtype=np.int64
    )
    return ids, 2 + len(prompt_ids)


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """KL(P || Q) in nats with the 0*log(0) = 0 convention."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask = p > 0.0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def sequence_nll(
    params: np.ndarray,
    cfg: LmConfig,
    pair: PromptCodePair,
    vocab: Vocabulary = BYTE_VOCAB,
) -> tuple[float, np.ndarray]:
    """Mean negative log-probability over snippet positions, plus the
    per-position next-token distributions ([P, V] array)."""
    ids, first = encode_pair(pair, vocab)
    positions = np.arange(first, len(ids))
    if len(positions) == 0:
        raise EmptySnippet("pair has no snippet tokens")
    ctx = _contexts(ids, positions, cfg.context_window, vocab.pad)
    _, _, log_probs = _forward_batch(params, cfg, ctx)
    targets = ids[positions]
    nll = -float(log_probs[np.arange(len(positions)), targets].mean())
    return nll, np.exp(log_probs)


def _structural_positions(
    pair: PromptCodePair, spans: list[StructuralSpan], first: int, seq_len: int
) -> np.ndarray:
    """Sequence positions of snippet bytes covered by any structural span."""
    n_snippet = seq_len - first
    covered = np.zeros(n_snippet, dtype=bool)
    for span in spans:
        start, end = span.span
        covered[max(0, start) : min(n_snippet, end)] = True
    return first + np.nonzero(covered)[0]


def structural_kl(
    params_j: np.ndarray,
    params_rf: np.ndarray,
    cfg: LmConfig,
    pair: PromptCodePair,
    spans: list[StructuralSpan],
    vocab: Vocabulary = BYTE_VOCAB,
) -> float:
    """Mean KL(P_j || P_rf) over snippet positions inside structural spans,
    each distribution conditioned on the full preceding sequence. Empty span
    lists (or spans covering nothing) contribute 0 by contract."""
    ids, first = encode_pair(pair, vocab)
    positions = _structural_positions(pair, spans, first, len(ids))
    if len(positions) == 0:
        return 0.0
    ctx = _contexts(ids, positions, cfg.context_window, vocab.pad)
    _, _, logp_j = _forward_batch(params_j, cfg, ctx)
    _, _, logp_rf = _forward_batch(params_rf, cfg, ctx)
    p_j = np.exp(logp_j)
    return float(np.sum(p_j * (logp_j - logp_rf)) / len(positions))


def _backprop(
    params: np.ndarray,
    cfg: LmConfig,
    ctx: np.ndarray,
    x: np.ndarray,
    h: np.ndarray,
    d_logits: np.ndarray,
    grad_out: np.ndarray,
) -> None:
    """Accumulate d(loss)/d(params) into grad_out given d(loss)/d(logits)."""
    _, w_in, _, w_out, _ = unpack(params, cfg)
    g_emb, g_w_in, g_b_hidden, g_w_out, g_b_out = unpack(grad_out, cfg)
    g_w_out += h.T @ d_logits
    g_b_out += d_logits.sum(axis=0)
    d_h = d_logits @ w_out.T
    d_z = d_h * (1.0 - h * h)
    g_w_in += x.T @ d_z
    g_b_hidden += d_z.sum(axis=0)
    d_x = (d_z @ w_in.T).reshape(ctx.shape[0], cfg.context_window, cfg.embed_dim)
    np.add.at(g_emb, ctx, d_x)


def per_sample_gradient(
    params_j: np.ndarray,
    params_rf: np.ndarray,
    cfg: LmConfig,
    pair: PromptCodePair,
    spans: list[StructuralSpan],
    lam: float,
    vocab: Vocabulary = BYTE_VOCAB,
) -> tuple[np.ndarray, LossBreakdown]:
    """Analytic gradient of L_CE + lam * L_KL w.r.t. params_j (reference frozen)."""
    ids, first = encode_pair(pair, vocab)
    positions = np.arange(first, len(ids))
    if len(positions) == 0:
        raise EmptySnippet("pair has no snippet tokens")
    grad = np.zeros_like(params_j)

    # Cross-entropy over all snippet positions.
    ctx = _contexts(ids, positions, cfg.context_window, vocab.pad)
    x, h, log_probs = _forward_batch(params_j, cfg, ctx)
    targets = ids[positions]
    n_pos = len(positions)
    l_ce = -float(log_probs[np.arange(n_pos), targets].mean())
    d_logits = np.exp(log_probs)
    d_logits[np.arange(n_pos), targets] -= 1.0
    d_logits /= n_pos
    _backprop(params_j, cfg, ctx, x, h, d_logits, grad)

    # Structural KL against the frozen reference.
    l_kl = 0.0
    struct_pos = _structural_positions(pair, spans, first, len(ids))
    if lam != 0.0 and len(struct_pos) > 0:
        ctx_s = _contexts(ids, struct_pos, cfg.context_window, vocab.pad)
        x_s, h_s, logp_j = _forward_batch(params_j, cfg, ctx_s)
        _, _, logp_rf = _forward_batch(params_rf, cfg, ctx_s)
        p_j = np.exp(logp_j)
        diff = logp_j - logp_rf
        per_pos_kl = (p_j * diff).sum(axis=1)
        l_kl = float(per_pos_kl.mean())
        d_logits_kl = p_j * (diff - per_pos_kl[:, None])
        d_logits_kl *= lam / len(struct_pos)
        _backprop(params_j, cfg, ctx_s, x_s, h_s, d_logits_kl, grad)
    elif len(struct_pos) > 0:
        # Loss bookkeeping still reports the (unweighted) KL term.
        l_kl = structural_kl(params_j, params_rf, cfg, pair, spans, vocab)

    return grad, LossBreakdown(l_ce=l_ce, l_kl=l_kl, lam=lam)


# --- checkpoint I/O ----------------------------------------------------------

_MAGIC = b"PFLM"
_VERSION = 1
_HEADER = struct.Struct("<4sI5q16sddq")  # magic, version, config, stamp, n_params


@dataclass(frozen=True)
class CheckpointStamp:
    """Provenance carried by every checkpoint: the run-config hash and the
    privacy budget spent training it (epsilon=inf for non-private training)."""

    config_hash: str = "0" * 16
    epsilon: float = float("inf")
    delta: float = 0.0


def save_checkpoint(
    path: str, params: np.ndarray, cfg: LmConfig, stamp: CheckpointStamp = CheckpointStamp()
) -> None:
    vec = np.ascontiguousarray(params, dtype="<f8")
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        cfg.vocab_size,
        cfg.embed_dim,
        cfg.context_window,
        cfg.hidden_dim,
        cfg.seed,
        stamp.config_hash.encode("ascii")[:16].ljust(16, b"0"),
        stamp.epsilon,
        stamp.delta,
        len(vec),
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(vec.tobytes())


def load_checkpoint(path: str) -> tuple[np.ndarray, LmConfig, CheckpointStamp]:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise CheckpointFormatError("truncated header")
    magic, version, v, d, w, h, seed, hash_bytes, eps, delta, count = _HEADER.unpack(
        raw[: _HEADER.size]
    )
    if magic != _MAGIC:
        raise CheckpointFormatError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise CheckpointFormatError(f"unsupported version {version}")
    cfg = LmConfig(
        vocab_size=v, embed_dim=d, context_window=w, hidden_dim=h, seed=seed
    )
    expected = _HEADER.size + 8 * count
    if len(raw) != expected:
        raise CheckpointFormatError(f"file size {len(raw)} != expected {expected}")
    params = np.frombuffer(raw[_HEADER.size :], dtype="<f8").astype(np.float64)
    if count != n_params(cfg):
        raise CheckpointFormatError("parameter count does not match config")
    stamp = CheckpointStamp(
        config_hash=hash_bytes.decode("ascii"), epsilon=eps, delta=delta
    )
    return params, cfg, stamp
