"""Span identification heads over precomputed token embeddings.

Each context arrives as an embedding matrix whose row 0 is the
whole-context token and rows 1..n are content tokens. Three jointly
trained classifiers sit on top:

* a sentence classifier (does this context contain a span?) fed by a
  tanh layer over row 0;
* start and end classifiers scoring every row, where position 0 encodes
  "no boundary" for span-free contexts.

Variants differ in what the start/end output layers see:

* base:         the raw embedding row
* sent:         row + the repeated sentence feature
* deep_sep:     row + a deeper start (resp. end) feature + sentence feature
* deep_combine: row + both deeper features + sentence feature, shared by
                the start and end classifiers

The joint loss is alpha_sent * L_sent + alpha_start * L_start +
alpha_end * L_end, where the boundary losses scale the target softmax
probability by a minority weight w inside the log whenever the context
holds a span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .corpus import EmbeddingSequence, SpanAnnotation
from .optim import gradient_relative_error, minimize_gd
from .segmentation import (
    Context,
    TokenAlignment,
    char_span_to_token_span,
    merge_overlapping,
    token_span_to_char,
)

VARIANTS = ("base", "sent", "deep_sep", "deep_combine")


@dataclass(frozen=True)
class HeadConfig:
    variant: str = "base"
    embed_dim: int = 768
    deep_dim: int = 64
    sent_dim: int = 64
    class_weight: float = 2.0  # w applied inside the log for span contexts
    alphas: tuple[float, float, float] = (0.25, 0.5, 0.5)
    seed: int = 0
    learning_rate: float = 1e-5  # initial line-search trial step
    max_iters: int = 300
    tolerance: float = 1e-6
    grad_check: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if min(self.embed_dim, self.deep_dim, self.sent_dim) <= 0:
            raise ValueError("dims must be positive")
        if min(self.alphas) <= 0:
            raise ValueError("alphas must be positive")
        if self.class_weight < 1:
            raise ValueError("class_weight must be >= 1")


@dataclass(frozen=True)
class SpanTarget:
    has_span: bool
    start_idx: int | None = None  # 1-based token index
    end_idx: int | None = None

    def __post_init__(self):
        if self.has_span:
            if self.start_idx is None or self.end_idx is None:
                raise ValueError("span target needs start and end indices")
            if not (1 <= self.start_idx <= self.end_idx):
                raise ValueError(
                    f"need 1 <= start <= end, got ({self.start_idx}, {self.end_idx})"
                )
        elif self.start_idx is not None or self.end_idx is not None:
            raise ValueError("no-span target must not carry indices")


def output_width(config: HeadConfig) -> int:
    """Input width of the start/end output layers for a variant."""
    d, k, s = config.embed_dim, config.deep_dim, config.sent_dim
    return {
        "base": d,
        "sent": d + s,
        "deep_sep": d + k + s,
        "deep_combine": d + 2 * k + s,
    }[config.variant]


def _param_shapes(config: HeadConfig) -> list[tuple[str, tuple[int, ...]]]:
    d, k, s = config.embed_dim, config.deep_dim, config.sent_dim
    width = output_width(config)
    shapes = [
        ("w_sent_k", (s, d)),
        ("b_sent_k", (s,)),
        ("w_sent_o", (2, s)),
        ("b_sent_o", (2,)),
    ]
    if config.variant in ("deep_sep", "deep_combine"):
        shapes += [
            ("w_start_k", (k, d)),
            ("b_start_k", (k,)),
            ("w_end_k", (k, d)),
            ("b_end_k", (k,)),
        ]
    shapes += [
        ("w_start_o", (width,)),
        ("b_start_o", (1,)),
        ("w_end_o", (width,)),
        ("b_end_o", (1,)),
    ]
    return shapes


@dataclass
class SpanHeadModel:
    config: HeadConfig
    params: dict[str, np.ndarray]

    def __post_init__(self):
        expected = dict(_param_shapes(self.config))
        got = {name: p.shape for name, p in self.params.items()}
        if got != expected:
            raise ValueError(
                f"parameter shapes {got} do not match variant "
                f"{self.config.variant!r} (expected {expected})"
            )

    def flat(self) -> np.ndarray:
        return np.concatenate(
            [self.params[name].ravel() for name, _ in _param_shapes(self.config)]
        )

    @classmethod
    def from_flat(cls, config: HeadConfig, theta: np.ndarray) -> "SpanHeadModel":
        params = {}
        pos = 0
        for name, shape in _param_shapes(config):
            size = int(np.prod(shape))
            params[name] = theta[pos:pos + size].reshape(shape).copy()
            pos += size
        if pos != theta.size:
            raise ValueError(f"flat vector has {theta.size} entries, expected {pos}")
        return cls(config=config, params=params)

    @classmethod
    def initialize(cls, config: HeadConfig) -> "SpanHeadModel":
        """Seeded init: normal weights scaled by 1/sqrt(fan_in), zero biases."""
        rng = np.random.default_rng(config.seed)
        params = {}
        for name, shape in _param_shapes(config):
            if name.startswith("b_"):
                params[name] = np.zeros(shape)
            else:
                fan_in = shape[-1]
                params[name] = rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=shape)
        return cls(config=config, params=params)


def _forward_parts(params: dict[str, np.ndarray], variant: str, h: np.ndarray):
    """Shared forward computation; returns scores plus backward cache."""
    a_sent = np.tanh(params["w_sent_k"] @ h[0] + params["b_sent_k"])
    sent_logits = params["w_sent_o"] @ a_sent + params["b_sent_o"]
    rep = np.broadcast_to(a_sent, (h.shape[0], a_sent.shape[0]))

    a_start = a_end = None
    if variant == "base":
        z_start = z_end = h
    elif variant == "sent":
        z_start = z_end = np.concatenate([h, rep], axis=1)
    else:
        a_start = np.tanh(h @ params["w_start_k"].T + params["b_start_k"])
        a_end = np.tanh(h @ params["w_end_k"].T + params["b_end_k"])
        if variant == "deep_sep":
            z_start = np.concatenate([h, a_start, rep], axis=1)
            z_end = np.concatenate([h, a_end, rep], axis=1)
        else:
            z_start = z_end = np.concatenate([h, a_start, a_end, rep], axis=1)

    start_scores = z_start @ params["w_start_o"] + params["b_start_o"][0]
    end_scores = z_end @ params["w_end_o"] + params["b_end_o"][0]
    cache = {
        "h": h, "a_sent": a_sent, "a_start": a_start, "a_end": a_end,
        "z_start": z_start, "z_end": z_end,
    }
    return sent_logits, start_scores, end_scores, cache


def forward(model: SpanHeadModel, seq: EmbeddingSequence):
    """Score one context: (sent_logits (2,), start_scores, end_scores)."""
    if seq.dim != model.config.embed_dim:
        raise ValueError(
            f"embedding dim {seq.dim} does not match model dim "
            f"{model.config.embed_dim}"
        )
    if seq.n_tokens < 1:
        raise ValueError(f"context {seq.context_id} has no content tokens")
    sent_logits, start_scores, end_scores, _ = _forward_parts(
        model.params, model.config.variant, np.asarray(seq.vectors, dtype=np.float64)
    )
    return sent_logits, start_scores, end_scores


def sentence_loss(sent_logits, y_sent: int) -> float:
    """Binary cross entropy over the softmaxed sentence logits."""
    logits = np.asarray(sent_logits, dtype=np.float64)
    m = logits.max()
    return float(-(logits[y_sent] - m - np.log(np.exp(logits - m).sum())))


def boundary_loss(scores, target_idx: int | None, y_sent: int, w: float) -> float:
    """Per-position CE; for span contexts the target softmax probability
    is scaled by w inside the log, i.e. loss = plain_loss - ln w."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if y_sent == 0:
        target = 0
    else:
        if target_idx is None or not (1 <= target_idx < n):
            raise ValueError(f"target index {target_idx} outside 1..{n - 1}")
        target = target_idx
    m = scores.max()
    plain = float(-(scores[target] - m - np.log(np.exp(scores - m).sum())))
    return plain - (math.log(w) if y_sent == 1 else 0.0)


def total_loss(sent_logits, start_scores, end_scores, target: SpanTarget,
               config: HeadConfig) -> float:
    """Weighted sum of the three classifier losses for one context."""
    y_sent = int(target.has_span)
    a_sent, a_start, a_end = config.alphas
    return (
        a_sent * sentence_loss(sent_logits, y_sent)
        + a_start * boundary_loss(start_scores, target.start_idx, y_sent,
                                  config.class_weight)
        + a_end * boundary_loss(end_scores, target.end_idx, y_sent,
                                config.class_weight)
    )


def _batch_fun(batch, config: HeadConfig):
    """Mean total loss over a batch and its gradient, as a function of the
    flat parameter vector."""
    n_batch = len(batch)
    log_w = math.log(config.class_weight)
    a_sent_w, a_start_w, a_end_w = config.alphas
    seqs = [np.asarray(seq.vectors, dtype=np.float64) for seq, _ in batch]
    sent_targets = np.array(
        [int(target.has_span) for _, target in batch], dtype=np.int64)
    start_targets = np.array(
        [target.start_idx if target.has_span else 0 for _, target in batch],
        dtype=np.int64)
    end_targets = np.array(
        [target.end_idx if target.has_span else 0 for _, target in batch],
        dtype=np.int64)
    shifts = np.where(sent_targets == 1, log_w, 0.0)
    lengths = np.array([h.shape[0] for h in seqs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    ones = np.ones(n_batch)
    variant = config.variant
    deep = variant in ("deep_sep", "deep_combine")
    d, k, s = config.embed_dim, config.deep_dim, config.sent_dim

    def fun(theta: np.ndarray):
        model = SpanHeadModel.from_flat(config, theta)
        p = model.params
        caches = []
        sent_logits = np.empty((n_batch, 2))
        start_flat = np.empty(int(offsets[-1]))
        end_flat = np.empty(int(offsets[-1]))
        for i, h in enumerate(seqs):
            sl, ss, es, cache = _forward_parts(p, variant, h)
            sent_logits[i] = sl
            start_flat[offsets[i]:offsets[i + 1]] = ss
            end_flat[offsets[i]:offsets[i + 1]] = es
            caches.append(cache)

        sent_sum, dsent = kernels.dense_softmax_ce(sent_logits, sent_targets, ones)
        start_sum, dstart = kernels.ragged_softmax_ce(
            start_flat, offsets, start_targets, shifts)
        end_sum, dend = kernels.ragged_softmax_ce(
            end_flat, offsets, end_targets, shifts)
        loss = (a_sent_w * sent_sum + a_start_w * start_sum
                + a_end_w * end_sum) / n_batch
        dsent *= a_sent_w / n_batch
        dstart *= a_start_w / n_batch
        dend *= a_end_w / n_batch

        grads = {name: np.zeros_like(p[name]) for name in p}
        for i, cache in enumerate(caches):
            h = cache["h"]
            du = dstart[offsets[i]:offsets[i + 1]]
            dv = dend[offsets[i]:offsets[i + 1]]
            z_start, z_end = cache["z_start"], cache["z_end"]

            grads["w_start_o"] += z_start.T @ du
            grads["b_start_o"][0] += du.sum()
            grads["w_end_o"] += z_end.T @ dv
            grads["b_end_o"][0] += dv.sum()

            dz_start = np.outer(du, p["w_start_o"])
            dz_end = np.outer(dv, p["w_end_o"])

            da_sent = np.zeros(s)
            if variant == "base":
                pass
            elif variant == "sent":
                da_sent += dz_start[:, d:].sum(axis=0) + dz_end[:, d:].sum(axis=0)
            elif variant == "deep_sep":
                da_start = dz_start[:, d:d + k]
                da_end = dz_end[:, d:d + k]
                da_sent += (dz_start[:, d + k:].sum(axis=0)
                            + dz_end[:, d + k:].sum(axis=0))
            else:  # deep_combine
                dz = dz_start + dz_end
                da_start = dz[:, d:d + k]
                da_end = dz[:, d + k:d + 2 * k]
                da_sent += dz[:, d + 2 * k:].sum(axis=0)

            if deep:
                dpre = da_start * (1.0 - cache["a_start"] ** 2)
                grads["w_start_k"] += dpre.T @ h
                grads["b_start_k"] += dpre.sum(axis=0)
                dpre = da_end * (1.0 - cache["a_end"] ** 2)
                grads["w_end_k"] += dpre.T @ h
                grads["b_end_k"] += dpre.sum(axis=0)

            dsl = dsent[i]
            a_sent_vec = cache["a_sent"]
            grads["w_sent_o"] += np.outer(dsl, a_sent_vec)
            grads["b_sent_o"] += dsl
            da_sent += p["w_sent_o"].T @ dsl
            dpre_sent = da_sent * (1.0 - a_sent_vec ** 2)
            grads["w_sent_k"] += np.outer(dpre_sent, h[0])
            grads["b_sent_k"] += dpre_sent

        flat_grad = np.concatenate(
            [grads[name].ravel() for name, _ in _param_shapes(config)])
        return loss, flat_grad

    return fun


def _spot_gradient_check(fun, theta: np.ndarray, n_coords: int = 8,
                         tol: float = 1e-4) -> None:
    """Cheap pre-training check: a few coordinates of the analytic gradient
    against central differences."""
    _, grad = fun(theta)
    rng = np.random.default_rng(12345)
    coords = rng.choice(theta.size, size=min(n_coords, theta.size), replace=False)
    approx = np.empty(len(coords))
    exact = np.empty(len(coords))
    for j, c in enumerate(coords):
        tp = theta.copy()
        tm = theta.copy()
        tp[c] += 1e-5
        tm[c] -= 1e-5
        approx[j] = (fun(tp)[0] - fun(tm)[0]) / 2e-5
        exact[j] = grad[c]
    err = gradient_relative_error(exact, approx)
    if err > tol:
        raise RuntimeError(f"gradient check failed before training: rel err {err:.2e}")


def train_heads(batch: list[tuple[EmbeddingSequence, SpanTarget]],
                config: HeadConfig):
    """Jointly train the sentence, start, and end classifiers.

    Returns (SpanHeadModel, history); history rows are (iteration, loss,
    gradient_norm) and the loss sequence is non-increasing.
    """
    if not batch:
        raise ValueError("empty training batch")
    for seq, target in batch:
        if seq.dim != config.embed_dim:
            raise ValueError(
                f"context {seq.context_id}: dim {seq.dim} != {config.embed_dim}")
        if target.has_span and target.end_idx > seq.n_tokens:
            raise ValueError(
                f"context {seq.context_id}: target end {target.end_idx} "
                f"exceeds {seq.n_tokens} tokens")
    fun = _batch_fun(batch, config)
    model0 = SpanHeadModel.initialize(config)
    theta0 = model0.flat()
    if config.grad_check:
        _spot_gradient_check(fun, theta0)
    theta, history = minimize_gd(
        fun, theta0,
        initial_step=config.learning_rate,
        max_iters=config.max_iters,
        tolerance=config.tolerance,
    )
    return SpanHeadModel.from_flat(config, theta), history


def merge_candidate_spans(candidates) -> list[tuple[int, int]]:
    """Union candidate token spans (inclusive pairs), merging overlaps."""
    merged = merge_overlapping(
        [SpanAnnotation("_decode", s, e + 1) for s, e in set(candidates)]
    )
    return [(span.start, span.end - 1) for span in merged]


def decode_span(sent_logits, start_scores, end_scores) -> list[tuple[int, int]]:
    """Best-start and best-end span candidates, merged.

    Returns inclusive 1-based (start_token, end_token) pairs; empty when
    the sentence classifier says no-span and both boundary argmaxes sit
    at the reserved position 0.
    """
    start_scores = np.asarray(start_scores, dtype=np.float64)
    end_scores = np.asarray(end_scores, dtype=np.float64)
    no_span = int(np.argmax(sent_logits)) == 0
    if no_span and int(np.argmax(start_scores)) == 0 and int(np.argmax(end_scores)) == 0:
        return []
    n = start_scores.shape[0] - 1
    if n < 1:
        return []
    s_star = 1 + int(np.argmax(start_scores[1:]))
    e_given_s = s_star + int(np.argmax(end_scores[s_star:]))
    e_star = 1 + int(np.argmax(end_scores[1:]))
    s_given_e = 1 + int(np.argmax(start_scores[1:e_star + 1]))
    return merge_candidate_spans([(s_star, e_given_s), (s_given_e, e_star)])


def target_for_context(context: Context, alignment: TokenAlignment) -> SpanTarget:
    """Express a context's gold char span as token boundary indices."""
    if context.gold_span is None:
        return SpanTarget(has_span=False)
    i_s, i_e = char_span_to_token_span(alignment, *context.gold_span)
    return SpanTarget(has_span=True, start_idx=i_s, end_idx=i_e)


def spans_to_annotations(context: Context, alignment: TokenAlignment,
                         token_spans: list[tuple[int, int]]) -> list[SpanAnnotation]:
    """Decoded token spans back to article-coordinate char annotations."""
    out = []
    for i_s, i_e in token_spans:
        cs, ce = token_span_to_char(alignment, i_s, i_e)
        out.append(SpanAnnotation(context.article_id,
                                  context.start + cs, context.start + ce))
    return out


def truncate_sequence(seq: EmbeddingSequence, alignment: TokenAlignment,
                      max_tokens: int):
    """Cap content tokens at max_tokens, dropping rows from the right.

    Returns (seq, alignment, truncated_flag); gold targets beyond the cap
    must be clamped by the caller.
    """
    if seq.n_tokens <= max_tokens:
        return seq, alignment, False
    seq = EmbeddingSequence(
        context_id=seq.context_id, vectors=seq.vectors[: max_tokens + 1])
    alignment = TokenAlignment(
        context_id=alignment.context_id,
        token_spans=alignment.token_spans[:max_tokens])
    return seq, alignment, True
