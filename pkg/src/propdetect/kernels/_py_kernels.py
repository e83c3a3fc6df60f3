"""Pure-numpy fallback for the compiled cross-entropy kernels.

Same contracts as ``_ce_kernels``; used when the extension is not built
or when PROPDETECT_PURE_PYTHON=1 forces it.
"""

from __future__ import annotations

import numpy as np


def dense_softmax_ce(logits, targets, sample_weights):
    """Weighted softmax cross-entropy over a dense (N, C) logit batch."""
    logits = np.asarray(logits, dtype=np.float64)
    n = logits.shape[0]
    m = logits.max(axis=1, keepdims=True)
    exps = np.exp(logits - m)
    sums = exps.sum(axis=1)
    rows = np.arange(n)
    log_p_target = logits[rows, targets] - m[:, 0] - np.log(sums)
    loss_sum = float(-(sample_weights * log_p_target).sum())
    grad = exps / sums[:, None]
    grad[rows, targets] -= 1.0
    grad *= sample_weights[:, None]
    return loss_sum, grad


def ragged_softmax_ce(scores, offsets, targets, loss_shifts):
    """Softmax cross-entropy over a ragged batch of score rows."""
    scores = np.asarray(scores, dtype=np.float64)
    starts = offsets[:-1]
    lengths = np.diff(offsets)
    m = np.maximum.reduceat(scores, starts)
    exps = np.exp(scores - np.repeat(m, lengths))
    sums = np.add.reduceat(exps, starts)
    tpos = starts + targets
    log_p_target = scores[tpos] - m - np.log(sums)
    loss_sum = float(-(log_p_target + loss_shifts).sum())
    grad = exps / np.repeat(sums, lengths)
    grad[tpos] -= 1.0
    return loss_sum, grad
