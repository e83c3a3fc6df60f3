# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled softmax cross-entropy kernels.

These are the hot inner loops of training: every optimizer iteration
evaluates one dense batch (fragment classifiers) and several ragged
batches (per-context boundary scores, one row per context with its own
length). Both kernels return the summed loss and the gradient with
respect to the raw scores; callers apply batch scaling and weighting of
parameter gradients.
"""

from libc.math cimport exp, log

import numpy as np


def dense_softmax_ce(double[:, ::1] logits, long[::1] targets,
                     double[::1] sample_weights):
    """Weighted softmax cross-entropy over a dense (N, C) logit batch.

    Returns (loss_sum, grad) where, per row i with target t and weight w,
    loss_i = -w * log softmax(logits_i)[t] and grad_i = w * (p_i - onehot_t).
    """
    cdef Py_ssize_t n = logits.shape[0]
    cdef Py_ssize_t c = logits.shape[1]
    grad_arr = np.empty((n, c), dtype=np.float64)
    cdef double[:, ::1] grad = grad_arr
    cdef double loss_sum = 0.0
    cdef double m, s, w, p
    cdef Py_ssize_t i, j, t

    for i in range(n):
        t = targets[i]
        w = sample_weights[i]
        m = logits[i, 0]
        for j in range(1, c):
            if logits[i, j] > m:
                m = logits[i, j]
        s = 0.0
        for j in range(c):
            p = exp(logits[i, j] - m)
            grad[i, j] = p
            s += p
        loss_sum += -w * (logits[i, t] - m - log(s))
        for j in range(c):
            grad[i, j] = w * (grad[i, j] / s)
        grad[i, t] -= w
    return loss_sum, grad_arr


def ragged_softmax_ce(double[::1] scores, long[::1] offsets,
                      long[::1] targets, double[::1] loss_shifts):
    """Softmax cross-entropy over a ragged batch of score rows.

    Row b spans scores[offsets[b]:offsets[b+1]] with local target
    targets[b]; loss_b = -log softmax(row)[target] - loss_shifts[b].
    The shift carries the constant -ln w of a weighted target and does
    not affect the gradient.
    """
    cdef Py_ssize_t nrows = offsets.shape[0] - 1
    cdef Py_ssize_t total = scores.shape[0]
    grad_arr = np.empty(total, dtype=np.float64)
    cdef double[::1] grad = grad_arr
    cdef double loss_sum = 0.0
    cdef double m, s, p
    cdef Py_ssize_t b, j, lo, hi, t

    for b in range(nrows):
        lo = offsets[b]
        hi = offsets[b + 1]
        t = lo + targets[b]
        m = scores[lo]
        for j in range(lo + 1, hi):
            if scores[j] > m:
                m = scores[j]
        s = 0.0
        for j in range(lo, hi):
            p = exp(scores[j] - m)
            grad[j] = p
            s += p
        loss_sum += -(scores[t] - m - log(s)) - loss_shifts[b]
        for j in range(lo, hi):
            grad[j] /= s
        grad[t] -= 1.0
    return loss_sum, grad_arr
