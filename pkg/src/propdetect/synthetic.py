"""Synthetic data helpers: cluster datasets for classifier experiments
and deterministic hash-based embeddings so the whole pipeline can run
without a real encoder.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .corpus import Article, EmbeddingSequence
from .segmentation import Context, TokenAlignment, tokenize_and_align


def make_blobs(n_per_class: int, centers, noise: float, seed: int):
    """Gaussian clusters labelled "c0".."ck"; returns [(vector, label)]."""
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    dataset = []
    for idx, center in enumerate(centers):
        for _ in range(n_per_class):
            dataset.append((center + rng.normal(0, noise, size=center.shape),
                            f"c{idx}"))
    return dataset


def make_imbalanced_pair(n_majority: int, n_minority: int, separation: float,
                         noise: float, seed: int, dim: int = 2):
    """Overlapping two-cluster data, majority at -mu and minority at +mu.

    Returns (train, test) lists of (vector, label) with labels
    "majority" / "minority"; the test split is an independent draw of
    the same sizes.
    """
    rng = np.random.default_rng(seed)
    mu = np.zeros(dim)
    mu[0] = separation / 2

    def draw():
        data = []
        for _ in range(n_majority):
            data.append((-mu + rng.normal(0, noise, size=dim), "majority"))
        for _ in range(n_minority):
            data.append((mu + rng.normal(0, noise, size=dim), "minority"))
        return data

    return draw(), draw()


def hash_vector(key: str, dim: int, salt: int = 0) -> np.ndarray:
    """Deterministic pseudo-embedding in [-1, 1]^dim derived from a key."""
    out = np.empty(dim)
    counter = 0
    pos = 0
    buf = b""
    while pos < dim:
        if not buf:
            digest = hashlib.blake2b(
                f"{salt}:{key}:{counter}".encode("utf-8"), digest_size=64
            ).digest()
            buf = digest
            counter += 1
        chunk, buf = buf[:4], buf[4:]
        value = int.from_bytes(chunk, "big")
        out[pos] = value / 2**31 - 1.0
        pos += 1
    return out


def hash_embed_context(text: str, token_spans, dim: int,
                       salt: int = 0) -> np.ndarray:
    """Rows: whole-context vector, then one vector per token (the token
    string and its position both feed the hash)."""
    rows = np.empty((len(token_spans) + 1, dim))
    rows[0] = hash_vector(f"ctx:{text}", dim, salt)
    for i, (ts, te) in enumerate(token_spans, start=1):
        rows[i] = hash_vector(f"tok:{i}:{text[ts:te]}", dim, salt)
    return rows


def build_hash_embeddings(contexts: list[Context], articles: dict[str, Article],
                          dim: int, salt: int = 0):
    """Embeddings plus alignments for contexts, entirely hash-derived.

    Returns (sequences, alignments): dicts keyed by context_id.
    """
    sequences: dict[str, EmbeddingSequence] = {}
    alignments: dict[str, TokenAlignment] = {}
    for context in contexts:
        article = articles[context.article_id]
        alignment = tokenize_and_align(context, article)
        text = article.text[context.start:context.end]
        vectors = hash_embed_context(text, alignment.token_spans, dim, salt)
        sequences[context.context_id] = EmbeddingSequence(
            context_id=context.context_id, vectors=vectors)
        alignments[context.context_id] = alignment
    return sequences, alignments
