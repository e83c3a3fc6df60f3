"""Embedding export over the PDEMB1 file boundary.

Reads a contexts file (TSV: context_id, article_id, start, end,
strategy, gold_start, gold_end) plus the article directory it refers
to, encodes each context's text, and writes:

* the embedding file: header ``PDEMB1 <dim>``, then per context a
  ``CTX <context_id> <n_rows>`` line followed by n_rows lines of dim
  floats, row 0 being the whole-context vector;
* an alignment sidecar: TSV context_id, token_idx (1-based, matching
  embedding rows), char_start, char_end — offsets of this exporter's
  own tokenization, relative to the context text.

Contexts longer than the token cap are truncated from the right with a
warning. Output is deterministic: the fake encoder is pure hashing, and
the real encoder is deterministic given fixed model weights.
"""

from __future__ import annotations

import hashlib
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_TOKENS = 128
_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class ExportError(ValueError):
    pass


@dataclass(frozen=True)
class ContextRow:
    context_id: str
    article_id: str
    start: int
    end: int


def read_context_rows(path) -> list[ContextRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 7:
                raise ExportError(f"{path}:{lineno}: expected 7 columns")
            rows.append(ContextRow(parts[0], parts[1], int(parts[2]), int(parts[3])))
    return rows


def read_article_texts(dir_path) -> dict[str, str]:
    texts = {}
    root = Path(dir_path)
    if not root.is_dir():
        raise ExportError(f"not a directory: {root}")
    for path in sorted(root.rglob("article*.txt")):
        m = re.match(r"article(.+)\.txt$", path.name)
        if not m:
            continue
        texts[m.group(1)] = (
            path.read_text(encoding="utf-8").replace("\r\n", "\n").replace("\r", "\n")
        )
    return texts


def tokenize_with_offsets(text: str) -> list[tuple[int, int]]:
    return [(m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def _hash_vector(key: str, dim: int, salt: int) -> np.ndarray:
    out = np.empty(dim)
    pos = 0
    counter = 0
    buf = b""
    while pos < dim:
        if not buf:
            buf = hashlib.blake2b(
                f"{salt}|{key}|{counter}".encode("utf-8"), digest_size=64
            ).digest()
            counter += 1
        chunk, buf = buf[:4], buf[4:]
        out[pos] = int.from_bytes(chunk, "big") / 2**31 - 1.0
        pos += 1
    return out


def fake_encode(text: str, offsets: list[tuple[int, int]], dim: int,
                salt: int) -> np.ndarray:
    """Deterministic pseudo-encoder: every row is a hash of its content."""
    rows = np.empty((len(offsets) + 1, dim))
    rows[0] = _hash_vector(f"context|{text}", dim, salt)
    for i, (ts, te) in enumerate(offsets, start=1):
        rows[i] = _hash_vector(f"token|{i}|{text[ts:te]}", dim, salt)
    return rows


def real_encode(text: str, model_name: str):
    """Last-layer hidden states of a pretrained encoder.

    Returns (rows, offsets): row 0 is the first special token's hidden
    state, rows 1..n are content-token states with their char offsets.
    Requires the [real] extra (transformers + torch).
    """
    try:
        import torch
        from transformers import AutoModel, AutoTokenizer
    except ImportError as exc:  # pragma: no cover - env dependent
        raise ExportError(
            "real encoding needs the [real] extra (transformers, torch); "
            "use --fake for the hash encoder"
        ) from exc

    tokenizer = AutoTokenizer.from_pretrained(model_name, use_fast=True)
    model = AutoModel.from_pretrained(model_name)
    model.eval()
    encoded = tokenizer(
        text,
        return_offsets_mapping=True,
        truncation=True,
        max_length=MAX_TOKENS + 2,  # room for the special tokens
        return_tensors="pt",
    )
    offset_mapping = encoded.pop("offset_mapping")[0].tolist()
    with torch.no_grad():
        hidden = model(**encoded).last_hidden_state[0].numpy()
    keep = [i for i, (s, e) in enumerate(offset_mapping) if e > s]
    rows = np.vstack([hidden[0:1], hidden[keep]])
    offsets = [tuple(offset_mapping[i]) for i in keep]
    return rows, offsets


def export(contexts_file, articles_dir, out_path, alignment_path, *,
           fake: bool = False, model_name: str = "SpanBERT/spanbert-base-cased",
           dim: int = 768, salt: int = 0, max_tokens: int = MAX_TOKENS) -> int:
    """Encode every context and write the embedding file plus sidecar.

    Returns the number of contexts written.
    """
    rows = read_context_rows(contexts_file)
    texts = read_article_texts(articles_dir)
    written = 0
    with open(out_path, "w", encoding="utf-8", newline="") as emb, \
            open(alignment_path, "w", encoding="utf-8", newline="") as align:
        emb.write(f"PDEMB1 {dim}\n")
        for row in rows:
            if row.article_id not in texts:
                raise ExportError(f"no article {row.article_id!r} for context "
                                  f"{row.context_id}")
            text = texts[row.article_id][row.start:row.end]
            if fake:
                offsets = tokenize_with_offsets(text)
                if len(offsets) > max_tokens:
                    print(f"warning: context {row.context_id} truncated to "
                          f"{max_tokens} tokens", file=sys.stderr)
                    offsets = offsets[:max_tokens]
                vectors = fake_encode(text, offsets, dim, salt)
            else:
                vectors, offsets = real_encode(text, model_name)
                if vectors.shape[1] != dim:
                    raise ExportError(
                        f"model hidden size {vectors.shape[1]} != --dim {dim}")
                if len(offsets) > max_tokens:
                    print(f"warning: context {row.context_id} truncated to "
                          f"{max_tokens} tokens", file=sys.stderr)
                    offsets = offsets[:max_tokens]
                    vectors = vectors[: max_tokens + 1]
            emb.write(f"CTX {row.context_id} {vectors.shape[0]}\n")
            for vec in vectors:
                emb.write(" ".join(repr(float(v)) for v in vec) + "\n")
            for idx, (ts, te) in enumerate(offsets, start=1):
                align.write(f"{row.context_id}\t{idx}\t{ts}\t{te}\n")
            written += 1
    return written
