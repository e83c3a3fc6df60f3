"""Context segmentation: sentences, span merging, training contexts.

An article is cut into sentences (newline is a hard boundary; within a
line we split after ./!/? followed by whitespace and an uppercase
letter). Overlapping gold spans are merged, spans crossing sentences are
split at the boundary, and each sentence then yields training contexts
under one of two strategies:

* mini: a sentence with k >= 2 spans is partitioned into k contexts,
  one span each, cut at the token boundary nearest the midpoint of the
  gap between neighbouring spans;
* sentential: one context per sentence keeping only the longest span.

Token alignment records the character span of every token so gold char
offsets can be expressed as token indices (1-based; index 0 is the
reserved whole-context position).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import Article, CorpusError, SpanAnnotation


@dataclass(frozen=True)
class Sentence:
    article_id: str
    start: int
    end: int
    text: str


@dataclass(frozen=True)
class Context:
    """A training unit: a char range of an article with at most one gold span.

    gold_span is (start, end) relative to the context, or None.
    """

    article_id: str
    start: int
    end: int
    strategy: str
    gold_span: tuple[int, int] | None = None

    def __post_init__(self):
        if self.gold_span is not None:
            gs, ge = self.gold_span
            if not (0 <= gs < ge <= self.end - self.start):
                raise CorpusError(
                    f"gold span {self.gold_span} outside context "
                    f"({self.start}, {self.end}) of article {self.article_id}"
                )

    @property
    def context_id(self) -> str:
        return f"{self.article_id}:{self.strategy}:{self.start}-{self.end}"

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class TokenAlignment:
    """Char spans of each token, aligned 1:1 with embedding rows 1..n."""

    context_id: str
    token_spans: tuple[tuple[int, int], ...]

    @property
    def n_tokens(self) -> int:
        return len(self.token_spans)


_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)
_SENT_BREAK_RE = re.compile(r"(?<=[.!?])\s+(?=[A-Z])")


def split_sentences(article: Article) -> list[Sentence]:
    """Split an article into ordered, non-overlapping sentences.

    Newlines are hard boundaries; sentence spans are trimmed of
    surrounding whitespace so that together they cover exactly the
    non-delimiter text.
    """
    sentences = []
    offset = 0
    for line in article.text.split("\n"):
        piece_start = 0
        breaks = [m.start() for m in _SENT_BREAK_RE.finditer(line)] + [len(line)]
        for brk in breaks:
            raw = line[piece_start:brk]
            stripped = raw.strip()
            if stripped:
                lead = len(raw) - len(raw.lstrip())
                start = offset + piece_start + lead
                sentences.append(
                    Sentence(
                        article_id=article.id,
                        start=start,
                        end=start + len(stripped),
                        text=stripped,
                    )
                )
            piece_start = brk
        offset += len(line) + 1
    return sentences


def merge_overlapping(spans: list[SpanAnnotation]) -> list[SpanAnnotation]:
    """Union every maximal chain of strictly overlapping spans.

    Touching spans (end == start) are kept separate. Idempotent and
    independent of input order.
    """
    if not spans:
        return []
    ids = {s.article_id for s in spans}
    if len(ids) > 1:
        raise CorpusError(f"merge_overlapping got mixed article ids: {sorted(ids)}")
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    merged = [ordered[0]]
    for span in ordered[1:]:
        last = merged[-1]
        if span.start < last.end:
            if span.end > last.end:
                merged[-1] = SpanAnnotation(last.article_id, last.start, span.end)
        else:
            merged.append(span)
    return merged


def split_at_sentence_boundaries(span: SpanAnnotation,
                                 sentences: list[Sentence]) -> list[SpanAnnotation]:
    """Cut a span into per-sentence pieces (inter-sentence gaps dropped)."""
    pieces = []
    for sent in sentences:
        start = max(span.start, sent.start)
        end = min(span.end, sent.end)
        if start < end:
            pieces.append(SpanAnnotation(span.article_id, start, end))
    if not pieces:
        raise CorpusError(
            f"span ({span.start}, {span.end}) of article {span.article_id} "
            "lies outside sentence coverage"
        )
    return pieces


def _prepare_spans(merged_spans: list[SpanAnnotation],
                   sentences: list[Sentence]) -> dict[int, list[SpanAnnotation]]:
    """Sentence-split merged spans, grouped by sentence index."""
    by_sentence: dict[int, list[SpanAnnotation]] = {i: [] for i in range(len(sentences))}
    for span in merged_spans:
        for piece in split_at_sentence_boundaries(span, sentences):
            for i, sent in enumerate(sentences):
                if sent.start <= piece.start and piece.end <= sent.end:
                    by_sentence[i].append(piece)
                    break
    for pieces in by_sentence.values():
        pieces.sort(key=lambda s: (s.start, s.end))
        for a, b in zip(pieces, pieces[1:]):
            if b.start < a.end:
                raise CorpusError(
                    "spans overlap after merging; run merge_overlapping first"
                )
    return by_sentence


def _token_boundaries(sent: Sentence) -> list[int]:
    """Article-coordinate char positions at token edges inside a sentence."""
    bounds = set()
    for m in _TOKEN_RE.finditer(sent.text):
        bounds.add(sent.start + m.start())
        bounds.add(sent.start + m.end())
    return sorted(bounds)


def build_mini_contexts(article: Article, merged_spans: list[SpanAnnotation],
                        sentences: list[Sentence]) -> list[Context]:
    """Per sentence: one context when it has 0..1 spans, else a k-way
    partition with exactly one span per context.

    The cut between neighbouring spans sits at the token boundary nearest
    the midpoint of their gap (ties toward the left); span edges bound
    the candidates so no gold character changes context.
    """
    by_sentence = _prepare_spans(merged_spans, sentences)
    contexts = []
    for i, sent in enumerate(sentences):
        spans = by_sentence[i]
        if len(spans) <= 1:
            gold = None
            if spans:
                gold = (spans[0].start - sent.start, spans[0].end - sent.start)
            contexts.append(
                Context(article.id, sent.start, sent.end, "mini", gold)
            )
            continue
        token_bounds = _token_boundaries(sent)
        cuts = []
        for left, right in zip(spans, spans[1:]):
            midpoint = (left.end + right.start) / 2
            candidates = [b for b in token_bounds if left.end <= b <= right.start]
            candidates.extend([left.end, right.start])
            cuts.append(min(candidates, key=lambda b: (abs(b - midpoint), b)))
        edges = [sent.start] + cuts + [sent.end]
        for span, (cstart, cend) in zip(spans, zip(edges, edges[1:])):
            contexts.append(
                Context(
                    article.id, cstart, cend, "mini",
                    (span.start - cstart, span.end - cstart),
                )
            )
    return contexts


def build_sentential_contexts(article: Article, merged_spans: list[SpanAnnotation],
                              sentences: list[Sentence]) -> list[Context]:
    """One context per sentence, keeping only its longest span piece
    (ties broken toward the earliest start)."""
    by_sentence = _prepare_spans(merged_spans, sentences)
    contexts = []
    for i, sent in enumerate(sentences):
        spans = by_sentence[i]
        gold = None
        if spans:
            best = max(spans, key=lambda s: (s.length, -s.start))
            gold = (best.start - sent.start, best.end - sent.start)
        contexts.append(
            Context(article.id, sent.start, sent.end, "sentential", gold)
        )
    return contexts


def tokenize(text: str) -> list[tuple[int, int]]:
    """Char spans of whitespace/punctuation tokens, in order."""
    return [(m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def tokenize_and_align(context: Context, article: Article) -> TokenAlignment:
    """Tokenize a context's text, recording context-relative char spans."""
    text = article.text[context.start:context.end]
    if not text:
        raise CorpusError(f"context {context.context_id} has empty text")
    return TokenAlignment(
        context_id=context.context_id,
        token_spans=tuple(tokenize(text)),
    )


def char_span_to_token_span(alignment: TokenAlignment, char_start: int,
                            char_end: int) -> tuple[int, int]:
    """Map a context-relative char range to 1-based token boundary indices.

    Snapping is outward: the first and last tokens intersecting the range
    are chosen, so no gold character is dropped.
    """
    if char_start >= char_end:
        raise CorpusError(f"empty char range ({char_start}, {char_end})")
    first = None
    last = None
    for idx, (ts, te) in enumerate(alignment.token_spans, start=1):
        if ts < char_end and te > char_start:
            if first is None:
                first = idx
            last = idx
    if first is None:
        raise CorpusError(
            f"char range ({char_start}, {char_end}) covers no token "
            f"in context {alignment.context_id}"
        )
    return first, last


def token_span_to_char(alignment: TokenAlignment, token_start: int,
                       token_end: int) -> tuple[int, int]:
    """Inverse mapping: 1-based token indices to the covering char range
    (context-relative)."""
    n = alignment.n_tokens
    if not (1 <= token_start <= token_end <= n):
        raise CorpusError(
            f"token span ({token_start}, {token_end}) outside 1..{n} "
            f"in context {alignment.context_id}"
        )
    return (
        alignment.token_spans[token_start - 1][0],
        alignment.token_spans[token_end - 1][1],
    )


def write_contexts(contexts: list[Context], path) -> None:
    """Contexts file: TSV context_id, article_id, start, end, strategy,
    gold_start, gold_end (gold fields empty when absent)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for ctx in contexts:
            gs, ge = ("", "")
            if ctx.gold_span is not None:
                gs, ge = str(ctx.gold_span[0]), str(ctx.gold_span[1])
            fh.write(
                f"{ctx.context_id}\t{ctx.article_id}\t{ctx.start}\t{ctx.end}"
                f"\t{ctx.strategy}\t{gs}\t{ge}\n"
            )


def write_alignments(alignments: list[TokenAlignment], path) -> None:
    """Alignment sidecar: TSV context_id, token_idx (1-based, matching
    embedding rows), char_start, char_end (context-relative)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for alignment in alignments:
            for idx, (ts, te) in enumerate(alignment.token_spans, start=1):
                fh.write(f"{alignment.context_id}\t{idx}\t{ts}\t{te}\n")


def read_alignments(path) -> dict[str, TokenAlignment]:
    spans: dict[str, list[tuple[int, tuple[int, int]]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise CorpusError(f"{path}:{lineno}: expected 4 columns")
            ctx_id, idx_s, ts_s, te_s = parts
            spans.setdefault(ctx_id, []).append((int(idx_s), (int(ts_s), int(te_s))))
    out = {}
    for ctx_id, rows in spans.items():
        rows.sort()
        indices = [idx for idx, _ in rows]
        if indices != list(range(1, len(rows) + 1)):
            raise CorpusError(
                f"{path}: context {ctx_id} has non-contiguous token indices")
        out[ctx_id] = TokenAlignment(
            context_id=ctx_id, token_spans=tuple(span for _, span in rows))
    return out


def read_contexts(path) -> list[Context]:
    contexts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 7:
                raise CorpusError(f"{path}:{lineno}: expected 7 columns, got {len(parts)}")
            ctx_id, art_id, s_str, e_str, strategy, gs_str, ge_str = parts
            gold = None
            if gs_str != "" or ge_str != "":
                gold = (int(gs_str), int(ge_str))
            ctx = Context(art_id, int(s_str), int(e_str), strategy, gold)
            if ctx.context_id != ctx_id:
                raise CorpusError(
                    f"{path}:{lineno}: context id {ctx_id!r} does not match "
                    f"fields (expected {ctx.context_id!r})"
                )
            contexts.append(ctx)
    return contexts
