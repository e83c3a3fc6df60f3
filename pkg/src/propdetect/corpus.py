"""Corpus ingestion: articles, span/technique labels, lexicons, embeddings.

File formats
------------
* articles: one ``article{id}.txt`` per article, UTF-8.
* span labels: TSV ``article_id<TAB>start<TAB>end`` (character offsets,
  end exclusive), no header.
* technique labels: TSV ``article_id<TAB>technique<TAB>start<TAB>end``.
* embeddings: text format, header ``PDEMB1 <dim>`` then per context a
  ``CTX <context_id> <n_rows>`` line followed by ``n_rows`` lines of
  ``dim`` floats; row 0 is the whole-context vector.

Offsets count Unicode code points, not bytes. CRLF is normalized to LF
at load time and all offsets are validated against the normalized text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class CorpusError(ValueError):
    """Raised for malformed corpus files or inconsistent annotations."""


# Label strings as they appear in technique label files, in the fixed
# canonical order used everywhere (class indices, report rows).
TECHNIQUES = (
    "Loaded_Language",
    "Name_Calling,Labeling",
    "Repetition",
    "Doubt",
    "Exaggeration,Minimisation",
    "Appeal_to_fear-prejudice",
    "Flag-Waving",
    "Causal_Oversimplification",
    "Appeal_to_Authority",
    "Slogans",
    "Black-and-White_Fallacy",
    "Whataboutism,Straw_Men,Red_Herring",
    "Thought-terminating_Cliches",
    "Bandwagon,Reductio_ad_hitlerum",
)

TECHNIQUE_INDEX = {name: i for i, name in enumerate(TECHNIQUES)}

# Affect dimensions of the emotion lexicon, fixed order.
EMOTION_DIMENSIONS = (
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "negative",
    "positive",
    "sadness",
    "surprise",
    "trust",
)


@dataclass(frozen=True)
class Article:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise CorpusError("article id must be non-empty")
        if not self.text:
            raise CorpusError(f"article {self.id}: text must be non-empty")


@dataclass(frozen=True, order=True)
class SpanAnnotation:
    article_id: str
    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.start >= self.end:
            raise CorpusError(
                f"article {self.article_id}: invalid span ({self.start}, {self.end})"
            )

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class TechniqueLabeledFragment:
    article_id: str
    technique: str
    start: int
    end: int
    fragment_text: str | None = None

    def __post_init__(self):
        if self.technique not in TECHNIQUE_INDEX:
            raise CorpusError(
                f"unknown technique {self.technique!r}; valid labels: "
                + ", ".join(TECHNIQUES)
            )
        if self.start < 0 or self.start >= self.end:
            raise CorpusError(
                f"article {self.article_id}: invalid fragment ({self.start}, {self.end})"
            )


@dataclass(frozen=True)
class EmotionLexicon:
    """Word -> 10-dim affect intensity vector, zero-filled for misses."""

    entries: dict[str, np.ndarray]
    dimensions: tuple[str, ...] = EMOTION_DIMENSIONS

    def lookup(self, word: str) -> np.ndarray:
        vec = self.entries.get(word.lower())
        if vec is None:
            return np.zeros(len(self.dimensions))
        return vec

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.entries

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class EmbeddingSequence:
    """Per-token vectors for one context; row 0 is the whole-context token."""

    context_id: str
    vectors: np.ndarray  # (n_rows, dim)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def n_tokens(self) -> int:
        """Content tokens, excluding the reserved row 0."""
        return self.vectors.shape[0] - 1


_ARTICLE_RE = re.compile(r"article(.+)\.txt$")


def normalize_newlines(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


def load_articles(dir_path) -> list[Article]:
    """Load every ``article{id}.txt`` under dir_path (recursively)."""
    root = Path(dir_path)
    if not root.is_dir():
        raise CorpusError(f"not a directory: {root}")
    articles = {}
    for path in sorted(root.rglob("article*.txt")):
        m = _ARTICLE_RE.match(path.name)
        if not m:
            continue
        art_id = m.group(1)
        if art_id in articles:
            raise CorpusError(f"duplicate article id {art_id!r} at {path}")
        try:
            raw = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusError(f"{path}: not valid UTF-8: {exc}") from exc
        articles[art_id] = Article(id=art_id, text=normalize_newlines(raw))
    return [articles[k] for k in sorted(articles)]


def _check_bounds(ann_article_id: str, start: int, end: int,
                  articles: dict[str, Article] | None, where: str) -> None:
    if articles is None:
        return
    art = articles.get(ann_article_id)
    if art is None:
        raise CorpusError(f"{where}: unknown article id {ann_article_id!r}")
    if end > len(art.text):
        raise CorpusError(
            f"{where}: span ({start}, {end}) exceeds article "
            f"{ann_article_id} length {len(art.text)}"
        )


def load_si_labels(path, articles: dict[str, Article] | None = None
                   ) -> list[SpanAnnotation]:
    """Parse a 3-column span label file, validating bounds when articles given."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
            art_id, s_str, e_str = parts
            try:
                start, end = int(s_str), int(e_str)
            except ValueError as exc:
                raise CorpusError(f"{path}:{lineno}: non-integer offset") from exc
            if start < 0 or start >= end:
                raise CorpusError(
                    f"{path}:{lineno}: invalid span ({start}, {end}); need 0 <= start < end"
                )
            _check_bounds(art_id, start, end, articles, f"{path}:{lineno}")
            out.append(SpanAnnotation(art_id, start, end))
    return out


def save_si_labels(annotations: list[SpanAnnotation], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for ann in annotations:
            fh.write(f"{ann.article_id}\t{ann.start}\t{ann.end}\n")


def load_tc_labels(path, articles: dict[str, Article] | None = None
                   ) -> list[TechniqueLabeledFragment]:
    """Parse a 4-column technique label file.

    With articles given, bounds are validated and fragment_text is filled
    with the exact article slice.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise CorpusError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
            art_id, technique, s_str, e_str = parts
            if technique not in TECHNIQUE_INDEX:
                raise CorpusError(
                    f"{path}:{lineno}: unknown technique {technique!r}; valid labels: "
                    + ", ".join(TECHNIQUES)
                )
            try:
                start, end = int(s_str), int(e_str)
            except ValueError as exc:
                raise CorpusError(f"{path}:{lineno}: non-integer offset") from exc
            if start < 0 or start >= end:
                raise CorpusError(
                    f"{path}:{lineno}: invalid fragment ({start}, {end})"
                )
            _check_bounds(art_id, start, end, articles, f"{path}:{lineno}")
            text = articles[art_id].text[start:end] if articles else None
            out.append(TechniqueLabeledFragment(art_id, technique, start, end, text))
    return out


def save_tc_labels(fragments: list[TechniqueLabeledFragment], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for frag in fragments:
            fh.write(f"{frag.article_id}\t{frag.technique}\t{frag.start}\t{frag.end}\n")


def load_emotion_lexicon(path, dimensions: tuple[str, ...] = EMOTION_DIMENSIONS
                         ) -> EmotionLexicon:
    """Parse a ``word<TAB>score<TAB>dimension`` lexicon file.

    Scores for the same word accumulate into one vector; dimensions not
    listed for a word default to 0.
    """
    dim_index = {d: i for i, d in enumerate(dimensions)}
    entries: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
            word, score_str, dim = parts
            try:
                score = float(score_str)
            except ValueError as exc:
                raise CorpusError(f"{path}:{lineno}: non-numeric score") from exc
            if not 0.0 <= score <= 1.0:
                raise CorpusError(f"{path}:{lineno}: score {score} outside [0, 1]")
            if dim not in dim_index:
                raise CorpusError(
                    f"{path}:{lineno}: unknown dimension {dim!r}; expected one of "
                    + ", ".join(dimensions)
                )
            vec = entries.setdefault(word.lower(), np.zeros(len(dimensions)))
            vec[dim_index[dim]] = score
    return EmotionLexicon(entries=entries, dimensions=dimensions)


def load_embeddings(path) -> dict[str, EmbeddingSequence]:
    """Read a PDEMB1 embedding file, validating shape and finiteness."""
    sequences: dict[str, EmbeddingSequence] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split()
        if len(parts) != 2 or parts[0] != "PDEMB1":
            raise CorpusError(f"{path}: bad header {header!r}; expected 'PDEMB1 <dim>'")
        try:
            dim = int(parts[1])
        except ValueError as exc:
            raise CorpusError(f"{path}: non-integer dim in header") from exc
        if dim <= 0:
            raise CorpusError(f"{path}: dim must be positive, got {dim}")

        lineno = 1
        while True:
            line = fh.readline()
            lineno += 1
            if not line:
                break
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 3 or fields[0] != "CTX":
                raise CorpusError(f"{path}:{lineno}: expected 'CTX <id> <n_rows>' line")
            ctx_id = fields[1]
            try:
                n_rows = int(fields[2])
            except ValueError as exc:
                raise CorpusError(f"{path}:{lineno}: non-integer row count") from exc
            if n_rows < 1:
                raise CorpusError(f"{path}:{lineno}: context {ctx_id} has no rows")
            if ctx_id in sequences:
                raise CorpusError(f"{path}:{lineno}: duplicate context id {ctx_id!r}")
            rows = np.empty((n_rows, dim))
            for r in range(n_rows):
                vec_line = fh.readline()
                lineno += 1
                if not vec_line:
                    raise CorpusError(
                        f"{path}: truncated file in context {ctx_id} "
                        f"(expected {n_rows} rows, got {r})"
                    )
                values = vec_line.split()
                if len(values) != dim:
                    raise CorpusError(
                        f"{path}:{lineno}: context {ctx_id} row {r} has "
                        f"{len(values)} values, expected {dim}"
                    )
                try:
                    rows[r] = [float(v) for v in values]
                except ValueError as exc:
                    raise CorpusError(f"{path}:{lineno}: non-numeric value") from exc
            if not np.all(np.isfinite(rows)):
                raise CorpusError(f"{path}: context {ctx_id} contains NaN/Inf")
            sequences[ctx_id] = EmbeddingSequence(context_id=ctx_id, vectors=rows)
    return sequences


def save_embeddings(sequences: dict[str, EmbeddingSequence], path,
                    dim: int | None = None) -> None:
    """Write sequences in PDEMB1 format (inverse of load_embeddings)."""
    dims = {seq.dim for seq in sequences.values()}
    if dim is not None:
        dims.add(dim)
    if len(dims) > 1:
        raise CorpusError(f"inconsistent embedding dims: {sorted(dims)}")
    if not dims:
        raise CorpusError("cannot infer dim for an empty embedding map; pass dim=")
    dim = dims.pop()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"PDEMB1 {dim}\n")
        for ctx_id in sequences:
            seq = sequences[ctx_id]
            fh.write(f"CTX {ctx_id} {seq.vectors.shape[0]}\n")
            for row in seq.vectors:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
