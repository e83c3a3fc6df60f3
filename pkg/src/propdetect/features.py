"""Fragment features for technique classification.

Two continuous blocks (raw char length, L2-normalized TF-IDF over the
training fragments) plus six boolean cues (repetition in the article,
superlative wording, "what about" openings, doubt-style openings,
slogan markers, supplement constructions) and a 10-dim emotion
intensity vector averaged over lexicon hits.

Feature extraction never sees the gold label.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .corpus import EMOTION_DIMENSIONS, EmotionLexicon

_WORD_RE = re.compile(r"\w+", re.UNICODE)
_WHATABOUT_RE = re.compile(r"^what\s+about\b")
_SLOGAN_RE = re.compile(r"^\s*(?:#|we\s+will\b)", re.IGNORECASE)
_WHO_CLAUSE_RE = re.compile(r"^who\s")

BOOLEAN_FEATURES = (
    "repetition", "superlative", "whatabout", "doubt", "slogan", "supplement",
)


@dataclass(frozen=True)
class WordLists:
    auxiliary: frozenset[str]
    modal: frozenset[str]
    question: frozenset[str]
    superlative_irregular: frozenset[str]
    superlative_stoplist: frozenset[str]

    @property
    def doubt_leads(self) -> frozenset[str]:
        return self.auxiliary | self.modal | self.question


def parse_word_lists(text: str) -> WordLists:
    """Parse the word-list format: [section] headers, one word per line."""
    sections: dict[str, set[str]] = {}
    current: set[str] | None = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = sections.setdefault(line[1:-1], set())
        elif current is not None:
            current.add(line.lower())
        else:
            raise ValueError(f"word outside any [section]: {line!r}")
    required = ("auxiliary", "modal", "question",
                "superlative_irregular", "superlative_stoplist")
    missing = [name for name in required if name not in sections]
    if missing:
        raise ValueError(f"word-list file missing sections: {missing}")
    return WordLists(*(frozenset(sections[name]) for name in required))


def load_word_lists(path=None) -> WordLists:
    """Load word lists from a file, or the packaged defaults."""
    if path is None:
        text = resources.files("propdetect").joinpath("data/wordlists.txt").read_text(
            encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_word_lists(text)


def word_tokens(text: str) -> list[str]:
    return [t.lower() for t in _WORD_RE.findall(text)]


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: dict[str, int]  # token -> column
    idf: np.ndarray
    document_count: int


def fit_tfidf(fragments: list[str]) -> TfidfModel:
    """Fit smoothed idf over fragments-as-documents.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1; vocabulary is the sorted set
    of word tokens, so refitting the same corpus gives the same model.
    """
    if not fragments:
        raise ValueError("fit_tfidf needs at least one fragment")
    df: dict[str, int] = {}
    for fragment in fragments:
        for token in set(word_tokens(fragment)):
            df[token] = df.get(token, 0) + 1
    if not df:
        raise ValueError("all fragments are empty; nothing to fit")
    vocabulary = {token: col for col, token in enumerate(sorted(df))}
    n = len(fragments)
    idf = np.array(
        [math.log((1 + n) / (1 + df[token])) + 1.0 for token in sorted(df)]
    )
    return TfidfModel(vocabulary=vocabulary, idf=idf, document_count=n)


def transform_tfidf(model: TfidfModel, fragment: str) -> dict[int, float]:
    """tf * idf per in-vocabulary token, L2-normalized; sparse {col: value}."""
    counts: dict[int, int] = {}
    for token in word_tokens(fragment):
        col = model.vocabulary.get(token)
        if col is not None:
            counts[col] = counts.get(col, 0) + 1
    vec = {col: tf * model.idf[col] for col, tf in counts.items()}
    norm = math.sqrt(sum(v * v for v in vec.values()))
    if norm > 0:
        vec = {col: v / norm for col, v in vec.items()}
    return vec


def tfidf_dense(model: TfidfModel, fragment: str) -> np.ndarray:
    dense = np.zeros(len(model.vocabulary))
    for col, value in transform_tfidf(model, fragment).items():
        dense[col] = value
    return dense


def occurrence_count(fragment: str, article_text: str) -> int:
    """Non-overlapping, case-insensitive occurrences of fragment in article."""
    needle = fragment.strip().lower()
    if not needle:
        return 0
    return article_text.lower().count(needle)


def repetition_feature(fragment: str, article_text: str) -> bool:
    """True when the fragment occurs more than four times in the article."""
    return occurrence_count(fragment, article_text) > 4


def superlative_feature(fragment: str, lists: WordLists) -> bool:
    """True when any token looks superlative: an irregular form, or an
    "-est" ending past a 3-char stem that is not stoplisted."""
    for token in word_tokens(fragment):
        if token in lists.superlative_irregular:
            return True
        if (token.endswith("est") and len(token) >= 6
                and token not in lists.superlative_stoplist):
            return True
    return False


def whatabout_feature(fragment: str) -> bool:
    stripped = re.sub(r"^[\W_]+", "", fragment.lower())
    return bool(_WHATABOUT_RE.match(stripped))


def doubt_feature(fragment: str, lists: WordLists) -> bool:
    """True when the first word is an auxiliary, modal, or question word."""
    tokens = word_tokens(fragment)
    return bool(tokens) and tokens[0] in lists.doubt_leads


def slogan_feature(fragment: str) -> bool:
    return bool(_SLOGAN_RE.match(fragment))


def supplement_feature(fragment: str, article_text: str, start: int,
                       end: int) -> bool:
    """True for bracketed supplements or "who ..." clauses.

    The bracket test accepts parentheses inside the fragment or one
    character outside either boundary in the article.
    """
    left = fragment.startswith("(") or (start > 0 and article_text[start - 1] == "(")
    right = fragment.endswith(")") or (
        end < len(article_text) and article_text[end] == ")"
    )
    if left and right:
        return True
    return bool(_WHO_CLAUSE_RE.match(fragment.strip().lower()))


def emotion_vector(fragment: str, lexicon: EmotionLexicon) -> np.ndarray:
    """Per-dimension mean intensity over tokens found in the lexicon."""
    hits = [lexicon.lookup(t) for t in word_tokens(fragment) if t in lexicon]
    if not hits:
        return np.zeros(len(lexicon.dimensions))
    return np.mean(hits, axis=0)


@dataclass(frozen=True)
class FeatureVector:
    length: float
    repetition: bool
    superlative: bool
    whatabout: bool
    doubt: bool
    slogan: bool
    supplement: bool
    emotion: np.ndarray
    tfidf: dict[int, float]

    def booleans(self) -> tuple[bool, ...]:
        return (self.repetition, self.superlative, self.whatabout,
                self.doubt, self.slogan, self.supplement)

    def to_array(self, vocab_size: int) -> np.ndarray:
        """Dense layout: [length, 6 booleans as 0/1, emotion(10), tfidf(V)]."""
        dense = np.zeros(1 + 6 + len(self.emotion) + vocab_size)
        dense[0] = self.length
        dense[1:7] = [float(b) for b in self.booleans()]
        dense[7:7 + len(self.emotion)] = self.emotion
        for col, value in self.tfidf.items():
            dense[7 + len(self.emotion) + col] = value
        return dense


def build_feature_vector(fragment_text: str, article_text: str, start: int,
                         end: int, tfidf_model: TfidfModel,
                         lexicon: EmotionLexicon,
                         lists: WordLists) -> FeatureVector:
    return FeatureVector(
        length=float(len(fragment_text)),
        repetition=repetition_feature(fragment_text, article_text),
        superlative=superlative_feature(fragment_text, lists),
        whatabout=whatabout_feature(fragment_text),
        doubt=doubt_feature(fragment_text, lists),
        slogan=slogan_feature(fragment_text),
        supplement=supplement_feature(fragment_text, article_text, start, end),
        emotion=emotion_vector(fragment_text, lexicon),
        tfidf=transform_tfidf(tfidf_model, fragment_text),
    )


def feature_names(model: TfidfModel) -> list[str]:
    """Column names matching FeatureVector.to_array."""
    names = ["length", *BOOLEAN_FEATURES]
    names.extend(f"emotion_{d}" for d in EMOTION_DIMENSIONS)
    inverse = sorted(model.vocabulary, key=model.vocabulary.get)
    names.extend(f"tfidf_{t}" for t in inverse)
    return names
