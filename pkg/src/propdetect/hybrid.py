"""Hybrid combination of the technique submodels.

Routing keeps, per fragment, the prediction of the submodel that owns
the predicted class: the feature model owns Repetition, the
cost-weighted embedding model owns the minority techniques (training
occurrence below 110), and the plain embedding model owns the rest.
Ownership conflicts resolve specialist-first: feature-model Repetition
beats a cost-weighted minority claim beats the plain model.

After routing, fragments predicted as Repetition that occur fewer than
three times in their article are re-labelled from their POS tag
sequence: (NN,NN), (NN,NNS) or (NNS) become Name Calling/Labeling and
(JJ) or (NN) become Loaded Language.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import CorpusError, SpanAnnotation, TECHNIQUES
from .features import occurrence_count
from .segmentation import merge_overlapping

SUBMODELS = ("base", "cost_weighted", "lr")

REPETITION = "Repetition"
NAME_CALLING = "Name_Calling,Labeling"
LOADED_LANGUAGE = "Loaded_Language"

# Techniques with fewer than 110 training occurrences.
MINORITY_TECHNIQUES = frozenset({
    "Whataboutism,Straw_Men,Red_Herring",
    "Thought-terminating_Cliches",
    "Bandwagon,Reductio_ad_hitlerum",
})


def default_routing_table() -> dict[str, str]:
    table = {}
    for technique in TECHNIQUES:
        if technique == REPETITION:
            table[technique] = "lr"
        elif technique in MINORITY_TECHNIQUES:
            table[technique] = "cost_weighted"
        else:
            table[technique] = "base"
    return table


def load_routing_table(path) -> dict[str, str]:
    """Parse ``technique=submodel`` lines on top of the default table."""
    table = default_routing_table()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CorpusError(f"{path}:{lineno}: expected technique=submodel")
            technique, submodel = (part.strip() for part in line.split("=", 1))
            if technique not in TECHNIQUES:
                raise CorpusError(f"{path}:{lineno}: unknown technique {technique!r}")
            if submodel not in SUBMODELS:
                raise CorpusError(
                    f"{path}:{lineno}: unknown submodel {submodel!r}; "
                    f"expected one of {SUBMODELS}")
            table[technique] = submodel
    return table


def route(predictions: dict[str, str],
          table: dict[str, str] | None = None) -> str:
    """Resolve one fragment's three submodel predictions to a final label.

    predictions maps submodel name -> predicted technique; all three
    submodels must be present.
    """
    if table is None:
        table = default_routing_table()
    missing = [m for m in SUBMODELS if m not in predictions]
    if missing:
        raise CorpusError(f"missing submodel predictions: {missing}")
    lr_pred = predictions["lr"]
    cost_pred = predictions["cost_weighted"]
    if table.get(lr_pred) == "lr":
        return lr_pred
    if table.get(cost_pred) == "cost_weighted":
        return cost_pred
    return predictions["base"]


@dataclass(frozen=True)
class PosTaggedFragment:
    tokens: tuple[str, ...]
    tags: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValueError("one tag per token required")


_WORD_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

# Small lexicon for words the correction rules care about but suffix
# rules get wrong.
_TAG_LEXICON = {
    "warmonger": "NN",
    "warmongers": "NNS",
    "traitor": "NN",
    "traitors": "NNS",
    "coward": "NN",
    "cowards": "NNS",
    "disgusting": "JJ",
    "corrupt": "JJ",
    "evil": "JJ",
    "crisis": "NN",
    "chaos": "NN",
    "campus": "NN",
}

_ADJ_SUFFIXES = ("est", "ous", "ful", "ive", "able", "ible", "al", "ic", "ish", "less")


def _tag_token(token: str) -> str:
    lower = token.lower()
    if not lower[0].isalnum():
        return "PUNCT"
    if lower in _TAG_LEXICON:
        return _TAG_LEXICON[lower]
    if lower.isdigit():
        return "CD"
    for suffix in _ADJ_SUFFIXES:
        if lower.endswith(suffix) and len(lower) > len(suffix) + 1:
            return "JJ"
    if lower.endswith("s") and not lower.endswith("ss") and len(lower) > 2:
        return "NNS"
    return "NN"


def pos_tag(fragment: str, sidecar_tags: list[str] | None = None) -> PosTaggedFragment:
    """Tag a fragment, preferring sidecar-provided tags over the fallback
    suffix/lexicon tagger."""
    tokens = tuple(_WORD_RE.findall(fragment))
    if sidecar_tags is not None:
        if len(sidecar_tags) != len(tokens):
            raise CorpusError(
                f"sidecar has {len(sidecar_tags)} tags for {len(tokens)} tokens")
        return PosTaggedFragment(tokens=tokens, tags=tuple(sidecar_tags))
    return PosTaggedFragment(tokens=tokens, tags=tuple(map(_tag_token, tokens)))


_NAME_CALLING_PATTERNS = (("NN", "NN"), ("NN", "NNS"), ("NNS",))
_LOADED_PATTERNS = (("JJ",), ("NN",))


def correct(fragment: str, predicted: str, article_text: str,
            pos: PosTaggedFragment) -> str:
    """POS rule correction for over-predicted Repetition.

    Applies only when the prediction is Repetition and the fragment
    occurs fewer than three times in the article; the tag sequence must
    match one of the five patterns exactly and in full.
    """
    if predicted != REPETITION:
        return predicted
    if occurrence_count(fragment, article_text) >= 3:
        return predicted
    if pos.tags in _NAME_CALLING_PATTERNS:
        return NAME_CALLING
    if pos.tags in _LOADED_PATTERNS:
        return LOADED_LANGUAGE
    return predicted


def load_pos_sidecar(path) -> dict[str, list[str]]:
    """Sidecar format: ``fragment_id<TAB>space-joined tags``."""
    tags: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusError(f"{path}:{lineno}: expected 2 columns")
            tags[parts[0]] = parts[1].split()
    return tags


def union_si_predictions(pred_sets: list[list[SpanAnnotation]]
                         ) -> list[SpanAnnotation]:
    """Union span predictions from several models, merging overlaps
    per article."""
    by_article: dict[str, list[SpanAnnotation]] = {}
    for preds in pred_sets:
        for span in preds:
            by_article.setdefault(span.article_id, []).append(span)
    merged = []
    for article_id in sorted(by_article):
        merged.extend(merge_overlapping(sorted(set(by_article[article_id]))))
    return merged
