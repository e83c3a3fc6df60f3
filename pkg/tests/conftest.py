"""Shared fixtures: a hand-built article mirroring the context-segmentation
walkthrough (overlapping spans that merge, a sentence with two spans, a
span crossing a sentence boundary) and a 14-technique corpus."""

from __future__ import annotations

import pytest
from hypothesis import settings

from propdetect.corpus import Article, SpanAnnotation

settings.register_profile("suite", deadline=None)
settings.load_profile("suite")


@pytest.fixture
def fig1_article():
    s1 = "The corrupt warmongers spread fear and lies across the nation."
    s2 = "They will never stop the madness."
    s3 = "It must end now."
    text = s1 + "\n" + s2 + " " + s3
    article = Article(id="fig1", text=text)

    def span(sub: str) -> SpanAnnotation:
        idx = text.find(sub)
        assert idx >= 0, sub
        return SpanAnnotation("fig1", idx, idx + len(sub))

    return {
        "article": article,
        "sentences_text": [s1, s2, s3],
        # two overlapping spans in sentence 1 that merge into one
        "span1": span("corrupt warmongers"),
        "span2": span("warmongers spread fear"),
        "merged12": span("corrupt warmongers spread fear"),
        # second, disjoint span in sentence 1
        "span4": span("lies"),
        # one long span crossing the sentence 2/3 boundary
        "long_span": span("stop the madness. It must end"),
        "long_piece_s2": span("stop the madness."),
        "long_piece_s3": span("It must end"),
    }


TECHNIQUE_FRAGMENTS = [
    ("disgusting display", "Loaded_Language"),
    ("warmonger", "Name_Calling,Labeling"),
    ("never again", "Repetition"),
    ("Has he ever told the truth", "Doubt"),
    ("the greatest threat in history", "Exaggeration,Minimisation"),
    ("They will destroy us all", "Appeal_to_fear-prejudice"),
    ("defend our nation", "Flag-Waving"),
    ("Crime rose because of them", "Causal_Oversimplification"),
    ("Experts all agree", "Appeal_to_Authority"),
    ("#NeverAgain", "Slogans"),
    ("either with us or against us", "Black-and-White_Fallacy"),
    ("What about the children", "Whataboutism,Straw_Men,Red_Herring"),
    ("It is what it is", "Thought-terminating_Cliches"),
    ("Everyone knows this is true", "Bandwagon,Reductio_ad_hitlerum"),
]

TC_ARTICLE_LINES = [
    "The speech was a disgusting display from a warmonger.",
    "Never again, they chanted; never again, never again, never again, never again.",
    "Has he ever told the truth about this?",
    "It was the greatest threat in history.",
    "They will destroy us all unless we act.",
    "We must defend our nation and its flag.",
    "Crime rose because of them alone.",
    "Experts all agree on this point.",
    "#NeverAgain is trending everywhere.",
    "You are either with us or against us.",
    "What about the children left behind?",
    "It is what it is, nothing more.",
    "Everyone knows this is true (who Kennedy admired).",
]


@pytest.fixture
def tc_corpus():
    text = "\n".join(TC_ARTICLE_LINES)
    article = Article(id="900", text=text)
    fragments = []
    for sub, technique in TECHNIQUE_FRAGMENTS:
        idx = text.find(sub)
        assert idx >= 0, sub
        fragments.append((article.id, technique, idx, idx + len(sub), sub))
    return {"article": article, "fragments": fragments}


def write_tc_files(tc_corpus, tmp_path):
    """Materialize the technique fixture as an articles dir + label file."""
    articles_dir = tmp_path / "articles"
    articles_dir.mkdir(exist_ok=True)
    article = tc_corpus["article"]
    (articles_dir / f"article{article.id}.txt").write_text(
        article.text, encoding="utf-8")
    labels = tmp_path / "tc_labels.tsv"
    with open(labels, "w", encoding="utf-8") as fh:
        for art_id, technique, start, end, _ in tc_corpus["fragments"]:
            fh.write(f"{art_id}\t{technique}\t{start}\t{end}\n")
    return articles_dir, labels
