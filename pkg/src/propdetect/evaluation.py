"""Scorers: partial-match span F1 and technique micro-F1.

Span scoring grants fractional credit for overlap: a predicted span s
earns max over gold spans t of |s n t| / |s| toward precision, and a
gold span earns the mirrored ratio toward recall. Empty prediction or
gold sets score 0 on their side unless both are empty (then 1).
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import CorpusError, SpanAnnotation, TECHNIQUES


@dataclass(frozen=True)
class SpanScore:
    precision: float
    recall: float
    f1: float
    per_article: dict[str, tuple[float, float, float]]


@dataclass(frozen=True)
class TcScore:
    micro_f1: float
    per_technique: dict[str, float]


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _overlap(a: SpanAnnotation, b: SpanAnnotation) -> int:
    return max(0, min(a.end, b.end) - max(a.start, b.start))


def _check_disjoint(spans: list[SpanAnnotation], kind: str) -> None:
    by_article: dict[str, list[SpanAnnotation]] = {}
    for span in spans:
        by_article.setdefault(span.article_id, []).append(span)
    for article_id, group in by_article.items():
        group = sorted(group, key=lambda s: (s.start, s.end))
        for a, b in zip(group, group[1:]):
            if b.start < a.end:
                raise CorpusError(
                    f"{kind} spans overlap in article {article_id}: "
                    f"({a.start},{a.end}) and ({b.start},{b.end}); merge first")


def score_si(gold: list[SpanAnnotation], pred: list[SpanAnnotation]) -> SpanScore:
    """Partial-match precision/recall/F1 over all articles, with a
    per-article breakdown. Predictions must be pre-merged (no overlaps)."""
    _check_disjoint(pred, "predicted")
    articles = sorted({s.article_id for s in gold} | {s.article_id for s in pred})
    gold_by = {a: [s for s in gold if s.article_id == a] for a in articles}
    pred_by = {a: [s for s in pred if s.article_id == a] for a in articles}

    precision_sum = 0.0
    recall_sum = 0.0
    per_article = {}
    for article_id in articles:
        g, p = gold_by[article_id], pred_by[article_id]
        p_contrib = [
            max((_overlap(s, t) for t in g), default=0) / s.length for s in p
        ]
        r_contrib = [
            max((_overlap(s, t) for s in p), default=0) / t.length for t in g
        ]
        precision_sum += sum(p_contrib)
        recall_sum += sum(r_contrib)
        ap = sum(p_contrib) / len(p) if p else (1.0 if not g else 0.0)
        ar = sum(r_contrib) / len(g) if g else (1.0 if not p else 0.0)
        per_article[article_id] = (ap, ar, _f1(ap, ar))

    n_pred = len(pred)
    n_gold = len(gold)
    precision = precision_sum / n_pred if n_pred else (1.0 if not n_gold else 0.0)
    recall = recall_sum / n_gold if n_gold else (1.0 if not n_pred else 0.0)
    return SpanScore(
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
        per_article=per_article,
    )


def score_tc(gold: list[str], pred: list[str]) -> TcScore:
    """Micro-F1 and per-technique F1 over aligned label lists."""
    if len(gold) != len(pred):
        raise CorpusError(
            f"gold has {len(gold)} labels, predictions have {len(pred)}")
    for label in gold + pred:
        if label not in TECHNIQUES:
            raise CorpusError(f"unknown technique {label!r}")
    n = len(gold)
    correct = sum(g == p for g, p in zip(gold, pred))
    # single-label, complete predictions: micro-F1 equals accuracy
    micro = correct / n if n else 1.0

    per_technique = {}
    for technique in TECHNIQUES:
        tp = sum(g == technique and p == technique for g, p in zip(gold, pred))
        fp = sum(p == technique and g != technique for g, p in zip(gold, pred))
        fn = sum(g == technique and p != technique for g, p in zip(gold, pred))
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        per_technique[technique] = _f1(prec, rec)
    return TcScore(micro_f1=micro, per_technique=per_technique)


def format_si_report(score: SpanScore) -> str:
    lines = [
        "span identification (partial match)",
        f"  precision: {score.precision:.5f}",
        f"  recall:    {score.recall:.5f}",
        f"  f1:        {score.f1:.5f}",
    ]
    return "\n".join(lines)


def format_tc_report(score: TcScore) -> str:
    width = max(len(t) for t in TECHNIQUES)
    lines = ["technique classification (micro-F1)"]
    for technique in TECHNIQUES:
        lines.append(f"  {technique:<{width}}  {score.per_technique[technique]:.5f}")
    lines.append(f"  {'micro-F1':<{width}}  {score.micro_f1:.5f}")
    return "\n".join(lines)
