"""Command-line pipeline: ingest -> segment -> (embed externally) ->
train -> predict -> score.

Embeddings cross a file boundary (PDEMB1 plus an alignment sidecar), so
any encoder can feed the models; context and fragment files are plain
TSV. Every subcommand is deterministic given its inputs and --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import checkpoint, hybrid
from .classifiers import (
    LinearClassifier,
    TrainConfig,
    compute_class_weights,
    pool_embedding,
    predict,
    train,
)
from .corpus import (
    Article,
    CorpusError,
    EmotionLexicon,
    TECHNIQUES,
    load_articles,
    load_emotion_lexicon,
    load_embeddings,
    load_si_labels,
    load_tc_labels,
    save_si_labels,
)
from .evaluation import format_si_report, format_tc_report, score_si, score_tc
from .features import (
    build_feature_vector,
    feature_names,
    fit_tfidf,
    load_word_lists,
)
from .segmentation import (
    Context,
    build_mini_contexts,
    build_sentential_contexts,
    merge_overlapping,
    read_alignments,
    read_contexts,
    split_sentences,
    tokenize_and_align,
    write_contexts,
)
from .span_heads import (
    HeadConfig,
    SpanTarget,
    decode_span,
    forward,
    spans_to_annotations,
    target_for_context,
    train_heads,
    truncate_sequence,
)


@dataclass(frozen=True)
class PipelineConfig:
    sequence_length: int = 128
    learning_rate: float = 1e-5
    batch_size: int = 4  # accepted for config compatibility; training is full-batch
    max_iters: int = 500
    tolerance: float = 1e-6
    l2_strength: float = 1.0
    si_weight: float = 2.0
    alphas: tuple[float, float, float] = (0.25, 0.5, 0.5)
    deep_dim: int = 64
    sent_dim: int = 64
    seed: int = 0


def load_config(path) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CorpusError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _parse_alphas(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise CorpusError(f"--alphas needs three comma-separated values, got {text!r}")
    return tuple(float(p) for p in parts)


def resolve_config(args) -> PipelineConfig:
    """Defaults, overridden by --config file entries, overridden by flags."""
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        raw = load_config(args.config)
        casts = {
            "sequence_length": int, "learning_rate": float, "batch_size": int,
            "max_iters": int, "tolerance": float, "l2_strength": float,
            "si_weight": float, "alphas": _parse_alphas,
            "deep_dim": int, "sent_dim": int, "seed": int,
        }
        updates = {}
        for key, value in raw.items():
            if key not in casts:
                raise CorpusError(f"unknown config key {key!r}")
            updates[key] = casts[key](value)
        cfg = replace(cfg, **updates)
    for flag in ("seed", "si_weight", "max_iters", "learning_rate"):
        value = getattr(args, flag, None)
        if value is not None:
            cfg = replace(cfg, **{flag: value})
    alphas = getattr(args, "alphas", None)
    if alphas is not None:
        cfg = replace(cfg, alphas=_parse_alphas(alphas))
    return cfg


def _articles_map(dir_path) -> dict[str, Article]:
    return {a.id: a for a in load_articles(dir_path)}


def fragment_context(article_id: str, start: int, end: int) -> Context:
    return Context(article_id, start, end, "fragment", None)


def _write_history(path, history) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("iter,loss,grad_norm\n")
        for it, loss, gnorm in history:
            fh.write(f"{it},{repr(loss)},{repr(gnorm)}\n")


# --------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------

def cmd_ingest(args) -> int:
    articles = _articles_map(args.articles)
    summary = {"articles": len(articles)}
    if args.si_labels:
        spans = load_si_labels(args.si_labels, articles)
        summary["si_spans"] = len(spans)
    if args.tc_labels:
        fragments = load_tc_labels(args.tc_labels, articles)
        counts = {t: 0 for t in TECHNIQUES}
        for fragment in fragments:
            counts[fragment.technique] += 1
        summary["tc_fragments"] = len(fragments)
        summary["technique_counts"] = counts
        if args.fragments_out:
            seen = set()
            contexts = []
            for fragment in fragments:
                key = (fragment.article_id, fragment.start, fragment.end)
                if key not in seen:
                    seen.add(key)
                    contexts.append(fragment_context(*key))
            write_contexts(contexts, args.fragments_out)
    elif args.fragments_out:
        raise CorpusError("--fragments-out requires --tc-labels")
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8", newline="") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_segment(args) -> int:
    articles = load_articles(args.articles)
    by_id = {a.id: a for a in articles}
    spans = load_si_labels(args.si_labels, by_id) if args.si_labels else []
    build = build_mini_contexts if args.strategy == "mini" else build_sentential_contexts
    contexts = []
    for article in articles:
        sentences = split_sentences(article)
        merged = merge_overlapping(
            [s for s in spans if s.article_id == article.id])
        contexts.extend(build(article, merged, sentences))
    write_contexts(contexts, args.out)
    return 0


def _load_si_batch(args, cfg: PipelineConfig, need_targets: bool):
    """Shared assembly for train-si / predict-si: contexts joined with
    embeddings and alignments, capped at the configured token count."""
    contexts = read_contexts(args.contexts)
    embeddings = load_embeddings(args.embeddings)
    alignments = read_alignments(args.alignment)
    batch = []
    for context in contexts:
        ctx_id = context.context_id
        if ctx_id not in embeddings:
            raise CorpusError(f"no embedding for context {ctx_id}")
        if ctx_id not in alignments:
            raise CorpusError(f"no alignment for context {ctx_id}")
        seq = embeddings[ctx_id]
        alignment = alignments[ctx_id]
        if seq.n_tokens != alignment.n_tokens:
            raise CorpusError(
                f"context {ctx_id}: embedding has {seq.n_tokens} tokens but "
                f"alignment has {alignment.n_tokens}")
        target = None
        if need_targets:
            target = target_for_context(context, alignment)
        seq, alignment, truncated = truncate_sequence(
            seq, alignment, cfg.sequence_length)
        if truncated:
            print(f"warning: context {ctx_id} truncated to "
                  f"{cfg.sequence_length} tokens", file=sys.stderr)
            if target is not None and target.has_span:
                n = seq.n_tokens
                target = SpanTarget(
                    has_span=True,
                    start_idx=min(target.start_idx, n),
                    end_idx=min(target.end_idx, n),
                )
        batch.append((context, seq, alignment, target))
    return batch


def cmd_train_si(args) -> int:
    cfg = resolve_config(args)
    batch = _load_si_batch(args, cfg, need_targets=True)
    if not batch:
        raise CorpusError("contexts file is empty")
    dim = batch[0][1].dim
    head_config = HeadConfig(
        variant=args.variant,
        embed_dim=dim,
        deep_dim=cfg.deep_dim,
        sent_dim=cfg.sent_dim,
        class_weight=cfg.si_weight,
        alphas=cfg.alphas,
        seed=cfg.seed,
        learning_rate=cfg.learning_rate,
        max_iters=cfg.max_iters,
        tolerance=cfg.tolerance,
    )
    model, history = train_heads(
        [(seq, target) for _, seq, _, target in batch], head_config)
    checkpoint.save_span_head(args.out, model)
    if args.log:
        _write_history(args.log, history)
    print(f"trained {args.variant} span head on {len(batch)} contexts "
          f"(final loss {history[-1][1]:.6f})")
    return 0


def cmd_predict_si(args) -> int:
    cfg = resolve_config(args)
    batch = _load_si_batch(args, cfg, need_targets=False)
    prediction_sets = []
    for model_path in args.model:
        model = checkpoint.load_span_head(model_path)
        predictions = []
        for context, seq, alignment, _ in batch:
            sent_logits, start_scores, end_scores = forward(model, seq)
            token_spans = decode_span(sent_logits, start_scores, end_scores)
            predictions.extend(spans_to_annotations(context, alignment, token_spans))
        prediction_sets.append(predictions)
    if len(prediction_sets) == 1:
        final = sorted(prediction_sets[0])
    else:
        final = hybrid.union_si_predictions(prediction_sets)
    save_si_labels(final, args.out)
    print(f"wrote {len(final)} predicted spans to {args.out}")
    return 0


def _load_lexicon(args) -> EmotionLexicon:
    if getattr(args, "lexicon", None):
        return load_emotion_lexicon(args.lexicon)
    return EmotionLexicon(entries={})


def _tc_feature_dataset(fragments, articles, tfidf, lexicon, lists):
    dataset = []
    for fragment in fragments:
        article = articles[fragment.article_id]
        fv = build_feature_vector(
            fragment.fragment_text, article.text, fragment.start, fragment.end,
            tfidf, lexicon, lists)
        dataset.append(fv.to_array(len(tfidf.vocabulary)))
    return dataset


def _dump_features(path, fragments, vectors, tfidf) -> None:
    """Debug TSV: fragment key plus one named column per feature."""
    names = feature_names(tfidf)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(["article_id", "start", "end", *names]) + "\n")
        for fragment, vec in zip(fragments, vectors):
            values = [repr(float(v)) for v in vec]
            fh.write("\t".join(
                [fragment.article_id, str(fragment.start), str(fragment.end),
                 *values]) + "\n")


def cmd_train_tc(args) -> int:
    cfg = resolve_config(args)
    articles = _articles_map(args.articles)
    fragments = load_tc_labels(args.tc_labels, articles)
    if not fragments:
        raise CorpusError("no training fragments")
    labels = [f.technique for f in fragments]
    train_config = TrainConfig(
        learning_rate=cfg.learning_rate,
        max_iters=cfg.max_iters,
        l2_strength=cfg.l2_strength,
        tolerance=cfg.tolerance,
        seed=cfg.seed,
        loss_mode="plain",
    )
    if args.kind == "lr":
        lists = load_word_lists(args.wordlists)
        lexicon = _load_lexicon(args)
        tfidf = fit_tfidf([f.fragment_text for f in fragments])
        vectors = _tc_feature_dataset(fragments, articles, tfidf, lexicon, lists)
        if args.dump_features:
            _dump_features(args.dump_features, fragments, vectors, tfidf)
        train_config = replace(train_config, loss_mode="cost_weighted",
                               normalize_weights=True)
        model, history = train(
            list(zip(vectors, labels)), train_config,
            classes=TECHNIQUES, standardize_columns=(0,))
        checkpoint.save_linear(args.out, model, tfidf=tfidf)
    else:
        if not args.embeddings:
            raise CorpusError("--embeddings is required for --kind pooled")
        embeddings = load_embeddings(args.embeddings)
        vectors = []
        for fragment in fragments:
            ctx_id = fragment_context(
                fragment.article_id, fragment.start, fragment.end).context_id
            if ctx_id not in embeddings:
                raise CorpusError(f"no embedding for fragment {ctx_id}")
            vectors.append(pool_embedding(embeddings[ctx_id]))
        train_config = replace(train_config, loss_mode=args.loss)
        model, history = train(
            list(zip(vectors, labels)), train_config, classes=TECHNIQUES)
        checkpoint.save_linear(args.out, model)
    if args.log:
        _write_history(args.log, history)
    print(f"trained {args.kind} technique model on {len(fragments)} fragments "
          f"(final loss {history[-1][1]:.6f})")
    return 0


def _load_fragment_list(path, articles):
    """Prediction input: 3-column TSV article_id, start, end."""
    spans = load_si_labels(path, articles)
    return spans


def cmd_predict_tc(args) -> int:
    articles = _articles_map(args.articles)
    targets = _load_fragment_list(args.fragments, articles)
    if args.route == "none":
        models = [p for p in (args.lr_model, args.base_model, args.cost_model) if p]
        if len(models) != 1:
            raise CorpusError("--route none needs exactly one model flag")
    elif not (args.lr_model and args.base_model and args.cost_model):
        raise CorpusError(
            "routing needs --lr-model, --base-model and --cost-model")

    per_submodel: dict[str, list[str]] = {}
    if args.lr_model:
        lr_model, tfidf = checkpoint.load_linear(args.lr_model)
        if tfidf is None:
            raise CorpusError(f"{args.lr_model} has no feature vocabulary")
        lists = load_word_lists(args.wordlists)
        lexicon = _load_lexicon(args)
        per_submodel["lr"] = []
        for span in targets:
            article = articles[span.article_id]
            fv = build_feature_vector(
                article.text[span.start:span.end], article.text,
                span.start, span.end, tfidf, lexicon, lists)
            label, _ = predict(lr_model, fv.to_array(len(tfidf.vocabulary)))
            per_submodel["lr"].append(label)
    if args.base_model or args.cost_model:
        embeddings = load_embeddings(args.embeddings) if args.embeddings else None
        if embeddings is None:
            raise CorpusError("--embeddings is required for embedding submodels")
        pooled = []
        for span in targets:
            ctx_id = fragment_context(span.article_id, span.start, span.end).context_id
            if ctx_id not in embeddings:
                raise CorpusError(f"no embedding for fragment {ctx_id}")
            pooled.append(pool_embedding(embeddings[ctx_id]))
        for flag, name in ((args.base_model, "base"), (args.cost_model, "cost_weighted")):
            if flag:
                model, _ = checkpoint.load_linear(flag)
                per_submodel[name] = [predict(model, vec)[0] for vec in pooled]

    if args.route == "none":
        final = next(iter(per_submodel.values()))
    else:
        table = (hybrid.default_routing_table() if args.route == "default"
                 else hybrid.load_routing_table(args.route))
        final = []
        for i in range(len(targets)):
            final.append(hybrid.route(
                {name: preds[i] for name, preds in per_submodel.items()}, table))

    if not args.no_correct:
        sidecar = hybrid.load_pos_sidecar(args.pos_sidecar) if args.pos_sidecar else {}
        corrected = []
        for span, label in zip(targets, final):
            article = articles[span.article_id]
            fragment = article.text[span.start:span.end]
            ctx_id = fragment_context(span.article_id, span.start, span.end).context_id
            pos = hybrid.pos_tag(fragment, sidecar.get(ctx_id))
            corrected.append(hybrid.correct(fragment, label, article.text, pos))
        final = corrected

    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        for span, label in zip(targets, final):
            fh.write(f"{span.article_id}\t{label}\t{span.start}\t{span.end}\n")
    print(f"wrote {len(targets)} technique predictions to {args.out}")
    return 0


def cmd_score_si(args) -> int:
    gold = load_si_labels(args.gold)
    pred = load_si_labels(args.pred)
    score = score_si(gold, pred)
    if args.json:
        print(json.dumps({"precision": score.precision, "recall": score.recall,
                          "f1": score.f1}, sort_keys=True))
        for article_id in sorted(score.per_article):
            p, r, f = score.per_article[article_id]
            print(json.dumps({"article": article_id, "precision": p,
                              "recall": r, "f1": f}, sort_keys=True))
    else:
        print(format_si_report(score))
    return 0


def cmd_score_tc(args) -> int:
    gold = load_tc_labels(args.gold)
    pred = load_tc_labels(args.pred)
    gold_by_key = {(f.article_id, f.start, f.end): f.technique for f in gold}
    pred_by_key = {(f.article_id, f.start, f.end): f.technique for f in pred}
    if set(gold_by_key) != set(pred_by_key):
        missing = sorted(set(gold_by_key) - set(pred_by_key))[:3]
        extra = sorted(set(pred_by_key) - set(gold_by_key))[:3]
        raise CorpusError(
            f"gold/prediction fragments differ (missing {missing}, extra {extra})")
    keys = sorted(gold_by_key)
    score = score_tc([gold_by_key[k] for k in keys], [pred_by_key[k] for k in keys])
    if args.json:
        print(json.dumps({"micro_f1": score.micro_f1}, sort_keys=True))
        for technique in TECHNIQUES:
            print(json.dumps({"technique": technique,
                              "f1": score.per_technique[technique]}, sort_keys=True))
    else:
        print(format_tc_report(score))
    return 0


# --------------------------------------------------------------------
# parser
# --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="propdetect",
        description="Propaganda span identification and technique classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="key=value config file")

    p = sub.add_parser("ingest", help="validate a corpus and summarize it")
    p.add_argument("--articles", required=True)
    p.add_argument("--si-labels")
    p.add_argument("--tc-labels")
    p.add_argument("--summary", help="write the JSON summary here instead of stdout")
    p.add_argument("--fragments-out",
                   help="write a contexts file with one context per fragment")
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("segment", help="build training/inference contexts")
    p.add_argument("--articles", required=True)
    p.add_argument("--si-labels")
    p.add_argument("--strategy", choices=("mini", "sentential"), required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("train-si", help="train a span head on contexts")
    p.add_argument("--contexts", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--alignment", required=True)
    p.add_argument("--variant", choices=("base", "sent", "deep_sep", "deep_combine"),
                   default="deep_sep")
    p.add_argument("--si-weight", type=float, default=None)
    p.add_argument("--alphas", default=None, help="a_sent,a_start,a_end")
    p.add_argument("--max-iters", type=int, default=None, dest="max_iters")
    p.add_argument("--learning-rate", type=float, default=None, dest="learning_rate")
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="training log CSV")
    common(p)
    p.set_defaults(func=cmd_train_si)

    p = sub.add_parser("predict-si", help="decode spans with trained heads")
    p.add_argument("--contexts", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--alignment", required=True)
    p.add_argument("--model", action="append", required=True,
                   help="checkpoint path; repeat to union several models")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_predict_si)

    p = sub.add_parser("train-tc", help="train one technique submodel")
    p.add_argument("--articles", required=True)
    p.add_argument("--tc-labels", required=True)
    p.add_argument("--kind", choices=("lr", "pooled"), required=True)
    p.add_argument("--loss", choices=("plain", "cost_weighted"), default="plain")
    p.add_argument("--embeddings", help="PDEMB1 file (pooled models)")
    p.add_argument("--wordlists", default=None)
    p.add_argument("--lexicon", default=None, help="emotion lexicon TSV")
    p.add_argument("--dump-features",
                   help="write the LR feature matrix as a named-column TSV")
    p.add_argument("--max-iters", type=int, default=None, dest="max_iters")
    p.add_argument("--learning-rate", type=float, default=None, dest="learning_rate")
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="training log CSV")
    common(p)
    p.set_defaults(func=cmd_train_tc)

    p = sub.add_parser("predict-tc", help="classify fragments (hybrid routing)")
    p.add_argument("--fragments", required=True,
                   help="3-column TSV: article_id, start, end")
    p.add_argument("--articles", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--lr-model")
    p.add_argument("--base-model")
    p.add_argument("--cost-model")
    p.add_argument("--route", default="default",
                   help="'default', 'none', or a routing table file")
    p.add_argument("--no-correct", action="store_true",
                   help="skip the POS rule correction")
    p.add_argument("--pos-sidecar", help="fragment_id<TAB>tags file")
    p.add_argument("--wordlists", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_predict_tc)

    p = sub.add_parser("score-si", help="partial-match span scoring")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--json", action="store_true", help="JSON-lines output")
    common(p)
    p.set_defaults(func=cmd_score_si)

    p = sub.add_parser("score-tc", help="technique micro-F1 scoring")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--json", action="store_true", help="JSON-lines output")
    common(p)
    p.set_defaults(func=cmd_score_tc)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
