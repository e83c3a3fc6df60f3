"""Model checkpoint files.

One text format for both model families:

    PDMODEL1 <kind>
    meta <key>\t<value>
    class <label>            (linear models; ordered)
    vocab <token> <idf>      (feature models; ordered by column)
    param <name> <rows> <cols>
    <rows lines of cols decimal floats>
    end

Floats are written with repr() so a reload reproduces the exact values
and a rerun of deterministic training is byte-identical.
"""

from __future__ import annotations

import numpy as np

from .classifiers import LinearClassifier
from .corpus import CorpusError
from .features import TfidfModel
from .span_heads import HeadConfig, SpanHeadModel, _param_shapes


def _write_param(fh, name: str, array: np.ndarray) -> None:
    mat = np.atleast_2d(np.asarray(array, dtype=np.float64))
    fh.write(f"param {name} {mat.shape[0]} {mat.shape[1]}\n")
    for row in mat:
        fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def _save(path, kind: str, meta: dict[str, str], classes=None,
          vocab=None, params=None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"PDMODEL1 {kind}\n")
        for key in sorted(meta):
            fh.write(f"meta {key}\t{meta[key]}\n")
        for label in classes or ():
            fh.write(f"class {label}\n")
        for token, idf in vocab or ():
            fh.write(f"vocab {token} {repr(float(idf))}\n")
        for name, array in (params or {}).items():
            _write_param(fh, name, array)
        fh.write("end\n")


def _load(path):
    meta: dict[str, str] = {}
    classes: list[str] = []
    vocab: list[tuple[str, float]] = []
    params: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split()
        if len(header) != 2 or header[0] != "PDMODEL1":
            raise CorpusError(f"{path}: not a PDMODEL1 checkpoint")
        kind = header[1]
        saw_end = False
        while True:
            line = fh.readline()
            if not line:
                break
            line = line.rstrip("\n")
            if not line:
                continue
            if line == "end":
                saw_end = True
                break
            tag, _, rest = line.partition(" ")
            if tag == "meta":
                key, _, value = rest.partition("\t")
                meta[key] = value
            elif tag == "class":
                classes.append(rest)
            elif tag == "vocab":
                token, _, idf = rest.rpartition(" ")
                vocab.append((token, float(idf)))
            elif tag == "param":
                name, rows_s, cols_s = rest.split()
                rows, cols = int(rows_s), int(cols_s)
                mat = np.empty((rows, cols))
                for r in range(rows):
                    values = fh.readline().split()
                    if len(values) != cols:
                        raise CorpusError(
                            f"{path}: param {name} row {r} has {len(values)} "
                            f"values, expected {cols}")
                    mat[r] = [float(v) for v in values]
                params[name] = mat
            else:
                raise CorpusError(f"{path}: unknown record {tag!r}")
        if not saw_end:
            raise CorpusError(f"{path}: truncated checkpoint (missing end)")
    return kind, meta, classes, vocab, params


def save_linear(path, model: LinearClassifier,
                tfidf: TfidfModel | None = None) -> None:
    meta = {
        "loss_mode": model.loss_mode,
        "l2_strength": "none" if model.l2_strength is None else repr(model.l2_strength),
        "trained": str(int(model.trained)),
        "scale_columns": ",".join(map(str, model.scale_columns)),
    }
    params = {"weights": model.weights, "bias": model.bias}
    if model.scale_columns:
        params["scale_means"] = model.scale_means
        params["scale_stds"] = model.scale_stds
    vocab = None
    if tfidf is not None:
        meta["tfidf_documents"] = str(tfidf.document_count)
        ordered = sorted(tfidf.vocabulary, key=tfidf.vocabulary.get)
        vocab = [(token, tfidf.idf[tfidf.vocabulary[token]]) for token in ordered]
    _save(path, "linear", meta, classes=model.classes, vocab=vocab, params=params)


def load_linear(path):
    """Returns (LinearClassifier, TfidfModel | None)."""
    kind, meta, classes, vocab, params = _load(path)
    if kind != "linear":
        raise CorpusError(f"{path}: expected a linear checkpoint, got {kind!r}")
    scale_columns = tuple(
        int(c) for c in meta.get("scale_columns", "").split(",") if c != "")
    model = LinearClassifier(
        classes=tuple(classes),
        weights=params["weights"],
        bias=params["bias"].ravel(),
        loss_mode=meta.get("loss_mode", "plain"),
        l2_strength=(None if meta.get("l2_strength") == "none"
                     else float(meta["l2_strength"])),
        trained=meta.get("trained") == "1",
        scale_columns=scale_columns,
        scale_means=params.get("scale_means", np.zeros((1, 0))).ravel(),
        scale_stds=params.get("scale_stds", np.zeros((1, 0))).ravel(),
    )
    tfidf = None
    if vocab:
        tfidf = TfidfModel(
            vocabulary={token: col for col, (token, _) in enumerate(vocab)},
            idf=np.array([idf for _, idf in vocab]),
            document_count=int(meta.get("tfidf_documents", "0")),
        )
    return model, tfidf


def save_span_head(path, model: SpanHeadModel) -> None:
    cfg = model.config
    meta = {
        "variant": cfg.variant,
        "embed_dim": str(cfg.embed_dim),
        "deep_dim": str(cfg.deep_dim),
        "sent_dim": str(cfg.sent_dim),
        "class_weight": repr(cfg.class_weight),
        "alphas": ",".join(repr(a) for a in cfg.alphas),
        "seed": str(cfg.seed),
    }
    _save(path, "span_head", meta, params=model.params)


def load_span_head(path) -> SpanHeadModel:
    kind, meta, _, _, params = _load(path)
    if kind != "span_head":
        raise CorpusError(f"{path}: expected a span_head checkpoint, got {kind!r}")
    alphas = tuple(float(a) for a in meta["alphas"].split(","))
    config = HeadConfig(
        variant=meta["variant"],
        embed_dim=int(meta["embed_dim"]),
        deep_dim=int(meta["deep_dim"]),
        sent_dim=int(meta["sent_dim"]),
        class_weight=float(meta["class_weight"]),
        alphas=alphas,
        seed=int(meta.get("seed", "0")),
    )
    shapes = dict(_param_shapes(config))
    fixed = {name: array.reshape(shapes[name]) for name, array in params.items()}
    return SpanHeadModel(config=config, params=fixed)
