"""Checkpoint round trips for both model families."""

import numpy as np
import pytest

from propdetect.checkpoint import (
    load_linear,
    load_span_head,
    save_linear,
    save_span_head,
)
from propdetect.classifiers import TrainConfig, train
from propdetect.corpus import CorpusError
from propdetect.features import fit_tfidf
from propdetect.span_heads import HeadConfig, SpanHeadModel
from propdetect.synthetic import make_blobs


class TestLinearCheckpoint:
    def test_round_trip_preserves_exact_values(self, tmp_path):
        data = make_blobs(10, [[2, 0], [0, 2]], noise=0.5, seed=1)
        model, _ = train(data, TrainConfig(learning_rate=1e-2, max_iters=40))
        path = tmp_path / "model.pdmodel"
        save_linear(path, model)
        loaded, tfidf = load_linear(path)
        assert tfidf is None
        assert loaded.classes == model.classes
        assert loaded.loss_mode == model.loss_mode
        assert loaded.l2_strength == model.l2_strength
        assert loaded.trained
        np.testing.assert_array_equal(loaded.weights, model.weights)
        np.testing.assert_array_equal(loaded.bias, model.bias)

    def test_round_trip_with_tfidf_and_scaler(self, tmp_path):
        data = [(np.array([10.0, 1.0, 0.0]), "a"),
                (np.array([20.0, 0.0, 1.0]), "b")]
        model, _ = train(data, TrainConfig(learning_rate=1e-2, max_iters=30),
                         standardize_columns=(0,))
        tfidf = fit_tfidf(["alpha beta", "beta gamma"])
        path = tmp_path / "model.pdmodel"
        save_linear(path, model, tfidf=tfidf)
        loaded, loaded_tfidf = load_linear(path)
        assert loaded.scale_columns == (0,)
        np.testing.assert_array_equal(loaded.scale_means, model.scale_means)
        assert loaded_tfidf.vocabulary == tfidf.vocabulary
        np.testing.assert_array_equal(loaded_tfidf.idf, tfidf.idf)
        assert loaded_tfidf.document_count == tfidf.document_count

    def test_rewrite_is_byte_identical(self, tmp_path):
        data = make_blobs(10, [[2, 0], [0, 2]], noise=0.5, seed=1)
        model, _ = train(data, TrainConfig(learning_rate=1e-2, max_iters=40))
        a = tmp_path / "a.pdmodel"
        b = tmp_path / "b.pdmodel"
        save_linear(a, model)
        loaded, _ = load_linear(a)
        save_linear(b, loaded)
        assert a.read_bytes() == b.read_bytes()


class TestSpanHeadCheckpoint:
    def test_round_trip(self, tmp_path):
        config = HeadConfig(variant="deep_combine", embed_dim=6, deep_dim=3,
                            sent_dim=4, class_weight=1.5, alphas=(0.2, 0.3, 0.5),
                            seed=9)
        model = SpanHeadModel.initialize(config)
        path = tmp_path / "head.pdmodel"
        save_span_head(path, model)
        loaded = load_span_head(path)
        assert loaded.config.variant == "deep_combine"
        assert loaded.config.embed_dim == 6
        assert loaded.config.class_weight == 1.5
        assert loaded.config.alphas == (0.2, 0.3, 0.5)
        for name in model.params:
            np.testing.assert_array_equal(loaded.params[name], model.params[name])

    def test_wrong_kind_rejected(self, tmp_path):
        config = HeadConfig(variant="base", embed_dim=4)
        model = SpanHeadModel.initialize(config)
        path = tmp_path / "head.pdmodel"
        save_span_head(path, model)
        with pytest.raises(CorpusError, match="linear"):
            load_linear(path)

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "bad.pdmodel"
        path.write_text("PDMODEL1 linear\nmeta loss_mode\tplain\n", encoding="utf-8")
        with pytest.raises(CorpusError, match="truncated"):
            load_linear(path)
