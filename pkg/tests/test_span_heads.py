"""Span head forward/backward, losses, training, and decoding."""

import math

import numpy as np
import pytest

from propdetect.corpus import Article, EmbeddingSequence
from propdetect.optim import (
    TrainingDivergedError,
    finite_difference_grad,
    gradient_relative_error,
)
from propdetect.segmentation import Context, tokenize_and_align
from propdetect.span_heads import (
    HeadConfig,
    SpanHeadModel,
    SpanTarget,
    _batch_fun,
    _forward_parts,
    boundary_loss,
    decode_span,
    forward,
    merge_candidate_spans,
    output_width,
    sentence_loss,
    spans_to_annotations,
    target_for_context,
    total_loss,
    train_heads,
    truncate_sequence,
)


def tiny_config(variant, **overrides):
    base = dict(variant=variant, embed_dim=5, deep_dim=3, sent_dim=4,
                class_weight=2.0, alphas=(0.25, 0.5, 0.5), seed=1)
    base.update(overrides)
    return HeadConfig(**base)


def random_target(rng, n):
    if rng.random() < 0.5:
        s = int(rng.integers(1, n + 1))
        e = int(rng.integers(s, n + 1))
        return SpanTarget(True, s, e)
    return SpanTarget(False)


def planted_batch(seed, n_ctx=10, dim=12, noise=0.1, nonlinear=False):
    """Contexts whose embeddings carry an explicit boundary signal."""
    rng = np.random.default_rng(seed)
    batch = []
    for i in range(n_ctx):
        n = int(rng.integers(4, 9))
        rows = rng.normal(0, noise, size=(n + 1, dim))
        if i % 2 == 0:
            s = int(rng.integers(1, n))
            e = int(rng.integers(s, n + 1))
            if nonlinear:
                rows[0, 4] -= 1.0
                rows[s, 1] += 1.2
                rows[e, 2] += 1.2
                rows[s, 5] = rows[s, 1] * rows[0, 4]
            else:
                rows[0, 4] -= 2.0
                rows[s, 1] += 2.5
                rows[e, 2] += 2.5
            target = SpanTarget(True, s, e)
        else:
            rows[0, 4] += 2.0 if not nonlinear else 1.0
            target = SpanTarget(False)
        batch.append((EmbeddingSequence(f"c{i}", rows), target))
    return batch


class TestForward:
    def test_zero_parameters_give_zero_scores(self):
        config = tiny_config("deep_sep")
        theta = np.zeros(SpanHeadModel.initialize(config).flat().size)
        model = SpanHeadModel.from_flat(config, theta)
        seq = EmbeddingSequence("c", np.random.default_rng(0).normal(size=(4, 5)))
        sent_logits, start_scores, end_scores = forward(model, seq)
        np.testing.assert_array_equal(sent_logits, [0.0, 0.0])
        np.testing.assert_array_equal(start_scores, np.zeros(4))
        np.testing.assert_array_equal(end_scores, np.zeros(4))

    def test_deep_sep_matches_manual_computation(self):
        config = tiny_config("deep_sep")
        rng = np.random.default_rng(5)
        model = SpanHeadModel.initialize(config)
        for name in model.params:
            model.params[name] = rng.normal(size=model.params[name].shape)
        h = rng.normal(size=(3, 5))  # whole-context row + 2 tokens
        seq = EmbeddingSequence("c", h)
        sent_logits, start_scores, end_scores = forward(model, seq)

        p = model.params
        a_sent = np.tanh(p["w_sent_k"] @ h[0] + p["b_sent_k"])
        expected_sent = p["w_sent_o"] @ a_sent + p["b_sent_o"]
        a_start = np.tanh(h @ p["w_start_k"].T + p["b_start_k"])
        a_end = np.tanh(h @ p["w_end_k"].T + p["b_end_k"])
        rep = np.tile(a_sent, (3, 1))
        z_start = np.hstack([h, a_start, rep])
        z_end = np.hstack([h, a_end, rep])
        np.testing.assert_allclose(sent_logits, expected_sent, atol=1e-12)
        np.testing.assert_allclose(
            start_scores, z_start @ p["w_start_o"] + p["b_start_o"][0], atol=1e-12)
        np.testing.assert_allclose(
            end_scores, z_end @ p["w_end_o"] + p["b_end_o"][0], atol=1e-12)

    def test_deep_combine_shares_concatenated_input(self):
        config = tiny_config("deep_combine")
        model = SpanHeadModel.initialize(config)
        h = np.random.default_rng(1).normal(size=(4, 5))
        _, _, _, cache = _forward_parts(model.params, "deep_combine", h)
        assert cache["z_start"] is cache["z_end"]

    def test_dim_mismatch_rejected(self):
        model = SpanHeadModel.initialize(tiny_config("base"))
        seq = EmbeddingSequence("c", np.zeros((3, 7)))
        with pytest.raises(ValueError, match="dim"):
            forward(model, seq)


class TestVariantWidths:
    def test_concatenation_widths(self):
        d, k, s = 5, 3, 4
        expected = {"base": d, "sent": d + s, "deep_sep": d + k + s,
                    "deep_combine": d + 2 * k + s}
        for variant, width in expected.items():
            assert output_width(tiny_config(variant)) == width

    def test_mismatched_shapes_rejected(self):
        config = tiny_config("sent")
        params = SpanHeadModel.initialize(tiny_config("base")).params
        with pytest.raises(ValueError, match="shapes"):
            SpanHeadModel(config=config, params=params)


class TestLosses:
    def test_sentence_loss_confident_prediction(self):
        assert sentence_loss(np.array([-50.0, 50.0]), 1) == pytest.approx(0.0, abs=1e-12)

    def test_sentence_loss_uniform(self):
        assert sentence_loss(np.zeros(2), 0) == pytest.approx(math.log(2), abs=1e-12)

    def test_sentence_loss_matches_naive_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            logits = rng.uniform(-4, 4, size=2)
            y = int(rng.integers(0, 2))
            naive = -math.log(math.exp(logits[y]) / np.exp(logits).sum())
            assert sentence_loss(logits, y) == pytest.approx(naive, abs=1e-12)

    def test_boundary_loss_unit_weight_is_plain_ce(self):
        rng = np.random.default_rng(1)
        scores = rng.normal(size=6)
        plain = -math.log(math.exp(scores[3]) / np.exp(scores).sum())
        assert boundary_loss(scores, 3, 1, 1.0) == pytest.approx(plain, abs=1e-12)

    def test_weight_two_subtracts_ln_two(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            scores = rng.normal(size=8)
            idx = int(rng.integers(1, 8))
            assert boundary_loss(scores, idx, 1, 2.0) == pytest.approx(
                boundary_loss(scores, idx, 1, 1.0) - math.log(2), abs=1e-12)

    def test_offset_identity_for_general_weights(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            scores = rng.normal(size=5)
            idx = int(rng.integers(1, 5))
            w = float(rng.uniform(1.0, 90.0))
            assert boundary_loss(scores, idx, 1, w) == pytest.approx(
                boundary_loss(scores, idx, 1, 1.0) - math.log(w), abs=1e-12)

    def test_no_span_targets_reserved_position(self):
        scores = np.array([60.0, 0.0, 0.0])
        assert boundary_loss(scores, None, 0, 2.0) == pytest.approx(0.0, abs=1e-12)

    def test_out_of_range_target_rejected(self):
        with pytest.raises(ValueError):
            boundary_loss(np.zeros(4), 0, 1, 1.0)
        with pytest.raises(ValueError):
            boundary_loss(np.zeros(4), 4, 1, 1.0)

    def test_total_loss_with_unit_sublosses(self):
        config = tiny_config("base", class_weight=1.0)
        # logits = log(probabilities) with target probability 1/e makes
        # each component CE exactly 1
        sent_logits = np.log([1 - math.exp(-1), math.exp(-1)])
        p_rest = (1 - math.exp(-1)) / 2
        scores = np.log([p_rest, math.exp(-1), p_rest])
        target = SpanTarget(True, 1, 1)
        value = total_loss(sent_logits, scores, scores, target, config)
        assert value == pytest.approx(1.25, abs=1e-12)

    def test_total_loss_matches_component_sum(self):
        rng = np.random.default_rng(4)
        config = tiny_config("base", alphas=(0.3, 0.6, 0.9), class_weight=3.0)
        for _ in range(50):
            n = int(rng.integers(2, 7))
            sent_logits = rng.normal(size=2)
            start_scores = rng.normal(size=n + 1)
            end_scores = rng.normal(size=n + 1)
            target = random_target(rng, n)
            y = int(target.has_span)
            expected = (
                0.3 * sentence_loss(sent_logits, y)
                + 0.6 * boundary_loss(start_scores, target.start_idx, y, 3.0)
                + 0.9 * boundary_loss(end_scores, target.end_idx, y, 3.0)
            )
            got = total_loss(sent_logits, start_scores, end_scores, target, config)
            assert got == pytest.approx(expected, abs=1e-12)


class TestGradients:
    @pytest.mark.parametrize("variant", ["base", "sent", "deep_sep", "deep_combine"])
    def test_analytic_matches_finite_differences(self, variant):
        rng = np.random.default_rng(11)
        config = tiny_config(variant, class_weight=2.5)
        for trial in range(5):
            batch = []
            for i in range(3):
                n = int(rng.integers(2, 6))
                seq = EmbeddingSequence(f"c{i}", rng.normal(size=(n + 1, 5)))
                batch.append((seq, random_target(rng, n)))
            fun = _batch_fun(batch, config)
            theta = SpanHeadModel.initialize(config).flat()
            theta += rng.normal(0, 0.3, size=theta.shape)
            _, analytic = fun(theta)
            numeric = finite_difference_grad(lambda t: fun(t)[0], theta)
            assert gradient_relative_error(analytic, numeric) < 1e-4

    def test_batch_loss_equals_mean_of_total_loss(self):
        rng = np.random.default_rng(12)
        config = tiny_config("deep_combine", class_weight=2.0)
        batch = []
        for i in range(4):
            n = int(rng.integers(2, 6))
            batch.append((EmbeddingSequence(f"c{i}", rng.normal(size=(n + 1, 5))),
                          random_target(rng, n)))
        model = SpanHeadModel.initialize(config)
        fun = _batch_fun(batch, config)
        loss, _ = fun(model.flat())
        expected = np.mean([
            total_loss(*forward(model, seq), target, config)
            for seq, target in batch
        ])
        assert loss == pytest.approx(expected, abs=1e-12)


class TestTraining:
    def test_planted_signal_reaches_full_boundary_accuracy(self):
        batch = planted_batch(0)
        config = HeadConfig(variant="base", embed_dim=12, deep_dim=8, sent_dim=8,
                            class_weight=1.5, seed=3, learning_rate=1e-2,
                            max_iters=400, tolerance=1e-8)
        model, history = train_heads(batch, config)
        losses = [h[1] for h in history]
        assert all(a >= b for a, b in zip(losses, losses[1:]))
        for seq, target in batch:
            decoded = decode_span(*forward(model, seq))
            if target.has_span:
                assert decoded == [(target.start_idx, target.end_idx)]
            else:
                assert decoded == []

    def test_spanless_dataset_predicts_no_span(self):
        rng = np.random.default_rng(9)
        batch = []
        for i in range(8):
            n = int(rng.integers(3, 7))
            rows = rng.normal(0, 0.5, size=(n + 1, 6))
            rows[0, 0] += 3.0  # whole-context rows carry their own signature
            batch.append((EmbeddingSequence(f"c{i}", rows), SpanTarget(False)))
        config = HeadConfig(variant="sent", embed_dim=6, deep_dim=4, sent_dim=4,
                            class_weight=1.0, seed=2, learning_rate=1e-2,
                            max_iters=300, tolerance=1e-8)
        model, _ = train_heads(batch, config)
        for seq, _ in batch:
            assert decode_span(*forward(model, seq)) == []

    def test_deep_sep_fits_at_least_as_well_as_base(self):
        batch = planted_batch(1, n_ctx=14, dim=10, noise=1.0, nonlinear=True)
        finals = {}
        for variant in ("base", "deep_sep"):
            config = HeadConfig(variant=variant, embed_dim=10, deep_dim=8,
                                sent_dim=8, class_weight=1.5, seed=3,
                                learning_rate=1e-2, max_iters=120, tolerance=1e-10)
            _, history = train_heads(batch, config)
            finals[variant] = history[-1][1]
        assert finals["deep_sep"] <= finals["base"] + 1e-9

    def test_deterministic_given_seed(self):
        batch = planted_batch(2, n_ctx=6)
        config = HeadConfig(variant="deep_sep", embed_dim=12, deep_dim=4,
                            sent_dim=4, class_weight=2.0, seed=7,
                            learning_rate=1e-2, max_iters=60)
        a, _ = train_heads(batch, config)
        b, _ = train_heads(batch, config)
        for name in a.params:
            np.testing.assert_array_equal(a.params[name], b.params[name])

    def test_nan_embeddings_raise(self):
        rows = np.zeros((3, 4))
        rows[1, 0] = np.nan
        batch = [(EmbeddingSequence("c", rows), SpanTarget(False))]
        config = HeadConfig(variant="base", embed_dim=4, grad_check=False,
                            learning_rate=1e-2, max_iters=10)
        with pytest.raises(TrainingDivergedError):
            train_heads(batch, config)

    def test_target_beyond_tokens_rejected(self):
        batch = [(EmbeddingSequence("c", np.zeros((3, 4))), SpanTarget(True, 1, 5))]
        config = HeadConfig(variant="base", embed_dim=4)
        with pytest.raises(ValueError, match="exceeds"):
            train_heads(batch, config)


class TestDecode:
    def test_consistent_peaks_collapse_to_one_span(self):
        start = np.array([0.0, 0.0, 5.0, 0.0, 0.0, 0.0])
        end = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 5.0])
        assert decode_span(np.array([0.0, 1.0]), start, end) == [(2, 5)]

    def test_all_mass_at_reserved_position_is_empty(self):
        start = np.array([9.0, 0.0, 0.0])
        end = np.array([9.0, 0.0, 0.0])
        assert decode_span(np.array([1.0, 0.0]), start, end) == []

    def test_span_decoded_despite_no_span_sentence_when_boundaries_agree(self):
        start = np.array([0.0, 4.0, 0.0])
        end = np.array([0.0, 0.0, 4.0])
        assert decode_span(np.array([1.0, 0.0]), start, end) == [(1, 2)]

    def test_inconsistent_peaks_give_two_disjoint_spans(self):
        # global start peak after global end peak forces two candidates
        start = np.array([0.0, 1.0, 0.0, 0.0, 5.0, 0.0])
        end = np.array([0.0, 0.0, 5.0, 0.0, 0.0, 1.0])
        spans = decode_span(np.array([0.0, 1.0]), start, end)
        assert spans == [(1, 2), (4, 5)]

    def test_merge_overlapping_candidates(self):
        assert merge_candidate_spans([(2, 4), (3, 6)]) == [(2, 6)]
        assert merge_candidate_spans([(2, 4), (4, 6)]) == [(2, 6)]
        assert merge_candidate_spans([(2, 3), (5, 6)]) == [(2, 3), (5, 6)]
        assert merge_candidate_spans([(2, 4), (2, 4)]) == [(2, 4)]

    def test_decoded_spans_are_ordered(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 9))
            sent = rng.normal(size=2)
            start = rng.normal(size=n + 1)
            end = rng.normal(size=n + 1)
            for i_s, i_e in decode_span(sent, start, end):
                assert 1 <= i_s <= i_e <= n


class TestContextBridge:
    def test_gold_round_trip_contains_gold_chars(self, fig1_article):
        article = fig1_article["article"]
        span = fig1_article["span4"]
        context = Context(article.id, 0, len(article.text.split("\n")[0]),
                          "sentential", (span.start, span.end))
        alignment = tokenize_and_align(context, article)
        target = target_for_context(context, alignment)
        assert target.has_span
        annotations = spans_to_annotations(
            context, alignment, [(target.start_idx, target.end_idx)])
        (annotation,) = annotations
        assert annotation.start <= span.start and span.end <= annotation.end

    def test_no_gold_context(self, fig1_article):
        article = fig1_article["article"]
        context = Context(article.id, 0, 11, "sentential", None)
        alignment = tokenize_and_align(context, article)
        assert target_for_context(context, alignment) == SpanTarget(False)

    def test_truncate_sequence(self):
        rows = np.arange(24, dtype=float).reshape(6, 4)
        seq = EmbeddingSequence("c", rows)
        alignment_spans = tuple((i, i + 1) for i in range(5))
        from propdetect.segmentation import TokenAlignment

        alignment = TokenAlignment("c", alignment_spans)
        short_seq, short_alignment, truncated = truncate_sequence(seq, alignment, 3)
        assert truncated
        assert short_seq.n_tokens == 3
        assert short_alignment.n_tokens == 3
        same_seq, same_alignment, untouched = truncate_sequence(seq, alignment, 10)
        assert not untouched
        assert same_seq.n_tokens == 5
