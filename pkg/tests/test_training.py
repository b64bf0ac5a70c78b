import math

import numpy as np
import numpy.testing as npt
import pytest

from helpers import planted_corpus
from prelex import tensor as T
from prelex.classifiers import TextCnnParams, textcnn_forward
from prelex.embeddings import random_embeddings
from prelex.tensor import Tensor
from prelex.training import (
    AdamState, EvalReport, Model, TrainConfig, batch_loss, cross_entropy,
    dropout, evaluate, l2_penalty, optimizer_step, train,
)


class TestCrossEntropy:
    def test_confident_correct_prediction(self):
        loss = cross_entropy(Tensor(np.array([50.0, 0.0])), 0)
        assert 0.0 <= loss.item() <= 1e-20

    def test_uniform_two_classes(self):
        loss = cross_entropy(Tensor(np.array([0.0, 0.0])), 1)
        assert loss.item() == pytest.approx(math.log(2.0), rel=1e-12)

    def test_quarter_three_quarter(self):
        logits = Tensor(np.log(np.array([0.25, 0.75])))
        assert cross_entropy(logits, 1).item() == pytest.approx(-math.log(0.75), rel=1e-12)

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            cross_entropy(Tensor(np.zeros(2)), 2)

    def test_log_space_no_overflow(self):
        loss = cross_entropy(Tensor(np.array([1e4, -1e4])), 1)
        assert np.isfinite(loss.data)
        assert loss.item() == pytest.approx(2e4, rel=1e-12)


class TestL2Penalty:
    def test_zero_coefficient(self):
        assert l2_penalty(Tensor(np.array([3.0, 4.0])), 0.0).item() == 0.0

    def test_unit_coefficient(self):
        assert l2_penalty(Tensor(np.array([3.0, 4.0])), 1.0).item() == 12.5

    def test_scaled_coefficient(self):
        assert l2_penalty(Tensor(np.array([3.0, 4.0])), 0.1).item() == pytest.approx(1.25)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            l2_penalty(Tensor(np.zeros(2)), -1.0)


class TestDropout:
    def test_zero_rate_identity(self):
        x = Tensor(np.ones(5))
        assert dropout(x, 0.0, True, np.random.default_rng(0)) is x

    def test_eval_mode_identity(self):
        x = Tensor(np.ones(5))
        assert dropout(x, 0.4, False, None) is x

    def test_expectation_preserved(self):
        rng = np.random.default_rng(1)
        out = dropout(Tensor(np.ones(100000)), 0.5, True, rng)
        assert out.data.mean() == pytest.approx(1.0, abs=0.02)
        kept = out.data[out.data != 0]
        npt.assert_allclose(kept, 2.0)

    def test_invalid_rate(self):
        with pytest.raises(ValueError):
            dropout(Tensor(np.ones(3)), 1.0, True, np.random.default_rng(0))

    def test_needs_rng_in_training(self):
        with pytest.raises(ValueError):
            dropout(Tensor(np.ones(3)), 0.5, True, None)


class TestAdam:
    def _one_param(self, value):
        p = Tensor(np.array(value), requires_grad=True)
        params = [("p", p)]
        return p, params, AdamState.for_params(params)

    def test_zero_gradient_fresh_state(self):
        p, params, state = self._one_param([1.0, -2.0])
        p.zero_grad()
        before = p.data.copy()
        optimizer_step(params, state, lr=0.1)
        npt.assert_array_equal(p.data, before)
        npt.assert_array_equal(state.m["p"], np.zeros(2))
        assert state.step == 1

    def test_first_step_moves_by_lr_sign(self):
        p, params, state = self._one_param([0.0, 0.0])
        p.grad = np.array([0.37, -1200.0])
        optimizer_step(params, state, lr=0.01)
        npt.assert_allclose(p.data, [-0.01, 0.01], atol=1e-6 * 0.01)

    def test_two_runs_bitwise_identical(self):
        results = []
        for _ in range(2):
            rng = np.random.default_rng(3)
            p, params, state = self._one_param(rng.normal(size=4))
            for _ in range(5):
                p.grad = rng.normal(size=4)
                optimizer_step(params, state, lr=0.05)
            results.append(p.data.copy())
        npt.assert_array_equal(results[0], results[1])

    def test_shape_mismatch(self):
        p, params, state = self._one_param([1.0, 2.0])
        p.grad = np.zeros(3)
        with pytest.raises(ValueError):
            optimizer_step(params, state, lr=0.1)


class TestTrainConfig:
    def test_paper_defaults_per_head(self):
        cnn = TrainConfig.for_variant("pre-attn-text-cnn")
        assert (cnn.learning_rate, cnn.dropout_rate, cnn.l2_coeff) == (0.001, 0.4, 1.0)
        lstm = TrainConfig.for_variant("att-blstm")
        assert (lstm.learning_rate, lstm.dropout_rate, lstm.l2_coeff) == (0.01, 0.5, 0.1)
        assert cnn.batch_size == 64

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig.for_variant("svm")
        with pytest.raises(ValueError):
            TrainConfig.for_variant("text-cnn", dropout_rate=1.0)
        with pytest.raises(ValueError):
            TrainConfig.for_variant("text-cnn", batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig.for_variant("text-cnn", l2_mode="clip")

    def test_dict_roundtrip(self):
        cfg = TrainConfig.for_variant("pre-attn-att-blstm", seed=9, max_len=32)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg


class TestModelWiring:
    def _embedding(self, dim=6, words=4):
        from prelex.corpus import PAD_TOKEN, UNK_TOKEN, Vocabulary
        vocab = Vocabulary([PAD_TOKEN, UNK_TOKEN] + [f"w{i}" for i in range(words)])
        return random_embeddings(vocab, dim, np.random.default_rng(0))

    def test_pre_attn_variants_expose_attention_params(self):
        emb = self._embedding()
        rng = np.random.default_rng(1)
        m = Model("pre-attn-text-cnn", emb, 2, rng, window_sizes=(1, 2), num_filters=2)
        names = [n for n, _ in m.named_parameters()]
        assert names[0] == "pre_attention.weights"
        assert names[1] == "pre_attention.bias"

    def test_plain_variants_do_not(self):
        emb = self._embedding()
        m = Model("text-cnn", emb, 2, np.random.default_rng(1),
                  window_sizes=(1, 2), num_filters=2)
        assert all(not n.startswith("pre_attention") for n, _ in m.named_parameters())

    def test_array_forward_matches_tape_forward(self):
        emb = self._embedding(dim=5, words=8)
        rng = np.random.default_rng(3)
        for variant in ("pre-attn-text-cnn", "text-cnn",
                        "pre-attn-att-blstm", "att-blstm"):
            m = Model(variant, emb, 2, rng, window_sizes=(1, 2), num_filters=3,
                      hidden=4)
            for _, p in m.named_parameters():
                p.data = rng.normal(scale=0.3, size=p.data.shape)
            for ids in ((2, 3, 4), (5,), (2, 2, 6, 7, 3)):
                npt.assert_allclose(m.logits_array(ids), m.logits(ids).data,
                                    rtol=1e-12, atol=1e-14)

    def test_unit_weights_match_plain_forward_bitwise(self):
        # scaling by exactly 1.0 is the identity, so the attention pipeline
        # with unit weights must reproduce the plain head bit for bit
        rng = np.random.default_rng(2)
        params = TextCnnParams.init(4, 2, rng, window_sizes=(1, 2), num_filters=3)
        s_data = rng.normal(size=(5, 4))
        plain = textcnn_forward(Tensor(s_data), params).data
        scaled = textcnn_forward(
            T.scale_rows(Tensor(s_data), Tensor(np.ones(5))), params
        ).data
        npt.assert_array_equal(plain, scaled)


def tiny_corpus(seed=0):
    return planted_corpus(
        n_sentences=40, signal_per_class=2, fillers_per_sentence=6,
        filler_pool=20, dim=8, seed=seed, max_len=12,
    )


def tiny_config(variant, **overrides):
    base = dict(seed=5, max_len=12, embedding_dim=8, max_epochs=4, batch_size=8)
    base.update(overrides)
    return TrainConfig.for_variant(variant, **base)


def tiny_train(variant, **overrides):
    split, vocab, emb, _ = tiny_corpus()
    cfg = tiny_config(variant, **overrides)
    ckpt = train(cfg, split, emb, vocab_fingerprint=vocab.fingerprint(),
                 window_sizes=(1, 2), num_filters=2, hidden=3)
    return ckpt, split, vocab, emb


class TestTrainLoop:
    def test_determinism_same_seed(self):
        a, *_ = tiny_train("pre-attn-text-cnn")
        b, *_ = tiny_train("pre-attn-text-cnn")
        assert [r.train_loss for r in a.history] == [r.train_loss for r in b.history]
        assert [r.dev_accuracy for r in a.history] == [r.dev_accuracy for r in b.history]
        for name in a.tensors:
            npt.assert_array_equal(a.tensors[name], b.tensors[name])

    def test_different_seed_changes_curve(self):
        a, *_ = tiny_train("pre-attn-text-cnn")
        b, *_ = tiny_train("pre-attn-text-cnn", seed=6)
        assert [r.train_loss for r in a.history] != [r.train_loss for r in b.history]

    def test_best_epoch_dominates_history(self):
        ckpt, *_ = tiny_train("text-cnn")
        best = max(r.dev_accuracy for r in ckpt.history)
        recorded = next(r for r in ckpt.history if r.epoch == ckpt.best_epoch)
        assert recorded.dev_accuracy == best

    def test_checkpoint_parameter_names_follow_variant(self):
        with_attn, *_ = tiny_train("pre-attn-att-blstm", max_epochs=1)
        plain, *_ = tiny_train("att-blstm", max_epochs=1)
        assert any(n.startswith("pre_attention.") for n in with_attn.tensors)
        assert not any(n.startswith("pre_attention.") for n in plain.tensors)

    def test_embeddings_frozen_bitwise(self):
        split, vocab, emb, _ = tiny_corpus()
        before = emb.matrix.copy()
        train(tiny_config("pre-attn-text-cnn", max_epochs=2), split, emb,
              window_sizes=(1, 2), num_filters=2)
        npt.assert_array_equal(emb.matrix, before)

    def test_empty_train_split_rejected(self):
        split, vocab, emb, _ = tiny_corpus()
        split.train = []
        with pytest.raises(ValueError):
            train(tiny_config("text-cnn"), split, emb)

    def test_early_stopping_respects_patience(self):
        ckpt, *_ = tiny_train("text-cnn", max_epochs=30, patience=2)
        stopped_at = ckpt.history[-1].epoch
        assert stopped_at <= 30
        if stopped_at < 30:
            assert stopped_at - ckpt.best_epoch >= 2

    def test_batch_loss_recomputes_as_mean_plus_penalty(self):
        split, vocab, emb, _ = tiny_corpus()
        cfg = tiny_config("pre-attn-text-cnn", dropout_rate=0.0)
        model = Model(cfg.variant, emb, 2, np.random.default_rng(7),
                      window_sizes=(1, 2), num_filters=2)
        batch = split.train[:5]
        got = batch_loss(model, batch, cfg, None).item()
        ce = [cross_entropy(model.logits(ex.token_ids), ex.label).item() for ex in batch]
        want = sum(ce) / len(ce) + 0.5 * cfg.l2_coeff * float(
            (model.dense_weights().data ** 2).sum()
        )
        assert got == pytest.approx(want, rel=1e-12)

    def test_maxnorm_mode_clamps_dense_columns(self):
        ckpt, *_ = tiny_train("text-cnn", l2_mode="maxnorm", l2_coeff=0.05,
                              max_epochs=2)
        dense = ckpt.tensors["cnn.dense.weights"]
        norms = np.sqrt((dense ** 2).sum(axis=0))
        assert (norms <= 0.05 + 1e-12).all()

    def test_separable_corpus_reaches_high_train_accuracy(self):
        split, vocab, emb, _ = tiny_corpus()
        cfg = tiny_config("pre-attn-text-cnn", max_epochs=30, patience=30,
                          l2_coeff=0.0, dropout_rate=0.0, learning_rate=0.01)
        ckpt = train(cfg, split, emb, window_sizes=(1, 2), num_filters=4)
        assert max(r.dev_accuracy for r in ckpt.history) >= 0.95


class TestEvaluate:
    def _trained(self):
        ckpt, split, vocab, emb = tiny_train("text-cnn", max_epochs=2)
        from prelex.checkpoint import restore_model
        return restore_model(ckpt, emb), split

    def test_accuracy_is_exact_ratio(self):
        model, split = self._trained()
        report = evaluate(model, split.train)
        assert report.accuracy == report.correct / report.total
        assert report.total == len(split.train)
        assert sum(t for _, t in report.per_class.values()) == report.total
        assert sum(c for c, _ in report.per_class.values()) == report.correct

    def test_all_correct_gives_one(self):
        model, split = self._trained()
        predicted = [
            type(split.train[0])(ex.token_ids, model.predict(ex.token_ids))
            for ex in split.train[:6]
        ]
        assert evaluate(model, predicted).accuracy == 1.0

    def test_empty_rejected(self):
        model, _ = self._trained()
        with pytest.raises(ValueError):
            evaluate(model, [])
