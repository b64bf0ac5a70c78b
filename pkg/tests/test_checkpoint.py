import numpy as np
import numpy.testing as npt
import pytest

from helpers import planted_corpus
from prelex.checkpoint import (
    check_fingerprint, evaluate_checkpoint, load_checkpoint, restore_model,
    save_checkpoint,
)
from prelex.training import TrainConfig, train


@pytest.fixture(scope="module")
def trained():
    split, vocab, emb, _ = planted_corpus(
        n_sentences=30, signal_per_class=2, fillers_per_sentence=5,
        filler_pool=15, dim=6, seed=2, max_len=10,
    )
    cfg = TrainConfig.for_variant(
        "pre-attn-text-cnn", seed=4, max_len=10, embedding_dim=6,
        max_epochs=2, batch_size=8,
    )
    ckpt = train(cfg, split, emb, vocab_fingerprint=vocab.fingerprint(),
                 window_sizes=(1, 2), num_filters=2)
    return ckpt, split, vocab, emb


class TestRoundTrip:
    def test_save_load_bitwise(self, trained, tmp_path):
        ckpt, *_ = trained
        save_checkpoint(ckpt, tmp_path / "ckpt")
        loaded = load_checkpoint(tmp_path / "ckpt")
        assert list(loaded.tensors) == list(ckpt.tensors)
        for name in ckpt.tensors:
            npt.assert_array_equal(loaded.tensors[name], ckpt.tensors[name])
            npt.assert_array_equal(loaded.adam.m[name], ckpt.adam.m[name])
            npt.assert_array_equal(loaded.adam.v[name], ckpt.adam.v[name])
        assert loaded.config == ckpt.config
        assert loaded.adam.step == ckpt.adam.step
        assert loaded.history == ckpt.history
        assert loaded.vocab_fingerprint == ckpt.vocab_fingerprint

    def test_resave_byte_identical(self, trained, tmp_path):
        ckpt, *_ = trained
        save_checkpoint(ckpt, tmp_path / "a")
        save_checkpoint(load_checkpoint(tmp_path / "a"), tmp_path / "b")
        for fname in ("meta.json", "weights.bin"):
            assert (tmp_path / "a" / fname).read_bytes() == \
                   (tmp_path / "b" / fname).read_bytes()

    def test_missing_files(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "nothing")

    def test_truncated_weights_detected(self, trained, tmp_path):
        ckpt, *_ = trained
        save_checkpoint(ckpt, tmp_path / "c")
        blob = (tmp_path / "c" / "weights.bin").read_bytes()
        (tmp_path / "c" / "weights.bin").write_bytes(blob[:-8])
        with pytest.raises(ValueError, match="weights.bin"):
            load_checkpoint(tmp_path / "c")


class TestRestore:
    def test_restored_model_reproduces_parameters(self, trained):
        ckpt, split, vocab, emb = trained
        model = restore_model(ckpt, emb)
        for name, p in model.named_parameters():
            npt.assert_array_equal(p.data, ckpt.tensors[name])

    def test_pre_attention_flag(self, trained):
        ckpt, *_ = trained
        assert ckpt.has_pre_attention()

    def test_fingerprint_checked(self, trained):
        ckpt, split, vocab, emb = trained
        check_fingerprint(ckpt, vocab)  # matching passes
        other = planted_corpus(n_sentences=6, signal_per_class=1,
                               fillers_per_sentence=3, filler_pool=5,
                               dim=6, seed=9, max_len=8)[1]
        with pytest.raises(RuntimeError, match="fingerprint"):
            check_fingerprint(ckpt, other)

    def test_evaluate_checkpoint_end_to_end(self, trained):
        ckpt, split, vocab, emb = trained
        report = evaluate_checkpoint(ckpt, emb, vocab, split.dev)
        assert 0.0 <= report.accuracy <= 1.0
        best = next(r for r in ckpt.history if r.epoch == ckpt.best_epoch)
        assert report.accuracy == best.dev_accuracy
