import numpy as np
import numpy.testing as npt
import pytest

from prelex.corpus import DataError, PAD_INDEX, PAD_TOKEN, UNK_TOKEN, Vocabulary
from prelex.embeddings import EmbeddingMatrix, load_embeddings, random_embeddings


def vocab_of(*words):
    return Vocabulary([PAD_TOKEN, UNK_TOKEN, *words])


class TestLoadEmbeddings:
    def test_verbatim_rows(self, w2v_file):
        vocab = vocab_of("foo", "bar")
        emb = load_embeddings(w2v_file, vocab, 3, np.random.default_rng(0))
        npt.assert_array_equal(emb.matrix[vocab.index_of("foo")], [1, 2, 3])
        npt.assert_array_equal(emb.matrix[vocab.index_of("bar")], [4, 5, 6])

    def test_absent_token_random_in_range(self, w2v_file):
        vocab = vocab_of("foo", "unknownword")
        emb = load_embeddings(w2v_file, vocab, 3, np.random.default_rng(0))
        row = emb.matrix[vocab.index_of("unknownword")]
        assert (np.abs(row) <= 0.25).all()
        assert not (row == 0).all()

    def test_pad_row_zero(self, w2v_file):
        emb = load_embeddings(w2v_file, vocab_of("foo"), 3, np.random.default_rng(0))
        npt.assert_array_equal(emb.matrix[PAD_INDEX], [0, 0, 0])

    def test_coverage_fraction(self, w2v_file):
        vocab = vocab_of("foo", "bar", "missing", "alsomissing")
        emb = load_embeddings(w2v_file, vocab, 3, np.random.default_rng(0))
        assert emb.coverage == pytest.approx(2 / 4)
        assert np.isfinite(emb.matrix).all()

    def test_deterministic_given_rng_seed(self, w2v_file):
        vocab = vocab_of("foo", "missing")
        a = load_embeddings(w2v_file, vocab, 3, np.random.default_rng(42))
        b = load_embeddings(w2v_file, vocab, 3, np.random.default_rng(42))
        npt.assert_array_equal(a.matrix, b.matrix)

    def test_malformed_header(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("not a header line at all\n", encoding="utf-8")
        with pytest.raises(DataError, match=":1:"):
            load_embeddings(p, vocab_of("a"), 3, np.random.default_rng(0))

    def test_wrong_arity_names_line(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("2 3\nfoo 1 2 3\nbar 4 5\n", encoding="utf-8")
        with pytest.raises(DataError, match=":3:"):
            load_embeddings(p, vocab_of("foo", "bar"), 3, np.random.default_rng(0))

    def test_dim_mismatch(self, w2v_file):
        with pytest.raises(ValueError, match="dim mismatch"):
            load_embeddings(w2v_file, vocab_of("foo"), 5, np.random.default_rng(0))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="missing"):
            load_embeddings(tmp_path / "absent.txt", vocab_of("a"), 3,
                            np.random.default_rng(0))

    def test_non_numeric_entry(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("1 3\nfoo 1 x 3\n", encoding="utf-8")
        with pytest.raises(DataError, match=":2:"):
            load_embeddings(p, vocab_of("foo"), 3, np.random.default_rng(0))


class TestRandomEmbeddings:
    def test_range_and_pad(self):
        vocab = vocab_of("a", "b", "c")
        emb = random_embeddings(vocab, 8, np.random.default_rng(1))
        assert emb.matrix.shape == (5, 8)
        assert (np.abs(emb.matrix) <= 0.25).all()
        npt.assert_array_equal(emb.matrix[PAD_INDEX], np.zeros(8))
        assert emb.coverage == 0.0

    def test_rows_helper(self):
        emb = random_embeddings(vocab_of("a"), 4, np.random.default_rng(2))
        got = emb.rows((2, 2, 0))
        assert got.shape == (3, 4)
        npt.assert_array_equal(got[0], got[1])

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            EmbeddingMatrix(np.zeros((3, 4)), 5, 0.0)
