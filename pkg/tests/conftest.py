import numpy as np
import pytest


@pytest.fixture
def imdb_tree(tmp_path):
    """Small directory tree following the IMDB layout (10 train / 6 test)."""
    texts = {
        "pos": ["A great movie!", "Loved it, truly wonderful.", "Superb acting.",
                "Brilliant and moving.", "What a delight."],
        "neg": ["Terrible film.", "A boring mess...", "Awful, do not watch.",
                "Dull and lifeless.", "Painfully bad."],
    }
    for part, n in (("train", 5), ("test", 3)):
        for cls in ("pos", "neg"):
            d = tmp_path / "imdb" / part / cls
            d.mkdir(parents=True)
            for i in range(n):
                (d / f"{i}_{7 if cls == 'pos' else 2}.txt").write_text(
                    texts[cls][i % len(texts[cls])] + f" take {i}.", encoding="utf-8"
                )
    return tmp_path / "imdb"


@pytest.fixture
def mr_tree(tmp_path):
    """Two-file MR-style layout with 40 sentences (20 per class)."""
    root = tmp_path / "mr"
    root.mkdir()
    rng = np.random.default_rng(7)
    pos_words = ["good", "great", "fine", "lovely", "charm"]
    neg_words = ["bad", "dull", "weak", "tired", "flat"]
    fill = ["the", "film", "is", "a", "story", "about", "life", "and", "people"]

    def sentence(words):
        picks = [str(words[rng.integers(len(words))])] + [
            str(fill[rng.integers(len(fill))]) for _ in range(6)
        ]
        return " ".join(picks) + " ."

    (root / "rt-polarity.pos").write_text(
        "\n".join(sentence(pos_words) for _ in range(20)), encoding="utf-8"
    )
    (root / "rt-polarity.neg").write_text(
        "\n".join(sentence(neg_words) for _ in range(20)), encoding="utf-8"
    )
    return root


@pytest.fixture
def w2v_file(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text(
        "3 3\n"
        "foo 1 2 3\n"
        "bar 4 5 6\n"
        "baz -0.5 0.25 0.125\n",
        encoding="utf-8",
    )
    return path
