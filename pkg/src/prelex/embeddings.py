"""Frozen word-embedding matrices: word2vec text-format loading and random init.

Only the text format ("count dim" header, then one "token x1 ... x_dim" line
per word) is supported. Binary word2vec files must be converted externally,
e.g. with gensim's KeyedVectors.save_word2vec_format(..., binary=False).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import DataError, PAD_INDEX, Vocabulary

RANDOM_INIT_BOUND = 0.25  # per-coordinate uniform range for unseen words


def embedding_rng(seed: int) -> np.random.Generator:
    """The stream used for embedding init under a given run seed.

    Keyed separately from the training streams so checkpoint evaluation can
    rebuild the identical matrix from (seed, vocab, dim) alone.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, 1]))


@dataclass
class EmbeddingMatrix:
    """|V| x dim float64 matrix, PAD row zero, never updated by training."""

    matrix: np.ndarray
    dim: int
    coverage: float  # fraction of non-sentinel vocab tokens found in the file

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[1] != self.dim:
            raise ValueError("embedding matrix shape does not match dim")

    def rows(self, token_ids) -> np.ndarray:
        return self.matrix[list(token_ids)]


def random_embeddings(vocab: Vocabulary, dim: int, rng: np.random.Generator) -> EmbeddingMatrix:
    """Uniform [-0.25, 0.25] rows for every token; PAD row forced to zero."""
    if dim < 1:
        raise ValueError("embedding dim must be >= 1")
    m = rng.uniform(-RANDOM_INIT_BOUND, RANDOM_INIT_BOUND, size=(len(vocab), dim))
    m[PAD_INDEX] = 0.0
    return EmbeddingMatrix(m, dim, coverage=0.0)


def load_embeddings(
    path: str | Path,
    vocab: Vocabulary,
    dim: int,
    rng: np.random.Generator,
) -> EmbeddingMatrix:
    """Read word2vec text vectors for the vocabulary.

    Rows present in the file are copied verbatim; absent tokens get uniform
    [-0.25, 0.25] rows drawn from ``rng`` in ascending vocabulary order, so
    the result is deterministic for a given (file, vocab, rng state).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing embeddings file: {path}")
    found: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8", errors="replace") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise DataError(f"{path}:1: malformed word2vec header {header!r}")
        try:
            _count, file_dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataError(f"{path}:1: malformed word2vec header {header!r}") from None
        if file_dim != dim:
            raise ValueError(
                f"embedding dim mismatch: file has {file_dim}, requested {dim}"
            )
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split(" ")
            # trailing space before newline is common in these files
            if fields and fields[-1] == "":
                fields.pop()
            if len(fields) != dim + 1:
                raise DataError(
                    f"{path}:{lineno}: expected token plus {dim} values, "
                    f"got {len(fields)} fields"
                )
            token = fields[0]
            if token in vocab:
                try:
                    found[token] = np.array([float(v) for v in fields[1:]], dtype=np.float64)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-numeric vector entry") from None

    m = np.empty((len(vocab), dim), dtype=np.float64)
    hits = 0
    for i, token in enumerate(vocab.tokens):
        vec = found.get(token)
        if vec is None:
            m[i] = rng.uniform(-RANDOM_INIT_BOUND, RANDOM_INIT_BOUND, size=dim)
        else:
            m[i] = vec
            hits += 1
    m[PAD_INDEX] = 0.0
    coverage = hits / max(1, len(vocab) - 2)
    return EmbeddingMatrix(m, dim, coverage=coverage)
