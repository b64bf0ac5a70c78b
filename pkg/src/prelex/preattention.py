"""Context-free per-word attention: a sigmoid score of each word's embedding.

A word's weight depends only on its (frozen) embedding row, never on the
sentence around it, so the same parameters induce one well-defined weight
per vocabulary entry -- the attention table that lexicon extraction ranks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .corpus import PAD_INDEX, UNK_INDEX, Vocabulary
from .embeddings import EmbeddingMatrix
from .tensor import Tensor, _sigmoid_stable


@dataclass
class PreAttentionParams:
    """Learned scoring vector (length = embedding dim) plus scalar bias."""

    weights: Tensor
    bias: Tensor

    @classmethod
    def neutral(cls, dim: int) -> "PreAttentionParams":
        # zero init scores every word 0.5: an unbiased starting lexicon
        return cls(
            weights=Tensor(np.zeros(dim), requires_grad=True),
            bias=Tensor(np.zeros(1), requires_grad=True),
        )

    @property
    def dim(self) -> int:
        return self.weights.data.shape[0]

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        return [("pre_attention.weights", self.weights), ("pre_attention.bias", self.bias)]


def attention_weight(word_vec: np.ndarray, params: PreAttentionParams) -> float:
    """Sigmoid score of one word vector; always strictly inside (0, 1).

    Uses a single np.dot per row so the same vector scores bit-identically
    whether it arrives alone, inside a sentence, or in the full table.
    """
    vec = np.asarray(word_vec, dtype=np.float64)
    if vec.shape != (params.dim,):
        raise ValueError(f"word vector shape {vec.shape} does not match dim {params.dim}")
    z = np.dot(vec, params.weights.data) + params.bias.data[0]
    return float(_sigmoid_stable(np.array([z]))[0])


def attention_profile(s: Tensor, params: PreAttentionParams) -> Tensor:
    """Differentiable per-row weights for a stacked (n, dim) sentence."""
    if s.data.ndim != 2 or s.data.shape[1] != params.dim:
        raise ValueError(f"sentence shape {s.data.shape} does not match dim {params.dim}")
    return T.sigmoid(T.add_scalar(T.rowdot(s, params.weights), params.bias))


def apply_pre_attention(s: Tensor, params: PreAttentionParams) -> Tensor:
    """Rescale each word vector by its own attention weight.

    Gradients flow to the attention parameters only; the embedding rows in
    ``s`` are expected to be frozen (requires_grad=False).
    """
    return T.scale_rows(s, attention_profile(s, params))


def attention_profile_array(s_data: np.ndarray, params: PreAttentionParams) -> np.ndarray:
    """Inference-only per-row weights, same per-row np.dot as the table."""
    if s_data.ndim != 2 or s_data.shape[1] != params.dim:
        raise ValueError(f"sentence shape {s_data.shape} does not match dim {params.dim}")
    z = np.empty(s_data.shape[0])
    for i in range(s_data.shape[0]):
        z[i] = np.dot(s_data[i], params.weights.data)
    return _sigmoid_stable(z + params.bias.data[0])


@dataclass
class AttentionTable:
    """One attention value per vocabulary index, aligned with the vocabulary.

    ``lexical`` is False at the PAD/UNK sentinels: their values exist (PAD's
    zero embedding always scores sigmoid(bias)) but they are not words.
    """

    values: np.ndarray
    lexical: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.lexical.shape:
            raise ValueError("values and lexical mask must align")


def vocab_attention_table(emb: EmbeddingMatrix, params: PreAttentionParams) -> AttentionTable:
    if emb.dim != params.dim:
        raise ValueError(f"embedding dim {emb.dim} does not match params dim {params.dim}")
    n = emb.matrix.shape[0]
    values = np.empty(n, dtype=np.float64)
    for j in range(n):
        values[j] = attention_weight(emb.matrix[j], params)
    lexical = np.ones(n, dtype=bool)
    lexical[PAD_INDEX] = False
    lexical[UNK_INDEX] = False
    return AttentionTable(values, lexical)


def occurrence_weights(
    token_ids, emb: EmbeddingMatrix, params: PreAttentionParams
) -> list[float]:
    """Attention weight assigned to each token occurrence of a sentence."""
    return [attention_weight(emb.matrix[i], params) for i in token_ids]


def table_for_vocab_check(table: AttentionTable, vocab: Vocabulary) -> None:
    if table.values.shape[0] != len(vocab):
        raise ValueError(
            f"attention table covers {table.values.shape[0]} entries, "
            f"vocabulary has {len(vocab)}"
        )
