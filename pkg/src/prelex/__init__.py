"""Pre-attention text classification: per-word sigmoid weights over frozen
embeddings, swappable CNN/BiLSTM heads, and lexicon extraction/stability
analytics."""

__version__ = "0.1.0"
