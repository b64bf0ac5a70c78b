"""Shared synthetic-corpus builders for the test suite."""

import numpy as np

from prelex.corpus import DatasetSplit, Example, build_vocab, encode
from prelex.embeddings import random_embeddings


def planted_corpus(
    n_sentences=200,
    signal_per_class=5,
    fillers_per_sentence=50,
    filler_pool=440,
    dim=16,
    seed=0,
    max_len=60,
):
    """Two balanced classes, each defined by its own signal tokens.

    Every sentence contains all of its class's signal tokens mixed (in
    shuffled order) with filler tokens drawn from a pool shared by both
    classes, so class membership is exactly "which signal tokens appear".

    Returns (split, vocab, embeddings, signal_tokens). The dev and test
    members reuse the training examples: these corpora exist to measure
    training-set fit and lexicon recovery, not generalization.
    """
    rng = np.random.default_rng(seed)
    signals = [
        [f"sig{c}tok{i}" for i in range(signal_per_class)] for c in (0, 1)
    ]
    fillers = [f"fill{i:04d}" for i in range(filler_pool)]

    sentences = []
    labels = []
    for s in range(n_sentences):
        label = s % 2
        tokens = list(signals[label])
        tokens += [fillers[int(i)] for i in rng.integers(0, filler_pool, fillers_per_sentence)]
        rng.shuffle(tokens)
        sentences.append(tokens)
        labels.append(label)

    vocab = build_vocab(sentences)
    examples = [
        Example(encode(toks, vocab, max_len), y) for toks, y in zip(sentences, labels)
    ]
    split = DatasetSplit(
        train=examples, test=examples, dev=examples,
        class_count=2, class_names=("a", "b"), name="planted",
    )
    emb = random_embeddings(vocab, dim, np.random.default_rng(seed + 1))
    return split, vocab, emb, signals[0] + signals[1]
