"""Tokenization, vocabulary construction, and dataset loading/splitting."""

from __future__ import annotations

import hashlib
import string
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1

_PUNCT = frozenset(string.punctuation)

DATASET_NAMES = ("imdb", "subj", "mr")

# canonical two-file layouts; class 0 first (neg / objective)
TWO_FILE_DEFAULTS = {
    "mr": {0: "rt-polarity.neg", 1: "rt-polarity.pos"},
    "subj": {0: "plot.tok.gt9.5000", 1: "quote.tok.gt9.5000"},
}

CLASS_NAMES = {
    "imdb": ("neg", "pos"),
    "mr": ("neg", "pos"),
    "subj": ("objective", "subjective"),
}

EXPECTED_SIZES = {
    "imdb": (20000, 25000, 5000),
    "subj": (7000, 2000, 1000),
    "mr": (7464, 2132, 1066),
}

DEFAULT_MAX_LEN = {"imdb": 400, "subj": 60, "mr": 60}


class DataError(Exception):
    """Malformed or missing input data."""


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, peel leading/trailing punctuation runs.

    Each maximal run of ASCII punctuation at a chunk boundary becomes its
    own token; interior punctuation (apostrophes, hyphens) stays attached.
    """
    out: list[str] = []
    for chunk in text.lower().split():
        start = 0
        while start < len(chunk) and chunk[start] in _PUNCT:
            start += 1
        if start == len(chunk):
            out.append(chunk)
            continue
        end = len(chunk)
        while end > start and chunk[end - 1] in _PUNCT:
            end -= 1
        if start > 0:
            out.append(chunk[:start])
        out.append(chunk[start:end])
        if end < len(chunk):
            out.append(chunk[end:])
    return out


class Vocabulary:
    """Token <-> index mapping with PAD at 0 and UNK at 1.

    Tokens after the sentinels are ordered by descending corpus frequency,
    ties broken lexicographically, so construction is deterministic.
    """

    def __init__(self, tokens: Sequence[str]):
        if len(tokens) < 2 or tokens[0] != PAD_TOKEN or tokens[1] != UNK_TOKEN:
            raise ValueError("vocabulary must start with the PAD and UNK sentinels")
        self.tokens: list[str] = list(tokens)
        self.index: dict[str, int] = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def index_of(self, token: str) -> int:
        return self.index.get(token, UNK_INDEX)

    def fingerprint(self) -> str:
        h = hashlib.sha256("\x00".join(self.tokens).encode("utf-8"))
        return h.hexdigest()


def build_vocab(corpus: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for tokens in corpus:
        counts.update(tokens)
    counts.pop(PAD_TOKEN, None)
    counts.pop(UNK_TOKEN, None)
    kept = [t for t, c in counts.items() if c >= min_count]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary([PAD_TOKEN, UNK_TOKEN] + kept)


def encode(tokens: Sequence[str], vocab: Vocabulary, max_len: int) -> tuple[int, ...]:
    """Map tokens to ids, truncating to max_len; empty input becomes [UNK]."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if not tokens:
        return (UNK_INDEX,)
    return tuple(vocab.index_of(t) for t in tokens[:max_len])


@dataclass(frozen=True)
class Example:
    token_ids: tuple[int, ...]
    label: int


@dataclass
class DatasetSplit:
    train: list[Example]
    test: list[Example]
    dev: list[Example]
    class_count: int
    class_names: tuple[str, ...] = ()
    name: str = ""

    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.test), len(self.dev))


@dataclass
class _RawSplit:
    train: list[tuple[list[str], int]]
    test: list[tuple[list[str], int]]
    dev: list[tuple[list[str], int]]


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise DataError(f"missing dataset file: {path}")
    with open(path, encoding="utf-8", errors="replace") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def _read_imdb(root: Path) -> tuple[list[tuple[list[str], int]], list[tuple[list[str], int]]]:
    def read_part(part: str) -> list[tuple[list[str], int]]:
        items = []
        for label, cls in ((0, "neg"), (1, "pos")):
            d = root / part / cls
            if not d.is_dir():
                raise DataError(f"missing dataset directory: {d}")
            for f in sorted(d.glob("*.txt")):
                with open(f, encoding="utf-8", errors="replace") as fh:
                    items.append((tokenize(fh.read()), label))
        return items

    return read_part("train"), read_part("test")


def _read_two_file(
    name: str, root: Path, class_files: dict[int, str] | None
) -> list[tuple[list[str], int]]:
    files = class_files or TWO_FILE_DEFAULTS[name]
    items = []
    for label in (0, 1):
        path = root / files[label]
        for line in _read_lines(path):
            items.append((tokenize(line), label))
    return items


def _split_raw(name: str, root: Path, seed: int,
               class_files: dict[int, str] | None) -> _RawSplit:
    rng = np.random.default_rng(seed)
    if name == "imdb":
        train_all, test = _read_imdb(root)
        order = rng.permutation(len(train_all))
        dev_n = int(len(train_all) * 0.2)
        dev = [train_all[i] for i in order[:dev_n]]
        train = [train_all[i] for i in order[dev_n:]]
        return _RawSplit(train, test, dev)
    everything = _read_two_file(name, root, class_files)
    order = rng.permutation(len(everything))
    n = len(everything)
    test_n = int(n * 0.2)
    dev_n = int(n * 0.1)
    train_n = n - test_n - dev_n  # floor fractions, remainder to train
    train = [everything[i] for i in order[:train_n]]
    test = [everything[i] for i in order[train_n:train_n + test_n]]
    dev = [everything[i] for i in order[train_n + test_n:]]
    return _RawSplit(train, test, dev)


def load_dataset(
    name: str,
    root: str | Path,
    seed: int,
    max_len: int | None = None,
    min_count: int = 1,
    class_files: dict[int, str] | None = None,
) -> tuple[DatasetSplit, Vocabulary]:
    """Load, shuffle, split, and encode one of the benchmark datasets.

    The vocabulary is built from the training split only. Split sizes that
    do not match the published figures produce a warning, not a failure.
    """
    if name not in DATASET_NAMES:
        raise ValueError(f"unknown dataset {name!r}; expected one of {DATASET_NAMES}")
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"missing dataset directory: {root}")
    if max_len is None:
        max_len = DEFAULT_MAX_LEN[name]
    raw = _split_raw(name, root, seed, class_files)
    vocab = build_vocab((tokens for tokens, _ in raw.train), min_count=min_count)
    split = DatasetSplit(
        train=[Example(encode(tk, vocab, max_len), y) for tk, y in raw.train],
        test=[Example(encode(tk, vocab, max_len), y) for tk, y in raw.test],
        dev=[Example(encode(tk, vocab, max_len), y) for tk, y in raw.dev],
        class_count=2,
        class_names=CLASS_NAMES[name],
        name=name,
    )
    expected = EXPECTED_SIZES[name]
    if split.sizes() != expected:
        warnings.warn(
            f"{name} split sizes {split.sizes()} differ from the published {expected}",
            stacklevel=2,
        )
    return split, vocab
