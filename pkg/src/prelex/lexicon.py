"""Attention-ranked lexicons and their precision/stability analytics.

A ranked lexicon is the vocabulary ordered by attention value (sentinels
excluded). Slicing off the top fraction gives an induced lexicon; the
metrics compare such slices against a handcrafted word list (precision)
or against the slice from a differently-headed model (similarity, and
similarity normalized by the random-ranking expectation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import DataError, Vocabulary, tokenize
from .preattention import AttentionTable


@dataclass
class RankedLexicon:
    """Tokens in non-increasing attention order; ties by vocabulary index."""

    tokens: list[str]
    values: list[float]
    source: str = ""

    def __post_init__(self):
        if len(self.tokens) != len(self.values):
            raise ValueError("tokens and values must align")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("ranked lexicon contains duplicate tokens")
        if any(a < b for a, b in zip(self.values, self.values[1:])):
            raise ValueError("ranked lexicon values must be non-increasing")

    @property
    def k(self) -> int:
        return len(self.tokens)


@dataclass
class CurvePoint:
    p: float
    value: float


@dataclass
class HandLexicon:
    """A reference word set, normalized through the corpus tokenizer."""

    tokens: frozenset[str]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("hand lexicon is empty")


def _check_fraction(q: float, name: str = "p") -> None:
    if not 0.0 < q < 1.0:
        raise ValueError(f"{name}={q} must lie strictly inside (0, 1)")


def slice_size(k: int, q: float) -> int:
    """Number of tokens in the top-q slice: floor(k*q), but at least 1."""
    _check_fraction(q, "fraction")
    return max(1, math.floor(k * q))


def rank_lexicon(table: AttentionTable, vocab: Vocabulary, source: str = "") -> RankedLexicon:
    if table.values.shape[0] != len(vocab):
        raise ValueError(
            f"attention table covers {table.values.shape[0]} entries, "
            f"vocabulary has {len(vocab)}"
        )
    order = sorted(
        (j for j in range(len(vocab)) if table.lexical[j]),
        key=lambda j: (-table.values[j], j),
    )
    return RankedLexicon(
        tokens=[vocab.tokens[j] for j in order],
        values=[float(table.values[j]) for j in order],
        source=source,
    )


def top_fraction(lex: RankedLexicon, q: float) -> set[str]:
    """The top-q slice of the ranking as a token set."""
    return set(lex.tokens[:slice_size(lex.k, q)])


def precision_curve(
    lex: RankedLexicon, hand: HandLexicon, p_grid: list[float]
) -> list[CurvePoint]:
    """Fraction of each top-p slice that belongs to the hand lexicon."""
    points = []
    for p in p_grid:
        top = top_fraction(lex, p)
        points.append(CurvePoint(p, len(top & hand.tokens) / len(top)))
    return points


def similarity(lex_a: RankedLexicon, lex_b: RankedLexicon, p: float) -> float:
    """Overlap fraction of the two top-(1-p) slices."""
    _check_fraction(p)
    if lex_a.k != lex_b.k or set(lex_a.tokens) != set(lex_b.tokens):
        raise ValueError("rankings cover different vocabularies")
    m = slice_size(lex_a.k, 1.0 - p)
    return len(top_fraction(lex_a, 1.0 - p) & top_fraction(lex_b, 1.0 - p)) / m


def relative_similarity(y: float, p: float) -> float:
    """Similarity normalized by the random-ranking expectation (1-p)."""
    _check_fraction(p)
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"similarity y={y} outside [0, 1]")
    return y / (1.0 - p)


def similarity_curve(
    lex_a: RankedLexicon, lex_b: RankedLexicon, p_grid: list[float],
    relative: bool = False,
) -> list[CurvePoint]:
    points = []
    for p in p_grid:
        y = similarity(lex_a, lex_b, p)
        points.append(CurvePoint(p, relative_similarity(y, p) if relative else y))
    return points


def random_baseline(
    k: int, p: float, trials: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Monte-Carlo mean and std of the overlap between random rankings."""
    _check_fraction(p)
    if trials < 1 or k < 2:
        raise ValueError("need trials >= 1 and k >= 2")
    m = slice_size(k, 1.0 - p)
    ys = np.empty(trials)
    for t in range(trials):
        a = rng.permutation(k)[:m]
        b = rng.permutation(k)[:m]
        ys[t] = len(np.intersect1d(a, b, assume_unique=True)) / m
    return float(ys.mean()), float(ys.std())


def load_hand_lexicon(path: str | Path) -> HandLexicon:
    """One token per line; '#' lines are comments; entries are re-tokenized."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing hand lexicon file: {path}")
    tokens: set[str] = set()
    with open(path, encoding="utf-8", errors="replace") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens.update(tokenize(line))
    if not tokens:
        raise DataError(f"hand lexicon {path} contains no tokens")
    return HandLexicon(frozenset(tokens))


def write_ranked_tsv(lex: RankedLexicon, path: str | Path) -> None:
    """token<TAB>attention lines, descending; floats round-trip exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        for token, value in zip(lex.tokens, lex.values):
            fh.write(f"{token}\t{value!r}\n")


def read_ranked_tsv(path: str | Path) -> RankedLexicon:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing ranked lexicon file: {path}")
    tokens: list[str] = []
    values: list[float] = []
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected token<TAB>value")
            try:
                values.append(float(parts[1]))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric attention value") from None
            tokens.append(parts[0])
    try:
        return RankedLexicon(tokens, values, source=path.stem)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_curve_csv(points: list[CurvePoint], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("p,value\n")
        for pt in points:
            fh.write(f"{pt.p},{pt.value:.6f}\n")


def parse_grid(text: str) -> list[float]:
    """Comma-separated p values, each strictly inside (0, 1)."""
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"malformed p grid {text!r}") from None
    if not grid:
        raise ValueError("empty p grid")
    for p in grid:
        _check_fraction(p)
    return grid


DEFAULT_GRID = (0.5, 0.6, 0.7, 0.8, 0.9)
