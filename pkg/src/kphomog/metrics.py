"""Pairwise consistency metrics, reformulation diagnostics and correlations."""

from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from scipy import stats as _stats

from . import kernels
from .errors import ConstantSeries, EmptyPhrase, EmptyReference, InsufficientData
from .textkit import NormalizedPhrase, normalize_phrase, stems


class Formula(str, enum.Enum):
    JACCARD = "jaccard"
    DICE = "dice"


class CorrelationMethod(str, enum.Enum):
    PEARSON = "pearson"
    SPEARMAN = "spearman"


@dataclass(frozen=True)
class KeyphraseSet:
    """Keyphrases deduplicated by their stems; first occurrence wins."""

    phrases: tuple[NormalizedPhrase, ...] = ()
    dropped: int = 0

    def __post_init__(self):
        seen = {}
        for p in self.phrases:
            seen.setdefault(p.stems, p)
        if len(seen) != len(self.phrases):
            object.__setattr__(self, "phrases", tuple(seen.values()))

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "KeyphraseSet":
        """Normalize raw keyphrases; entries without any word are dropped."""
        phrases = []
        dropped = 0
        for t in texts:
            try:
                phrases.append(normalize_phrase(t))
            except EmptyPhrase:
                dropped += 1
        return cls(tuple(phrases), dropped)

    @property
    def keys(self) -> frozenset[tuple[str, ...]]:
        return frozenset(p.stems for p in self.phrases)

    @property
    def words(self) -> frozenset[str]:
        return frozenset(s for p in self.phrases for s in p.stems)

    def __len__(self) -> int:
        return len(self.phrases)

    def __iter__(self):
        return iter(self.phrases)


@dataclass(frozen=True)
class CpScores:
    hooper: float
    rodgers: float
    formula: Formula


@dataclass(frozen=True)
class CorrelationResult:
    coefficient: float
    p_value: float
    method: CorrelationMethod
    n: int

    @property
    def significant(self) -> bool:
        return self.p_value < 0.05


def set_overlap(a: frozenset, b: frozenset, formula: Formula = Formula.JACCARD) -> float:
    """Jaccard or Dice overlap of two sets.

    Two empty sets are fully consistent (1.0); a single empty set scores 0.0.
    """
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    c = len(a & b)
    if Formula(formula) is Formula.DICE:
        return 2 * c / (len(a) + len(b))
    return c / (len(a) + len(b) - c)


def hooper_cp(a: KeyphraseSet, b: KeyphraseSet, formula: Formula = Formula.JACCARD) -> float:
    """Keyphrase-level consistency of a pair."""
    return set_overlap(a.keys, b.keys, formula)


def rodgers_cp(a: KeyphraseSet, b: KeyphraseSet, formula: Formula = Formula.JACCARD) -> float:
    """Word-level consistency of a pair, over the unique stems of each set."""
    return set_overlap(a.words, b.words, formula)


def cp_scores(a: KeyphraseSet, b: KeyphraseSet, formula: Formula = Formula.JACCARD) -> CpScores:
    formula = Formula(formula)
    return CpScores(hooper_cp(a, b, formula), rodgers_cp(a, b, formula), formula)


def wer(reference: str, hypothesis: str) -> float:
    """Word error rate of ``hypothesis`` against ``reference``, on stems.

    Not capped at 1: insertions can push it above.
    """
    ref = stems(reference)
    if not ref:
        raise EmptyReference("reference text has no tokens")
    return kernels.edit_distance(ref, stems(hypothesis)) / len(ref)


def rouge1_recall(reference: str, candidate: str) -> float:
    ref = set(stems(reference))
    if not ref:
        raise EmptyReference("reference text has no tokens")
    return len(ref & set(stems(candidate))) / len(ref)


def _check_series(xs: Sequence[float], ys: Sequence[float]) -> None:
    if len(xs) != len(ys):
        raise ValueError(f"series lengths differ: {len(xs)} != {len(ys)}")
    if len(xs) < 3:
        raise InsufficientData(f"need at least 3 observations, got {len(xs)}")
    if min(xs) == max(xs) or min(ys) == max(ys):
        raise ConstantSeries("correlation undefined for a constant series")


def _product_moment(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    if sxx == 0 or syy == 0:
        raise ConstantSeries("correlation undefined for a constant series")
    return max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))


def _t_test_p(r: float, n: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(min(1.0, 2.0 * _stats.t.sf(abs(t), n - 2)))


def pearson(xs: Sequence[float], ys: Sequence[float]) -> CorrelationResult:
    xs, ys = list(map(float, xs)), list(map(float, ys))
    _check_series(xs, ys)
    r = _product_moment(xs, ys)
    return CorrelationResult(r, _t_test_p(r, len(xs)), CorrelationMethod.PEARSON, len(xs))


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the mean of the ranks they span."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> CorrelationResult:
    xs, ys = list(map(float, xs)), list(map(float, ys))
    _check_series(xs, ys)
    r = _product_moment(average_ranks(xs), average_ranks(ys))
    return CorrelationResult(r, _t_test_p(r, len(xs)), CorrelationMethod.SPEARMAN, len(xs))


def correlate(xs, ys, method: CorrelationMethod = CorrelationMethod.SPEARMAN) -> CorrelationResult:
    if CorrelationMethod(method) is CorrelationMethod.PEARSON:
        return pearson(xs, ys)
    return spearman(xs, ys)
