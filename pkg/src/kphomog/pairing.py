"""Evaluation pairs from shared reference keyphrases, and extraction bounds."""

from __future__ import annotations

import enum
import logging
import math
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from .corpus import Document, DocumentPair, Provenance, make_pair_id
from .errors import EmptyCorpus, MissingReferences, ValidationError
from .metrics import CpScores, Formula, KeyphraseSet, cp_scores
from .prmu import PrmuClass, classify

log = logging.getLogger(__name__)


class SimilarityMetric(str, enum.Enum):
    JACCARD = "jaccard"
    HOUBRE_MAX = "houbre_max"

    @classmethod
    def parse(cls, value: str) -> "SimilarityMetric":
        return cls(value.replace("-", "_"))


@dataclass(frozen=True)
class PairingConfig:
    metric: SimilarityMetric = SimilarityMetric.JACCARD
    threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "metric", SimilarityMetric(self.metric))
        if not 0.0 < self.threshold <= 1.0:
            raise ValidationError(f"threshold must lie in (0, 1], got {self.threshold}")


def _ratio(c: int, n_a: int, n_b: int, metric: SimilarityMetric) -> float:
    if n_a == 0 and n_b == 0:
        return 1.0
    if n_a == 0 or n_b == 0:
        return 0.0
    if metric is SimilarityMetric.HOUBRE_MAX:
        return c / max(n_a, n_b)
    return c / (n_a + n_b - c)


def similarity(a: KeyphraseSet, b: KeyphraseSet,
               metric: SimilarityMetric = SimilarityMetric.JACCARD) -> float:
    """Reference-set similarity: Jaccard, or shared count over the larger set size."""
    ka, kb = a.keys, b.keys
    return _ratio(len(ka & kb), len(ka), len(kb), SimilarityMetric(metric))


def build_pairs(corpus: Mapping[str, Document], config: PairingConfig = PairingConfig()) -> list[DocumentPair]:
    """All unordered document pairs whose reference similarity reaches the threshold.

    Only documents sharing at least one normalized keyphrase are scored;
    candidates come from an inverted index over keyphrases. Output is
    sorted by pair_id.
    """
    if not len(corpus):
        raise EmptyCorpus("cannot pair an empty corpus")
    keys: dict[str, frozenset] = {}
    skipped = 0
    for doc_id in sorted(corpus):
        ks = corpus[doc_id].reference_set().keys
        if ks:
            keys[doc_id] = ks
        else:
            skipped += 1
    if skipped:
        log.warning("skipped %d document(s) without reference keyphrases", skipped)

    index: dict[tuple, list[str]] = defaultdict(list)
    for doc_id, ks in keys.items():
        for k in ks:
            index[k].append(doc_id)

    shared: dict[tuple[str, str], int] = defaultdict(int)
    for posting in index.values():
        for i, a in enumerate(posting):
            for b in posting[i + 1:]:
                shared[(a, b)] += 1

    pairs = []
    for (a, b), c in shared.items():
        sim = _ratio(c, len(keys[a]), len(keys[b]), config.metric)
        if sim >= config.threshold:
            pairs.append(DocumentPair(make_pair_id(a, b), a, b, Provenance.SHARED_KEYPHRASE, sim))
    pairs.sort(key=lambda p: p.pair_id)
    return pairs


def present_references(doc: Document) -> KeyphraseSet:
    text = doc.stems()
    refs = doc.reference_set()
    return KeyphraseSet(tuple(kp for kp in refs if classify(kp, text) is PrmuClass.PRESENT))


def extraction_upper_bound(pair: DocumentPair, corpus: Mapping[str, Document],
                           formula: Formula = Formula.JACCARD) -> CpScores:
    """CP between the Present-in-own-text subsets of both sides' references."""
    a, b = corpus[pair.doc_a], corpus[pair.doc_b]
    for doc in (a, b):
        if not len(doc.reference_set()):
            raise MissingReferences(f"document {doc.id!r} has no reference keyphrases")
    return cp_scores(present_references(a), present_references(b), formula)


def mean_upper_bound(pairs: Iterable[DocumentPair], corpus: Mapping[str, Document],
                     formula: Formula = Formula.JACCARD) -> tuple[float, float, int]:
    """Mean (hooper, rodgers) extraction bound over pairs, plus the pair count."""
    scores = [extraction_upper_bound(p, corpus, formula) for p in pairs]
    if not scores:
        raise EmptyCorpus("no pairs to bound")
    n = len(scores)
    return (math.fsum(s.hooper for s in scores) / n,
            math.fsum(s.rodgers for s in scores) / n, n)
