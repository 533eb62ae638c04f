"""PRMU classification of keyphrases against a text, and corpus statistics."""

from __future__ import annotations

import enum
import logging
import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from . import kernels
from .errors import EmptyCorpus, EmptyPhrase
from .metrics import KeyphraseSet
from .textkit import NormalizedPhrase, stems, tokenize

log = logging.getLogger(__name__)

# Inserted between title and body stems; no keyphrase stem can equal it, so
# a contiguous match never straddles the seam.
SEAM = "\x00"


class PrmuClass(str, enum.Enum):
    PRESENT = "P"
    REORDERED = "R"
    MIXED = "M"
    UNSEEN = "U"

    @property
    def is_present(self) -> bool:
        return self is PrmuClass.PRESENT


def text_stems(title: str, body: str = "") -> list[str]:
    """Stems of ``title`` then ``body``, with a seam marker between them."""
    head, tail = stems(title), stems(body)
    if head and tail:
        return head + [SEAM] + tail
    return head or tail


def split_text(text: str) -> tuple[str, str]:
    """Split a flat document text into (title, body) at the first newline."""
    title, _, body = text.partition("\n")
    return title, body


def classify(keyphrase: NormalizedPhrase | Sequence[str], document_stems: Sequence[str]) -> PrmuClass:
    kp = keyphrase.stems if isinstance(keyphrase, NormalizedPhrase) else tuple(keyphrase)
    if not kp:
        raise EmptyPhrase("cannot classify an empty keyphrase")
    if kernels.contains_run(kp, document_stems):
        return PrmuClass.PRESENT
    vocab = set(document_stems)
    found = sum(1 for s in set(kp) if s in vocab)
    if found == len(set(kp)):
        return PrmuClass.REORDERED
    if found:
        return PrmuClass.MIXED
    return PrmuClass.UNSEEN


@dataclass(frozen=True)
class PrmuDistribution:
    p_pct: float
    r_pct: float
    m_pct: float
    u_pct: float
    n: int

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p_pct, self.r_pct, self.m_pct, self.u_pct)


def _doc_stems(document) -> Sequence[str]:
    # Documents expose stems(); plain stem sequences pass through.
    if hasattr(document, "stems") and callable(document.stems):
        return document.stems()
    return document


def distribution(
    keyphrase_sets: Iterable[tuple[KeyphraseSet, object]],
    per_document: bool = False,
) -> PrmuDistribution:
    """PRMU percentages over (keyphrase set, document) attachments.

    By default all keyphrases are pooled. With ``per_document`` the
    percentages are computed per document and then averaged over documents
    that carry at least one keyphrase.
    """
    pooled = Counter()
    per_doc = []
    for kps, document in keyphrase_sets:
        doc = _doc_stems(document)
        counts = Counter(classify(kp, doc) for kp in kps)
        pooled.update(counts)
        if counts:
            per_doc.append(counts)
    n = sum(pooled.values())
    if n == 0:
        raise EmptyCorpus("no keyphrases to classify")
    order = list(PrmuClass)
    if per_document:
        pcts = [
            math.fsum(100.0 * c[k] / sum(c.values()) for c in per_doc) / len(per_doc)
            for k in order
        ]
    else:
        pcts = [100.0 * pooled[k] / n for k in order]
    return PrmuDistribution(*pcts, n=n)


def absent_rate(predictions: KeyphraseSet, document_stems: Sequence[str]) -> float:
    """Percentage of predictions that are not Present in the document."""
    if not len(predictions):
        return 0.0
    absent = sum(1 for kp in predictions if not classify(kp, document_stems).is_present)
    return 100.0 * absent / len(predictions)


@dataclass(frozen=True)
class GenericityStats:
    mean_document_frequency: float
    mean_length_words: float
    n_keyphrases: int
    unassigned: tuple[str, ...] = ()


def genericity(shared_keyphrases: KeyphraseSet, corpus) -> GenericityStats:
    """Mean reference-set document frequency and mean word length.

    ``corpus`` is any iterable of documents (a :class:`~kphomog.corpus.Corpus`
    iterates its documents). Keyphrases assigned to no document count with
    frequency 0 and are listed in ``unassigned``.
    """
    docs = list(corpus.values()) if hasattr(corpus, "values") else list(corpus)
    if not docs:
        raise EmptyCorpus("genericity needs a non-empty corpus")
    if not len(shared_keyphrases):
        raise EmptyCorpus("no shared keyphrases to measure")
    df = Counter()
    for doc in docs:
        df.update(doc.reference_set().keys)
    freqs = [df[kp.stems] for kp in shared_keyphrases]
    unassigned = tuple(kp.surface for kp in shared_keyphrases if df[kp.stems] == 0)
    if unassigned:
        log.warning("%d shared keyphrase(s) assigned to no document", len(unassigned))
    lengths = [len(tokenize(kp.surface)) for kp in shared_keyphrases]
    n = len(freqs)
    return GenericityStats(math.fsum(freqs) / n, math.fsum(lengths) / n, n, unassigned)


def shared_keyphrases(pairs, corpus) -> KeyphraseSet:
    """Union over pairs of the reference keyphrases both sides share."""
    phrases = []
    for pair in pairs:
        a = corpus[pair.doc_a].reference_set()
        b = corpus[pair.doc_b].reference_set()
        common = a.keys & b.keys
        phrases.extend(p for p in a if p.stems in common)
    return KeyphraseSet(tuple(phrases))
