import random

import pytest
from hypothesis import given, strategies as st

from kphomog.corpus import Corpus, Document, DocumentPair, Provenance, load_pairs, save_pairs
from kphomog.errors import EmptyCorpus, MissingReferences, ValidationError
from kphomog.metrics import Formula, KeyphraseSet
from kphomog.pairing import (
    PairingConfig,
    SimilarityMetric,
    build_pairs,
    extraction_upper_bound,
    mean_upper_bound,
    similarity,
)
from oracles import all_pairs
from synth import random_corpus


def ks(texts):
    return KeyphraseSet.from_texts(texts)


class TestSimilarity:
    def test_equal_sets(self):
        a = ks(["graph", "kernel"])
        for m in SimilarityMetric:
            assert similarity(a, a, m) == 1.0

    def test_four_two_two(self):
        a, b = ks(["w", "x", "y", "z"]), ks(["w", "x"])
        assert similarity(a, b, SimilarityMetric.HOUBRE_MAX) == 0.5
        assert similarity(a, b, SimilarityMetric.JACCARD) == 0.5

    def test_three_three_two(self):
        a, b = ks(["w", "x", "y"]), ks(["w", "x", "z"])
        assert similarity(a, b, SimilarityMetric.HOUBRE_MAX) == pytest.approx(2 / 3)
        assert similarity(a, b, SimilarityMetric.JACCARD) == 0.5

    def test_empty(self):
        assert similarity(ks([]), ks([])) == 1.0
        assert similarity(ks([]), ks(["x"])) == 0.0

    @given(st.lists(st.sampled_from("abcdef"), max_size=6), st.lists(st.sampled_from("abcdef"), max_size=6))
    def test_properties(self, a, b):
        sa, sb = ks(a), ks(b)
        for m in SimilarityMetric:
            assert similarity(sa, sb, m) == similarity(sb, sa, m)
        assert similarity(sa, sb, SimilarityMetric.HOUBRE_MAX) >= similarity(sa, sb, SimilarityMetric.JACCARD)
        if sa.keys and sb.keys:
            assert (similarity(sa, sb) == 1.0) == (sa.keys == sb.keys)

    def test_metric_parse(self):
        assert SimilarityMetric.parse("houbre-max") is SimilarityMetric.HOUBRE_MAX


def test_config_threshold_bounds():
    with pytest.raises(ValidationError):
        PairingConfig(threshold=0.0)
    with pytest.raises(ValidationError):
        PairingConfig(threshold=1.2)
    PairingConfig(threshold=1.0)


def _doc(i, refs, title="t", body="b"):
    return Document(f"d{i:02d}", title, body, tuple(refs))


def test_identical_references_complete_graph():
    corpus = Corpus([_doc(i, ["graph kernel", "speech"]) for i in range(3)])
    pairs = build_pairs(corpus)
    assert [(p.doc_a, p.doc_b) for p in pairs] == [("d00", "d01"), ("d00", "d02"), ("d01", "d02")]
    assert all(p.reference_similarity == 1.0 for p in pairs)
    assert all(p.provenance is Provenance.SHARED_KEYPHRASE for p in pairs)


def planted_corpus():
    """50 documents; 10 disjoint pairs share 2 of 3 keyphrases, others share at most 1 of 3."""
    docs = []
    for k in range(10):
        docs.append(_doc(2 * k, [f"topic{k} alpha", f"topic{k} beta", f"solo{2 * k}"]))
        docs.append(_doc(2 * k + 1, [f"topic{k} alpha", f"topic{k} beta", f"solo{2 * k + 1}"]))
    for i in range(20, 50):
        # each shares only "common{i//2}" with its neighbour: jaccard 1/5
        docs.append(_doc(i, [f"common{i // 2}", f"solo{i} x", f"solo{i} y"]))
    planted = {(f"d{2 * k:02d}", f"d{2 * k + 1:02d}") for k in range(10)}
    return Corpus(docs), planted


def test_planted_pairs_recovered():
    corpus, planted = planted_corpus()
    pairs = build_pairs(corpus, PairingConfig(SimilarityMetric.JACCARD, 0.5))
    assert {(p.doc_a, p.doc_b) for p in pairs} == planted
    refsets = {i: corpus[i].reference_set().keys for i in corpus}
    assert set(all_pairs(refsets, 0.5)) == planted


def _compare_with_oracle(corpus, threshold, metric):
    pairs = build_pairs(corpus, PairingConfig(metric, threshold))
    refsets = {i: corpus[i].reference_set().keys for i in corpus}
    expected = all_pairs(refsets, threshold, "jaccard" if metric is SimilarityMetric.JACCARD else "max")
    got = {(p.doc_a, p.doc_b): p.reference_similarity for p in pairs}
    assert got == expected
    assert [p.pair_id for p in pairs] == sorted(p.pair_id for p in pairs)


@pytest.mark.parametrize("metric", list(SimilarityMetric))
def test_random_corpora_match_oracle(metric):
    rng = random.Random(5)
    for _ in range(40):
        corpus = random_corpus(rng, rng.randint(1, 60))
        _compare_with_oracle(corpus, rng.choice([0.2, 0.25, 0.5, 0.75, 1.0]), metric)


def test_documents_without_references_skipped(caplog):
    corpus = Corpus([_doc(0, ["x"]), _doc(1, ["x"]), _doc(2, [])])
    pairs = build_pairs(corpus)
    assert len(pairs) == 1
    assert "without reference keyphrases" in caplog.text


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        build_pairs(Corpus([]))


def test_pairs_self_consistent_after_reload(tmp_path):
    rng = random.Random(9)
    corpus = random_corpus(rng, 80)
    pairs = build_pairs(corpus, PairingConfig(threshold=0.3))
    save_pairs(pairs, tmp_path / "p.jsonl")
    for p in load_pairs(tmp_path / "p.jsonl", corpus):
        assert p.reference_similarity >= 0.3
        assert p.reference_similarity == similarity(corpus[p.doc_a].reference_set(),
                                                    corpus[p.doc_b].reference_set())


# ------------------------------------------------------------ upper bound


def _pair(a, b):
    return DocumentPair("p", a, b, Provenance.REFORMULATION_PARAPHRASE, 1.0)


def test_upper_bound_all_present():
    refs = ("graph kernel", "speech")
    corpus = Corpus([Document("a", "Graph kernel", "speech", refs),
                     Document("b", "Speech", "with graph kernels", refs)])
    s = extraction_upper_bound(_pair("a", "b"), corpus)
    assert (s.hooper, s.rodgers) == (1.0, 1.0)


def test_upper_bound_subsets():
    refs = ("alpha", "beta", "gamma")
    corpus = Corpus([Document("a", "alpha", "beta here", refs),
                     Document("b", "beta", "gamma there", refs)])
    s = extraction_upper_bound(_pair("a", "b"), corpus)
    assert s.hooper == 1 / 3  # {alpha, beta} vs {beta, gamma}
    assert extraction_upper_bound(_pair("a", "b"), corpus, Formula.DICE).hooper == 0.5


def test_upper_bound_missing_references():
    corpus = Corpus([Document("a", "alpha", "", ("alpha",)), Document("b", "beta", "", ())])
    with pytest.raises(MissingReferences):
        extraction_upper_bound(_pair("a", "b"), corpus)


def test_mean_upper_bound():
    refs = ("alpha", "beta", "gamma")
    corpus = Corpus([Document("a", "alpha", "beta", refs), Document("b", "beta", "gamma", refs),
                     Document("c", "alpha beta", "gamma", refs)])
    hooper, rodgers, n = mean_upper_bound([_pair("a", "b"), _pair("a", "c")], corpus)
    assert n == 2
    assert hooper == pytest.approx((1 / 3 + 2 / 3) / 2)
