"""Independent reference implementations used only by the tests."""

from fractions import Fraction
from itertools import combinations


def alignment_edit_distance(a, b):
    """Minimum edit cost by enumerating every monotone alignment.

    An alignment pairs k positions of ``a`` with k positions of ``b`` in
    order; unpaired tokens are insertions or deletions and paired tokens
    that differ are substitutions.
    """
    best = len(a) + len(b)
    for k in range(min(len(a), len(b)) + 1):
        for ia in combinations(range(len(a)), k):
            for ib in combinations(range(len(b)), k):
                subs = sum(1 for i, j in zip(ia, ib) if a[i] != b[j])
                cost = subs + (len(a) - k) + (len(b) - k)
                if cost < best:
                    best = cost
    return best


def naive_prmu(phrase, doc):
    """Class letter by substring scan and membership, written from the definition."""
    n = len(phrase)
    for start in range(len(doc) - n + 1):
        if all(doc[start + j] == phrase[j] for j in range(n)):
            return "P"
    hits = [w in doc for w in phrase]
    if all(hits):
        return "R"
    if any(hits):
        return "M"
    return "U"


def all_pairs(ref_sets, threshold, metric="jaccard"):
    """Exhaustive O(n^2) pairing over {doc_id: frozenset of keys}."""
    ids = sorted(i for i, s in ref_sets.items() if s)
    out = {}
    for x in range(len(ids)):
        for y in range(x + 1, len(ids)):
            a, b = ref_sets[ids[x]], ref_sets[ids[y]]
            inter = a & b
            if not inter:
                continue
            if metric == "jaccard":
                sim = len(inter) / len(a | b)
            else:
                sim = len(inter) / max(len(a), len(b))
            if sim >= threshold:
                out[(ids[x], ids[y])] = sim
    return out


def exact_set_ratio(a, b, formula):
    a, b = set(a), set(b)
    if not a and not b:
        return Fraction(1)
    if not a or not b:
        return Fraction(0)
    if formula == "dice":
        return Fraction(2 * len(a & b), len(a) + len(b))
    return Fraction(len(a & b), len(a | b))
