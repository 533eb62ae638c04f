"""Pure-Python kernels. Used when the compiled extension is unavailable."""

from __future__ import annotations

from collections.abc import Sequence


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Unit-cost Levenshtein distance between two token sequences."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cost = prev[j - 1] + (x != y)
            ins = cur[j - 1] + 1
            dele = prev[j] + 1
            cur.append(min(cost, ins, dele))
        prev = cur
    return prev[-1]


def contains_run(needle: Sequence, haystack: Sequence) -> bool:
    """True iff ``needle`` occurs as a contiguous run inside ``haystack``."""
    n = len(needle)
    if n == 0:
        return True
    first = needle[0]
    needle = list(needle)
    haystack = list(haystack)
    for i in range(len(haystack) - n + 1):
        if haystack[i] == first and haystack[i:i + n] == needle:
            return True
    return False
