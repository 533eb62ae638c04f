# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: token-level edit distance and contiguous run search."""

from libc.stdlib cimport malloc, free


cdef int* _encode(list seq, dict vocab) except NULL:
    cdef Py_ssize_t i, n = len(seq)
    cdef int* out = <int*> malloc((n + 1) * sizeof(int))
    if out == NULL:
        raise MemoryError()
    for i in range(n):
        tok = seq[i]
        code = vocab.get(tok)
        if code is None:
            code = len(vocab)
            vocab[tok] = code
        out[i] = <int> code
    return out


def edit_distance(a, b):
    """Unit-cost Levenshtein distance between two token sequences."""
    cdef list la = list(a)
    cdef list lb = list(b)
    if len(la) < len(lb):
        la, lb = lb, la
    cdef Py_ssize_t n = len(la), m = len(lb)
    if m == 0:
        return n
    cdef dict vocab = {}
    cdef int* xa = _encode(la, vocab)
    cdef int* xb = NULL
    cdef int* row = NULL
    cdef Py_ssize_t i, j
    cdef int diag, up, best, tmp, x
    try:
        xb = _encode(lb, vocab)
        row = <int*> malloc((m + 1) * sizeof(int))
        if row == NULL:
            raise MemoryError()
        for j in range(m + 1):
            row[j] = <int> j
        for i in range(1, n + 1):
            diag = row[0]
            row[0] = <int> i
            x = xa[i - 1]
            for j in range(1, m + 1):
                up = row[j]
                best = diag + (x != xb[j - 1])
                tmp = up + 1
                if tmp < best:
                    best = tmp
                tmp = row[j - 1] + 1
                if tmp < best:
                    best = tmp
                row[j] = best
                diag = up
        return row[m]
    finally:
        free(xa)
        free(xb)
        free(row)


cdef inline bint _same(object x, object y):
    # stems come from a shared cache, so identity settles most comparisons
    return x is y or x == y


def contains_run(needle, haystack):
    """True iff ``needle`` occurs as a contiguous run inside ``haystack``."""
    cdef list ln = needle if type(needle) is list else list(needle)
    cdef list lh = haystack if type(haystack) is list else list(haystack)
    cdef Py_ssize_t n = len(ln), h = len(lh)
    cdef Py_ssize_t i, j
    if n == 0:
        return True
    if n > h:
        return False
    first = ln[0]
    for i in range(h - n + 1):
        if not _same(lh[i], first):
            continue
        j = 1
        while j < n and _same(lh[i + j], ln[j]):
            j += 1
        if j == n:
            return True
    return False
