"""Tokenization, stemming and phrase canonicalization.

Every set comparison in the package goes through :func:`tokenize` so that
"the same word" always means "the same Porter stem of a lowercased,
NFC-normalized alphanumeric run".
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache

from nltk.stem.porter import PorterStemmer

from .errors import EmptyPhrase

_WORD_RE = re.compile(r"[^\W_]+")
_stemmer = PorterStemmer()


@lru_cache(maxsize=200_000)
def stem(word: str) -> str:
    """Stem one lowercase word.

    The Porter stemmer is applied until a fixed point is reached so that
    ``stem(stem(w)) == stem(w)`` holds for every word.
    """
    current = word
    while True:
        nxt = _stemmer.stem(current)
        if not nxt or nxt == current:
            return current
        current = nxt


@dataclass(frozen=True)
class Token:
    surface: str
    stem: str


@dataclass(frozen=True)
class NormalizedPhrase:
    stems: tuple[str, ...]
    surface: str

    def __len__(self) -> int:
        return len(self.stems)


def tokenize(text: str) -> list[Token]:
    text = unicodedata.normalize("NFC", text).lower()
    return [Token(w, stem(w)) for w in _WORD_RE.findall(text)]


def stems(text: str) -> list[str]:
    """Shortcut for ``[t.stem for t in tokenize(text)]``."""
    text = unicodedata.normalize("NFC", text).lower()
    return [stem(w) for w in _WORD_RE.findall(text)]


def normalize_phrase(phrase: str) -> NormalizedPhrase:
    toks = stems(phrase)
    if not toks:
        raise EmptyPhrase(f"phrase has no alphanumeric content: {phrase!r}")
    return NormalizedPhrase(tuple(toks), phrase.strip())


def word_count(text: str) -> int:
    """Number of whitespace-delimited words, before any normalization."""
    return len(text.split())
