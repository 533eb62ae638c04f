"""Documents, pairs and prediction sets, and their line-delimited JSON formats."""

from __future__ import annotations

import enum
import json
import logging
import os
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .errors import (
    DuplicateId,
    DuplicatePrediction,
    MissingField,
    ParseError,
    UnresolvedDocId,
    ValidationError,
)
from .metrics import KeyphraseSet

log = logging.getLogger(__name__)

PAIRS_HEADER = "# kphomog pairs v1: pair_id doc_a doc_b provenance reference_similarity"

# On-disk field -> Document attribute. Unlisted fields are kept in meta.
DEFAULT_FIELD_MAP = {
    "id": "id",
    "title": "title",
    "abstract": "body",
    "keyphrases": "references",
}


class Provenance(str, enum.Enum):
    REFORMULATION_PARAPHRASE = "reformulation_paraphrase"
    REFORMULATION_BACKTRANSLATION = "reformulation_backtranslation"
    SHARED_KEYPHRASE = "shared_keyphrase"


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    body: str
    references: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict, hash=False)

    @property
    def text(self) -> str:
        if self.title and self.body:
            return f"{self.title}\n{self.body}"
        return self.title or self.body

    def stems(self) -> list[str]:
        """Title then body stems, separated by the PRMU seam marker."""
        return self._stems

    def reference_set(self) -> KeyphraseSet:
        return self._references

    @cached_property
    def _stems(self) -> list[str]:
        from .prmu import text_stems

        return text_stems(self.title, self.body)

    @cached_property
    def _references(self) -> KeyphraseSet:
        return KeyphraseSet.from_texts(self.references)

    def to_record(self) -> dict:
        rec = {"id": self.id, "title": self.title, "abstract": self.body,
               "keyphrases": list(self.references)}
        for k, v in self.meta.items():
            rec.setdefault(k, v)
        return rec


@dataclass(frozen=True)
class DocumentPair:
    pair_id: str
    doc_a: str
    doc_b: str
    provenance: Provenance
    reference_similarity: float

    def __post_init__(self):
        if self.doc_a == self.doc_b:
            raise ValidationError(f"pair {self.pair_id}: doc_a equals doc_b")
        if not 0.0 <= self.reference_similarity <= 1.0:
            raise ValidationError(f"pair {self.pair_id}: similarity outside [0, 1]")
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    def swapped(self) -> "DocumentPair":
        return DocumentPair(self.pair_id, self.doc_b, self.doc_a,
                            self.provenance, self.reference_similarity)


def make_pair_id(a: str, b: str) -> str:
    lo, hi = sorted((a, b))
    return f"{lo}::{hi}"


@dataclass(frozen=True)
class PredictionSet:
    doc_id: str
    system: str
    keyphrases: tuple[str, ...] = ()

    def keyphrase_set(self) -> KeyphraseSet:
        return KeyphraseSet.from_texts(self.keyphrases)


@dataclass
class LoadSummary:
    n_records: int = 0
    n_split_strings: int = 0
    n_unknown_doc_ids: int = 0


class Corpus(Mapping):
    """Immutable id -> Document index."""

    def __init__(self, documents: Iterable[Document] = (), summary: LoadSummary | None = None):
        self._docs: dict[str, Document] = {}
        for doc in documents:
            if doc.id in self._docs:
                raise DuplicateId(f"duplicate document id {doc.id!r}")
            self._docs[doc.id] = doc
        self.summary = summary or LoadSummary(n_records=len(self._docs))

    def __getitem__(self, key: str) -> Document:
        return self._docs[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._docs)

    def __len__(self) -> int:
        return len(self._docs)

    def documents(self) -> list[Document]:
        return list(self._docs.values())


def _keyphrase_list(value, line, path, summary: LoadSummary | None) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        if summary is not None:
            summary.n_split_strings += 1
        return tuple(p.strip() for p in value.split(";") if p.strip())
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return tuple(value)
    raise ParseError("keyphrases must be a list of strings or a ';'-joined string", line, path)


def _iter_json_lines(path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno, path) from None
            if not isinstance(rec, dict):
                raise ParseError("record is not a JSON object", lineno, path)
            yield lineno, rec


def iter_documents(path, field_map: Mapping[str, str] | None = None,
                   summary: LoadSummary | None = None) -> Iterator[Document]:
    """Stream documents from a JSONL corpus file, one record at a time."""
    fmap = dict(DEFAULT_FIELD_MAP if field_map is None else field_map)
    for lineno, rec in _iter_json_lines(path):
        values = {}
        meta = {}
        for key, value in rec.items():
            attr = fmap.get(key)
            if attr is None:
                meta[key] = value
            else:
                values[attr] = value
        if values.get("id") in (None, ""):
            raise MissingField("record has no id", lineno, path)
        title = values.get("title") or ""
        body = values.get("body") or ""
        if not isinstance(title, str) or not isinstance(body, str):
            raise ParseError("title and abstract must be strings", lineno, path)
        if not title.strip() and not body.strip():
            raise MissingField(f"record {values['id']!r} has neither title nor abstract", lineno, path)
        refs = _keyphrase_list(values.get("references"), lineno, path, summary)
        if summary is not None:
            summary.n_records += 1
        yield Document(str(values["id"]), title, body, refs, meta)


def load_corpus(path, field_map: Mapping[str, str] | None = None) -> Corpus:
    summary = LoadSummary()
    docs: dict[str, Document] = {}
    for doc in iter_documents(path, field_map, summary):
        if doc.id in docs:
            raise DuplicateId(f"duplicate document id {doc.id!r}", summary.n_records, path)
        docs[doc.id] = doc
    if summary.n_split_strings:
        log.info("%s: split %d ';'-joined keyphrase strings", path, summary.n_split_strings)
    return Corpus(docs.values(), summary)


def _write_lines(path, lines: Iterable[str]) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line)
            f.write("\n")
    os.replace(tmp, path)


def _dumps(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, sort_keys=False)


def save_corpus(corpus: Iterable[Document] | Corpus, path) -> None:
    docs = corpus.documents() if isinstance(corpus, Corpus) else list(corpus)
    _write_lines(path, (_dumps(d.to_record()) for d in docs))


class Predictions(Mapping):
    """(system, doc_id) -> PredictionSet."""

    def __init__(self, sets: Iterable[PredictionSet] = (), unknown_doc_ids: tuple[str, ...] = ()):
        self._sets: dict[tuple[str, str], PredictionSet] = {}
        for ps in sets:
            key = (ps.system, ps.doc_id)
            if key in self._sets:
                raise DuplicatePrediction(f"duplicate prediction for system {ps.system!r}, doc {ps.doc_id!r}")
            self._sets[key] = ps
        self.unknown_doc_ids = tuple(unknown_doc_ids)

    def __getitem__(self, key):
        return self._sets[key]

    def __iter__(self):
        return iter(self._sets)

    def __len__(self):
        return len(self._sets)

    @property
    def systems(self) -> list[str]:
        return sorted({s for s, _ in self._sets})

    def merged(self, other: "Predictions") -> "Predictions":
        return Predictions(list(self.values()) + list(other.values()),
                           self.unknown_doc_ids + other.unknown_doc_ids)


def load_predictions(path, corpus: Mapping | None = None) -> Predictions:
    """Load a predictions file; doc ids missing from ``corpus`` are kept but counted."""
    sets: dict[tuple[str, str], PredictionSet] = {}
    unknown = []
    for lineno, rec in _iter_json_lines(path):
        for key in ("doc_id", "system"):
            if rec.get(key) in (None, ""):
                raise MissingField(f"prediction record has no {key}", lineno, path)
        ps = PredictionSet(str(rec["doc_id"]), str(rec["system"]),
                           _keyphrase_list(rec.get("keyphrases"), lineno, path, None))
        if (ps.system, ps.doc_id) in sets:
            raise DuplicatePrediction(
                f"system {ps.system!r} has two predictions for doc {ps.doc_id!r}", lineno, path)
        sets[(ps.system, ps.doc_id)] = ps
        if corpus is not None and ps.doc_id not in corpus:
            unknown.append(ps.doc_id)
    if unknown:
        log.warning("%s: %d prediction(s) reference unknown documents", path, len(unknown))
    return Predictions(sets.values(), tuple(unknown))


def save_predictions(sets: Iterable[PredictionSet], path) -> None:
    _write_lines(path, (
        _dumps({"doc_id": ps.doc_id, "system": ps.system, "keyphrases": list(ps.keyphrases)})
        for ps in sets
    ))


def save_pairs(pairs: Iterable[DocumentPair], path) -> None:
    lines = [PAIRS_HEADER]
    lines.extend(
        _dumps({
            "pair_id": p.pair_id,
            "doc_a": p.doc_a,
            "doc_b": p.doc_b,
            "provenance": p.provenance.value,
            "reference_similarity": p.reference_similarity,
        })
        for p in pairs
    )
    _write_lines(path, lines)


def load_pairs(path, corpus: Mapping | None = None) -> list[DocumentPair]:
    pairs = []
    for lineno, rec in _iter_json_lines(path):
        try:
            pair = DocumentPair(
                str(rec["pair_id"]), str(rec["doc_a"]), str(rec["doc_b"]),
                Provenance(rec["provenance"]), float(rec["reference_similarity"]),
            )
        except KeyError as exc:
            raise MissingField(f"pair record has no {exc.args[0]}", lineno, path) from None
        except (ValueError, TypeError) as exc:
            raise ParseError(str(exc), lineno, path) from None
        if corpus is not None:
            for doc_id in (pair.doc_a, pair.doc_b):
                if doc_id not in corpus:
                    raise UnresolvedDocId(f"{path}:{lineno}: pair {pair.pair_id} references unknown document {doc_id!r}")
        pairs.append(pair)
    return pairs
