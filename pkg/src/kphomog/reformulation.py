"""LLM reformulation of documents and the quality filters applied to them.

Two methods are supported: a single-request paraphrase, and back-translation
through Spanish (two requests). Raw exchanges are cached on disk so reruns
never hit the network.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import re
import threading
import time
from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from string import Template
from typing import NamedTuple

import httpx

from .corpus import Document, DocumentPair, Provenance, _iter_json_lines, _write_lines, make_pair_id
from .errors import (
    EmptyOriginal,
    KphomogError,
    MalformedResponse,
    MissingField,
    NoReferences,
    ParseError,
    RateLimited,
    TransportError,
    ValidationError,
)
from .metrics import rouge1_recall, wer
from .prmu import PrmuClass, classify, split_text, text_stems
from .textkit import word_count

log = logging.getLogger(__name__)

DELIMITER = "<<<ABSTRACT>>>"


class Method(str, enum.Enum):
    PARAPHRASE = "paraphrase"
    BACKTRANSLATION = "backtranslation"

    @property
    def provenance(self) -> Provenance:
        if self is Method.PARAPHRASE:
            return Provenance.REFORMULATION_PARAPHRASE
        return Provenance.REFORMULATION_BACKTRANSLATION

    @property
    def version_label(self) -> str:
        return "paraphrased" if self is Method.PARAPHRASE else "back-translated"


@dataclass(frozen=True)
class ReformulationRecord:
    original: str
    reformulated_text: str
    method: Method
    intermediate_text: str | None = None
    model_label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not self.reformulated_text.strip():
            raise ValidationError(f"empty reformulation for {self.original!r}")
        if self.method is Method.BACKTRANSLATION and not self.intermediate_text:
            raise ValidationError(f"back-translation of {self.original!r} lacks its intermediate text")

    def to_record(self) -> dict:
        return {
            "original": self.original,
            "method": self.method.value,
            "reformulated_text": self.reformulated_text,
            "intermediate_text": self.intermediate_text,
            "model_label": self.model_label,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "ReformulationRecord":
        return cls(
            str(rec["original"]),
            rec["reformulated_text"],
            Method(rec["method"]),
            rec.get("intermediate_text"),
            rec.get("model_label", ""),
        )


def save_records(records: Iterable[ReformulationRecord], path) -> None:
    _write_lines(path, (json.dumps(r.to_record(), ensure_ascii=False) for r in records))


def load_records(path) -> list[ReformulationRecord]:
    out = []
    for lineno, rec in _iter_json_lines(path):
        try:
            out.append(ReformulationRecord.from_record(rec))
        except KeyError as exc:
            raise MissingField(f"record has no {exc.args[0]}", lineno, path) from None
        except (ValueError, TypeError, ValidationError) as exc:
            raise ParseError(str(exc), lineno, path) from None
    return out


# ---------------------------------------------------------------- prompts


@dataclass(frozen=True)
class PromptSet:
    paraphrase: str
    to_pivot: str
    from_pivot: str

    @classmethod
    def load(cls, directory: str | os.PathLike | None = None) -> "PromptSet":
        """Templates from ``directory``, or the packaged defaults."""
        names = ("paraphrase.txt", "translate_en_es.txt", "translate_es_en.txt")
        if directory is None:
            base = resources.files("kphomog") / "prompts"
            texts = [(base / n).read_text(encoding="utf-8") for n in names]
        else:
            texts = [Path(directory, n).read_text(encoding="utf-8") for n in names]
        return cls(*texts)

    def templates_for(self, method: Method) -> tuple[str, ...]:
        if method is Method.PARAPHRASE:
            return (self.paraphrase,)
        return (self.to_pivot, self.from_pivot)


def render(template: str, text: str) -> str:
    return Template(template).substitute(text=text, delimiter=DELIMITER)


def join_document(title: str, body: str) -> str:
    return f"{title}\n{DELIMITER}\n{body}"


_DELIM_LINE = re.compile(rf"^[ \t]*{re.escape(DELIMITER)}[ \t]*$", re.MULTILINE)


def split_response(text: str) -> tuple[str, str]:
    """Split a model answer into (title, body) at the delimiter line."""
    m = _DELIM_LINE.search(text)
    if m is None:
        raise MalformedResponse(f"response lacks the {DELIMITER} delimiter line")
    title = " ".join(text[:m.start()].split())
    body = text[m.end():].strip()
    if not title and not body:
        raise MalformedResponse("response is empty around the delimiter")
    return title, body


# ----------------------------------------------------------------- client


@dataclass
class ClientConfig:
    endpoint: str
    model: str = "gpt-4o"
    api_key_env: str = "OPENAI_API_KEY"
    max_attempts: int = 5
    backoff: float = 1.0
    max_backoff: float = 60.0
    timeout: float = 120.0
    rate_per_second: float | None = None
    max_concurrency: int = 4
    temperature: float | None = None

    @property
    def url(self) -> str:
        base = self.endpoint.rstrip("/")
        if base.endswith("/chat/completions"):
            return base
        return base + "/chat/completions"

    @property
    def model_label(self) -> str:
        temp = "default" if self.temperature is None else repr(self.temperature)
        return f"{self.model};temperature={temp}"


class TokenBucket:
    """Blocking rate limiter; one token per request, burst of one second."""

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.rate = rate
        self.capacity = max(1.0, rate)
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


class ChatClient:
    """Minimal OpenAI-compatible chat-completions client with retries.

    The API key is read from the environment variable named in the config
    and is only ever placed in the Authorization header.
    """

    def __init__(self, config: ClientConfig, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self._sleep = sleep
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(transport=transport, timeout=config.timeout, headers=headers)
        self._bucket = TokenBucket(config.rate_per_second, sleep=sleep) if config.rate_per_second else None
        self.calls = 0

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _delay(self, attempt: int, response: httpx.Response | None) -> float:
        if response is not None:
            retry_after = response.headers.get("Retry-After")
            if retry_after:
                try:
                    return min(self.config.max_backoff, float(retry_after))
                except ValueError:
                    pass
        return min(self.config.max_backoff, self.config.backoff * 2 ** (attempt - 1))

    def complete(self, messages: list[dict]) -> str:
        payload = {"model": self.config.model, "messages": messages}
        if self.config.temperature is not None:
            payload["temperature"] = self.config.temperature
        last_error = "no attempt made"
        rate_limited = False
        for attempt in range(1, self.config.max_attempts + 1):
            if self._bucket is not None:
                self._bucket.acquire()
            response = None
            try:
                self.calls += 1
                response = self._http.post(self.config.url, json=payload)
            except httpx.TransportError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                rate_limited = False
            else:
                if response.status_code == 200:
                    return self._content(response)
                rate_limited = response.status_code == 429
                last_error = f"HTTP {response.status_code}"
                if not rate_limited and response.status_code < 500:
                    raise TransportError(f"{self.config.url}: {last_error}")
            if attempt < self.config.max_attempts:
                delay = self._delay(attempt, response)
                log.warning("attempt %d/%d failed (%s); retrying in %.1fs",
                            attempt, self.config.max_attempts, last_error, delay)
                self._sleep(delay)
        if rate_limited:
            raise RateLimited(f"{self.config.url}: still rate limited after {self.config.max_attempts} attempts")
        raise TransportError(f"{self.config.url}: {last_error} after {self.config.max_attempts} attempts")

    @staticmethod
    def _content(response: httpx.Response) -> str:
        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise MalformedResponse("response is not a chat completion") from None
        if not isinstance(content, str):
            raise MalformedResponse("completion content is not text")
        return content


# ------------------------------------------------------------------ cache


class ResponseCache:
    """One JSON file per (doc id, method, prompt hash).

    Files are written to a temporary name and renamed, so concurrent readers
    never observe a partial entry.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def path(self, doc_id: str, method: Method, prompt_hash: str) -> Path:
        safe = re.sub(r"[^A-Za-z0-9._-]", "_", doc_id)[:80]
        tag = hashlib.sha1(doc_id.encode("utf-8")).hexdigest()[:8]
        return self.directory / f"{safe}-{tag}.{Method(method).value}.{prompt_hash[:16]}.json"

    def get(self, doc_id: str, method: Method, prompt_hash: str) -> dict | None:
        p = self.path(doc_id, method, prompt_hash)
        try:
            with open(p, encoding="utf-8") as f:
                return json.load(f)
        except FileNotFoundError:
            return None

    def put(self, doc_id: str, method: Method, prompt_hash: str, entry: dict) -> None:
        p = self.path(doc_id, method, prompt_hash)
        tmp = p.with_name(f"{p.name}.{os.getpid()}.{threading.get_ident()}.tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(entry, f, ensure_ascii=False, indent=1)
        os.replace(tmp, p)


def prompt_hash(doc: Document, method: Method, prompts: PromptSet, model_label: str) -> str:
    h = hashlib.sha256()
    for part in (*prompts.templates_for(method), model_label, join_document(doc.title, doc.body)):
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def generate(doc: Document, method: Method, client: ChatClient | None,
             prompts: PromptSet | None = None, cache: ResponseCache | None = None,
             model_label: str | None = None) -> ReformulationRecord:
    """Reformulate one document, serving from ``cache`` when possible."""
    method = Method(method)
    prompts = prompts or PromptSet.load()
    if model_label is None:
        model_label = client.config.model_label if client is not None else ""
    if not doc.text.strip():
        raise EmptyOriginal(f"document {doc.id!r} has no text")
    key = prompt_hash(doc, method, prompts, model_label)
    entry = cache.get(doc.id, method, key) if cache is not None else None

    if entry is not None:
        responses = [ex["response"] for ex in entry["exchanges"]]
    else:
        if client is None:
            raise TransportError(f"no client configured and no cache entry for {doc.id!r}")
        responses = []
        exchanges = []
        text = join_document(doc.title, doc.body)
        for template in prompts.templates_for(method):
            messages = [{"role": "user", "content": render(template, text)}]
            answer = client.complete(messages)
            split_response(answer)  # every hop, pivot included, must keep the structure
            exchanges.append({"request": messages, "response": answer})
            responses.append(answer)
            text = answer.strip()
        if cache is not None:
            cache.put(doc.id, method, key, {
                "doc_id": doc.id, "method": method.value, "prompt_hash": key,
                "model_label": model_label, "exchanges": exchanges,
            })

    title, body = split_response(responses[-1])
    intermediate = responses[0].strip() if method is Method.BACKTRANSLATION else None
    return ReformulationRecord(doc.id, f"{title}\n{body}" if title and body else title or body,
                               method, intermediate, model_label)


class GenerationFailure(NamedTuple):
    doc_id: str
    error: str


def generate_many(docs: Sequence[Document], method: Method, client: ChatClient | None,
                  prompts: PromptSet | None = None, cache: ResponseCache | None = None,
                  max_workers: int | None = None) -> tuple[list[ReformulationRecord], list[GenerationFailure]]:
    """Reformulate many documents concurrently; output keeps input order."""
    prompts = prompts or PromptSet.load()
    if max_workers is None:
        max_workers = client.config.max_concurrency if client is not None else 1

    def one(doc):
        try:
            return generate(doc, method, client, prompts, cache)
        except (KphomogError, OSError) as exc:
            return GenerationFailure(doc.id, f"{type(exc).__name__}: {exc}")

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        results = list(pool.map(one, docs))
    records = [r for r in results if isinstance(r, ReformulationRecord)]
    failures = [r for r in results if isinstance(r, GenerationFailure)]
    return records, failures


# --------------------------------------------------------- quality control


@dataclass(frozen=True)
class KeyphraseCheck:
    keyphrase: str
    original_class: PrmuClass
    reformulated_class: PrmuClass


def _reformulated_stems(reformulated_text: str) -> list[str]:
    return text_stems(*split_text(reformulated_text))


def qc_keyphrase_preservation(original: Document, reformulated_text: str) -> tuple[bool, list[KeyphraseCheck]]:
    """Every reference Present in the original must be Present or Reordered in the reformulation."""
    refs = original.reference_set()
    if not len(refs):
        raise NoReferences(f"document {original.id!r} has no reference keyphrases")
    source = original.stems()
    target = _reformulated_stems(reformulated_text)
    table = []
    ok = True
    for kp in refs:
        before = classify(kp, source)
        after = classify(kp, target)
        table.append(KeyphraseCheck(kp.surface, before, after))
        if before is PrmuClass.PRESENT and after not in (PrmuClass.PRESENT, PrmuClass.REORDERED):
            ok = False
    return ok, table


def qc_word_count(original: Document, reformulated_text: str, window: float = 0.1) -> tuple[bool, float]:
    """Length filter; both window bounds are inclusive."""
    n_orig = word_count(original.text)
    if n_orig == 0:
        raise EmptyOriginal(f"document {original.id!r} has no words")
    ratio = Fraction(word_count(reformulated_text), n_orig)
    w = Fraction(str(window))
    return (1 - w) <= ratio <= (1 + w), float(ratio)


def diversity(original: Document, reformulated_text: str) -> tuple[float, float]:
    """(WER, ROUGE-1 recall) of the reformulation against the original."""
    return wer(original.text, reformulated_text), rouge1_recall(original.text, reformulated_text)


@dataclass(frozen=True)
class QcReport:
    original: str
    method: Method
    keyphrase_preservation: tuple[KeyphraseCheck, ...] = ()
    preserved: bool = False
    word_count_ratio: float = 0.0
    length_ok: bool = False
    wer: float | None = None
    rouge1: float | None = None
    accepted: bool = False
    error: str | None = None

    def to_record(self) -> dict:
        return {
            "original": self.original,
            "method": self.method.value,
            "accepted": self.accepted,
            "preserved": self.preserved,
            "length_ok": self.length_ok,
            "word_count_ratio": self.word_count_ratio,
            "wer": self.wer,
            "rouge1": self.rouge1,
            "keyphrases": [
                {"keyphrase": c.keyphrase, "original": c.original_class.value,
                 "reformulated": c.reformulated_class.value}
                for c in self.keyphrase_preservation
            ],
            "error": self.error,
        }


def qc_report(original: Document, record: ReformulationRecord, window: float = 0.1) -> QcReport:
    preserved, table = qc_keyphrase_preservation(original, record.reformulated_text)
    length_ok, ratio = qc_word_count(original, record.reformulated_text, window)
    w, r1 = diversity(original, record.reformulated_text)
    return QcReport(record.original, record.method, tuple(table), preserved, ratio,
                    length_ok, w, r1, preserved and length_ok)


class FilterResult(NamedTuple):
    pairs: list[DocumentPair]
    reports: list[QcReport]
    documents: list[Document]


def reformulated_id(original_id: str, method: Method) -> str:
    return f"{original_id}#{Method(method).value}"


def filter_pipeline(records: Iterable[ReformulationRecord], corpus: Mapping[str, Document],
                    window: float = 0.1) -> FilterResult:
    """Apply both filters to every record.

    Accepted records become new documents carrying the original's references,
    each paired with its original. Failures are reported, never raised.
    """
    pairs, reports, docs = [], [], []
    seen: set[str] = set()
    for rec in records:
        original = corpus.get(rec.original)
        new_id = reformulated_id(rec.original, rec.method)
        if original is None:
            reports.append(QcReport(rec.original, rec.method, error="unknown original document"))
            continue
        if new_id in seen or new_id in corpus:
            reports.append(QcReport(rec.original, rec.method, error=f"duplicate reformulation {new_id}"))
            continue
        try:
            report = qc_report(original, rec, window)
        except ValidationError as exc:
            reports.append(QcReport(rec.original, rec.method, error=f"{type(exc).__name__}: {exc}"))
            continue
        reports.append(report)
        if not report.accepted:
            continue
        seen.add(new_id)
        title, body = split_text(rec.reformulated_text)
        meta = {"reformulation_of": original.id, "method": rec.method.value,
                "version": rec.method.version_label}
        if "dataset" in original.meta:
            meta["dataset"] = original.meta["dataset"]
        docs.append(Document(new_id, title, body, original.references, meta))
        pairs.append(DocumentPair(make_pair_id(original.id, new_id), original.id, new_id,
                                  rec.method.provenance, 1.0))
    return FilterResult(pairs, reports, docs)


def save_reports(reports: Iterable[QcReport], path) -> None:
    _write_lines(path, (json.dumps(r.to_record(), ensure_ascii=False) for r in reports))
