"""End-to-end homogeneity evaluation, TF-IDF baseline, dataset statistics and reports."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import math
import unicodedata
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, stopwords
from .corpus import Document, DocumentPair, PredictionSet
from .errors import ConstantSeries, EmptyCorpus, EmptyDocument, InsufficientData, NoOverlap
from .metrics import (
    CorrelationMethod,
    CorrelationResult,
    CpScores,
    Formula,
    cp_scores,
    pearson,
    rouge1_recall,
    spearman,
)
from .prmu import SEAM, PrmuDistribution, absent_rate, distribution
from .textkit import _WORD_RE, stem


class EmptyFlag(str, enum.Enum):
    NONE = "none"
    ONE_EMPTY = "one_empty"
    BOTH_EMPTY = "both_empty"


@dataclass(frozen=True)
class PairResult:
    pair_id: str
    system: str
    cp: CpScores
    rouge1_between_docs: float
    absent_rate_a: float
    absent_rate_b: float
    empty_flags: EmptyFlag = EmptyFlag.NONE


@dataclass
class EvaluationRun:
    results: list[PairResult]
    skipped: dict[str, int] = field(default_factory=dict)
    formula: Formula = Formula.JACCARD


def rouge1_between(a: Document, b: Document) -> float:
    """ROUGE-1 recall of the original side when one side reformulates the other.

    For pairs with no original (shared-keyphrase pairs) the mean of both
    directions is used, so the value does not depend on pair orientation.
    """
    if b.meta.get("reformulation_of") == a.id:
        return rouge1_recall(a.text, b.text)
    if a.meta.get("reformulation_of") == b.id:
        return rouge1_recall(b.text, a.text)
    return (rouge1_recall(a.text, b.text) + rouge1_recall(b.text, a.text)) / 2


def _score_pair(pair: DocumentPair, system: str, a: Document, b: Document,
                pa: PredictionSet, pb: PredictionSet, formula: Formula, rouge: float) -> PairResult:
    ka, kb = pa.keyphrase_set(), pb.keyphrase_set()
    if not len(ka) and not len(kb):
        flag = EmptyFlag.BOTH_EMPTY
    elif not len(ka) or not len(kb):
        flag = EmptyFlag.ONE_EMPTY
    else:
        flag = EmptyFlag.NONE
    return PairResult(pair.pair_id, system, cp_scores(ka, kb, formula), rouge,
                      absent_rate(ka, a.stems()), absent_rate(kb, b.stems()), flag)


def evaluate(pairs: Sequence[DocumentPair], corpus: Mapping[str, Document],
             predictions: Mapping[tuple[str, str], PredictionSet],
             formula: Formula = Formula.JACCARD, systems: Iterable[str] | None = None,
             workers: int = 1) -> EvaluationRun:
    """Score every (pair, system) for which both sides have predictions.

    Results are sorted by (system, pair_id) whatever ``workers`` is.
    """
    formula = Formula(formula)
    if systems is None:
        systems = sorted({s for s, _ in predictions})
    systems = list(systems)
    docs = [(corpus[p.doc_a], corpus[p.doc_b]) for p in pairs]
    rouge = {p.pair_id: rouge1_between(a, b) for p, (a, b) in zip(pairs, docs)}

    jobs = []
    skipped = {}
    for system in systems:
        n_skipped = 0
        for pair, (a, b) in zip(pairs, docs):
            pa = predictions.get((system, a.id))
            pb = predictions.get((system, b.id))
            if pa is None or pb is None:
                n_skipped += 1
                continue
            jobs.append((pair, system, a, b, pa, pb, formula, rouge[pair.pair_id]))
        if n_skipped == len(pairs):
            raise NoOverlap(f"system {system!r} has predictions for none of the {len(pairs)} pairs")
        skipped[system] = n_skipped

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _score_pair(*job), jobs))
    else:
        results = [_score_pair(*job) for job in jobs]
    results.sort(key=lambda r: (r.system, r.pair_id))
    return EvaluationRun(results, skipped, formula)


@dataclass(frozen=True)
class SystemSummary:
    system: str
    mean_hooper: float
    mean_rodgers: float
    gen_rate: float
    correlation: CorrelationResult | None
    n_pairs: int
    n_empty: int
    formula: Formula
    correlation_method: CorrelationMethod
    spearman: CorrelationResult | None = None
    pearson: CorrelationResult | None = None
    correlation_note: str = ""


def _try_correlation(fn, xs, ys):
    try:
        return fn(xs, ys), ""
    except InsufficientData:
        return None, "unavailable: fewer than 3 pairs"
    except ConstantSeries:
        return None, "unavailable: constant series"


def summarize(results: Sequence[PairResult],
              correlation: CorrelationMethod = CorrelationMethod.SPEARMAN) -> list[SystemSummary]:
    """Per-system means (as percentages) and the ROUGE-1 vs Hooper correlation."""
    method = CorrelationMethod(correlation)
    by_system: dict[str, list[PairResult]] = {}
    for r in sorted(results, key=lambda r: (r.system, r.pair_id)):
        by_system.setdefault(r.system, []).append(r)
    out = []
    for system, rs in by_system.items():
        formulas = {r.cp.formula for r in rs}
        if len(formulas) != 1:
            raise ValueError(f"system {system!r} mixes CP formulas {sorted(f.value for f in formulas)}")
        n = len(rs)
        xs = [r.rouge1_between_docs for r in rs]
        ys = [r.cp.hooper for r in rs]
        sp, sp_note = _try_correlation(spearman, xs, ys)
        pe, pe_note = _try_correlation(pearson, xs, ys)
        chosen, note = (sp, sp_note) if method is CorrelationMethod.SPEARMAN else (pe, pe_note)
        out.append(SystemSummary(
            system=system,
            mean_hooper=100.0 * math.fsum(ys) / n,
            mean_rodgers=100.0 * math.fsum(r.cp.rodgers for r in rs) / n,
            gen_rate=math.fsum((r.absent_rate_a + r.absent_rate_b) / 2 for r in rs) / n,
            correlation=chosen,
            n_pairs=n,
            n_empty=sum(1 for r in rs if r.empty_flags is not EmptyFlag.NONE),
            formula=formulas.pop(),
            correlation_method=method,
            spearman=sp,
            pearson=pe,
            correlation_note=note,
        ))
    return out


# ------------------------------------------------------------ TF-IDF


@dataclass(frozen=True)
class BaselineConfig:
    top_k: int = 5
    max_ngram: int = 3
    stopwords: str = "en"

    def __post_init__(self):
        if self.top_k < 1 or self.max_ngram < 1:
            raise ValueError("top_k and max_ngram must be at least 1")
        stopwords.get(self.stopwords)


def _surface_tokens(doc: Document) -> list[tuple[str, str]]:
    """(surface, stem) for title then body, with a seam token between them."""
    out = []
    for part in (doc.title, doc.body):
        words = _WORD_RE.findall(unicodedata.normalize("NFC", part).lower())
        if words and out:
            out.append((SEAM, SEAM))
        out.extend((w, stem(w)) for w in words)
    return out


def document_frequencies(corpus: Mapping[str, Document] | Iterable[Document]) -> tuple[Counter, int]:
    docs = corpus.values() if isinstance(corpus, Mapping) else corpus
    df: Counter = Counter()
    n = 0
    for doc in docs:
        df.update(set(doc.stems()) - {SEAM})
        n += 1
    return df, n


def tfidf_extract(doc: Document, corpus: Mapping[str, Document] | None = None,
                  config: BaselineConfig = BaselineConfig(),
                  df: tuple[Counter, int] | None = None, system: str = "tfidf") -> PredictionSet:
    """Top-k stem n-grams by mean tf * log(N / (1 + df)) of their stems.

    Ties go to the earlier first occurrence, then the longer candidate, then
    the lexicographically smaller stems. Pass precomputed ``df`` (from :func:`document_frequencies`) when
    extracting for many documents.
    """
    if df is None:
        if corpus is None:
            raise EmptyCorpus("tfidf_extract needs a corpus or precomputed frequencies")
        df = document_frequencies(corpus)
    freqs, n_docs = df
    if n_docs == 0:
        raise EmptyCorpus("document frequencies come from an empty corpus")
    toks = _surface_tokens(doc)
    if not any(s != SEAM for _, s in toks):
        raise EmptyDocument(f"document {doc.id!r} has no tokens")
    stop = stopwords.get(config.stopwords)
    tf = Counter(s for _, s in toks if s != SEAM)

    def weight(s):
        return tf[s] * math.log(n_docs / (1 + freqs[s]))

    candidates: dict[tuple[str, ...], tuple[int, str]] = {}
    for i in range(len(toks)):
        for n in range(1, config.max_ngram + 1):
            window = toks[i:i + n]
            if len(window) < n or any(s == SEAM for _, s in window):
                break
            if window[0][0] in stop or window[-1][0] in stop:
                continue
            key = tuple(s for _, s in window)
            if key not in candidates:
                candidates[key] = (i, " ".join(w for w, _ in window))
    scored = sorted(
        ((math.fsum(weight(s) for s in key) / len(key), pos, key, surface)
         for key, (pos, surface) in candidates.items()),
        key=lambda c: (-c[0], c[1], -len(c[2]), c[2]),
    )
    return PredictionSet(doc.id, system, tuple(c[3] for c in scored[:config.top_k]))


def tfidf_baseline(corpus: Mapping[str, Document], config: BaselineConfig = BaselineConfig(),
                   system: str = "tfidf") -> list[PredictionSet]:
    df = document_frequencies(corpus)
    out = []
    for doc_id in corpus:
        try:
            out.append(tfidf_extract(corpus[doc_id], config=config, df=df, system=system))
        except EmptyDocument:
            out.append(PredictionSet(doc_id, system, ()))
    return out


# ------------------------------------------------------------ statistics


@dataclass(frozen=True)
class DatasetStats:
    dataset: str
    version: str
    n_documents: int
    prmu: PrmuDistribution | None
    mean_references: float
    mean_keyphrase_length: float


def _stats_row(dataset: str, version: str, docs: list[Document], per_document: bool) -> DatasetStats:
    refs = [d.reference_set() for d in docs]
    n_refs = sum(len(r) for r in refs)
    prmu = distribution(((r, d) for r, d in zip(refs, docs)), per_document) if n_refs else None
    lengths = [len(kp) for r in refs for kp in r]
    return DatasetStats(dataset, version, len(docs), prmu, n_refs / len(docs),
                        math.fsum(lengths) / len(lengths) if lengths else 0.0)


def dataset_stats(corpus: Mapping[str, Document], pairs: Sequence[DocumentPair] | None = None,
                  per_document: bool = False) -> list[DatasetStats]:
    """One row per (dataset, version) meta group, plus one for pair documents."""
    if not len(corpus):
        raise EmptyCorpus("no documents")
    groups: dict[tuple[str, str], list[Document]] = {}
    for doc_id in corpus:
        doc = corpus[doc_id]
        key = (str(doc.meta.get("dataset", "corpus")), str(doc.meta.get("version", "original")))
        groups.setdefault(key, []).append(doc)
    rows = [_stats_row(ds, ver, docs, per_document) for (ds, ver), docs in sorted(groups.items())]
    if pairs:
        ids = sorted({i for p in pairs for i in (p.doc_a, p.doc_b)})
        rows.append(_stats_row("pairs", f"{len(pairs)} pairs", [corpus[i] for i in ids], per_document))
    return rows


# --------------------------------------------------------------- reports


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _fmt_pct(x: float) -> str:
    return f"{x:.1f}"


def _fmt_corr(c: CorrelationResult | None) -> str:
    if c is None:
        return "n/a"
    return f"{c.coefficient:.2f}{'*' if c.significant else ''}"


SUMMARY_COLUMNS = ["system", "formula", "n_pairs", "n_empty", "mean_hooper", "mean_rodgers",
                   "gen_rate", "spearman", "spearman_p", "pearson", "pearson_p"]
STATS_COLUMNS = ["dataset", "version", "n_documents", "p_pct", "r_pct", "m_pct", "u_pct",
                 "n_keyphrases", "mean_references", "mean_keyphrase_length"]


def _summary_row(s: SystemSummary) -> list:
    def c(r, attr):
        return "" if r is None else repr(getattr(r, attr))
    return [s.system, s.formula.value, s.n_pairs, s.n_empty, repr(s.mean_hooper),
            repr(s.mean_rodgers), repr(s.gen_rate), c(s.spearman, "coefficient"),
            c(s.spearman, "p_value"), c(s.pearson, "coefficient"), c(s.pearson, "p_value")]


def _stats_row_values(r: DatasetStats) -> list:
    p = r.prmu
    dist = ["", "", "", "", 0] if p is None else [repr(v) for v in p.as_tuple()] + [p.n]
    return [r.dataset, r.version, r.n_documents, *dist, repr(r.mean_references),
            repr(r.mean_keyphrase_length)]


def stats_markdown(stats: Sequence[DatasetStats]) -> list[str]:
    lines = ["| Dataset | Version | #Documents | %P | %R | %M | %U | Refs/doc | Words/kp |",
             "|---|---|---:|---:|---:|---:|---:|---:|---:|"]
    for r in stats:
        dist = ["-"] * 4 if r.prmu is None else [_fmt_pct(v) for v in r.prmu.as_tuple()]
        lines.append(f"| {r.dataset} | {r.version} | {r.n_documents} | " + " | ".join(dist)
                     + f" | {r.mean_references:.1f} | {r.mean_keyphrase_length:.1f} |")
    return lines


def render_markdown(summaries: Sequence[SystemSummary], stats: Sequence[DatasetStats],
                    meta: Mapping[str, str]) -> str:
    lines = ["# Homogeneity report", ""]
    for k, v in meta.items():
        lines.append(f"- {k}: {v}")
    lines.append("")
    lines.append("## Systems")
    lines.append("")
    if not summaries:
        lines.append("No systems evaluated.")
    else:
        method = summaries[0].correlation_method.value
        lines.append(f"| Model | CP Hooper | CP Rodgers | % Gen. | Cor. ROUGE ({method}) | Pairs | Empty |")
        lines.append("|---|---:|---:|---:|---:|---:|---:|")
        for s in summaries:
            lines.append(f"| {s.system} | {_fmt_pct(s.mean_hooper)} | {_fmt_pct(s.mean_rodgers)} | "
                         f"{_fmt_pct(s.gen_rate)} | {_fmt_corr(s.correlation)} | {s.n_pairs} | {s.n_empty} |")
        lines.append("")
        lines.append("`*` marks correlations with p < 0.05 (two-sided t test).")
    if stats:
        lines += ["", "## Datasets", ""] + stats_markdown(stats)
    return "\n".join(lines) + "\n"


def render_csv(rows: Iterable[list], columns: list[str], meta: Mapping[str, str]) -> str:
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def report_meta(formula: Formula | None, correlation: CorrelationMethod | None,
                inputs: Mapping[str, str | Path] = {}) -> dict[str, str]:
    meta = {"toolkit": f"kphomog {__version__}"}
    if formula is not None:
        meta["formula"] = Formula(formula).value
    if correlation is not None:
        meta["correlation"] = CorrelationMethod(correlation).value
    for name, path in inputs.items():
        meta[f"input {name}"] = f"{Path(path).name} sha256:{file_sha256(path)}"
    return meta


def emit_report(summaries: Sequence[SystemSummary], stats: Sequence[DatasetStats],
                markdown_path=None, csv_path=None, meta: Mapping[str, str] | None = None) -> list[Path]:
    """Write the markdown report and the CSV tables; returns written paths.

    The CSV holds the system summaries at full precision; dataset statistics
    go to a sibling ``<name>.stats.csv`` when present.
    """
    meta = dict(meta or {})
    written = []
    if markdown_path is not None:
        Path(markdown_path).write_text(render_markdown(summaries, stats, meta), encoding="utf-8")
        written.append(Path(markdown_path))
    if csv_path is not None:
        csv_path = Path(csv_path)
        csv_path.write_text(render_csv(map(_summary_row, summaries), SUMMARY_COLUMNS, meta),
                            encoding="utf-8")
        written.append(csv_path)
        if stats:
            stats_path = csv_path.with_name(csv_path.stem + ".stats.csv")
            stats_path.write_text(render_csv(map(_stats_row_values, stats), STATS_COLUMNS, meta),
                                  encoding="utf-8")
            written.append(stats_path)
    return written


def read_summary_csv(path) -> list[dict]:
    """Parse a summary CSV back into typed dicts (metadata lines skipped)."""
    with open(path, encoding="utf-8") as f:
        rows = list(csv.DictReader(line for line in f if not line.startswith("#")))
    out = []
    for row in rows:
        typed = {"system": row["system"], "formula": row["formula"],
                 "n_pairs": int(row["n_pairs"]), "n_empty": int(row["n_empty"])}
        for k in SUMMARY_COLUMNS[4:]:
            typed[k] = float(row[k]) if row[k] != "" else None
        out.append(typed)
    return out
