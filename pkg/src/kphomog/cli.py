"""Command line interface: ``kphomog <subcommand> ...``.

Every flag can also come from ``--config FILE``, a JSON object holding either
flat keys or one section per subcommand (keys use the flag's long name with
dashes or underscores). Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .corpus import load_corpus, load_pairs, load_predictions, save_corpus, save_pairs, save_predictions
from .errors import KphomogError, TransportError
from .harness import (
    BaselineConfig,
    dataset_stats,
    emit_report,
    evaluate,
    render_csv,
    report_meta,
    stats_markdown,
    STATS_COLUMNS,
    _stats_row_values,
    summarize,
    tfidf_baseline,
)
from .metrics import CorrelationMethod, Formula
from .pairing import PairingConfig, SimilarityMetric, build_pairs, mean_upper_bound
from .reformulation import (
    ChatClient,
    ClientConfig,
    Method,
    PromptSet,
    ResponseCache,
    filter_pipeline,
    generate_many,
    load_records,
    save_records,
    save_reports,
)

log = logging.getLogger("kphomog")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


REQUIRED = {
    "pair": ["corpus", "out"],
    "reformulate": ["corpus", "method", "endpoint", "cache", "out"],
    "filter": ["corpus", "records", "out", "report"],
    "evaluate": ["corpus", "pairs", "predictions", "out"],
    "baseline-tfidf": ["corpus", "out"],
    "stats": ["corpus", "out"],
    "upper-bound": ["corpus", "pairs"],
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kphomog", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"kphomog {__version__}")
    parser.add_argument("--config", help="JSON file with flag defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("pair", help="build shared-keyphrase pairs")
    p.add_argument("--corpus")
    p.add_argument("--metric", choices=["jaccard", "houbre-max"], default="jaccard")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out")

    p = sub.add_parser("reformulate", help="generate reformulations through a chat endpoint")
    p.add_argument("--corpus")
    p.add_argument("--method", choices=[m.value for m in Method])
    p.add_argument("--endpoint", help="OpenAI-compatible base URL")
    p.add_argument("--model", default="gpt-4o")
    p.add_argument("--api-key-env", default="OPENAI_API_KEY",
                   help="name of the environment variable holding the API key")
    p.add_argument("--cache")
    p.add_argument("--prompts", help="directory overriding the packaged prompt templates")
    p.add_argument("--max-attempts", type=int, default=5)
    p.add_argument("--backoff", type=float, default=1.0)
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--rate", type=float, default=None, help="max requests per second")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--limit", type=int, default=None, help="only the first N documents")
    p.add_argument("--out")

    p = sub.add_parser("filter", help="apply quality filters to reformulations")
    p.add_argument("--corpus")
    p.add_argument("--records")
    p.add_argument("--window", type=float, default=0.1)
    p.add_argument("--out", help="accepted pairs")
    p.add_argument("--corpus-out", help="original plus accepted documents (default: <out>.corpus.jsonl)")
    p.add_argument("--report", help="per-record QC report")

    p = sub.add_parser("evaluate", help="score predictions on pairs")
    p.add_argument("--corpus")
    p.add_argument("--pairs")
    p.add_argument("--predictions", action="append")
    p.add_argument("--formula", choices=[f.value for f in Formula], default="jaccard")
    p.add_argument("--correlation", choices=[c.value for c in CorrelationMethod], default="spearman")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--stats", action="store_true", help="append dataset statistics of the pair documents")
    p.add_argument("--out", help="markdown report")
    p.add_argument("--csv", help="CSV report")

    p = sub.add_parser("baseline-tfidf", help="predict keyphrases with the TF-IDF baseline")
    p.add_argument("--corpus")
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--max-ngram", type=int, default=3)
    p.add_argument("--stopwords", default="en")
    p.add_argument("--system", default="tfidf")
    p.add_argument("--out")

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("--corpus")
    p.add_argument("--pairs")
    p.add_argument("--per-document", action="store_true")
    p.add_argument("--out")
    p.add_argument("--csv")

    p = sub.add_parser("upper-bound", help="extraction upper bound of pairs")
    p.add_argument("--corpus")
    p.add_argument("--pairs")
    p.add_argument("--formula", choices=[f.value for f in Formula], default="jaccard")
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    args = parser.parse_args(argv)
    if not known.config or not args.command:
        return args
    with open(known.config, encoding="utf-8") as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    section = cfg.get(args.command, {})
    flat = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    merged = {**flat, **section}
    sub = parser._subparsers._group_actions[0].choices[args.command]
    dests = {a.dest for a in sub._actions}
    defaults = {}
    for key, value in merged.items():
        dest = key.replace("-", "_")
        if dest not in dests:
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        if dest == "predictions" and isinstance(value, str):
            value = [value]
        defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _check_required(args):
    missing = [f"--{k}" for k in REQUIRED[args.command] if getattr(args, k.replace("-", "_")) in (None, [])]
    if missing:
        raise UsageError(f"{args.command}: missing {', '.join(missing)}")


def cmd_pair(args):
    corpus = load_corpus(args.corpus)
    config = PairingConfig(SimilarityMetric.parse(args.metric), args.threshold)
    pairs = build_pairs(corpus, config)
    save_pairs(pairs, args.out)
    docs = {i for p in pairs for i in (p.doc_a, p.doc_b)}
    print(f"{len(pairs)} pairs from {len(docs)} unique documents "
          f"({config.metric.value} >= {config.threshold})")


def cmd_reformulate(args):
    corpus = load_corpus(args.corpus)
    docs = corpus.documents()
    if args.limit is not None:
        docs = docs[:args.limit]
    config = ClientConfig(
        endpoint=args.endpoint, model=args.model, api_key_env=args.api_key_env,
        max_attempts=args.max_attempts, backoff=args.backoff, timeout=args.timeout,
        rate_per_second=args.rate, max_concurrency=args.workers, temperature=args.temperature,
    )
    prompts = PromptSet.load(args.prompts)
    with ChatClient(config) as client:
        records, failures = generate_many(docs, Method(args.method), client, prompts,
                                          ResponseCache(args.cache), args.workers)
    save_records(records, args.out)
    print(f"{len(records)} reformulations written, {len(failures)} failed")
    for f in failures:
        print(f"  {f.doc_id}: {f.error}", file=sys.stderr)
    if failures:
        if all(f.error.startswith(("TransportError", "RateLimited")) for f in failures):
            return 2
        return 1
    return 0


def cmd_filter(args):
    corpus = load_corpus(args.corpus)
    records = load_records(args.records)
    result = filter_pipeline(records, corpus, args.window)
    save_pairs(result.pairs, args.out)
    corpus_out = args.corpus_out or str(Path(args.out).with_suffix("")) + ".corpus.jsonl"
    save_corpus(corpus.documents() + result.documents, corpus_out)
    save_reports(result.reports, args.report)
    by_method = {}
    for r in result.reports:
        by_method.setdefault(r.method.value, [0, 0])
        by_method[r.method.value][0 if r.accepted else 1] += 1
    print(f"{len(result.pairs)} of {len(records)} reformulations accepted; corpus written to {corpus_out}")
    for m, (acc, rej) in sorted(by_method.items()):
        print(f"  {m}: {acc} accepted, {rej} rejected")


def cmd_evaluate(args):
    corpus = load_corpus(args.corpus)
    pairs = load_pairs(args.pairs, corpus)
    preds = None
    for path in args.predictions:
        loaded = load_predictions(path, corpus)
        preds = loaded if preds is None else preds.merged(loaded)
    formula = Formula(args.formula)
    correlation = CorrelationMethod(args.correlation)
    run = evaluate(pairs, corpus, preds, formula, workers=args.workers)
    summaries = summarize(run.results, correlation)
    stats = dataset_stats(corpus, pairs)[-1:] if args.stats and pairs else []
    inputs = {"corpus": args.corpus, "pairs": args.pairs}
    for i, path in enumerate(args.predictions):
        inputs[f"predictions[{i}]"] = path
    meta = report_meta(formula, correlation, inputs)
    for system, n in run.skipped.items():
        if n:
            meta[f"skipped pairs {system}"] = str(n)
    emit_report(summaries, stats, args.out, args.csv, meta)
    for s in summaries:
        print(f"{s.system}: hooper {s.mean_hooper:.1f} rodgers {s.mean_rodgers:.1f} "
              f"gen {s.gen_rate:.1f} ({s.n_pairs} pairs, {formula.value})")


def cmd_baseline(args):
    corpus = load_corpus(args.corpus)
    config = BaselineConfig(args.top_k, args.max_ngram, args.stopwords)
    sets = tfidf_baseline(corpus, config, args.system)
    save_predictions(sets, args.out)
    print(f"{len(sets)} prediction sets written for system {args.system!r}")


def cmd_stats(args):
    corpus = load_corpus(args.corpus)
    pairs = load_pairs(args.pairs, corpus) if args.pairs else None
    rows = dataset_stats(corpus, pairs, args.per_document)
    inputs = {"corpus": args.corpus}
    if args.pairs:
        inputs["pairs"] = args.pairs
    meta = report_meta(None, None, inputs)
    meta["prmu weighting"] = "per-document" if args.per_document else "pooled"
    lines = ["# Dataset statistics", ""] + [f"- {k}: {v}" for k, v in meta.items()] + [""]
    text = "\n".join(lines + stats_markdown(rows)) + "\n"
    Path(args.out).write_text(text, encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(render_csv(map(_stats_row_values, rows), STATS_COLUMNS, meta),
                                  encoding="utf-8")
    print(text, end="")


def cmd_upper_bound(args):
    corpus = load_corpus(args.corpus)
    pairs = load_pairs(args.pairs, corpus)
    formula = Formula(args.formula)
    hooper, rodgers, n = mean_upper_bound(pairs, corpus, formula)
    print(f"extraction upper bound over {n} pairs ({formula.value}): "
          f"hooper {100 * hooper:.1f} rodgers {100 * rodgers:.1f}")


COMMANDS = {
    "pair": cmd_pair,
    "reformulate": cmd_reformulate,
    "filter": cmd_filter,
    "evaluate": cmd_evaluate,
    "baseline-tfidf": cmd_baseline,
    "stats": cmd_stats,
    "upper-bound": cmd_upper_bound,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if not args.command:
            parser.print_help()
            return 1
        _check_required(args)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args) or 0
    except UsageError as exc:
        print(f"kphomog: error: {exc}", file=sys.stderr)
        return 1
    except (TransportError, OSError) as exc:
        print(f"kphomog: I/O error: {exc}", file=sys.stderr)
        return 2
    except (KphomogError, ValueError) as exc:
        print(f"kphomog: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
