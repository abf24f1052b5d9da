"""Command-line interface: ``slu <subcommand> ...``.

Machine-readable output goes to stdout as JSON (or JSON lines); logs go to
stderr. Exit codes: 0 ok, 1 usage error, 2 data or validation error,
3 internal error.
"""
from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .builtin_entities import SUPPORTED_KINDS, extract_builtin, parse_reference_time
from .class_lm import MAX, SUM, inject_entity_values, perplexity, sample, score_sentence, train_class_lm
from .confnet import ConfusionNetwork, apply_oov_threshold, greedy_decode
from .dataset import dataset_to_json, load_dataset
from .disambiguation import disambiguate
from .engine import EngineConfig, NluEngine, inject_engine, load_engine, save_engine, train_engine
from .errors import DataError
from .evaluation import curve_tsv, evaluate_cv, learning_curve
from .normalize import normalize, tokenize

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("slu")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _json_float(x):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _emit(obj):
    sys.stdout.write(json.dumps(obj, ensure_ascii=False) + "\n")


def _ref(args):
    if args.reference_time is None:
        return dt.datetime.now(dt.timezone.utc).replace(microsecond=0).isoformat()
    parse_reference_time(args.reference_time)
    return args.reference_time


def _load(args):
    return load_dataset(args.dataset, strict=not args.lenient)


def _values(args):
    values = list(args.values or [])
    if args.values_file:
        values += [line.strip() for line in Path(args.values_file).read_text(encoding="utf-8").splitlines()
                   if line.strip()]
    if not values:
        raise UsageError("give values with --values or --values-file")
    return values


# --------------------------------------------------------------------------
# subcommands

def cmd_train(args):
    d = _load(args)
    config = EngineConfig(threshold=args.threshold, lm_order=args.lm_order)
    engine = train_engine(d, config, args.seed)
    save_engine(engine, args.output)
    _emit({"engine": str(args.output), "fingerprint": engine.fingerprint, "intents": engine.intents,
           "seed": engine.seed, "timings": engine.timings})


def cmd_parse(args):
    engine = load_engine(args.engine)
    queries = list(args.query or [])
    if args.queries_file:
        queries += [line.rstrip("\n") for line in
                    Path(args.queries_file).read_text(encoding="utf-8").splitlines() if line.strip()]
    if not queries:
        raise UsageError("give at least one --query or a --queries-file")
    ref = _ref(args)
    for q in queries:
        _emit(engine.parse(q, ref).to_json())


def cmd_evaluate(args):
    d = _load(args)
    report = evaluate_cv(d, args.folds, args.seed, overlap=args.overlap, ref=_ref(args))
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=1) + "\n", encoding="utf-8")
    _emit(report)


def cmd_learning_curve(args):
    d = _load(args)
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    rows = []
    for k in range(args.repeats):
        rows += learning_curve(d, sizes, args.seed + k, ref=_ref(args))
    if args.output:
        Path(args.output).write_text(curve_tsv(rows), encoding="utf-8")
    for row in rows:
        _emit(row)


def cmd_disambiguate(args):
    d = _load(args)
    report = disambiguate(d, args.repetitions, args.folds, args.seed, ref=_ref(args))
    out = report.to_json()
    if args.output:
        Path(args.output).write_text(json.dumps(dataset_to_json(report.corrected), indent=1,
                                                ensure_ascii=False) + "\n", encoding="utf-8")
        out["corrected_dataset"] = str(args.output)
    if args.report:
        Path(args.report).write_text(json.dumps(out, indent=1, ensure_ascii=False) + "\n",
                                     encoding="utf-8")
    for w in report.warnings:
        log.warning(w)
    _emit(out)


def cmd_inject(args):
    engine = load_engine(args.engine)
    values = _values(args)
    new = inject_engine(engine, args.entity, values)
    save_engine(new, args.output)
    _emit({"engine": str(args.output), "entity": args.entity, "injected": values})


def _class_lm(args):
    if args.engine:
        return load_engine(args.engine).class_lm
    if args.dataset:
        return train_class_lm(_load(args), args.order)
    raise UsageError("give --engine or --dataset")


def cmd_lm(args):
    if args.lm_command == "inject":
        if not args.engine or not args.output:
            raise UsageError("lm inject needs --engine and --output")
        engine = load_engine(args.engine)
        values = _values(args)
        lm = inject_entity_values(engine.class_lm, args.entity, values)
        new = NluEngine(engine.fingerprint, engine.seed, engine.config, engine.intents, engine.patterns,
                        engine.classifier, engine.slot_fillers, engine.entities, engine.gazetteers,
                        engine.clusters, lm, engine.timings)
        save_engine(new, args.output)
        _emit({"engine": str(args.output), "entity": args.entity, "injected": values})
        return
    lm = _class_lm(args)
    if args.lm_command == "score":
        mode = MAX if args.mode == "max" else SUM
        for s in args.sentence:
            _emit({"sentence": s, "mode": args.mode,
                   "logprob": _json_float(score_sentence(lm, s, mode, allow_unk=not args.no_unk))})
    elif args.lm_command == "perplexity":
        sentences = [line.strip() for line in Path(args.corpus).read_text(encoding="utf-8").splitlines()
                     if line.strip()]
        if not sentences:
            raise DataError(f"{args.corpus}: no sentences")
        ppl = perplexity(lm, sentences, allow_unk=not args.no_unk)
        _emit({"perplexity": _json_float(ppl), "sentences": len(sentences)})
    elif args.lm_command == "sample":
        for k in range(args.count):
            _emit({"seed": args.seed + k, "sentence": " ".join(sample(lm, args.seed + k, args.max_len))})


def cmd_decode_cn(args):
    cn = ConfusionNetwork.load(args.input)
    du = greedy_decode(cn, include_null=args.include_null)
    out = apply_oov_threshold(du, args.threshold)
    result = out.to_json()
    result["threshold"] = args.threshold
    _emit(result)


def cmd_normalize(args):
    nt = normalize(args.text) if args.verbalize else tokenize(args.text)
    for t in nt.tokens:
        if args.json:
            _emit({"text": t.text, "kind": t.kind.value, "start": t.start, "end": t.end})
        else:
            sys.stdout.write(f"{t.text}\t{t.kind.value}\t{t.start}\t{t.end}\n")


def cmd_builtin(args):
    scope = args.scope or list(SUPPORTED_KINDS)
    for m in extract_builtin(tokenize(args.text), scope, _ref(args)):
        _emit(m.to_json())


# --------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="slu", description="Offline spoken-language-understanding toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--lenient", action="store_true", help="accept unknown keys in dataset files")
    p.add_argument("--log-level", default="WARNING",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_ref(sp):
        sp.add_argument("--reference-time", help="ISO-8601 instant with offset (default: now)")

    sp = sub.add_parser("train", help="train an engine from a dataset")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--output", required=True, help="directory, or a path ending in .zip")
    sp.add_argument("--threshold", type=float, default=0.3)
    sp.add_argument("--lm-order", type=int, default=2, choices=[1, 2, 3])
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("parse", help="parse queries with a trained engine")
    sp.add_argument("--engine", required=True)
    sp.add_argument("--query", action="append")
    sp.add_argument("--queries-file")
    with_ref(sp)
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("evaluate", help="k-fold cross-validation report")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--report")
    sp.add_argument("--overlap", action="store_true", help="count overlapping slot spans as matches")
    with_ref(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("learning-curve", help="slot F1 against training size")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--sizes", required=True, help="comma-separated, ascending")
    sp.add_argument("--repeats", type=int, default=1, help="number of seeds, starting at --seed")
    sp.add_argument("--output", help="TSV file")
    with_ref(sp)
    sp.set_defaults(func=cmd_learning_curve)

    sp = sub.add_parser("disambiguate", help="majority-vote repair of a dataset")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--repetitions", type=int, default=5)
    sp.add_argument("--folds", type=int, default=3)
    sp.add_argument("--output", help="write the corrected dataset here")
    sp.add_argument("--report")
    with_ref(sp)
    sp.set_defaults(func=cmd_disambiguate)

    def with_values(sp):
        sp.add_argument("--entity", required=True)
        sp.add_argument("--values", nargs="+")
        sp.add_argument("--values-file")

    sp = sub.add_parser("inject", help="add entity values to a trained engine")
    sp.add_argument("--engine", required=True)
    sp.add_argument("--output", required=True)
    with_values(sp)
    sp.set_defaults(func=cmd_inject)

    sp = sub.add_parser("lm", help="class-based language model tools")
    lm = sp.add_subparsers(dest="lm_command", required=True, parser_class=_Parser)

    def lm_source(x):
        x.add_argument("--engine")
        x.add_argument("--dataset")
        x.add_argument("--order", type=int, default=2, choices=[1, 2, 3])
        x.add_argument("--no-unk", action="store_true", help="give unknown words no probability")

    x = lm.add_parser("score")
    lm_source(x)
    x.add_argument("--sentence", action="append", required=True)
    x.add_argument("--mode", choices=["sum", "max"], default="sum")
    x = lm.add_parser("perplexity")
    lm_source(x)
    x.add_argument("--corpus", required=True, help="one sentence per line")
    x = lm.add_parser("sample")
    lm_source(x)
    x.add_argument("--count", type=int, default=1)
    x.add_argument("--max-len", type=int, default=20)
    x = lm.add_parser("inject")
    x.add_argument("--engine", required=True)
    x.add_argument("--output", required=True)
    with_values(x)
    sp.set_defaults(func=cmd_lm)

    sp = sub.add_parser("decode-cn", help="greedy decoding of a confusion network")
    sp.add_argument("--input", required=True)
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--include-null", action="store_true",
                    help="count winning NULL arcs in the sentence confidence")
    sp.set_defaults(func=cmd_decode_cn)

    sp = sub.add_parser("normalize", help="print tokens as text<TAB>kind<TAB>start<TAB>end")
    sp.add_argument("--text", required=True)
    sp.add_argument("--verbalize", action="store_true", help="print verbalized words instead")
    sp.add_argument("--json", action="store_true", help="JSON lines instead of TSV")
    sp.set_defaults(func=cmd_normalize)

    sp = sub.add_parser("builtin", help="extract built-in entities as JSON lines")
    sp.add_argument("--text", required=True)
    sp.add_argument("--scope", action="append", choices=list(SUPPORTED_KINDS))
    with_ref(sp)
    sp.set_defaults(func=cmd_builtin)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"slu: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, ValueError) as exc:
        print(f"slu: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"slu: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    sys.stdout.flush()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
