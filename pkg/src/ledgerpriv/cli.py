"""Command line entry point: ``ledgerpriv <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import obfuscate as obf
from .attack import run_informed
from .classifier import DecisionTree, TrainConfig, evaluate, train
from .errors import ConfigError, DataError, DomainError
from .features import FeatureConfig, balance_labels, export_dataset, extract, import_dataset
from .harness import load_spec, read_results, run_sweep
from .ledger import (DEFAULT_BLOCKSIZE, export_labels, export_ledger, form_blocks,
                     import_labels, import_ledger, per_device_ledgers, populate)
from .report import figure_tables, text_table, write_report
from .trace import builtin_profiles, default_home, parse_trace, serialize_trace, synth_trace

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read(path):
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _read_assignment(text):
    reader = csv.reader(io.StringIO(text))
    if next(reader, None) != ["device_id", "ledger_id"]:
        raise DataError("assignment file must start with header device_id,ledger_id")
    return {row[0]: row[1] for row in reader if row}


def _write_assignment(assignment):
    lines = ["device_id,ledger_id"] + [f"{d},{l}" for d, l in assignment.items()]
    return "\n".join(lines) + "\n"


def cmd_synth(args):
    profiles = builtin_profiles(args.jitter)
    counts = default_home(profiles)
    if args.device:
        counts = {}
        for item in args.device:
            name, _, count = item.partition("=")
            try:
                counts[name] = int(count or 1)
            except ValueError:
                raise ConfigError(f"bad device count in {item!r}") from None
    trace = synth_trace(profiles, counts, args.duration, args.seed)
    _write(args.out, serialize_trace(trace))


def cmd_obfuscate(args):
    trace = parse_trace(_read(args.trace))
    if args.config:
        config = obf.load_config(_read(args.config))
    else:
        config = obf.ObfuscationConfig(args.max_delay, args.devices_per_ledger,
                                       args.packets_per_transaction, args.seed)
    out, assignment = obf.apply(config, trace)
    _write(args.out, serialize_trace(out))
    if args.assignment_out:
        _write(args.assignment_out, _write_assignment(assignment))


def cmd_populate(args):
    trace = parse_trace(_read(args.trace))
    if args.assignment:
        assignment = _read_assignment(_read(args.assignment))
    else:
        assignment = per_device_ledgers(trace.device_ids())
    chains = populate(trace, assignment, args.key_seed)
    _write(args.out, export_ledger(chains))
    _write(args.labels, export_labels(chains))
    if args.blocks:
        blocks = form_blocks(chains, args.blocksize)
        _write(args.blocks, "".join(
            json.dumps({"block_id": b.block_id, "prev_block_id": b.prev_block_id,
                        "t_ids": [tx.t_id for tx in b.transactions]}) + "\n" for b in blocks))


def cmd_featurize(args):
    chains = import_ledger(_read(args.ledger))
    labels = {t_id: dtype for t_id, (_, dtype) in import_labels(_read(args.labels)).items()}
    config = FeatureConfig(window=args.window, log_scale=not args.no_log)
    _write(args.out, export_dataset(extract(chains, labels, config)))


def _train_config(args):
    return TrainConfig(args.max_depth, args.min_samples_split)


def cmd_train(args):
    data = import_dataset(_read(args.dataset))
    if args.balance:
        data = balance_labels(data, seed=args.seed)
    _write(args.out, train(data, _train_config(args)).to_json() + "\n")


def cmd_evaluate(args):
    data = import_dataset(_read(args.dataset))
    if args.balance:
        data = balance_labels(data, seed=args.seed)
    if args.tree:
        rep = evaluate(DecisionTree.from_json(_read(args.tree)), data)
        print(f"accuracy {rep.accuracy:.6f} over {rep.total} transactions")
        for label, recall in rep.recall.items():
            print(f"  {label:<20} recall {recall:.3f}")
    else:
        rep = run_informed(data, args.folds, _train_config(args), args.seed)
        print(f"informed {args.folds}-fold accuracy mean {rep.mean_accuracy:.6f} "
              f"max {rep.max_accuracy:.6f} variance {rep.variance:.6f}")


def cmd_sweep(args):
    spec = load_spec(_read(args.spec), base_dir=Path(args.spec).parent)
    out = args.out or spec.out
    result = run_sweep(spec, out, resume=args.resume)
    print(f"{len(result.rows)} rows written to {Path(out) / 'results.csv'}")
    if result.errors:
        print(f"{len(result.errors)} grid points failed", file=sys.stderr)


def cmd_report(args):
    result = read_results(_read(args.results))
    out = args.out or str(Path(args.results).parent)
    written = write_report(result, out, figures=not args.no_figures)
    for name, table in figure_tables(result).items():
        print(text_table(name, table))
    print(f"{len(written)} files written to {out}")


def build_parser():
    p = _Parser(prog="ledgerpriv", description="Device-classification attacks on IoT "
                "blockchain ledgers and timestamp obfuscation defenses.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic smart-home trace")
    s.add_argument("--duration", type=float, default=86400.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jitter", type=float, default=0.01)
    s.add_argument("--device", action="append", metavar="NAME=COUNT",
                   help="device profile and count; repeatable (default: one of each)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("obfuscate", help="apply delay / multi-packet / multi-device defenses")
    s.add_argument("--trace", required=True)
    s.add_argument("--config", help="key = value file (max_delay_s, devices_per_ledger, "
                   "packets_per_transaction, seed)")
    s.add_argument("--max-delay", type=float, default=0.0)
    s.add_argument("--devices-per-ledger", type=int, default=1)
    s.add_argument("--packets-per-transaction", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--assignment-out")
    s.set_defaults(func=cmd_obfuscate)

    s = sub.add_parser("populate", help="build hash-chained ledgers from a trace")
    s.add_argument("--trace", required=True)
    s.add_argument("--assignment", help="CSV device_id,ledger_id (default: one per device)")
    s.add_argument("--key-seed", type=int, default=0)
    s.add_argument("--out", required=True, help="ledger JSON-lines")
    s.add_argument("--labels", required=True, help="ground-truth labels CSV")
    s.add_argument("--blocks", help="optional block JSON-lines")
    s.add_argument("--blocksize", type=int, default=DEFAULT_BLOCKSIZE)
    s.set_defaults(func=cmd_populate)

    s = sub.add_parser("featurize", help="gap-window features from a ledger")
    s.add_argument("--ledger", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--window", type=int, default=5)
    s.add_argument("--no-log", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_featurize)

    for name, func, help_ in (("train", cmd_train, "train a decision tree"),
                              ("evaluate", cmd_evaluate, "score a tree, or run k-fold CV")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--dataset", required=True)
        s.add_argument("--max-depth", type=int, default=20)
        s.add_argument("--min-samples-split", type=int, default=2)
        s.add_argument("--balance", action="store_true", help="equalize examples per label")
        s.add_argument("--seed", type=int, default=0)
        s.set_defaults(func=func)
        if name == "train":
            s.add_argument("--out")
        else:
            s.add_argument("--tree", help="tree JSON; omit to run informed cross validation")
            s.add_argument("--folds", type=int, default=10)

    s = sub.add_parser("sweep", help="run an obfuscation grid from a TOML spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", help="output directory (default: spec's out)")
    s.add_argument("--resume", action="store_true", help="reuse finished grid points")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", help="tables and figures from a sweep's results.csv")
    s.add_argument("--results", required=True)
    s.add_argument("--out")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"ledgerpriv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError) as exc:
        print(f"ledgerpriv: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
