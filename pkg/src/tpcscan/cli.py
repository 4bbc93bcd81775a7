"""Command-line front end.

    tpcscan scan --isa x86_64 --spec openssl.spec --listing fw.lst
    tpcscan emit-facts --isa arm32 --listing fw.lst --out facts/
    tpcscan compile-exprs --corpus sentences.tsv --tpc openssl
    tpcscan bench run --corpus corpus/golden --spec corpus/golden/golden.spec --score
    tpcscan bench build --out corpus/golden

Exit status: 0 nothing found, 1 violations found, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bench import bench, write_golden
from .checkers import checker_rules_text
from .errors import TpcScanError
from .exprgen import Ambiguous, compile_corpus, read_corpus
from .facts import PROFILES
from .report import config_for, emit_facts, render_report, scan
from .specs import format_spec_set, load_spec_files, select_specs, validate

EXIT_CLEAN, EXIT_FOUND, EXIT_ERROR = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _positive(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def build_parser():
    p = _Parser(prog="tpcscan", description="Find third-party API usage violations in disassembly listings.")
    p.add_argument("--version", action="version", version=f"tpcscan {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("scan", help="scan listings against programming expressions")
    s.add_argument("--isa", required=True, choices=sorted(PROFILES))
    s.add_argument("--spec", nargs="+", required=True, metavar="FILE")
    s.add_argument("--listing", nargs="+", metavar="FILE", default=[])
    s.add_argument("--facts", nargs="+", metavar="DIR", default=[],
                   help="scan fact directories written by emit-facts instead of listings")
    s.add_argument("--tpc")
    s.add_argument("--tpc-version")
    s.add_argument("--window", type=_positive, default=5)
    s.add_argument("--depth", type=int, choices=(0, 1), default=1)
    s.add_argument("--emit-rules", action="store_true", help="print the checker program and stop")
    s.add_argument("--out", metavar="FILE")
    s.add_argument("--format", choices=("json", "text"), default="json")
    s.add_argument("--jobs", type=_positive, default=1)
    s.add_argument("--timing", action="store_true", help="record wall-clock time in the report")

    e = sub.add_parser("emit-facts", help="write the .facts files of one listing")
    e.add_argument("--isa", required=True, choices=sorted(PROFILES))
    e.add_argument("--listing", required=True, metavar="FILE")
    e.add_argument("--out", required=True, metavar="DIR")
    e.add_argument("--window", type=_positive, default=5)

    c = sub.add_parser("compile-exprs", help="turn documentation sentences into programming expressions")
    c.add_argument("--corpus", required=True, metavar="TSV", help="api TAB sentence per line")
    c.add_argument("--tpc", default="lib")
    c.add_argument("--out", metavar="FILE")

    b = sub.add_parser("bench", help="golden corpus tools")
    bsub = b.add_subparsers(dest="bench_command", required=True, parser_class=_Parser)
    r = bsub.add_parser("run", help="scan a corpus and score it against its annotations")
    r.add_argument("--corpus", required=True, metavar="DIR")
    r.add_argument("--spec", nargs="+", required=True, metavar="FILE")
    r.add_argument("--score", action="store_true", help="print precision and recall")
    r.add_argument("--jobs", type=_positive, default=1)
    g = bsub.add_parser("build", help="write the golden corpus")
    g.add_argument("--out", required=True, metavar="DIR")
    return p


def _write(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_scan(args):
    inputs = args.facts or args.listing
    if args.facts and args.listing:
        raise _Usage("give --listing or --facts, not both")
    specs = load_spec_files(args.spec)
    for d in validate(specs):
        print(d, file=sys.stderr)
    if args.emit_rules:
        chosen = select_specs(specs, args.tpc, args.tpc_version)
        _write(checker_rules_text(chosen, config_for(args.isa, args.window, args.depth)), args.out)
        return EXIT_CLEAN
    if not inputs:
        raise _Usage("no --listing given")
    report = scan(inputs, args.spec, args.isa, args.tpc, args.tpc_version, args.window, args.depth,
                  jobs=args.jobs, facts=bool(args.facts), timing=args.timing, specs=specs)
    _write(render_report(report, args.format), args.out)
    return report.exit_status()


def _cmd_emit_facts(args):
    for path in emit_facts(args.listing, args.isa, args.out, args.window):
        print(path)
    return EXIT_CLEAN


def _cmd_compile(args):
    rows = read_corpus(Path(args.corpus).read_text(encoding="utf-8"))
    specs, unmatched = compile_corpus(rows, tpc=args.tpc)
    for u in unmatched:
        tag = "ambiguous" if isinstance(u, Ambiguous) else "no match"
        print(f"{tag}: {u.api}: {u.sentence} ({u.reason})", file=sys.stderr)
    _write(format_spec_set(specs), args.out)
    return EXIT_CLEAN


def _cmd_bench(args):
    if args.bench_command == "build":
        for path in write_golden(args.out):
            print(path)
        return EXIT_CLEAN
    specs = load_spec_files(args.spec)
    reports, card = bench(args.corpus, specs, jobs=args.jobs)
    if args.score:
        sys.stdout.write(card.text())
    else:
        found = {k: [f"{v.category} {v.api} 0x{v.site:x}" for v in vs if v.severity == "violation"]
                 for k, vs in sorted(reports.items())}
        sys.stdout.write(json.dumps(found, indent=2, sort_keys=True) + "\n")
    return EXIT_FOUND if any(v.severity == "violation" for vs in reports.values() for v in vs) else EXIT_CLEAN


class _Usage(Exception):
    pass


_COMMANDS = {"scan": _cmd_scan, "emit-facts": _cmd_emit_facts, "compile-exprs": _cmd_compile, "bench": _cmd_bench}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _Usage as exc:
        print(f"tpcscan: error: {exc}", file=sys.stderr)
    except TpcScanError as exc:
        print(f"tpcscan: {exc}", file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"tpcscan: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
