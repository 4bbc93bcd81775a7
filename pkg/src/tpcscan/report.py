"""Scan orchestration and report rendering.

``scan`` ties the stages together: listing text is parsed, facts are
extracted, the checker program runs on the embedded engine and the
findings are gathered into a ScanReport.  Several listings are scanned in
worker processes when ``jobs > 1``; results are merged in input order so
the report does not depend on scheduling.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .checkers import CATEGORIES, CheckerConfig, run_all
from .datalog import read_facts, write_facts
from .facts import SCHEMA, extract_facts, get_profile, parse_listing
from .specs import SpecSet, load_spec_files, select_specs

TOOL = "tpcscan"
SCHEMA_VERSION = 1


def config_for(isa, window=5, depth=1) -> CheckerConfig:
    """Checker settings with the register-argument count of the ISA."""
    return CheckerConfig(window=window, depth=depth, arg_registers=len(get_profile(isa).argument_registers))


def listing_facts(text, isa, window=5, source=None):
    return extract_facts(parse_listing(text, isa, source=source), window)


def scan_facts(store, specs: SpecSet, cfg: CheckerConfig):
    return run_all(store, specs, cfg)


def scan_listing(text, isa, specs: SpecSet, cfg: CheckerConfig | None = None, source=None):
    """Violations and unverifiable findings of one listing."""
    cfg = cfg or config_for(isa)
    return scan_facts(listing_facts(text, isa, cfg.window, source), specs, cfg)


def emit_facts(listing, isa, out_dir, window=5):
    """Write every initial and usage relation as ``<name>.facts`` under ``out_dir``."""
    path = Path(listing)
    store = listing_facts(path.read_text(encoding="utf-8"), isa, window, source=str(path))
    return write_facts(store, out_dir, list(SCHEMA))


def load_facts(directory):
    return read_facts(directory, SCHEMA)


def _scan_path(job):
    path, isa, specs, cfg, is_facts = job
    if is_facts:
        return scan_facts(load_facts(path), specs, cfg)
    return scan_listing(Path(path).read_text(encoding="utf-8"), isa, specs, cfg, source=str(path))


def scan_many(paths, isa, specs, cfg=None, jobs=1, facts=False):
    """Scan several inputs, in worker processes when ``jobs > 1``; results follow input order."""
    cfg = cfg or config_for(isa)
    work = [(str(p), isa, specs, cfg, facts) for p in paths]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_scan_path, work))
    return [_scan_path(w) for w in work]


@dataclass
class ScanReport:
    listings: tuple
    specs: tuple
    isa: str
    tpc: str | None = None
    tpc_version: str | None = None
    window: int = 5
    depth: int = 1
    findings: list = field(default_factory=list)  # (listing, Violation)
    timing_ms: float | None = None

    def violations(self):
        return [(src, v) for src, v in self.findings if v.severity == "violation"]

    def unverifiable(self):
        return [(src, v) for src, v in self.findings if v.severity == "unverifiable"]

    def summary(self):
        counts = {c: 0 for c in CATEGORIES}
        for _, v in self.violations():
            counts[v.category] += 1
        counts["total"] = sum(counts.values())
        counts["unverifiable"] = len(self.unverifiable())
        return counts

    def exit_status(self):
        return 1 if self.violations() else 0

    def as_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "tool": {"name": TOOL, "version": __version__},
            "inputs": {
                "listings": list(self.listings),
                "specs": list(self.specs),
                "isa": self.isa,
                "tpc": self.tpc,
                "tpc_version": self.tpc_version,
                "window": self.window,
                "depth": self.depth,
            },
            "violations": [_entry(src, v) for src, v in self.violations()],
            "unverifiable": [_entry(src, v) for src, v in self.unverifiable()],
            "summary": self.summary(),
            "timing_ms": self.timing_ms,
        }


def _entry(listing, v):
    return {
        "category": v.category,
        "tpc": v.tpc,
        "api": v.api,
        "site": f"0x{v.site:x}",
        "caller": v.caller,
        "kind": v.kind,
        "expression": v.expression_text(),
        "evidence": list(v.evidence),
        "listing": listing,
    }


def scan(listings, spec_paths, isa, tpc=None, tpc_version=None, window=5, depth=1,
         jobs=1, facts=False, timing=False, specs: SpecSet | None = None) -> ScanReport:
    """Scan listing files (or fact directories when ``facts``) against spec files.

    ``timing`` adds wall-clock milliseconds to the report; it is off by
    default so that repeated runs give byte-identical output.
    """
    start = time.perf_counter()
    if specs is None:
        specs = load_spec_files(spec_paths)
    specs = select_specs(specs, tpc, tpc_version)
    cfg = config_for(isa, window, depth)
    results = scan_many(listings, isa, specs, cfg, jobs=jobs, facts=facts)
    findings = [(str(path), v) for path, found in zip(listings, results) for v in found]
    elapsed = round((time.perf_counter() - start) * 1000, 3) if timing else None
    return ScanReport(
        tuple(str(p) for p in listings), tuple(str(p) for p in spec_paths), get_profile(isa).isa,
        tpc, tpc_version, window, depth, findings, elapsed,
    )


def render_report(report: ScanReport, fmt="json") -> str:
    if fmt == "json":
        return json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n"
    if fmt == "text":
        return _text(report)
    raise ValueError(f"unknown report format '{fmt}'")


def _text(report: ScanReport) -> str:
    rows = [("listing", "site", "category", "api", "kind", "expression")]
    for src, v in report.findings:
        kind = v.kind if v.severity == "violation" else f"{v.kind} (unverifiable)"
        rows.append((src, f"0x{v.site:x}", v.category, v.api, kind, v.expression_text()))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    s = report.summary()
    lines.append("")
    lines.append(", ".join(f"{c}: {s[c]}" for c in CATEGORIES) + f"; total: {s['total']}, unverifiable: {s['unverifiable']}")
    if report.timing_ms is not None:
        lines.append(f"time: {report.timing_ms} ms")
    return "\n".join(lines) + "\n"
