"""Building, loading and scanning annotated listing corpora.

A corpus directory holds one sub-directory per ISA with ``*.lst`` listings
and an ``annotations.tsv`` at the top whose listing column is the path
relative to the corpus root (``x86_64/ret_missing.lst``).
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..facts import PROFILES
from .harness import Annotation, format_annotations, read_annotations, score
from .scenario import ISAS, parse_scenarios, render

ANNOTATIONS = "annotations.tsv"
GOLDEN_SPEC = "golden.spec"


def _data(name):
    return resources.files("tpcscan.bench").joinpath("data", name).read_text()


def golden_scenarios():
    return parse_scenarios(_data("golden.scn"), source="golden.scn")


def golden_spec_text():
    return _data(GOLDEN_SPEC)


def golden_files() -> dict:
    """Relative path -> file text for the whole golden corpus."""
    files = {GOLDEN_SPEC: golden_spec_text()}
    anns = []
    for sc in golden_scenarios():
        for isa in ISAS:
            rel = f"{isa}/{sc.name}.lst"
            out = render(sc, isa)
            files[rel] = out.text
            ann = Annotation(rel)
            for kind, category, api, tag in sc.expects:
                site = out.sites[tag]
                if kind == "viol":
                    ann.expected.add((category, api, site))
                else:
                    ann.clean.add((api, site))
                    ann.clean_category[(api, site)] = category
            ann.check()
            anns.append(ann)
    files[ANNOTATIONS] = format_annotations(anns)
    return files


def write_golden(root) -> list:
    root = Path(root)
    written = []
    for rel, text in sorted(golden_files().items()):
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        written.append(path)
    return written


def corpus_listings(root) -> list:
    """(relative path, isa) for every listing, ISA taken from the directory name."""
    root = Path(root)
    out = []
    for isa in sorted(PROFILES):
        for path in sorted((root / isa).glob("*.lst")):
            out.append((f"{isa}/{path.name}", isa))
    return out


def load_annotations(root) -> dict:
    path = Path(root) / ANNOTATIONS
    return read_annotations(path.read_text(), source=str(path))


def run_corpus(root, specs, cfg_for=None, jobs=1):
    """Scan every listing; returns {relative path: [Violation]}."""
    from ..report import scan_many

    root = Path(root)
    listings = corpus_listings(root)
    results = {}
    by_isa = {}
    for rel, isa in listings:
        by_isa.setdefault(isa, []).append(rel)
    for isa, rels in by_isa.items():
        cfg = cfg_for(isa) if cfg_for else None
        scanned = scan_many([root / r for r in rels], isa, specs, cfg, jobs=jobs)
        for rel, violations in zip(rels, scanned):
            results[rel] = violations
    return results


def bench(root, specs, jobs=1):
    """Scan and score a corpus against its annotations."""
    reports = run_corpus(root, specs, jobs=jobs)
    return reports, score(reports, load_annotations(root))
