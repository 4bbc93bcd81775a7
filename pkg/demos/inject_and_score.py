"""
Injecting violations into clean listings and scoring the scanner
================================================================

Take the clean listings of the golden corpus, break each of them with one
mutation, scan the mutants and compare with the updated annotations.
"""

from pathlib import Path

from tpcscan.bench import InjectionError, Mutation, inject, load_annotations, score
from tpcscan.report import scan_listing
from tpcscan.specs import parse_spec_file

root = Path(__file__).resolve().parents[1] / "corpus" / "golden"
specs = parse_spec_file((root / "golden.spec").read_text())
annotations = load_annotations(root)

MUTATIONS = {
    "BN_CTX_get": lambda site: Mutation("remove-check", site=site),
    "SSL_write": lambda site: Mutation("wrong-check", site=site, op="lt", value=0),
    "SSL_read": lambda site: Mutation("remove-check", site=site),
    "SSL_connect": lambda site: Mutation("remove-call", name="SSL_CTX_set_verify"),
    "RAND_bytes": lambda site: Mutation("swap-to-deprecated", site=site, name="RAND_pseudo_bytes"),
}

reports, expected, skipped = {}, {}, 0
for rel, ann in sorted(annotations.items()):
    if ann.expected or not ann.clean:
        continue
    isa = rel.split("/")[0]
    api, site = sorted(ann.clean)[0]
    if api not in MUTATIONS:
        continue
    try:
        mutant, new_ann, _ = inject((root / rel).read_text(), isa, MUTATIONS[api](site), ann, specs)
    except InjectionError:
        # e.g. the wrapped call in ret_depth1 has no compare of its own to remove
        skipped += 1
        continue
    reports[rel] = scan_listing(mutant, isa, specs)
    expected[rel] = new_ann

card = score(reports, expected)
print(len(reports), "mutants scanned,", skipped, "skipped")
print(card.text(), end="")
