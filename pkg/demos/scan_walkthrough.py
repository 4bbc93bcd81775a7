"""
Scanning one listing, stage by stage
====================================

Parse an x86_64 listing, look at the facts it produces, then run the
checkers against a small set of programming expressions.
"""

from tpcscan.checkers import run_all
from tpcscan.facts import extract_facts, parse_listing
from tpcscan.report import config_for
from tpcscan.specs import parse_spec_file

listing = """
FUNC main @ 1000
1000  push   rbp
1004  mov    rbp, rsp
1008  call   SSL_write
100c  test   eax, eax
1010  jl     .fail
1014  call   SSL_new
1018  call   SSL_connect
.fail:
101c  leave
1020  ret
"""

specs = parse_spec_file("""
openssl SSL_write: CHECK_RET(le, 0)
openssl SSL_connect: CALL_BEFORE(SSL_CTX_set_verify)
""")

# the listing model keeps functions, instructions and local labels
model = parse_listing(listing, "x86_64")
print(len(model.functions), "function,", sum(1 for _ in model.instructions()), "instructions")

# usage facts describe what happens around every call
store = extract_facts(model)
for rel in ("call_site", "ret_reg_checked", "nearest_call_before"):
    for tup in store.sorted_tuples(rel):
        print(rel, tup)

# SSL_write is tested with "< 0", which lets 0 through; SSL_connect has no
# SSL_CTX_set_verify before it
for v in run_all(store, specs, config_for("x86_64")):
    print(f"0x{v.site:x}  {v.category:<12} {v.api:<12} {v.kind:<16} {v.expression_text()}")
