"""
From documentation sentences to programming expressions
=======================================================

Compile API documentation sentences with the pattern database, print the
resulting spec file and the sentences nothing matched.
"""

from tpcscan.exprgen import compile_corpus, compile_sentence, default_db
from tpcscan.specs import format_spec_set

db = default_db()
print(len(db), "patterns after synonym and voice expansion")

# a single sentence gives an expression, a NoMatch or an Ambiguous result
print(compile_sentence("The x509 object must be explicitly freed using X509_free.", "X509_new", db))
print(compile_sentence("This function is thread safe.", "X509_new", db).reason)

docs = [
    ("BN_CTX_get", "This function returns NULL on failure."),
    ("SSL_read", "The return value should be greater than or equal to 0."),
    ("SSL_do_handshake", "If SSL_do_handshake() returns 0, call SSL_get_error()."),
    ("SSL_connect", "SSL_CTX_set_verify must be called before this function."),
    ("RAND_bytes", "Nothing to see here."),
]
specs, unmatched = compile_corpus(docs, db, tpc="openssl")
print(format_spec_set(specs), end="")
for u in unmatched:
    print("unmatched:", u.api, "-", u.reason)
