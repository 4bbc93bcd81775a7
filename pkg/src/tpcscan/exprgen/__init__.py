"""Natural-language API documentation to programming expressions."""

from .compiler import (
    Ambiguous,
    NoMatch,
    compile_corpus,
    compile_sentence,
    match_template,
    normalize,
    read_corpus,
    tokenize,
)
from .patterns import (
    FIELDS,
    Lexicon,
    PatternDB,
    PatternError,
    PhrasePattern,
    check_pattern,
    default_db,
    expand_patterns,
    load_lexicon,
    parse_patterns,
    synonym_variants,
    voice_swap,
)

__all__ = [
    "Ambiguous",
    "FIELDS",
    "Lexicon",
    "NoMatch",
    "PatternDB",
    "PatternError",
    "PhrasePattern",
    "check_pattern",
    "compile_corpus",
    "compile_sentence",
    "default_db",
    "expand_patterns",
    "load_lexicon",
    "match_template",
    "normalize",
    "parse_patterns",
    "read_corpus",
    "synonym_variants",
    "tokenize",
    "voice_swap",
]
