"""Listing parser and fact extraction for x86_64, arm32 and mips32."""

from .encode import emit_initial_facts
from .isa import ARM32, MIPS32, PROFILES, X86_64, IsaProfile, get_profile
from .listing import Function, Instruction, ListingError, ListingModel, Operand, parse_listing
from .schema import INITIAL, SCHEMA, USAGE, declarations
from .usage import DEFAULT_WINDOW, emit_usage_facts
from ..datalog import merge_stores


def extract_facts(model: ListingModel, window: int = DEFAULT_WINDOW):
    """Initial and usage facts of a listing in one store."""
    return merge_stores(emit_initial_facts(model), emit_usage_facts(model, window))


__all__ = [
    "ARM32",
    "DEFAULT_WINDOW",
    "INITIAL",
    "MIPS32",
    "PROFILES",
    "SCHEMA",
    "USAGE",
    "X86_64",
    "Function",
    "Instruction",
    "IsaProfile",
    "ListingError",
    "ListingModel",
    "Operand",
    "declarations",
    "emit_initial_facts",
    "emit_usage_facts",
    "extract_facts",
    "get_profile",
    "merge_stores",
    "parse_listing",
]
