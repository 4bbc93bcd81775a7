"""Scenario corpora, annotations, injection and precision/recall scoring."""

from .corpus import (
    ANNOTATIONS,
    GOLDEN_SPEC,
    bench,
    corpus_listings,
    golden_files,
    golden_scenarios,
    golden_spec_text,
    load_annotations,
    run_corpus,
    write_golden,
)
from .harness import (
    Annotation,
    AnnotationError,
    Injection,
    InjectionError,
    Mutation,
    ScoreCard,
    format_annotations,
    inject,
    read_annotations,
    score,
)
from .scenario import ISAS, Rendered, Scenario, ScenarioError, Step, parse_scenarios, render

__all__ = [
    "ANNOTATIONS",
    "GOLDEN_SPEC",
    "ISAS",
    "Annotation",
    "AnnotationError",
    "Injection",
    "InjectionError",
    "Mutation",
    "Rendered",
    "Scenario",
    "ScenarioError",
    "ScoreCard",
    "Step",
    "bench",
    "corpus_listings",
    "format_annotations",
    "golden_files",
    "golden_scenarios",
    "golden_spec_text",
    "inject",
    "load_annotations",
    "parse_scenarios",
    "read_annotations",
    "render",
    "run_corpus",
    "score",
    "write_golden",
]
