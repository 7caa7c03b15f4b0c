"""Seedable hypothesis-verification worlds and agents."""

from veriworld.grammar import (
    ENV_IDS,
    Hypothesis,
    SemanticForm,
    TemplateLibrary,
    library,
    load_template_library,
)

__all__ = [
    "ENV_IDS",
    "Hypothesis",
    "SemanticForm",
    "TemplateLibrary",
    "library",
    "load_template_library",
]

__version__ = "0.1.0"
