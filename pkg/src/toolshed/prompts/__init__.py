"""Default prompt templates shipped as package data.

Templates are plain text files with ``{placeholder}`` slots. They are
deliberately generic; production deployments are expected to override them
with domain-tuned variants via the transformer configuration.
"""

from __future__ import annotations

from importlib import resources

TEMPLATE_NAMES = (
    "synthetic_questions",
    "key_topics",
    "decomposition",
    "expansion",
    "intent_reranker",
    "combined_reranker",
    "structuring",
)


def load_default_template(name: str) -> str:
    """Return the text of a bundled template by short name."""
    if name not in TEMPLATE_NAMES:
        raise KeyError(f"unknown template {name!r} (expected one of {TEMPLATE_NAMES})")
    return (
        resources.files(__package__).joinpath(f"{name}.txt").read_text(encoding="utf-8")
    )
