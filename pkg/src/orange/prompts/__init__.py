"""Versioned prompt templates shipped as package text assets."""

from __future__ import annotations

from importlib import resources

PROMPT_VERSION = "v1"


def load_prompt(name: str) -> str:
    """Return the text of a template, e.g. ``load_prompt("parser_plan")``."""
    filename = f"{name}_{PROMPT_VERSION}.txt"
    return resources.files(__package__).joinpath(filename).read_text(encoding="utf-8")
