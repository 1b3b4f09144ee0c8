"""Versioned prompt templates shipped as package data.

Builders must use these templates unmodified; checksums are recorded in
shift reports so an auditor can tie a report to the exact prompt text.
"""

from __future__ import annotations

import hashlib
from functools import cache
from importlib import resources

__all__ = ["TEMPLATE_NAMES", "load_template", "template_checksums"]

TEMPLATE_NAMES = (
    "pass1_system.txt",
    "pass2_system.txt",
    "pass3_system.txt",
    "pass3_reconciliation.txt",
    "pass3_output_format.txt",
    "pov_addendum.txt",
    "wall_addendum.txt",
)


@cache
def load_template(name: str) -> str:
    if name not in TEMPLATE_NAMES:
        raise KeyError(f"unknown template {name!r}")
    return (resources.files(__package__) / "prompts" / name).read_text(encoding="utf-8")


@cache
def template_checksums() -> dict[str, str]:
    """sha256 hex digest of every shipped template."""
    return {
        name: hashlib.sha256(load_template(name).encode("utf-8")).hexdigest()
        for name in TEMPLATE_NAMES
    }
