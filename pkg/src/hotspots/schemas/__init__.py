"""JSON schemas for every JSON document the package writes."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema

SCHEMAS = ("solution_summary", "report", "suite_report", "fit_report", "scan")


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    if name not in SCHEMAS:
        raise KeyError(f"unknown schema {name!r}")
    text = resources.files(__name__).joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(document: dict, name: str) -> None:
    """Raise ``jsonschema.ValidationError`` if ``document`` does not match schema ``name``."""
    jsonschema.validate(document, load_schema(name))
