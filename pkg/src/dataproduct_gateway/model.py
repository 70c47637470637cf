"""Shared vocabulary and canonical serialization helpers.

Everything downstream (catalog documents, governance decisions, query
results, audit records) agrees on these closed value sets and on one
canonical JSON form, so that repeated runs produce bytewise-identical
output.
"""

from __future__ import annotations

import hashlib
import json
import re
from datetime import date
from decimal import ROUND_HALF_UP, Decimal

# Column sensitivity labels, least to most restricted.
CLASSIFICATIONS = ("public", "internal", "confidential", "pii")
CLASSIFICATION_RANK = {name: rank for rank, name in enumerate(CLASSIFICATIONS)}

# Closed purpose taxonomy; serialized exactly as written here.
PURPOSE_CATEGORIES = (
    "analytics",
    "reporting",
    "marketing_outreach",
    "support_operations",
    "research",
    "other",
)

# Column value types understood by contracts, datasets, and the executor.
VALUE_TYPES = ("integer", "decimal2", "text", "boolean", "date")

TWO_PLACES = Decimal("0.01")

_INT_RE = re.compile(r"^-?\d+$")
_DEC2_RE = re.compile(r"^-?\d+(\.\d{1,2})?$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


def parse_decimal2(text: str) -> Decimal:
    """Parse an exact fixed-point value with at most two fraction digits."""
    if not _DEC2_RE.match(text):
        raise ValueError(f"not a 2-place decimal: {text!r}")
    return Decimal(text).quantize(TWO_PLACES)


def round_half_up_2(value: Decimal) -> Decimal:
    """Round to two places; ties go away from zero."""
    return value.quantize(TWO_PLACES, rounding=ROUND_HALF_UP)


def parse_typed_value(text: str, value_type: str):
    """Parse a raw cell into its typed representation.

    integer -> int, decimal2 -> Decimal (2 places), boolean -> bool,
    date -> 'YYYY-MM-DD' string (validated, compared lexically), text -> str.
    """
    if value_type == "integer":
        if not _INT_RE.match(text):
            raise ValueError(f"not an integer: {text!r}")
        return int(text)
    if value_type == "decimal2":
        return parse_decimal2(text)
    if value_type == "boolean":
        lowered = text.lower()
        if lowered not in ("true", "false"):
            raise ValueError(f"not a boolean: {text!r}")
        return lowered == "true"
    if value_type == "date":
        if not _DATE_RE.match(text):
            raise ValueError(f"not an ISO-8601 date: {text!r}")
        date.fromisoformat(text)
        return text
    if value_type == "text":
        return text
    raise ValueError(f"unknown value type: {value_type!r}")


def jsonable(value):
    """Map a typed value onto its JSON wire form.

    decimal2 travels as a string with exactly two fraction digits so no
    consumer ever sees a binary-float artifact.
    """
    if isinstance(value, Decimal):
        return str(value.quantize(TWO_PLACES))
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    return value


def canonical_json(obj) -> str:
    """Canonical JSON: lexicographically sorted keys, no insignificant
    whitespace, UTF-8-friendly (no ASCII escaping)."""
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(data) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()
