"""Small shared helpers: durations, digests, canonical JSON."""

from __future__ import annotations

import hashlib
import json
import re

_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(ms|s|m|h)?\s*$")
_UNIT_SECONDS = {"ms": 0.001, "s": 1.0, "m": 60.0, "h": 3600.0, None: 1.0}


def parse_duration(text) -> float:
    """Parse a duration like '5s', '500ms', '1.5m' into seconds.

    Bare numbers are taken as seconds.
    """
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    m = _DURATION_RE.match(str(text))
    if not m:
        raise ValueError(f"invalid duration: {text!r}")
    return float(m.group(1)) * _UNIT_SECONDS[m.group(2)]


def format_number(value) -> str:
    """Decimal rendering of a numeric value: no exponent, no trailing zeros."""
    if isinstance(value, bool):
        raise TypeError("booleans are not numeric parameters")
    if isinstance(value, int):
        return str(value)
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return text if text not in ("", "-") else "0"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_json(obj) -> str:
    """Deterministic JSON rendering used for digests."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest_of(obj) -> str:
    return sha256_bytes(canonical_json(obj).encode("utf-8"))
