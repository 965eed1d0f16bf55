"""Pulling JSON objects out of chatty model output."""

from __future__ import annotations

import json
import re
from collections.abc import Iterable, Sequence
from typing import Any

from ..errors import NoJsonFound, SchemaMismatch

_FENCE = re.compile(r"```(?:json|JSON)?\s*\n?(.*?)```", re.DOTALL)
_TRAILING_COMMA = re.compile(r",\s*([}\]])")
_decoder = json.JSONDecoder()


def _first_object(text: str) -> dict | None:
    start = text.find("{")
    while start != -1:
        chunk = text[start:]
        for candidate in (chunk, _TRAILING_COMMA.sub(r"\1", chunk)):
            try:
                obj, _ = _decoder.raw_decode(candidate)
            except json.JSONDecodeError:
                continue
            if isinstance(obj, dict):
                return obj
        start = text.find("{", start + 1)
    return None


def parse_structured(raw: str, required: Sequence[str] = ()) -> dict[str, Any]:
    """Return the first well-formed JSON object in ``raw``.

    Fenced code blocks are tried first, then the raw text.  Prose before or
    after the object is ignored, and trailing commas are forgiven.
    """
    if not isinstance(raw, str):
        raise NoJsonFound(f"expected text, got {type(raw).__name__}")
    candidates = [m.group(1) for m in _FENCE.finditer(raw)] + [raw]
    for text in candidates:
        obj = _first_object(text)
        if obj is not None:
            missing = [k for k in required if k not in obj]
            if missing:
                raise SchemaMismatch(f"JSON object lacks required key(s): {', '.join(missing)}")
            return obj
    raise NoJsonFound("no JSON object found in response")


def normalize(weights: Iterable[float]) -> list[float]:
    weights = [float(w) for w in weights]
    total = sum(weights)
    if total <= 0:
        raise ValueError("weights must have a positive sum")
    return [w / total for w in weights]
