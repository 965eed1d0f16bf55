"""JSON artifact helpers shared by every on-disk format."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

from .errors import FormatVersionMismatch, UnknownArtifactType

FORMAT_VERSION = 1

ARTIFACT_KINDS = ("schema", "tree", "population", "report", "summary")


def dumps(doc: Any) -> str:
    # floats go through repr, which round-trips 64-bit values exactly
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def write_json(path: str | Path, doc: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(doc), encoding="utf-8")
    return path


def read_json(path: str | Path) -> Any:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UnknownArtifactType(
            f"{path}: not a JSON document (parse failed at byte offset {exc.pos}: {exc.msg})",
            offset=exc.pos,
        ) from exc


def check_version(doc: Any, kind: str | None = None) -> None:
    if not isinstance(doc, dict):
        raise UnknownArtifactType("artifact root must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(
            f"format_version {version!r} is not supported (expected {FORMAT_VERSION})"
        )
    if kind is not None and doc.get("kind") != kind:
        raise UnknownArtifactType(f"expected a {kind} artifact, found kind={doc.get('kind')!r}")


def digest(doc: Any) -> str:
    return hashlib.sha256(dumps(doc).encode("utf-8")).hexdigest()
