"""Composite document identifiers.

An indexed sign is addressed as ``<video_id>_<annotation_id>``.  The single
underscore is the separator, so neither component may contain one; that is
validated at ingest time and again here.
"""

from __future__ import annotations

from .errors import InvalidDocId

SEPARATOR = "_"


def validate_component(value: str, kind: str) -> str:
    if not value:
        raise InvalidDocId(f"{kind} must be non-empty")
    if SEPARATOR in value:
        raise InvalidDocId(
            f"{kind} {value!r} must not contain {SEPARATOR!r} (doc-id separator)"
        )
    return value


def make_doc_id(video_id: str, annotation_id: str) -> str:
    validate_component(video_id, "video_id")
    validate_component(annotation_id, "annotation_id")
    return f"{video_id}{SEPARATOR}{annotation_id}"


def split_doc_id(doc_id: str) -> tuple[str, str]:
    """Inverse of make_doc_id; raises InvalidDocId if not of the composite form."""
    parts = doc_id.split(SEPARATOR)
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise InvalidDocId(f"not a <video_id>_<annotation_id> doc id: {doc_id!r}")
    return parts[0], parts[1]
