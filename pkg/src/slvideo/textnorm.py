"""Text normalization used for gloss matching and relevance judgments.

Matching must be insensitive to case and to Portuguese diacritics, so a
query like "duvida" hits a gloss stored as "Dúvida".
"""

from __future__ import annotations

import unicodedata


def normalize(text: str) -> str:
    """Canonical-decompose, drop combining marks, casefold.

    Idempotent: normalize(normalize(x)) == normalize(x).
    """
    decomposed = unicodedata.normalize("NFD", text)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return stripped.casefold()
