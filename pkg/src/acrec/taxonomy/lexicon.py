"""Deterministic keyword classifier used as the offline fallback.

The lexicon is the wheel's intensity words plus a frozen synonym table.
It is a test scaffold with documented behavior, not an attempt at parity
with an LLM classifier: matching is case-insensitive whole-token lookup,
multi-label, with "Other" for statements matching nothing.
"""

from __future__ import annotations

import re

from .wheel import OTHER, wheel

__all__ = ["classify_tokens", "classify_text", "LEXICON"]

_SYNONYMS: dict[str, str] = {
    "love": "Feeling love",
    "loved": "Feeling love",
    "adored": "Feeling love",
    "heartwarming": "Feeling love",
    "tender": "Feeling love",
    "funny": "Amusement",
    "witty": "Amusement",
    "laughed": "Amusement",
    "gripping": "Interest",
    "riveting": "Interest",
    "intrigued": "Interest",
    "captivated": "Interest",
    "compelling": "Interest",
    "hooked": "Interest",
    "creepy": "Fear",
    "chilling": "Fear",
    "frightening": "Fear",
    "eerie": "Fear",
    "dread": "Fear",
    "devastated": "Sadness",
    "cried": "Sadness",
    "tears": "Sadness",
    "grief": "Sadness",
    "heartbreaking": "Sadness",
    "shocked": "Surprise",
    "unexpected": "Surprise",
    "cozy": "Relaxation",
    "comforting": "Relaxation",
    "soothing": "Relaxation",
    "enchanting": "Wonderment",
    "magical": "Wonderment",
    "marveled": "Wonderment",
    "bittersweet": "Longing",
    "thrilled": "Joy",
    "suspenseful": "Tension",
    "suspense": "Tension",
    "thrilling": "Tension",
    "disturbing": "Tension",
    "unsettling": "Tension",
    "empathy": "Compassion",
    "pity": "Compassion",
    "delightful": "Pleasure",
    "uplifting": "Hope",
    "inspiring": "Hope",
}


def _build_lexicon() -> dict[str, frozenset[str]]:
    table: dict[str, set[str]] = {}
    for cat in wheel():
        for word in cat.intensity_levels:
            table.setdefault(word.lower(), set()).add(cat.name)
    for word, cat in _SYNONYMS.items():
        table.setdefault(word.lower(), set()).add(cat)
    return {w: frozenset(cats) for w, cats in table.items()}


LEXICON: dict[str, frozenset[str]] = _build_lexicon()

_TOKEN_RE = re.compile(r"[a-z']+")


def classify_tokens(tokens: list[str]) -> frozenset[str]:
    hits: set[str] = set()
    for tok in tokens:
        cats = LEXICON.get(tok)
        if cats:
            hits.update(cats)
    return frozenset(hits) if hits else frozenset({OTHER})


def classify_text(text: str) -> frozenset[str]:
    """Emotion categories for a statement; {"Other"} when nothing matches."""
    return classify_tokens(_TOKEN_RE.findall(text.lower()))
