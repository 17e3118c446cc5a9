"""The emotion wheel: 26 named categories plus an "Other" catch-all.

The base set extends the Geneva Emotion Wheel's twenty families with six
categories observed in reader reviews: Contentment, Gratitude, Hatred,
Hope, Relaxation, and Tension. The horizontal axis is valence (negative
left, positive right), the vertical axis is control (low bottom, high
top), and each spoke carries intensity words ordered center to rim.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["EmotionCategory", "wheel", "category_names", "ADDED_CATEGORIES", "OTHER"]

ADDED_CATEGORIES = ("Contentment", "Gratitude", "Hatred", "Hope", "Relaxation", "Tension")
OTHER = "Other"


@dataclass(frozen=True)
class EmotionCategory:
    name: str
    valence: str  # negative | positive
    control: str  # low | high
    intensity_levels: tuple[str, ...]  # center -> rim
    is_other: bool = False

    def to_payload(self) -> dict:
        return {
            "name": self.name,
            "valence": self.valence,
            "control": self.control,
            "intensity_levels": list(self.intensity_levels),
            "is_other": self.is_other,
        }


# (name, valence, control, intensity words center->rim)
_WHEEL_TABLE = (
    ("Interest", "positive", "high", ("curious", "interested", "engrossed", "fascinated")),
    ("Amusement", "positive", "high", ("amused", "entertained", "laughing", "hilarious")),
    ("Pride", "positive", "high", ("gratified", "proud", "triumphant")),
    ("Joy", "positive", "high", ("glad", "happy", "joyful", "elated")),
    ("Pleasure", "positive", "high", ("pleased", "delighted", "blissful")),
    ("Hope", "positive", "high", ("hopeful", "optimistic", "encouraged")),
    ("Feeling love", "positive", "low", ("fond", "affectionate", "loving", "adoring")),
    ("Wonderment", "positive", "low", ("impressed", "amazed", "awed", "awestruck")),
    ("Relief", "positive", "low", ("relieved", "unburdened", "soothed")),
    ("Surprise", "positive", "low", ("surprised", "startled", "astonished", "stunned")),
    ("Longing", "positive", "low", ("wistful", "longing", "yearning", "nostalgic")),
    ("Contentment", "positive", "low", ("content", "contented", "satisfied", "fulfilled")),
    ("Relaxation", "positive", "low", ("relaxed", "calm", "serene", "tranquil")),
    ("Gratitude", "positive", "low", ("thankful", "grateful", "appreciative")),
    ("Compassion", "negative", "low", ("sympathetic", "compassionate", "moved")),
    ("Sadness", "negative", "low", ("sad", "melancholy", "sorrowful", "heartbroken")),
    ("Fear", "negative", "low", ("worried", "anxious", "scared", "terrified")),
    ("Shame", "negative", "low", ("embarrassed", "ashamed", "humiliated")),
    ("Guilt", "negative", "low", ("remorseful", "guilty", "repentant")),
    ("Disappointment", "negative", "low", ("disappointed", "disillusioned", "dismayed")),
    ("Envy", "negative", "high", ("envious", "jealous", "covetous")),
    ("Disgust", "negative", "high", ("disgusted", "repulsed", "revolted")),
    ("Contempt", "negative", "high", ("disdainful", "contemptuous", "scornful")),
    ("Anger", "negative", "high", ("irritated", "annoyed", "angry", "furious")),
    ("Hatred", "negative", "high", ("hostile", "hateful", "loathing")),
    ("Tension", "negative", "high", ("tense", "stressed", "strained", "overwhelmed")),
)

_WHEEL = tuple(
    EmotionCategory(name, valence, control, words) for name, valence, control, words in _WHEEL_TABLE
) + (EmotionCategory(OTHER, "positive", "low", (), is_other=True),)


def wheel() -> tuple[EmotionCategory, ...]:
    """All 27 categories; "Other" is last and flagged."""
    return _WHEEL


def category_names() -> tuple[str, ...]:
    return tuple(c.name for c in _WHEEL)


def wheel_payload() -> dict:
    """Shape consumed by the selection UI via GET /wheel."""
    return {"categories": [c.to_payload() for c in _WHEEL]}
