"""acrec: rank books against user-described affective-cognitive states."""

__version__ = "0.1.0"
