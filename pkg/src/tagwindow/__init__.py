"""Windowed Yule-Simon tagging: simulation and stream analytics."""

__version__ = "0.1.0"

from .model import EmptyStream, Entry, Lexicon, Stream, make_entry, window_size  # noqa: E402

__all__ = ["EmptyStream", "Entry", "Lexicon", "Stream", "make_entry", "window_size", "__version__"]
