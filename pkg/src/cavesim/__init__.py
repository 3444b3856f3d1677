"""Deterministic headless simulator and evaluation harness for
caveline-following underwater robots."""

__version__ = "0.1.0"

from .accel import BACKEND

__all__ = ["BACKEND", "__version__"]
