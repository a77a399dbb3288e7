"""Hybrid quantum-classical convolutional network for binary toxicity prediction."""
from __future__ import annotations

__version__ = "0.1.0"
