"""Experiment drivers, imaging helpers and the command-line interface."""
from ..haar import haar_analysis, haar_synthesis

__all__ = ["haar_analysis", "haar_synthesis"]
