"""Deterministic synthetic videos for temporal reasoning, with verifiable QA."""

__version__ = "0.1.0"
GENERATOR_VERSION = f"tempsynth-{__version__}"
