"""hopsynth: synthesize multi-hop QA / fact-verification data and evaluate on it."""

__version__ = "0.1.0"
