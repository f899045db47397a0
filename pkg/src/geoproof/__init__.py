"""Verifier-guided geometry proof generation on FormalGeo-style problems."""

__version__ = "0.1.0"
