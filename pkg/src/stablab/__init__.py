"""Stability experiments for fine-tuned linear heads and quadratic surrogates."""

__version__ = "0.1.0"
FORMAT_VERSION = "1"
