"""Searching defensible pipelines for convenient explanations, and auditing
reported explanation metrics against the search distribution."""

__version__ = "0.1.0"
