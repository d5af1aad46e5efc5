"""Classify MongoDB query-log entries as injection or benign."""

__version__ = "0.1.0"
