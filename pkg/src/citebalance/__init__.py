"""Audit gendered citation imbalance in bibliographic corpora."""

__version__ = "0.1.0"
