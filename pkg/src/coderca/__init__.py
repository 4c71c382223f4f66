"""Code-aware root cause analysis for distributed-system issue reports."""

__version__ = "0.1.0"
