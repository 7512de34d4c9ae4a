"""Controller auto-tuning with scenario-based certification."""

__version__ = "0.1.0"
