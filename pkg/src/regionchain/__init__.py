"""Multi-region grounding, relation-aware reasoning chains, and VQA evaluation."""

__version__ = "0.1.0"
