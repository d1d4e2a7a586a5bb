"""Supervised contrastive anomaly scoring toolkit."""

__version__ = "0.1.0"
