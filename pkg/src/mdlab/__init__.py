"""Multiple-description coding laboratory: structured codes, region systems and Monte Carlo experiments."""

__version__ = "0.1.0"
