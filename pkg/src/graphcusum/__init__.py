"""Sequential detection of graph topology changes from streams of graph signals."""

__version__ = "0.1.0"
