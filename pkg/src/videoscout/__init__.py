"""videoscout: long-video question answering by anchor-guided tree search."""

__version__ = "0.1.0"
