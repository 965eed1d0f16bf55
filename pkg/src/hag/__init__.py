"""Topic-adaptive agent population generation grounded in survey records, with alignment metrics."""

__version__ = "0.1.0"
