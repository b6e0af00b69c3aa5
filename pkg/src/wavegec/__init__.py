"""Energy growth envelopes for wave equations with time-dependent speed."""

__version__ = "0.1.0"
