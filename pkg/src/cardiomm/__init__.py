"""Text-conditioned unrolled reconstruction for accelerated cardiac MRI."""

__version__ = "0.1.0"
