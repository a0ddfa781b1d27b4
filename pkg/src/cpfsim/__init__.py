"""cpfsim: linear-optical simulation of a heralded high-dimensional
controlled phase-flip gate on OAM-encoded photons."""

__version__ = "0.1.0"
