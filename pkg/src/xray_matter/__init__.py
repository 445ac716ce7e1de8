"""X-ray/matter interaction observables in atomic units."""

__version__ = "0.1.0"
