"""Figure rendering for experiment CSV outputs. Display only: this package
never recomputes physics, it draws what the CSVs contain."""

__version__ = "0.1.0"
