"""Figure rendering for surfmimo sweep CSVs."""

__version__ = "0.1.0"
