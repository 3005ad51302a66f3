"""Shot-aware batch scheduling and helper-qubit multiplexing for shared quantum devices."""

__version__ = "0.1.0"
