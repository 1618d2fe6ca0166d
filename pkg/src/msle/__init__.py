"""Multiple SLE partition functions, level-line probabilities and their numerical checks."""

__version__ = "0.1.0"
