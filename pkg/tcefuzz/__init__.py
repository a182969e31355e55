"""Type-centric fuzzing of a compiler for the toy language TL."""

__version__ = "1.0.0"
