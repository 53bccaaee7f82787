"""Memory-safety shape analyzer for programs manipulating unbounded linked lists."""

__version__ = "0.1.0"
