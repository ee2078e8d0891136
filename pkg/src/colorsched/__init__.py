"""WCET-aware cache coloring and cache-partition allocation for EDF task sets."""

__version__ = "0.1.0"
