"""Map-lite hierarchical navigation: two-level maps, planning, intentions,
a memory-based imitation controller and a small deterministic simulator."""

__version__ = "0.1.0"
