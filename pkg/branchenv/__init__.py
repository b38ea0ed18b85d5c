"""Analysis and simulation of multi-type branching processes in varying environments."""

__version__ = "0.1.0"
