"""Long cycles in sparse random multigraphs."""

__version__ = "0.1.0"
