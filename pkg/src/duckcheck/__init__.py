"""duckcheck: refinement type checker, refinement-logic engine, and
interpreter for a dictionary-based functional core language, with SMT-backed
subtyping."""

__version__ = "0.1.0"
