"""Pattern-conditioned neural mask filters and their training machinery."""

from .backend import COMPILED_AVAILABLE, backend_name

__all__ = ["COMPILED_AVAILABLE", "backend_name"]
