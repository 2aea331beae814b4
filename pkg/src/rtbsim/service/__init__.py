"""HTTP service wrapping the simulation package."""

from .app import app

__all__ = ["app"]
