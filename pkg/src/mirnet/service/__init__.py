"""HTTP facade over the package: pydantic schemas plus the FastAPI app."""

from .app import app

__all__ = ["app"]
