"""Image/phrase similarity scoring service speaking the /v1/score protocol."""

from .app import create_app
from .palette import MODEL_ID, PaletteModel, load_model

__all__ = ["create_app", "load_model", "PaletteModel", "MODEL_ID"]
