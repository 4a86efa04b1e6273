from .export import (
    EncoderLoadError,
    ExportError,
    ExportManifest,
    TruncationWarning,
    export,
)

__all__ = [
    "EncoderLoadError",
    "ExportError",
    "ExportManifest",
    "TruncationWarning",
    "export",
]
