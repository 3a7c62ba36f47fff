"""CLIP image-encoder export tooling for the slide scoring engine."""

from .exporter import (
    DownloadError,
    ExportError,
    ExportResult,
    ExportShapeMismatch,
    ExportSpec,
    bundled_test_image,
    export_model,
    preprocess,
    write_manifest,
)

__version__ = "0.1.0"
