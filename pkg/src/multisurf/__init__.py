"""multisurf: recognition-then-reasoning over multimodal surface-sensing data.

Recognition covers radar tables (local RF / linear SVM) and microscope or
multispectral images (a multimodal model prompted zero- or one-shot).
Reasoning ranks sensing methods for a usage scenario under posture and
hardware constraints.
"""

from .errors import MultiSurfError
from .ingest import (
    DatasetManifest,
    ImageCorpus,
    ImageSample,
    RadarTable,
    ValidationReport,
    load_image_corpus,
    load_manifest,
    load_radar_table,
    validate_dataset,
)
from .prompt import (
    TEMPLATE_VERSION,
    RenderedPrompt,
    ShotStrategy,
    render_csv_prompt,
    render_document_prompt,
    render_image_prompt,
    sample_exemplars,
)

__version__ = "0.1.0"

__all__ = [
    "DatasetManifest",
    "ImageCorpus",
    "ImageSample",
    "MultiSurfError",
    "RadarTable",
    "RenderedPrompt",
    "ShotStrategy",
    "TEMPLATE_VERSION",
    "ValidationReport",
    "load_image_corpus",
    "load_manifest",
    "load_radar_table",
    "render_csv_prompt",
    "render_document_prompt",
    "render_image_prompt",
    "sample_exemplars",
    "validate_dataset",
]
