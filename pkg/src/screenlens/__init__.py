"""Screenshot text extraction, OCR evaluation, and BM25 screenshot search."""

from .docmodel import ScreenshotDocument, from_xml, link_timeline, make_id, to_xml
from .imaging import (
    BinaryImage,
    BoundingBox,
    GrayImage,
    RasterImage,
    SegmentationParams,
    segment,
)
from .index import InvertedIndex, SearchHit, analyze
from .metrics import cer, edit_counts, evaluate_corpus, evaluate_pair, per, wer
from .ocr import ExtractedText, OcrEngineConfig, extract_text, strip_banner

__version__ = "0.1.0"

__all__ = [
    "BinaryImage",
    "BoundingBox",
    "ExtractedText",
    "GrayImage",
    "InvertedIndex",
    "OcrEngineConfig",
    "RasterImage",
    "ScreenshotDocument",
    "SearchHit",
    "SegmentationParams",
    "analyze",
    "cer",
    "edit_counts",
    "evaluate_corpus",
    "evaluate_pair",
    "extract_text",
    "from_xml",
    "link_timeline",
    "make_id",
    "per",
    "segment",
    "strip_banner",
    "to_xml",
    "wer",
]
