"""Topical document classification backed by a semantic knowledge base.

Typical use: build an index directory once from a configuration file, then
open a classifier against it and feed it documents.

    from kbtopics import build_index_from_config, load_config, open_classifier

    config = load_config("config.yaml")
    build_index_from_config(config, "index/")
    classifier = open_classifier("index/", config)
    topics = classifier.classify_document(doc)

The ``kbtopics`` console script wraps the same calls.
"""

from .config import AppConfig, load_config, parse_config
from .errors import (
    ConfigError,
    DataError,
    IndexFormatError,
    IndexIntegrityError,
    KbTopicsError,
    PipelineError,
    TripleParseError,
)
from .mentions import Document
from .pipeline import BuildReport, Classifier, build_index_from_config, open_classifier
from .selection import TopicResult

__version__ = "0.1.0"

__all__ = [
    "AppConfig",
    "BuildReport",
    "Classifier",
    "ConfigError",
    "DataError",
    "Document",
    "IndexFormatError",
    "IndexIntegrityError",
    "KbTopicsError",
    "PipelineError",
    "TopicResult",
    "TripleParseError",
    "build_index_from_config",
    "load_config",
    "open_classifier",
    "parse_config",
    "__version__",
]
