"""Prompt-based feature extraction from frozen language models."""

from .errors import ConfigError, ExampleError, ExtractorError
from .io import read_examples, write_calibration, write_feature_file
from .prompts import DEFAULT_TEMPLATES, MASK_MARKER, PromptSpec, load_template_file
from .runner import Example, FeatureExtractor

__all__ = [
    "ConfigError",
    "DEFAULT_TEMPLATES",
    "Example",
    "ExampleError",
    "ExtractorError",
    "FeatureExtractor",
    "MASK_MARKER",
    "PromptSpec",
    "load_template_file",
    "read_examples",
    "write_calibration",
    "write_feature_file",
]
