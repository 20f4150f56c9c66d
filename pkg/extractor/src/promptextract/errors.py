class ExtractorError(Exception):
    """Base class for extraction errors."""


class ConfigError(ExtractorError):
    """Invalid template, label words, or model configuration."""


class ExampleError(ExtractorError):
    """A single example could not be processed; carries its id."""

    def __init__(self, example_id, message):
        super().__init__(f"example {example_id}: {message}")
        self.example_id = example_id
