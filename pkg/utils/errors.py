"""
Errors - Exception hierarchy for the reader stack.

Every failure the library raises on purpose derives from ReaderError,
so the CLI can tell input problems (exit 1) from numerical ones (exit 2).
"""

from typing import Optional


class ReaderError(Exception):
    """Base class for all expected failures."""


class DimensionError(ReaderError, ValueError):
    """Tensor shapes do not line up."""


class ParameterError(ReaderError, ValueError):
    """A numeric argument is out of its allowed range."""


class ConfigurationError(ReaderError, ValueError):
    """Invalid model/run configuration."""


class VocabularyError(ReaderError, ValueError):
    """Token id outside the vocabulary."""


class LabelError(ReaderError, ValueError):
    """Gold index outside the passage."""


class EmptyInputError(ReaderError, ValueError):
    """An operation received zero-length input."""


class InputError(ReaderError):
    """Bad user-supplied data (duplicate ids, unknown ids, ...)."""


class ParseError(ReaderError):
    """A file could not be parsed."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class SchemaError(ReaderError):
    """A required field is missing from an input record."""

    def __init__(self, field: str, where: str = ""):
        location = f" in {where}" if where else ""
        super().__init__(f"missing field '{field}'{location}")
        self.field = field


class CheckpointError(ReaderError):
    """Checkpoint file is unreadable or does not match the model."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class DivergenceError(ReaderError):
    """Training loss stopped being finite."""

    def __init__(self, step: int, loss: float, detail: Optional[str] = None):
        message = f"loss became {loss} at step {step}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)
        self.step = step
        self.loss = loss


class ForwardError(ReaderError):
    """A module failed while running the forward pass for one example."""

    def __init__(self, example_id: str, cause: Exception):
        super().__init__(f"example {example_id}: {cause}")
        self.example_id = example_id
