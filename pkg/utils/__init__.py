# Utility modules
from .errors import (
    ReaderError, DimensionError, ParameterError, ConfigurationError, VocabularyError,
    LabelError, EmptyInputError, InputError, ParseError, SchemaError, CheckpointError,
    DivergenceError, ForwardError,
)
from .io import atomic_write, write_json, read_json

__all__ = [
    'ReaderError', 'DimensionError', 'ParameterError', 'ConfigurationError', 'VocabularyError',
    'LabelError', 'EmptyInputError', 'InputError', 'ParseError', 'SchemaError', 'CheckpointError',
    'DivergenceError', 'ForwardError', 'atomic_write', 'write_json', 'read_json',
]
