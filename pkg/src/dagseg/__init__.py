"""Character-based word segmentation with DAG-structured LSTMs over word lattices."""

from dagseg.corpus import Sentence, SegMetrics, Tag, Vocabulary
from dagseg.errors import (
    ConfigError,
    DagsegError,
    DataError,
    InputError,
    NumericError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DagsegError",
    "DataError",
    "InputError",
    "NumericError",
    "SegMetrics",
    "Sentence",
    "Tag",
    "Vocabulary",
]
