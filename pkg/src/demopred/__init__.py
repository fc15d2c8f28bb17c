"""Demographic prediction from movie-rating histories."""

__version__ = "0.1.0"

from .errors import DemopredError, ParseError, ValidationError
from .ingest import Dataset, assemble_dataset, load_movielens, reduce_age

__all__ = [
    "__version__",
    "DemopredError",
    "ParseError",
    "ValidationError",
    "Dataset",
    "assemble_dataset",
    "load_movielens",
    "reduce_age",
]
