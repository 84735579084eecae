"""Validation, reshaping, mapping and sharing tools for PHES-ODM v3 datasets."""
from .dictionary import Dictionary, bundled_dictionary, load_dictionary
from .findings import Finding, ValidationReport
from .ingest import Dataset, read_dataset, write_dataset
from .validate import validate_dataset

__all__ = [
    "Dataset",
    "Dictionary",
    "Finding",
    "ValidationReport",
    "bundled_dictionary",
    "load_dictionary",
    "read_dataset",
    "validate_dataset",
    "write_dataset",
]
__version__ = "0.1.0"
