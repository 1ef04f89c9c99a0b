"""Command line, experiment files, data ingestion and benchmark sweeps."""

from .config import ExperimentSpec, load_spec, parse_spec
from .io import (DataError, load_adjacency, preprocess_correlation, preprocess_counts,
                 read_labels, write_labels)
from .sweep import run_sweep

__all__ = [
    "ExperimentSpec",
    "load_spec",
    "parse_spec",
    "DataError",
    "load_adjacency",
    "preprocess_correlation",
    "preprocess_counts",
    "read_labels",
    "write_labels",
    "run_sweep",
]
