"""Frozen-backbone image feature exporter producing EMB1 embedding files."""

from embexport.backbones import SUPPORTED, UnknownBackboneError, load_backbone
from embexport.exporter import (
    DisjointnessError,
    ExportConfig,
    ExportResult,
    class_id_map,
    export,
    read_class_list,
)

__version__ = "0.1.0"

__all__ = [
    "SUPPORTED",
    "DisjointnessError",
    "ExportConfig",
    "ExportResult",
    "UnknownBackboneError",
    "class_id_map",
    "export",
    "load_backbone",
    "read_class_list",
]
