"""Hierarchical salient object segmentation."""
from .estimators import HierarchicalPartitionSaliency, SaliencyOverHierarchy
from .exceptions import (
    ConfigError,
    DimensionError,
    EmptyGroundTruth,
    HierSalError,
    ImageFormatError,
    ImageIOError,
    KindMismatch,
    MissingPair,
    NonConvergenceWarning,
    RangeError,
)
from .hierarchy import (
    Hierarchy,
    Partition,
    UcmHierarchy,
    build_bpt,
    extract_partition_stack,
    geometric_targets,
    initial_partition,
    ucm_partition,
)
from .imgcore import load_gray, load_image, rgb_to_lab

__version__ = "0.1.0"

__all__ = [
    "HierarchicalPartitionSaliency",
    "SaliencyOverHierarchy",
    "Hierarchy",
    "Partition",
    "UcmHierarchy",
    "build_bpt",
    "extract_partition_stack",
    "geometric_targets",
    "initial_partition",
    "ucm_partition",
    "load_gray",
    "load_image",
    "rgb_to_lab",
    "ConfigError",
    "DimensionError",
    "EmptyGroundTruth",
    "HierSalError",
    "ImageFormatError",
    "ImageIOError",
    "KindMismatch",
    "MissingPair",
    "NonConvergenceWarning",
    "RangeError",
]
