"""Deterministic task-specific copy-paste augmentation for COCO instance segmentation."""
from .coco_io import (Category, Dataset, ImageRecord, InstanceAnnotation, parse_dataset,
                      serialize_dataset, validate_dataset)
from .config import AugmentConfig, GridMaskParams, RandAugmentParams, load_config
from .copy_paste import (PlacementConstraint, augment_with_copy_paste, build_constraint,
                         paste_one, sample_instance_counts, sample_placement)
from .object_bank import ObjectBank, ObjectCrop, extract_bank, load_bank, sample_crops, save_bank
from .pipeline import expand_dataset, run_pipeline
from .rng import RngStream, derive_stream

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig",
    "Category",
    "Dataset",
    "GridMaskParams",
    "ImageRecord",
    "InstanceAnnotation",
    "ObjectBank",
    "ObjectCrop",
    "PlacementConstraint",
    "RandAugmentParams",
    "RngStream",
    "augment_with_copy_paste",
    "build_constraint",
    "derive_stream",
    "expand_dataset",
    "extract_bank",
    "load_bank",
    "load_config",
    "parse_dataset",
    "paste_one",
    "run_pipeline",
    "sample_crops",
    "sample_instance_counts",
    "sample_placement",
    "save_bank",
    "serialize_dataset",
    "validate_dataset",
]
