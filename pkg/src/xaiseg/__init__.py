"""Explainable segmentation toolkit for visual quality inspection loops."""

__version__ = "0.1.0"

from .cam import DISPLAY_NAMES, METHOD_KEYS, ExplanationMap, explain
from .coco import CocoDataset, parse_coco, write_coco
from .metrics import ComparisonReport, EvaluationRow, evaluate_methods, mean_iou
from .model import ScoreMaps, ToyNet, TrainConfig, dice_loss, train_toy
from .pipeline import RunConfig, select_core_method
from .synth import SynthConfig, generate

__all__ = [
    "DISPLAY_NAMES",
    "METHOD_KEYS",
    "ExplanationMap",
    "explain",
    "CocoDataset",
    "parse_coco",
    "write_coco",
    "ComparisonReport",
    "EvaluationRow",
    "evaluate_methods",
    "mean_iou",
    "ScoreMaps",
    "ToyNet",
    "TrainConfig",
    "dice_loss",
    "train_toy",
    "RunConfig",
    "select_core_method",
    "SynthConfig",
    "generate",
]
