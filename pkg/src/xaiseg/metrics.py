"""Explanation scoring and segmentation quality.

Plausibility: energy inside the ground truth (EBPG), thresholded-map IoU,
and top-N precision against the ground-truth box. Faithfulness: confidence
Drop/Increase under explanation-masked inputs. Segmentation quality:
per-class IoU pooled over a split plus its unweighted mean.

Metrics that are undefined for a sample (zero-energy map, empty ground
truth) return None and are excluded from averages with their counts
reported, never scored as 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cam
from .coco import CocoDataset, annotation_to_mask, mask_to_bbox


class MetricsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# per-sample metrics


def _check_map(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise MetricsError(f"explanation map must be 2-D, got {v.shape}")
    if v.min() < 0.0 or v.max() > 1.0:
        raise MetricsError("explanation map must lie in [0, 1]")
    return v


def ebpg(values, gt_mask) -> float | None:
    """Share of total map energy inside the ground truth, in percent."""
    v = _check_map(values)
    gt = np.asarray(gt_mask, dtype=bool)
    if gt.shape != v.shape:
        raise MetricsError("map and ground truth dimensions differ")
    total = v.sum()
    if total == 0.0 or not gt.any():
        return None
    return float(100.0 * v[gt].sum() / total)


def explanation_iou(values, gt_mask, threshold: float = 0.5) -> float | None:
    """IoU between the thresholded map (>= threshold) and the ground truth."""
    v = _check_map(values)
    gt = np.asarray(gt_mask, dtype=bool)
    if gt.shape != v.shape:
        raise MetricsError("map and ground truth dimensions differ")
    binary = v >= threshold
    union = binary | gt
    if not union.any():
        return None
    return float(100.0 * (binary & gt).sum() / union.sum())


def bbox_score(values, gt_bbox) -> float | None:
    """Precision of the top-N map pixels against the box, N = box area.

    Ties are broken in row-major order so the score is deterministic.
    """
    v = _check_map(values)
    x, y, w, h = (int(round(c)) for c in gt_bbox)
    n = w * h
    if n < 1:
        raise MetricsError("ground-truth box must have area >= 1")
    if v.sum() == 0.0:
        return None
    flat = v.ravel()
    top = np.argsort(-flat, kind="stable")[:n]
    rows, cols = np.unravel_index(top, v.shape)
    inside = (cols >= x) & (cols < x + w) & (rows >= y) & (rows < y + h)
    return float(100.0 * inside.sum() / n)


def drop_from_scores(original: float, masked: float) -> float:
    """100 * max(0, y - o) / y."""
    if original <= 0.0:
        raise MetricsError("original confidence must be positive")
    return 100.0 * max(0.0, original - masked) / original


def drop_increase(model, image, values, class_id: int, region) -> tuple[float, bool]:
    """Confidence Drop (%) and Increase flag under the explanation mask.

    The region comes from the original prediction and is held fixed; the
    masked input is image * map, with the map replicated over channels.
    Uses softmax probabilities, which are always positive, so the division
    is well-defined.
    """
    v = _check_map(values)
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise MetricsError("empty region")
    image = np.asarray(image, dtype=np.float64)
    original = float(model.forward(image).probabilities[class_id][region].mean())
    masked_input = image * v[None, :, :]
    masked = float(model.forward(masked_input).probabilities[class_id][region].mean())
    return drop_from_scores(original, masked), masked > original


def seg_iou(pred_mask, gt_mask) -> float | None:
    """100 * |pred & gt| / |pred | gt|; None when both masks are empty."""
    p = np.asarray(pred_mask, dtype=bool)
    g = np.asarray(gt_mask, dtype=bool)
    if p.shape != g.shape:
        raise MetricsError("mask dimensions differ")
    union = (p | g).sum()
    if union == 0:
        return None
    return float(100.0 * (p & g).sum() / union)


def mean_iou(per_class) -> float:
    values = [v for v in per_class]
    if not values:
        raise MetricsError("per-class list must be nonempty")
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# dataset-level evaluation


@dataclass
class EvaluationRow:
    method: str
    ebpg: float | None
    bbox: float | None
    iou: float | None
    drop: float | None
    increase: float | None
    time_s: float
    samples: int = 0
    undefined: dict = field(default_factory=dict)


def category_channels(dataset: CocoDataset) -> dict[int, int]:
    """Category id -> model channel; channel 0 is background."""
    return {c.id: i + 1 for i, c in enumerate(sorted(dataset.categories, key=lambda c: c.id))}


def gt_masks_for_image(dataset: CocoDataset, image_id: int) -> dict[int, np.ndarray]:
    """Union of annotation masks per category for one image."""
    info = dataset.image_by_id(image_id)
    masks: dict[int, np.ndarray] = {}
    for ann in dataset.annotations_for_image(image_id):
        m = annotation_to_mask(ann, info.height, info.width)
        if ann.category_id in masks:
            masks[ann.category_id] |= m
        else:
            masks[ann.category_id] = m
    return {cid: m for cid, m in masks.items() if m.any()}


def evaluate_methods(
    model,
    dataset: CocoDataset,
    images: dict[int, np.ndarray],
    methods=cam.METHOD_KEYS,
    iou_threshold: float = 0.5,
) -> list[EvaluationRow]:
    """Average every metric per method over all (image, class) pairs with
    nonempty ground truth. The CAM region is the model's predicted mask for
    the class, falling back to the ground truth when the prediction is
    empty, and is held fixed for the faithfulness pass.
    """
    channels = category_channels(dataset)
    acc = {
        m: {"ebpg": [], "bbox": [], "iou": [], "drop": [], "increase": [], "time": [], "undefined": {}}
        for m in methods
    }
    pairs = 0
    for info in dataset.images:
        image = images[info.id]
        gt_masks = gt_masks_for_image(dataset, info.id)
        if not gt_masks:
            continue
        scores = model.forward(image)
        for cid, gt in gt_masks.items():
            channel = channels[cid]
            region = scores.predicted_mask(channel)
            if not region.any():
                region = gt
            box = mask_to_bbox(gt)
            pairs += 1
            for method in methods:
                emap = cam.explain(model, image, method, class_id=channel, region=region)
                bucket = acc[method]
                bucket["time"].append(emap.runtime_ms / 1000.0)
                for name, value in (
                    ("ebpg", ebpg(emap.values, gt)),
                    ("iou", explanation_iou(emap.values, gt, threshold=iou_threshold)),
                    ("bbox", bbox_score(emap.values, box)),
                ):
                    if value is None:
                        bucket["undefined"][name] = bucket["undefined"].get(name, 0) + 1
                    else:
                        bucket[name].append(value)
                drop, increase = drop_increase(model, image, emap.values, channel, region)
                bucket["drop"].append(drop)
                bucket["increase"].append(increase)
    if pairs == 0:
        raise MetricsError("no (image, class) pairs with nonempty ground truth")

    rows = []
    for method in methods:
        bucket = acc[method]
        mean = lambda xs: float(np.mean(xs)) if xs else None
        rows.append(
            EvaluationRow(
                method=cam.DISPLAY_NAMES.get(method, method),
                ebpg=mean(bucket["ebpg"]),
                bbox=mean(bucket["bbox"]),
                iou=mean(bucket["iou"]),
                drop=mean(bucket["drop"]),
                increase=(100.0 * np.mean(bucket["increase"]) if bucket["increase"] else None),
                time_s=float(np.mean(bucket["time"])),
                samples=pairs,
                undefined=bucket["undefined"],
            )
        )
    return rows


def evaluate_segmentation(model, dataset: CocoDataset, images: dict[int, np.ndarray]) -> dict:
    """Pooled per-class IoU over a split plus per-image mean IoU.

    Classes with empty prediction and ground truth across the whole split
    are excluded and flagged rather than scored.
    """
    channels = category_channels(dataset)
    inter = {cid: 0 for cid in channels}
    union = {cid: 0 for cid in channels}
    per_image: dict[int, float | None] = {}
    for info in dataset.images:
        predicted = model.forward(images[info.id]).logits.argmax(axis=0)
        gt_masks = gt_masks_for_image(dataset, info.id)
        image_scores = []
        for cid, channel in channels.items():
            pred = predicted == channel
            gt = gt_masks.get(cid)
            if gt is None:
                gt = np.zeros_like(pred)
            inter[cid] += int((pred & gt).sum())
            union[cid] += int((pred | gt).sum())
            if cid in gt_masks:
                image_scores.append(seg_iou(pred, gt))
        per_image[info.id] = (
            float(np.mean([s for s in image_scores if s is not None])) if image_scores else None
        )

    per_class: dict[int, float | None] = {}
    excluded = []
    for cid in channels:
        if union[cid] == 0:
            per_class[cid] = None
            excluded.append(cid)
        else:
            per_class[cid] = 100.0 * inter[cid] / union[cid]
    return {"per_class": per_class, "per_image": per_image, "excluded": excluded}


@dataclass
class ComparisonReport:
    """Per-class IoU of the original and enhanced models on the same GT."""

    categories: list[tuple[int, str]]
    original: dict[int, float | None]
    enhanced: dict[int, float | None]

    def overall(self, which: str) -> float:
        scores = self.original if which == "original" else self.enhanced
        return mean_iou([v for v in scores.values() if v is not None])

    def delta(self) -> dict[int, float | None]:
        out = {}
        for cid, _ in self.categories:
            a, b = self.original.get(cid), self.enhanced.get(cid)
            out[cid] = None if a is None or b is None else b - a
        return out
