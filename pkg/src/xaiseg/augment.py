"""Expert-guided annotation augmentation.

Two strategies: enlarging the masks of a slender-object category by
morphological dilation, and adding annotations for objects the model
confuses with existing classes. Plans are ordered lists of operations,
validated up front and applied atomically to a copy of the dataset.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter

from .coco import (
    Annotation,
    Category,
    CocoDataset,
    CocoError,
    annotation_to_mask,
    mask_to_bbox,
    polygon_to_mask,
    rle_decode,
    rle_encode,
)


class AugmentError(ValueError):
    pass


@dataclass
class EnlargeOp:
    """Dilate every annotation of a category by a Chebyshev radius."""

    category_id: int
    radius: int
    rationale: str = ""

    kind = "enlarge"


@dataclass
class AddAnnotationOp:
    """Append one annotation; the category may be new if a name is given."""

    image_id: int
    category_id: int | None = None
    category_name: str | None = None
    polygon: list | None = None
    rle: dict | None = None
    rationale: str = ""

    kind = "add"


@dataclass
class AugmentationPlan:
    ops: list = field(default_factory=list)
    author: str = ""
    timestamp: str = ""


def dilate_mask(mask, radius: int) -> np.ndarray:
    """Chebyshev-ball dilation: square structuring element of side 2r+1."""
    if radius < 0:
        raise AugmentError("radius must be >= 0")
    m = np.asarray(mask, dtype=bool)
    if radius == 0:
        return m.copy()
    return maximum_filter(m.astype(np.uint8), size=2 * radius + 1, mode="constant", cval=0) > 0


def enlarge_annotation(ann: Annotation, radius: int, height: int, width: int) -> Annotation:
    """Rasterize, dilate, and re-store the annotation as uncompressed RLE."""
    mask = dilate_mask(annotation_to_mask(ann, height, width), radius)
    return Annotation(
        id=ann.id,
        image_id=ann.image_id,
        category_id=ann.category_id,
        segmentation=rle_encode(mask),
        bbox=mask_to_bbox(mask),
        area=int(mask.sum()),
        iscrowd=ann.iscrowd,
        extra=dict(ann.extra),
    )


def _op_mask(op: AddAnnotationOp, height: int, width: int) -> np.ndarray:
    if (op.polygon is None) == (op.rle is None):
        raise AugmentError("add-annotation op needs exactly one of polygon or rle")
    if op.polygon is not None:
        xs = op.polygon[0::2]
        ys = op.polygon[1::2]
        if min(xs) < 0 or min(ys) < 0 or max(xs) > width or max(ys) > height:
            raise AugmentError("geometry out of image bounds")
        return polygon_to_mask(op.polygon, height, width)
    mask = rle_decode(op.rle)
    if mask.shape != (height, width):
        raise AugmentError("RLE size does not match image")
    return mask


def add_annotation(dataset: CocoDataset, op: AddAnnotationOp) -> tuple[CocoDataset, dict]:
    """Return a new dataset with the annotation appended, plus an info record."""
    ds = copy.deepcopy(dataset)
    info = ds.image_by_id(op.image_id)
    mask = _op_mask(op, info.height, info.width)
    if not mask.any():
        raise AugmentError("geometry rasterizes to an empty mask")

    category_id = op.category_id
    known = {c.id for c in ds.categories}
    if category_id is None or category_id not in known:
        if op.category_name is None:
            raise AugmentError(f"unknown category {category_id} and no name supplied")
        by_name = {c.name: c.id for c in ds.categories}
        if op.category_name in by_name:
            category_id = by_name[op.category_name]
        else:
            category_id = (category_id if category_id is not None and category_id not in known
                           else max(known, default=0) + 1)
            ds.categories.append(Category(id=category_id, name=op.category_name))

    duplicate = False
    for ann in ds.annotations_for_image(op.image_id):
        if ann.category_id == category_id and np.array_equal(
            annotation_to_mask(ann, info.height, info.width), mask
        ):
            duplicate = True
            break

    new_id = max((a.id for a in ds.annotations), default=0) + 1
    ds.annotations.append(
        Annotation(
            id=new_id,
            image_id=op.image_id,
            category_id=category_id,
            segmentation=rle_encode(mask),
            bbox=mask_to_bbox(mask),
            area=int(mask.sum()),
        )
    )
    return ds, {"annotation_id": new_id, "category_id": category_id, "pixels": int(mask.sum()), "duplicate": duplicate}


def validate_plan(dataset: CocoDataset, plan: AugmentationPlan) -> None:
    """Raise on the first op that cannot apply to the dataset."""
    if not plan.ops:
        raise AugmentError("empty plan")
    category_ids = {c.id for c in dataset.categories}
    image_ids = {im.id for im in dataset.images}
    for index, op in enumerate(plan.ops):
        where = f"op {index}"
        if isinstance(op, EnlargeOp):
            if op.radius < 0:
                raise AugmentError(f"{where}: radius must be >= 0")
            if op.category_id not in category_ids:
                raise AugmentError(f"{where}: unknown category {op.category_id}")
        elif isinstance(op, AddAnnotationOp):
            if op.image_id not in image_ids:
                raise AugmentError(f"{where}: unknown image {op.image_id}")
            if op.category_id is None and op.category_name is None:
                raise AugmentError(f"{where}: need a category id or name")
            if op.category_id is not None and op.category_id not in category_ids and op.category_name is None:
                raise AugmentError(f"{where}: new category {op.category_id} needs a name")
            info = dataset.image_by_id(op.image_id)
            try:
                _op_mask(op, info.height, info.width)
            except (CocoError, AugmentError) as err:
                raise AugmentError(f"{where}: {err}") from err
        else:
            raise AugmentError(f"{where}: unknown op type {type(op).__name__}")


def apply_plan(dataset: CocoDataset, plan: AugmentationPlan) -> tuple[CocoDataset, dict]:
    """Apply ops in order to a copy; the input dataset is never touched.

    Validation happens before any mutation, so an invalid plan leaves
    nothing half-applied. The report lists per-op pixel deltas.
    """
    validate_plan(dataset, plan)
    ds = copy.deepcopy(dataset)
    sizes = {im.id: (im.height, im.width) for im in ds.images}
    report: list[dict] = []
    for index, op in enumerate(plan.ops):
        if isinstance(op, EnlargeOp):
            before = after = 0
            touched = 0
            for pos, ann in enumerate(ds.annotations):
                if ann.category_id != op.category_id:
                    continue
                h, w = sizes[ann.image_id]
                enlarged = enlarge_annotation(ann, op.radius, h, w)
                before += int(annotation_to_mask(ann, h, w).sum())
                after += int(enlarged.area)
                ds.annotations[pos] = enlarged
                touched += 1
            report.append(
                {
                    "op": index,
                    "kind": "enlarge",
                    "category_id": op.category_id,
                    "radius": op.radius,
                    "annotations": touched,
                    "pixels_before": before,
                    "pixels_after": after,
                }
            )
        else:
            ds, info = add_annotation(ds, op)
            report.append({"op": index, "kind": "add", **info})
    return ds, {"ops": report}


# ---------------------------------------------------------------------------
# JSON plan interchange


def plan_to_json(plan: AugmentationPlan) -> str:
    ops = []
    for op in plan.ops:
        if isinstance(op, EnlargeOp):
            ops.append(
                {"kind": "enlarge", "category_id": op.category_id, "radius": op.radius, "rationale": op.rationale}
            )
        else:
            ops.append(
                {
                    "kind": "add",
                    "image_id": op.image_id,
                    "category_id": op.category_id,
                    "category_name": op.category_name,
                    "polygon": op.polygon,
                    "rle": op.rle,
                    "rationale": op.rationale,
                }
            )
    return json.dumps({"author": plan.author, "timestamp": plan.timestamp, "ops": ops}, indent=2)


def plan_from_json(text: str) -> AugmentationPlan:
    doc = json.loads(text)
    ops: list = []
    for index, rec in enumerate(doc.get("ops", [])):
        kind = rec.get("kind")
        if kind == "enlarge":
            ops.append(
                EnlargeOp(
                    category_id=rec["category_id"],
                    radius=rec["radius"],
                    rationale=rec.get("rationale", ""),
                )
            )
        elif kind == "add":
            ops.append(
                AddAnnotationOp(
                    image_id=rec["image_id"],
                    category_id=rec.get("category_id"),
                    category_name=rec.get("category_name"),
                    polygon=rec.get("polygon"),
                    rle=rec.get("rle"),
                    rationale=rec.get("rationale", ""),
                )
            )
        else:
            raise AugmentError(f"op {index}: unknown kind {kind!r}")
    return AugmentationPlan(ops=ops, author=doc.get("author", ""), timestamp=doc.get("timestamp", ""))


def default_enhancement_plan(truth: dict, dataset: CocoDataset, cable_radius: int = 2) -> AugmentationPlan:
    """The desk-scale stand-in for the expert's session: enlarge every cable
    annotation and annotate every unlabeled confuser recorded in the synth
    truth file."""
    by_name = {c.name: c.id for c in dataset.categories}
    ops: list = [
        EnlargeOp(
            category_id=by_name["cable"],
            radius=cable_radius,
            rationale="slender objects are under-annotated; widen their masks",
        )
    ]
    train_ids = {im.id for im in dataset.images}
    for rec in truth.get("images", []):
        if rec["id"] not in train_ids:
            continue
        for obj in rec["objects"]:
            if obj["kind"] != "confuser":
                continue
            ops.append(
                AddAnnotationOp(
                    image_id=rec["id"],
                    category_id=by_name.get("confuser"),
                    category_name="confuser",
                    rle=obj["rle_full"],
                    rationale="bright dash confused with cables; give it its own class",
                )
            )
    return AugmentationPlan(ops=ops, author="auto-default", timestamp="")
