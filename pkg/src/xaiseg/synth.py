"""Deterministic synthetic inspection scenes.

Each image carries 1-3 long thin bright "cable" strokes, at most one dim
"tower" blob, and up to two short wide bright "confuser" dashes. Cables are
annotated thinner than their rendered extent in the training split
(the under-annotation premise) and at full width in the eval split;
confusers are never annotated for training. A truth record keeps every
object's geometry, including both cable rasterizations, so augmentation
plans and property checks can be built without re-deriving geometry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .coco import (
    Annotation,
    Category,
    CocoDataset,
    ImageInfo,
    mask_to_bbox,
    polygon_to_mask,
    rle_encode,
    rle_to_string,
    write_coco,
)

CATEGORIES = [(1, "cable"), (2, "tower"), (3, "confuser")]
CABLE_SUPPORT = 1.5  # rendered half-width of a cable stroke, px
CONFUSER_SUPPORT = 3.0  # rendered half-width of a confuser dash, px
TOWER_COLOR = (0.88, 0.32, 0.22)
TOWER_POLYGON_SIDES = 16


@dataclass
class SynthConfig:
    seed: int = 0
    image_size: tuple[int, int] = (64, 64)  # (height, width)
    train_count: int = 60
    eval_count: int = 20
    annotation_width: float = 1.0
    eval_gt_width: float = 3.0

    def validate(self) -> None:
        if self.train_count < 1 or self.eval_count < 1:
            raise ValueError("split counts must be >= 1")
        if self.annotation_width <= 0 or self.eval_gt_width <= 0:
            raise ValueError("mask widths must be > 0")
        if self.annotation_width > self.eval_gt_width:
            raise ValueError("annotation_width must be <= eval_gt_width")
        h, w = self.image_size
        if h < 32 or w < 32:
            raise ValueError("image_size must be at least 32x32")


@dataclass
class SynthResult:
    config: SynthConfig
    images: dict[int, np.ndarray]  # id -> (3, H, W) float in [0, 1]
    train: CocoDataset
    eval: CocoDataset
    truth: dict = field(default_factory=dict)


def _segment_distance(xx, yy, p0, p1):
    vx, vy = p1[0] - p0[0], p1[1] - p0[1]
    norm2 = vx * vx + vy * vy
    t = np.clip(((xx - p0[0]) * vx + (yy - p0[1]) * vy) / norm2, 0.0, 1.0)
    return np.hypot(xx - (p0[0] + t * vx), yy - (p0[1] + t * vy))


def _border_point(rng, side, h, w):
    if side == 0:
        return (rng.uniform(0, w), 0.0)
    if side == 1:
        return (rng.uniform(0, w), float(h))
    if side == 2:
        return (0.0, rng.uniform(0, h))
    return (float(w), rng.uniform(0, h))


class _SceneBuilder:
    def __init__(self, config: SynthConfig, rng: np.random.Generator):
        self.cfg = config
        self.rng = rng
        h, w = config.image_size
        yy, xx = np.mgrid[0:h, 0:w].astype(np.float64) + 0.5
        self.xx, self.yy = xx, yy

    def background(self):
        h, w = self.cfg.image_size
        noise = self.rng.uniform(0.0, 0.18, size=(h, w))
        tint = np.array([1.0, 0.96, 0.9])
        return noise[None, :, :] * tint[:, None, None]

    def cable(self):
        """Long bright stroke crossing the image; returns layer + both masks."""
        h, w = self.cfg.image_size
        for _ in range(40):
            sides = self.rng.permutation(4)[:2]
            p0 = _border_point(self.rng, sides[0], h, w)
            p1 = _border_point(self.rng, sides[1], h, w)
            if np.hypot(p1[0] - p0[0], p1[1] - p0[1]) < 0.5 * min(h, w):
                continue
            d = _segment_distance(self.xx, self.yy, p0, p1)
            thin = d <= self.cfg.annotation_width / 2.0
            full = d <= self.cfg.eval_gt_width / 2.0
            widths_differ = self.cfg.eval_gt_width > self.cfg.annotation_width
            if thin.sum() == 0:
                continue
            if widths_differ and full.sum() <= thin.sum():
                continue
            brightness = self.rng.uniform(0.85, 1.0)
            layer = np.clip(CABLE_SUPPORT - d, 0.0, 1.0) * brightness
            return layer[None, :, :] * np.ones(3)[:, None, None], thin, full, (p0, p1, brightness)
        raise RuntimeError("could not place a cable stroke")

    def confuser(self):
        """Short wide dash, same brightness range as cables."""
        h, w = self.cfg.image_size
        for _ in range(40):
            length = self.rng.uniform(10.0, 20.0)
            margin = length / 2.0 + CONFUSER_SUPPORT + 1.0
            cx = self.rng.uniform(margin, w - margin)
            cy = self.rng.uniform(margin, h - margin)
            theta = self.rng.uniform(0.0, np.pi)
            dx, dy = np.cos(theta) * length / 2.0, np.sin(theta) * length / 2.0
            p0, p1 = (cx - dx, cy - dy), (cx + dx, cy + dy)
            d = _segment_distance(self.xx, self.yy, p0, p1)
            mask = d <= CONFUSER_SUPPORT
            if mask.sum() == 0:
                continue
            brightness = self.rng.uniform(0.85, 1.0)
            layer = np.clip(CONFUSER_SUPPORT - d, 0.0, 1.0) * brightness
            return layer[None, :, :] * np.ones(3)[:, None, None], mask, (p0, p1, brightness)
        raise RuntimeError("could not place a confuser dash")

    def tower(self):
        """Dim blob annotated as a regular polygon."""
        h, w = self.cfg.image_size
        radius = self.rng.uniform(4.0, 8.0)
        cx = self.rng.uniform(radius + 2.0, w - radius - 2.0)
        cy = self.rng.uniform(radius + 2.0, h - radius - 2.0)
        d = np.hypot(self.xx - cx, self.yy - cy)
        coverage = np.clip(radius + 0.5 - d, 0.0, 1.0)
        color = np.array(TOWER_COLOR)
        layer = coverage[None, :, :] * color[:, None, None]
        angles = 2.0 * np.pi * np.arange(TOWER_POLYGON_SIDES) / TOWER_POLYGON_SIDES
        poly = []
        for a in angles:
            poly.extend([cx + radius * np.cos(a), cy + radius * np.sin(a)])
        mask = polygon_to_mask(poly, h, w)
        return layer, mask, poly, (cx, cy, radius)


def _compressed_rle(mask) -> dict:
    rle = rle_encode(mask)
    return {"size": rle["size"], "counts": rle_to_string(rle["counts"])}


def generate(config: SynthConfig) -> SynthResult:
    """Generate both splits deterministically from config.seed."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    h, w = config.image_size

    plans = {"train": [], "eval": []}
    for split, count in (("train", config.train_count), ("eval", config.eval_count)):
        for _ in range(count):
            plans[split].append(
                {
                    "cables": int(rng.integers(1, 4)),
                    "tower": bool(rng.integers(0, 2)),
                    "confusers": int(rng.integers(0, 3)),
                }
            )
        # Every class must occur somewhere in the split.
        if not any(p["tower"] for p in plans[split]):
            plans[split][-1]["tower"] = True
        if not any(p["confusers"] for p in plans[split]):
            plans[split][-1]["confusers"] = 1

    builder = _SceneBuilder(config, rng)
    images: dict[int, np.ndarray] = {}
    datasets = {}
    truth_images = []
    next_image_id = 1
    next_ann_id = 1

    for split in ("train", "eval"):
        infos, anns = [], []
        for index, plan in enumerate(plans[split]):
            image_id = next_image_id
            next_image_id += 1
            file_name = f"{split}_{index + 1:04d}.png"
            img = builder.background()
            objects = []

            for _ in range(plan["cables"]):
                layer, thin, full, (p0, p1, b) = builder.cable()
                img = np.maximum(img, layer)
                objects.append(
                    {
                        "kind": "cable",
                        "segment": [p0[0], p0[1], p1[0], p1[1]],
                        "brightness": b,
                        "rle_train": _compressed_rle(thin),
                        "rle_full": _compressed_rle(full),
                    }
                )
                gt = full if split == "eval" else thin
                anns.append(
                    Annotation(
                        id=next_ann_id,
                        image_id=image_id,
                        category_id=1,
                        segmentation=_compressed_rle(gt),
                        bbox=mask_to_bbox(gt),
                        area=int(gt.sum()),
                    )
                )
                next_ann_id += 1

            if plan["tower"]:
                layer, mask, poly, (cx, cy, r) = builder.tower()
                img = np.maximum(img, layer)
                objects.append(
                    {
                        "kind": "tower",
                        "disk": [cx, cy, r],
                        "rle_full": _compressed_rle(mask),
                    }
                )
                anns.append(
                    Annotation(
                        id=next_ann_id,
                        image_id=image_id,
                        category_id=2,
                        segmentation=[[round(v, 3) for v in poly]],
                        bbox=mask_to_bbox(mask),
                        area=int(mask.sum()),
                    )
                )
                next_ann_id += 1

            for _ in range(plan["confusers"]):
                layer, mask, (p0, p1, b) = builder.confuser()
                img = np.maximum(img, layer)
                objects.append(
                    {
                        "kind": "confuser",
                        "segment": [p0[0], p0[1], p1[0], p1[1]],
                        "brightness": b,
                        "rle_full": _compressed_rle(mask),
                    }
                )
                if split == "eval":
                    anns.append(
                        Annotation(
                            id=next_ann_id,
                            image_id=image_id,
                            category_id=3,
                            segmentation=_compressed_rle(mask),
                            bbox=mask_to_bbox(mask),
                            area=int(mask.sum()),
                        )
                    )
                    next_ann_id += 1

            images[image_id] = np.clip(img, 0.0, 1.0)
            infos.append(ImageInfo(id=image_id, width=w, height=h, file_name=file_name))
            truth_images.append({"id": image_id, "split": split, "objects": objects})

        datasets[split] = CocoDataset(
            images=infos,
            annotations=anns,
            categories=[Category(id=i, name=n) for i, n in CATEGORIES],
        )

    truth = {"seed": config.seed, "image_size": [h, w], "images": truth_images}
    return SynthResult(config=config, images=images, train=datasets["train"], eval=datasets["eval"], truth=truth)


# ---------------------------------------------------------------------------
# disk layout: images/, train.json, eval.json, truth.json


def image_to_png(img: np.ndarray, path) -> None:
    """img is (3, H, W) float in [0, 1]."""
    arr = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(path, format="PNG")


def png_to_image(path) -> np.ndarray:
    arr = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def write_dataset(result: SynthResult, out_dir) -> None:
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    id_to_name = {}
    for split_ds in (result.train, result.eval):
        for info in split_ds.images:
            id_to_name[info.id] = info.file_name
    for image_id, img in result.images.items():
        image_to_png(img, out / "images" / id_to_name[image_id])
    (out / "train.json").write_text(write_coco(result.train))
    (out / "eval.json").write_text(write_coco(result.eval))
    (out / "truth.json").write_text(json.dumps(result.truth, indent=2))


@dataclass
class DatasetDir:
    root: Path
    train: CocoDataset
    eval: CocoDataset
    truth: dict | None

    def load_image(self, image_id: int) -> np.ndarray:
        for ds in (self.train, self.eval):
            for info in ds.images:
                if info.id == image_id:
                    return png_to_image(self.root / "images" / info.file_name)
        raise KeyError(f"unknown image id {image_id}")


def read_dataset_dir(path) -> DatasetDir:
    from .coco import parse_coco

    root = Path(path)
    train = parse_coco((root / "train.json").read_text())
    eval_ds = parse_coco((root / "eval.json").read_text())
    truth_path = root / "truth.json"
    truth = json.loads(truth_path.read_text()) if truth_path.exists() else None
    return DatasetDir(root=root, train=train, eval=eval_ds, truth=truth)
