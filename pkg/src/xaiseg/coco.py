"""COCO-style dataset parsing, rasterization, and serialization.

Supports the TTPLA flavor of COCO: polygon and RLE segmentations
(both integer-count lists and the de-facto compressed string encoding).
Unknown JSON fields are preserved opaquely so real files round-trip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

__all__ = [
    "CocoError",
    "ImageInfo",
    "Category",
    "Annotation",
    "CocoDataset",
    "parse_coco",
    "write_coco",
    "polygon_to_mask",
    "rle_encode",
    "rle_decode",
    "rle_to_string",
    "rle_from_string",
    "mask_to_bbox",
    "annotation_to_mask",
    "mask_to_png",
    "png_to_mask",
]


class CocoError(ValueError):
    """Raised for malformed or inconsistent COCO documents."""


@dataclass
class ImageInfo:
    id: int
    width: int
    height: int
    file_name: str = ""
    extra: dict = field(default_factory=dict)


@dataclass
class Category:
    id: int
    name: str
    extra: dict = field(default_factory=dict)


@dataclass
class Annotation:
    id: int
    image_id: int
    category_id: int
    segmentation: list | dict
    bbox: list
    area: float
    iscrowd: int = 0
    extra: dict = field(default_factory=dict)

    def is_rle(self) -> bool:
        return isinstance(self.segmentation, dict)


@dataclass
class CocoDataset:
    images: list[ImageInfo] = field(default_factory=list)
    annotations: list[Annotation] = field(default_factory=list)
    categories: list[Category] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def image_by_id(self, image_id: int) -> ImageInfo:
        for im in self.images:
            if im.id == image_id:
                return im
        raise CocoError(f"unknown image id {image_id}")

    def category_by_id(self, category_id: int) -> Category:
        for c in self.categories:
            if c.id == category_id:
                return c
        raise CocoError(f"unknown category id {category_id}")

    def annotations_for_image(self, image_id: int) -> list[Annotation]:
        return [a for a in self.annotations if a.image_id == image_id]


# ---------------------------------------------------------------------------
# parsing / serialization

_IMAGE_KEYS = ("id", "width", "height", "file_name")
_CAT_KEYS = ("id", "name")
_ANN_KEYS = ("id", "image_id", "category_id", "segmentation", "bbox", "area", "iscrowd")


def _take(record: dict, keys) -> dict:
    return {k: v for k, v in record.items() if k not in keys}


def _require(record: dict, key: str, what: str):
    if key not in record:
        raise CocoError(f'{what}: missing required field "{key}"')
    return record[key]


def parse_coco(json_text: str) -> CocoDataset:
    """Parse and validate a COCO JSON document.

    Raises CocoError naming the offending record on missing fields,
    dangling id references, or malformed segmentations.
    """
    doc = json.loads(json_text)
    if not isinstance(doc, dict):
        raise CocoError("top-level JSON value must be an object")

    images = []
    for rec in doc.get("images", []):
        what = f"image {rec.get('id', '?')}"
        images.append(
            ImageInfo(
                id=_require(rec, "id", what),
                width=_require(rec, "width", what),
                height=_require(rec, "height", what),
                file_name=rec.get("file_name", ""),
                extra=_take(rec, _IMAGE_KEYS),
            )
        )
    if len({im.id for im in images}) != len(images):
        raise CocoError("duplicate image ids")

    categories = []
    for rec in doc.get("categories", []):
        what = f"category {rec.get('id', '?')}"
        categories.append(
            Category(
                id=_require(rec, "id", what),
                name=_require(rec, "name", what),
                extra=_take(rec, _CAT_KEYS),
            )
        )
    if len({c.id for c in categories}) != len(categories):
        raise CocoError("duplicate category ids")

    image_ids = {im.id: im for im in images}
    category_ids = {c.id for c in categories}

    annotations = []
    seen_ann = set()
    for rec in doc.get("annotations", []):
        what = f"annotation {rec.get('id', '?')}"
        ann = Annotation(
            id=_require(rec, "id", what),
            image_id=_require(rec, "image_id", what),
            category_id=_require(rec, "category_id", what),
            segmentation=_require(rec, "segmentation", what),
            bbox=_require(rec, "bbox", what),
            area=_require(rec, "area", what),
            iscrowd=rec.get("iscrowd", 0),
            extra=_take(rec, _ANN_KEYS),
        )
        if ann.id in seen_ann:
            raise CocoError(f"{what}: duplicate annotation id")
        seen_ann.add(ann.id)
        if ann.image_id not in image_ids:
            raise CocoError(f"{what}: dangling image_id {ann.image_id}")
        if ann.category_id not in category_ids:
            raise CocoError(f"{what}: dangling category_id {ann.category_id}")
        _validate_annotation(ann, image_ids[ann.image_id], what)
        annotations.append(ann)

    extra = _take(doc, ("images", "annotations", "categories"))
    return CocoDataset(images=images, annotations=annotations, categories=categories, extra=extra)


def _validate_annotation(ann: Annotation, image: ImageInfo, what: str) -> None:
    seg = ann.segmentation
    if isinstance(seg, dict):
        if "counts" not in seg or "size" not in seg:
            raise CocoError(f"{what}: RLE segmentation needs 'counts' and 'size'")
        h, w = seg["size"]
        if [h, w] != [image.height, image.width]:
            raise CocoError(f"{what}: RLE size {seg['size']} != image size")
        counts = seg["counts"]
        if isinstance(counts, str):
            counts = rle_from_string(counts)
        if sum(counts) != h * w:
            raise CocoError(f"{what}: RLE counts sum {sum(counts)} != {h * w}")
        if any(c < 0 for c in counts):
            raise CocoError(f"{what}: negative RLE count")
    elif isinstance(seg, list):
        if not seg:
            raise CocoError(f"{what}: empty segmentation")
        for poly in seg:
            if not isinstance(poly, list) or len(poly) < 6 or len(poly) % 2 != 0:
                raise CocoError(f"{what}: malformed polygon (need even length >= 6)")
    else:
        raise CocoError(f"{what}: malformed segmentation")

    if len(ann.bbox) != 4:
        raise CocoError(f"{what}: bbox must be [x, y, width, height]")
    x, y, bw, bh = ann.bbox
    if x < 0 or y < 0 or bw <= 0 or bh <= 0 or x + bw > image.width or y + bh > image.height:
        raise CocoError(f"{what}: bbox {ann.bbox} outside image bounds")
    if ann.area <= 0:
        raise CocoError(f"{what}: area must be > 0")


def write_coco(dataset: CocoDataset) -> str:
    """Serialize a dataset; parse_coco(write_coco(d)) is structurally d."""
    doc = {}
    doc["images"] = [
        {"id": im.id, "width": im.width, "height": im.height, "file_name": im.file_name, **im.extra}
        for im in dataset.images
    ]
    doc["annotations"] = [
        {
            "id": a.id,
            "image_id": a.image_id,
            "category_id": a.category_id,
            "segmentation": a.segmentation,
            "bbox": a.bbox,
            "area": a.area,
            "iscrowd": a.iscrowd,
            **a.extra,
        }
        for a in dataset.annotations
    ]
    doc["categories"] = [{"id": c.id, "name": c.name, **c.extra} for c in dataset.categories]
    doc.update(dataset.extra)
    return json.dumps(doc, indent=2)


# ---------------------------------------------------------------------------
# rasterization

def polygon_to_mask(polygon, height: int, width: int) -> np.ndarray:
    """Rasterize one flat [x0,y0,x1,y1,...] polygon or a list of them.

    A pixel (r, c) is set iff its center (c+0.5, r+0.5) lies inside the
    polygon under the even-odd rule; multiple polygons are OR-ed.
    """
    polys = polygon if polygon and isinstance(polygon[0], (list, tuple)) else [polygon]
    mask = np.zeros((height, width), dtype=bool)
    px = np.arange(width) + 0.5
    py = np.arange(height) + 0.5
    for poly in polys:
        xs = np.asarray(poly[0::2], dtype=np.float64)
        ys = np.asarray(poly[1::2], dtype=np.float64)
        if len(xs) != len(ys) or len(xs) < 3:
            raise CocoError("degenerate polygon: fewer than 3 points")
        if len({(float(x), float(y)) for x, y in zip(xs, ys)}) < 3:
            raise CocoError("degenerate polygon: fewer than 3 distinct points")
        inside = np.zeros((height, width), dtype=bool)
        n = len(xs)
        j = n - 1
        for i in range(n):
            xi, yi = xs[i], ys[i]
            xj, yj = xs[j], ys[j]
            j = i
            if yi == yj:
                continue
            crosses = (yi > py) != (yj > py)  # per-row edge straddling
            xcross = (xj - xi) * (py - yi) / (yj - yi) + xi
            inside ^= crosses[:, None] & (px[None, :] < xcross[:, None])
        mask |= inside
    return mask


def rle_encode(mask) -> dict:
    """Column-major run-length encoding; counts start with the zero-run."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise CocoError(f"mask must be 2-D, got shape {m.shape}")
    h, w = m.shape
    flat = m.ravel(order="F")
    n = flat.size
    changes = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], changes, [n]))
    counts = np.diff(bounds).tolist()
    if flat.size and flat[0]:
        counts = [0] + counts
    return {"size": [h, w], "counts": counts}


def rle_decode(rle, height: int | None = None, width: int | None = None) -> np.ndarray:
    """Decode integer-count or compressed-string RLE to a boolean mask."""
    if isinstance(rle, dict):
        h, w = rle["size"]
        counts = rle["counts"]
    else:
        h, w = height, width
        counts = rle
    if h is None or w is None:
        raise CocoError("rle_decode needs mask dimensions")
    if isinstance(counts, str):
        counts = rle_from_string(counts)
    if any(c < 0 for c in counts):
        raise CocoError("negative RLE count")
    total = sum(counts)
    if total != h * w:
        raise CocoError(f"RLE counts sum {total} != {h * w}")
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return flat.reshape((h, w), order="F")


def rle_to_string(counts: list[int]) -> str:
    """Compress counts with the de-facto COCO codec.

    Each count is a signed little-endian base-32 varint: 5 value bits per
    character plus a continuation bit, characters offset by 48. Counts at
    index > 2 are delta-coded against the count two places back.
    """
    chars = []
    for i, count in enumerate(counts):
        x = int(count)
        if i > 2:
            x -= int(counts[i - 2])
        more = True
        while more:
            c = x & 0x1F
            x >>= 5
            more = (x != -1) if (c & 0x10) else (x != 0)
            if more:
                c |= 0x20
            chars.append(chr(c + 48))
    return "".join(chars)


def rle_from_string(s: str) -> list[int]:
    """Inverse of rle_to_string."""
    counts: list[int] = []
    p = 0
    while p < len(s):
        x = 0
        k = 0
        more = True
        while more:
            if p >= len(s):
                raise CocoError("truncated compressed RLE")
            c = ord(s[p]) - 48
            if c < 0 or c > 63:
                raise CocoError(f"invalid compressed RLE character {s[p]!r}")
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            p += 1
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(counts) > 2:
            x += counts[-2]
        counts.append(x)
    return counts


def mask_to_bbox(mask) -> list[int]:
    """Tightest [x, y, w, h] box containing all set pixels."""
    m = np.asarray(mask, dtype=bool)
    rows = np.flatnonzero(m.any(axis=1))
    cols = np.flatnonzero(m.any(axis=0))
    if rows.size == 0:
        raise CocoError("empty mask")
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return [x0, y0, x1 - x0 + 1, y1 - y0 + 1]


def annotation_to_mask(ann: Annotation, height: int, width: int) -> np.ndarray:
    """Rasterize an annotation's segmentation (polygon or RLE)."""
    if ann.is_rle():
        return rle_decode(ann.segmentation)
    return polygon_to_mask(ann.segmentation, height, width)


# ---------------------------------------------------------------------------
# PNG export

def mask_to_png(mask, path) -> None:
    """Write a mask as 8-bit grayscale PNG (0/255)."""
    m = np.asarray(mask, dtype=bool)
    Image.fromarray((m * np.uint8(255)), mode="L").save(path, format="PNG")


def png_to_mask(path) -> np.ndarray:
    img = Image.open(path).convert("L")
    return np.asarray(img) >= 128
