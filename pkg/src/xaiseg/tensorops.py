"""Dense-array primitives shared by the CAM, model, and metric code paths.

Arrays are plain numpy ndarrays (float32/float64). Every public operation
rejects non-finite inputs so NaN/Inf never propagate silently.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "relu",
    "global_average",
    "bilinear_resize",
    "minmax_normalize",
    "save_npy",
    "load_npy",
]


def _as_finite_array(t, name: str) -> np.ndarray:
    a = np.asarray(t, dtype=np.float64)
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return a


def relu(t) -> np.ndarray:
    """Elementwise max(0, x), shape preserved."""
    a = _as_finite_array(t, "input")
    return np.maximum(a, 0.0)


def global_average(t, axes: tuple[int, ...] = (-2, -1)) -> np.ndarray:
    """Arithmetic mean over the given (spatial) axes.

    The pooled axes must be nonempty both as a tuple and in extent.
    """
    a = _as_finite_array(t, "input")
    if a.ndim < 2:
        raise ValueError("global_average needs a tensor with >= 2 axes")
    if len(axes) == 0:
        raise ValueError("no axes to pool over")
    for ax in axes:
        if a.shape[ax] == 0:
            raise ValueError("pooled axis has zero extent")
    return a.mean(axis=tuple(axes))


def bilinear_resize(t, out_h: int, out_w: int) -> np.ndarray:
    """Resize a 2-D map with half-pixel-center sampling.

    Output pixel (r, c) samples source coordinate
    ((r+0.5)*h/out_h - 0.5, (c+0.5)*w/out_w - 0.5), clamped to the valid
    range, and bilinearly interpolates the four neighbors. Resizing to the
    same size is the identity.
    """
    a = _as_finite_array(t, "input")
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D map, got shape {a.shape}")
    h, w = a.shape
    if min(h, w, out_h, out_w) < 1:
        raise ValueError("extents must be >= 1")

    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, max(h - 2, 0))
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, max(w - 2, 0))
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]

    return (
        a[np.ix_(y0, x0)] * (1.0 - fy) * (1.0 - fx)
        + a[np.ix_(y0, x1)] * (1.0 - fy) * fx
        + a[np.ix_(y1, x0)] * fy * (1.0 - fx)
        + a[np.ix_(y1, x1)] * fy * fx
    )


def minmax_normalize(t) -> np.ndarray:
    """Affine rescale to [0, 1]; a constant map maps to all zeros.

    A constant map carries no localization signal, so it is conventionally
    treated as "no evidence" rather than 0.5 everywhere.
    """
    a = _as_finite_array(t, "input")
    lo = a.min()
    hi = a.max()
    if hi == lo:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


def save_npy(path, t) -> None:
    """Write an array as an NPY v1.0 file (little-endian float, C-order)."""
    a = np.asarray(t)
    if a.dtype not in (np.float32, np.float64):
        a = a.astype(np.float64)
    if not np.isfinite(a).all():
        raise ValueError("refusing to write non-finite values")
    a = np.ascontiguousarray(a.astype(a.dtype.newbyteorder("<")))
    np.save(path, a)


def load_npy(path) -> np.ndarray:
    """Read an NPY file, requiring a finite float32/float64 array."""
    a = np.load(path, allow_pickle=False)
    if a.dtype not in (np.float32, np.float64):
        raise ValueError(f"{path}: expected float32/float64, got {a.dtype}")
    if not np.isfinite(a).all():
        raise ValueError(f"{path}: contains NaN or Inf")
    return np.ascontiguousarray(a)
