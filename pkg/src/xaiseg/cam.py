"""The five CAM-family explanation methods.

Every method produces a raw map at feature resolution, upsamples it to the
requested output size, then rescales to [0, 1]. Normalizing after the
upsample keeps energy ratios independent of feature-map resolution.
The four gradient methods are pure functions of (activations, gradients);
ScoreCAM needs a live model because it scores channel-masked inputs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .model import ModelError, region_score
from .tensorops import bilinear_resize, minmax_normalize, relu

EPS = 1e-8

DISPLAY_NAMES = {
    "gradcam": "GradCAM",
    "gradcam_pp": "GradCAM++",
    "hirescam": "HiResCAM",
    "xgradcam": "XGradCAM",
    "scorecam": "ScoreCAM",
}
METHOD_KEYS = tuple(DISPLAY_NAMES)
GRADIENT_METHODS = ("gradcam", "gradcam_pp", "hirescam", "xgradcam")


class CamError(ValueError):
    pass


@dataclass
class ExplanationMap:
    values: np.ndarray  # (H, W) in [0, 1]
    method: str
    class_id: int | None
    region: str
    runtime_ms: float


def _check_pair(acts, grads):
    a = np.asarray(acts, dtype=np.float64)
    g = np.asarray(grads, dtype=np.float64)
    if a.ndim != 3 or a.shape != g.shape:
        raise CamError(f"activations {a.shape} and gradients {g.shape} must both be (K, h, w)")
    return a, g


def _finalize(raw, out_size, method, class_id, region, started):
    if out_size is not None and tuple(out_size) != raw.shape:
        raw = bilinear_resize(raw, out_size[0], out_size[1])
    values = minmax_normalize(raw)
    runtime_ms = max((time.perf_counter() - started) * 1000.0, 1e-6)
    return ExplanationMap(values=values, method=method, class_id=class_id, region=region, runtime_ms=runtime_ms)


# ---------------------------------------------------------------------------
# gradient-based methods


def gradcam_raw(acts, grads):
    """ReLU of the activation maps weighted by spatially averaged gradients."""
    a, g = _check_pair(acts, grads)
    weights = g.mean(axis=(1, 2))
    return relu(np.tensordot(weights, a, axes=(0, 0)))


def hirescam_raw(acts, grads):
    """ReLU of the elementwise activation-gradient product, no averaging."""
    a, g = _check_pair(acts, grads)
    return relu((a * g).sum(axis=0))


def gradcam_pp_raw(acts, grads):
    """Gradient-power form: alpha = G^2 / (2 G^2 + sum(A) G^3 + eps)."""
    a, g = _check_pair(acts, grads)
    channel_sums = a.sum(axis=(1, 2))[:, None, None]
    alpha = g**2 / (2.0 * g**2 + channel_sums * g**3 + EPS)
    weights = (alpha * relu(g)).sum(axis=(1, 2))
    return relu(np.tensordot(weights, a, axes=(0, 0)))


def xgradcam_raw(acts, grads):
    """Weights are gradients scaled by each pixel's share of channel energy."""
    a, g = _check_pair(acts, grads)
    channel_sums = a.sum(axis=(1, 2))[:, None, None]
    weights = (a / (channel_sums + EPS) * g).sum(axis=(1, 2))
    return relu(np.tensordot(weights, a, axes=(0, 0)))


def gradcam(acts, grads, out_size=None, class_id=None, region=""):
    started = time.perf_counter()
    return _finalize(gradcam_raw(acts, grads), out_size, "gradcam", class_id, region, started)


def hirescam(acts, grads, out_size=None, class_id=None, region=""):
    started = time.perf_counter()
    return _finalize(hirescam_raw(acts, grads), out_size, "hirescam", class_id, region, started)


def gradcam_pp(acts, grads, out_size=None, class_id=None, region=""):
    started = time.perf_counter()
    return _finalize(gradcam_pp_raw(acts, grads), out_size, "gradcam_pp", class_id, region, started)


def xgradcam(acts, grads, out_size=None, class_id=None, region=""):
    started = time.perf_counter()
    return _finalize(xgradcam_raw(acts, grads), out_size, "xgradcam", class_id, region, started)


# ---------------------------------------------------------------------------
# ScoreCAM


def scorecam(model, image, class_id, region=None, out_size=None, return_details=False):
    """Channel maps weighted by softmaxed score increases over a zero baseline.

    Runs K+1 extra forward passes (one per informative channel plus the
    baseline), so it is expected to cost several times a gradient CAM.
    Channels whose activation map is constant carry no mask information and
    are excluded from the softmax.
    """
    if not getattr(model, "live", True):
        raise ModelError("scorecam requires a live model")
    started = time.perf_counter()
    image = np.asarray(image, dtype=np.float64)
    h_out, w_out = image.shape[1], image.shape[2]
    scores_full = model.forward(image)
    if region is None:
        region = scores_full.predicted_mask(class_id)
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise ModelError("empty region")

    acts, _ = model.capture(image, region=region, class_id=class_id)
    k = acts.shape[0]
    informative = [i for i in range(k) if acts[i].max() > acts[i].min()]
    if not informative:
        raise CamError("no informative channels")

    baseline = region_score(model.forward(np.zeros_like(image)), class_id, region)
    raw_scores = np.empty(len(informative))
    for pos, ki in enumerate(informative):
        channel_mask = minmax_normalize(bilinear_resize(acts[ki], h_out, w_out))
        masked = image * channel_mask[None, :, :]
        raw_scores[pos] = region_score(model.forward(masked), class_id, region)

    shifted = raw_scores - baseline
    shifted -= shifted.max()  # stable softmax
    weights = np.exp(shifted)
    weights /= weights.sum()

    raw = relu(np.tensordot(weights, acts[informative], axes=(0, 0)))
    emap = _finalize(raw, (h_out, w_out), "scorecam", class_id, f"given(px={int(region.sum())})", started)
    if return_details:
        details = {
            "informative": informative,
            "scores": raw_scores,
            "baseline": baseline,
            "weights": weights,
        }
        return emap, details
    return emap


# ---------------------------------------------------------------------------
# one entry point for all methods


def explain(source, image, method: str, class_id: int, region=None) -> ExplanationMap:
    """Compute one explanation on a live model or a stored tensor bundle.

    runtime_ms covers the whole call, activation/gradient capture included,
    so gradient methods and ScoreCAM report comparable wall-clock.
    """
    if method not in METHOD_KEYS:
        raise CamError(f"unknown method {method!r}; expected one of {METHOD_KEYS}")
    started = time.perf_counter()
    image = np.asarray(image, dtype=np.float64)
    out_size = (image.shape[1], image.shape[2])

    if method == "scorecam":
        emap = scorecam(source, image, class_id, region=region, out_size=out_size)
    else:
        if region is None:
            region_desc = "predicted"
            acts, grads = source.capture(image, region=None, class_id=class_id)
        else:
            region = np.asarray(region, dtype=bool)
            region_desc = f"given(px={int(region.sum())})"
            acts, grads = source.capture(image, region=region, class_id=class_id)
        fn = {"gradcam": gradcam, "gradcam_pp": gradcam_pp, "hirescam": hirescam, "xgradcam": xgradcam}[method]
        emap = fn(acts, grads, out_size=out_size, class_id=class_id, region=region_desc)
    emap.runtime_ms = max((time.perf_counter() - started) * 1000.0, 1e-6)
    return emap
