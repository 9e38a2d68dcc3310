"""Toy convolutional segmentation net with manual forward/backward passes.

Architecture: fixed input centering (x - 0.5), conv 3x3 (3->8) + ReLU,
conv 3x3 (8->16) + ReLU (the CAM target layer), conv 1x1 (16->C) producing
logits at input resolution. Convolutions use padding 1, so spatial size is
preserved end to end.

Training minimizes the smoothed Dice loss with momentum SGD. Minibatches
are pooled into one Dice term per class (the same formula applied to the
stacked batch); per-image Dice lets sparse classes like the tower blob get
suppressed into a vanishing-gradient basin. Everything is numpy, so a
fixed seed gives bitwise-identical weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensorops
from .coco import rle_decode, rle_encode, rle_to_string
from .synth import image_to_png, png_to_image

DICE_EPS = 1.0
TARGET_LAYER = "conv2_relu"
TARGET_CHANNELS = 16


class ModelError(RuntimeError):
    pass


class TrainingDiverged(ModelError):
    def __init__(self, epoch: int):
        super().__init__(f"dice loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    lr: float = 0.05
    epochs: int = 200
    seed: int = 0
    batch_size: int = 8
    momentum: float = 0.9


@dataclass
class ScoreMaps:
    logits: np.ndarray  # (C, H, W)

    @property
    def class_count(self) -> int:
        return self.logits.shape[0]

    @property
    def probabilities(self) -> np.ndarray:
        return softmax(self.logits)

    def predicted_mask(self, class_id: int) -> np.ndarray:
        return self.logits.argmax(axis=0) == class_id


def softmax(logits: np.ndarray) -> np.ndarray:
    """Channel-axis softmax, numerically stable."""
    z = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


# ---------------------------------------------------------------------------
# convolution kernels (batched, NCHW)


def _im2col(x: np.ndarray) -> np.ndarray:
    """(B, C, H, W) -> (B, C*9, H*W) patches for a padded 3x3 conv."""
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((b, c, 9, h, w), dtype=x.dtype)
    i = 0
    for dy in range(3):
        for dx in range(3):
            cols[:, :, i] = xp[:, :, dy : dy + h, dx : dx + w]
            i += 1
    return cols.reshape(b, c * 9, h * w)


def _col2im(dcols: np.ndarray, c: int, h: int, w: int) -> np.ndarray:
    b = dcols.shape[0]
    dcols = dcols.reshape(b, c, 9, h, w)
    dxp = np.zeros((b, c, h + 2, w + 2), dtype=dcols.dtype)
    i = 0
    for dy in range(3):
        for dx in range(3):
            dxp[:, :, dy : dy + h, dx : dx + w] += dcols[:, :, i]
            i += 1
    return dxp[:, :, 1 : h + 1, 1 : w + 1]


def _conv3_forward(x, weight, bias):
    b, _, h, w = x.shape
    cols = _im2col(x)
    w2d = weight.reshape(weight.shape[0], -1)
    out = np.matmul(w2d, cols) + bias[:, None]
    return out.reshape(b, weight.shape[0], h, w), cols


def _conv3_backward(dout, cols, weight, in_channels, h, w):
    b = dout.shape[0]
    dz = dout.reshape(b, dout.shape[1], h * w)
    w2d = weight.reshape(weight.shape[0], -1)
    dw = np.tensordot(dz, cols, axes=([0, 2], [0, 2])).reshape(weight.shape)
    db = dz.sum(axis=(0, 2))
    dcols = np.matmul(w2d.T, dz)
    dx = _col2im(dcols, in_channels, h, w)
    return dx, dw, db


def _conv1_forward(x, weight, bias):
    b, _, h, w = x.shape
    flat = x.reshape(b, x.shape[1], h * w)
    out = np.matmul(weight, flat) + bias[:, None]
    return out.reshape(b, weight.shape[0], h, w)


def _conv1_backward(dout, x, weight):
    b, _, h, w = x.shape
    dz = dout.reshape(b, dout.shape[1], h * w)
    flat = x.reshape(b, x.shape[1], h * w)
    dw = np.tensordot(dz, flat, axes=([0, 2], [0, 2]))
    db = dz.sum(axis=(0, 2))
    dx = np.matmul(weight.T, dz).reshape(x.shape)
    return dx, dw, db


# ---------------------------------------------------------------------------
# loss


def dice_loss(probabilities: np.ndarray, gt_masks: np.ndarray) -> float:
    """Mean over classes of 1 - (2*sum(p*g)+eps)/(sum(p)+sum(g)+eps), eps=1."""
    p = np.asarray(probabilities, dtype=np.float64)
    g = np.asarray(gt_masks, dtype=np.float64)
    if p.shape != g.shape:
        raise ModelError(f"shape mismatch: probabilities {p.shape} vs masks {g.shape}")
    inter = (p * g).sum(axis=(1, 2))
    sums = p.sum(axis=(1, 2)) + g.sum(axis=(1, 2))
    return float(np.mean(1.0 - (2.0 * inter + DICE_EPS) / (sums + DICE_EPS)))


def _pooled_dice_grad(p, g):
    """Batch-pooled dice loss and d(loss)/d(probabilities).

    Sums run over (batch, H, W) per class, i.e. the dice formula applied
    to the minibatch stacked into one tall image.
    """
    inter = (p * g).sum(axis=(0, 2, 3))  # (C,)
    denom = p.sum(axis=(0, 2, 3)) + g.sum(axis=(0, 2, 3)) + DICE_EPS
    loss = float(np.mean(1.0 - (2.0 * inter + DICE_EPS) / denom))
    c = p.shape[1]
    # d/dp of -(2I+eps)/(S+eps): -(2g(S+eps) - (2I+eps)) / (S+eps)^2
    dp = -(2.0 * g * denom[None, :, None, None] - (2.0 * inter + DICE_EPS)[None, :, None, None]) / (
        denom[None, :, None, None] ** 2
    )
    return loss, dp / c


def region_score(scores: ScoreMaps, class_id: int, region: np.ndarray) -> float:
    """Mean class logit over the region: the scalar the CAM gradients see."""
    region = np.asarray(region, dtype=bool)
    if region.shape != scores.logits.shape[1:]:
        raise ModelError("region shape does not match score maps")
    if not region.any():
        raise ModelError("empty region")
    return float(scores.logits[class_id][region].mean())


# ---------------------------------------------------------------------------
# the network


class ToyNet:
    target_layer = TARGET_LAYER
    live = True

    def __init__(self, class_count: int = 4, seed: int = 0):
        if class_count < 2:
            raise ModelError("need at least 2 classes")
        self.class_count = class_count
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.w1 = rng.normal(0.0, np.sqrt(2.0 / 27.0), size=(8, 3, 3, 3))
        self.b1 = np.zeros(8)
        self.w2 = rng.normal(0.0, np.sqrt(2.0 / 72.0), size=(TARGET_CHANNELS, 8, 3, 3))
        self.b2 = np.zeros(TARGET_CHANNELS)
        self.w3 = rng.normal(0.0, np.sqrt(2.0 / TARGET_CHANNELS), size=(class_count, TARGET_CHANNELS))
        self.b3 = np.zeros(class_count)
        self.trained = False
        self.loss_history: list[float] = []

    # -- inference ----------------------------------------------------------

    def _forward_batch(self, x: np.ndarray, keep: bool = False):
        x = x - np.asarray(0.5, dtype=x.dtype)  # fixed input centering
        z1, cols1 = _conv3_forward(x, self.w1, self.b1)
        a1 = np.maximum(z1, 0.0)
        z2, cols2 = _conv3_forward(a1, self.w2, self.b2)
        a2 = np.maximum(z2, 0.0)
        logits = _conv1_forward(a2, self.w3, self.b3)
        if keep:
            return logits, {"x": x, "cols1": cols1, "z1": z1, "a1": a1, "cols2": cols2, "z2": z2, "a2": a2}
        return logits, {"a2": a2}

    def forward(self, image: np.ndarray) -> ScoreMaps:
        x = self._check_image(image)
        logits, _ = self._forward_batch(x[None])
        return ScoreMaps(logits=logits[0])

    def _check_image(self, image) -> np.ndarray:
        x = np.asarray(image, dtype=np.float64)
        if x.ndim != 3 or x.shape[0] != 3:
            raise ModelError(f"expected a (3, H, W) image, got {x.shape}")
        if not np.isfinite(x).all():
            raise ModelError("image contains NaN or Inf")
        return x

    def _check_weights(self):
        for p in (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3):
            if not np.isfinite(p).all():
                raise ModelError("model weights contain NaN or Inf")

    def capture(self, image, region=None, class_id: int = 0):
        """Target-layer activations and d(region_score)/d(activations).

        The region defaults to the model's predicted mask for the class.
        Gradients flow only through the 1x1 logit head: for pixels in the
        region each channel k receives w3[class, k] / |region|.
        """
        if not self.trained:
            raise ModelError("capture requires a trained model")
        self._check_weights()
        if not 0 <= class_id < self.class_count:
            raise ModelError(f"class_id {class_id} out of range")
        x = self._check_image(image)
        logits, cache = self._forward_batch(x[None])
        acts = cache["a2"][0]
        if region is None:
            region = ScoreMaps(logits=logits[0]).predicted_mask(class_id)
        region = np.asarray(region, dtype=bool)
        if region.shape != acts.shape[1:]:
            raise ModelError("region shape does not match activations")
        n = int(region.sum())
        if n == 0:
            raise ModelError("empty region")
        grads = np.zeros_like(acts)
        grads[:, region] = self.w3[class_id][:, None] / n
        return acts.copy(), grads

    # -- persistence ---------------------------------------------------------

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name in ("w1", "b1", "w2", "b2", "w3", "b3"):
            tensorops.save_npy(d / f"{name}.npy", getattr(self, name))
        meta = {
            "class_count": self.class_count,
            "seed": self.seed,
            "trained": self.trained,
            "target_layer": self.target_layer,
            "loss_history": self.loss_history,
        }
        (d / "meta.json").write_text(json.dumps(meta, indent=2))

    @classmethod
    def load(cls, directory) -> "ToyNet":
        d = Path(directory)
        meta = json.loads((d / "meta.json").read_text())
        net = cls(class_count=meta["class_count"], seed=meta["seed"])
        for name in ("w1", "b1", "w2", "b2", "w3", "b3"):
            setattr(net, name, tensorops.load_npy(d / f"{name}.npy"))
        net.trained = meta["trained"]
        net.loss_history = list(meta["loss_history"])
        return net


def capture(model, image, region=None, class_id: int = 0):
    return model.capture(image, region=region, class_id=class_id)


# ---------------------------------------------------------------------------
# training


_PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")


def train_toy(images: np.ndarray, targets: np.ndarray, config: TrainConfig | None = None) -> ToyNet:
    """Momentum SGD on the batch-pooled smoothed Dice loss.

    images: (N, 3, H, W) in [0, 1]; targets: (N, C, H, W) one-hot per class
    (background included as a channel). Deterministic for a fixed seed.
    Internally runs in float32 for speed; the returned weights are float64.
    """
    config = config or TrainConfig()
    x = np.asarray(images, dtype=np.float32)
    y = np.asarray(targets, dtype=np.float32)
    if x.ndim != 4 or y.ndim != 4 or x.shape[0] != y.shape[0]:
        raise ModelError("images and targets must be (N,3,H,W) and (N,C,H,W)")
    n = x.shape[0]
    if n == 0:
        raise ModelError("empty training set")

    net = ToyNet(class_count=y.shape[1], seed=config.seed)
    if config.epochs == 0:
        net.trained = True
        return net
    for name in _PARAM_NAMES:
        setattr(net, name, getattr(net, name).astype(np.float32))
    velocity = {name: np.zeros_like(getattr(net, name)) for name in _PARAM_NAMES}
    rng = np.random.default_rng(config.seed)
    h, w = x.shape[2], x.shape[3]
    lr = np.float32(config.lr)
    mu = np.float32(config.momentum)

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x[idx], y[idx]

            logits, cache = net._forward_batch(xb, keep=True)
            probs = np.exp(logits - logits.max(axis=1, keepdims=True))
            probs /= probs.sum(axis=1, keepdims=True)
            batch_loss, dprobs = _pooled_dice_grad(probs, yb)
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(epoch)
            epoch_loss += batch_loss * xb.shape[0]

            # softmax backward, then the three layers in reverse
            dot = (dprobs * probs).sum(axis=1, keepdims=True)
            dlogits = (probs * (dprobs - dot)).astype(np.float32)
            da2, dw3, db3 = _conv1_backward(dlogits, cache["a2"], net.w3)
            dz2 = da2 * (cache["z2"] > 0)
            da1, dw2, db2 = _conv3_backward(dz2, cache["cols2"], net.w2, 8, h, w)
            dz1 = da1 * (cache["z1"] > 0)
            _, dw1, db1 = _conv3_backward(dz1, cache["cols1"], net.w1, 3, h, w)

            grads = {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2, "w3": dw3, "b3": db3}
            for name in _PARAM_NAMES:
                velocity[name] = mu * velocity[name] + grads[name]
                setattr(net, name, getattr(net, name) - lr * velocity[name])
        net.loss_history.append(epoch_loss / n)

    for name in _PARAM_NAMES:
        setattr(net, name, getattr(net, name).astype(np.float64))
    net.trained = True
    net._check_weights()
    return net


# ---------------------------------------------------------------------------
# exported tensor bundles (interop path for externally computed tensors)


def save_bundle(directory, image, activations, gradients, logits, class_id: int, region=None, layer: str = TARGET_LAYER) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    image_to_png(np.asarray(image, dtype=np.float64), d / "input.png")
    tensorops.save_npy(d / "activations.npy", activations)
    tensorops.save_npy(d / "gradients.npy", gradients)
    tensorops.save_npy(d / "logits.npy", logits)
    region_spec = None
    if region is not None:
        rle = rle_encode(np.asarray(region, dtype=bool))
        region_spec = {"size": rle["size"], "counts": rle_to_string(rle["counts"])}
    meta = {"class_id": int(class_id), "region": region_spec, "layer": layer}
    (d / "meta.json").write_text(json.dumps(meta, indent=2))


class BundleSource:
    """Explanation source backed by stored tensors instead of a live model.

    Sufficient for the gradient-based CAMs and the plausibility metrics;
    anything needing fresh forward passes (ScoreCAM, Drop/Increase) must
    use a live model.
    """

    live = False

    def __init__(self, image, activations, gradients, logits, class_id, region, layer):
        self.image = image
        self.activations = activations
        self.gradients = gradients
        self.scores = ScoreMaps(logits=logits)
        self.class_count = logits.shape[0]
        self.class_id = class_id
        self.region = region
        self.target_layer = layer

    def forward(self, image=None) -> ScoreMaps:
        if image is not None:
            raise ModelError("bundle replays stored logits; a live model is required for new inputs")
        return self.scores

    def capture(self, image=None, region=None, class_id=None):
        if class_id is not None and class_id != self.class_id:
            raise ModelError(f"bundle was captured for class {self.class_id}")
        return self.activations.copy(), self.gradients.copy()


def load_bundle(directory) -> BundleSource:
    d = Path(directory)
    for name in ("input.png", "activations.npy", "gradients.npy", "logits.npy", "meta.json"):
        if not (d / name).exists():
            raise ModelError(f"missing {Path(name).stem.replace('_', ' ')} file: {name}")
    image = png_to_image(d / "input.png")
    activations = tensorops.load_npy(d / "activations.npy")
    gradients = tensorops.load_npy(d / "gradients.npy")
    logits = tensorops.load_npy(d / "logits.npy")
    meta = json.loads((d / "meta.json").read_text())
    if activations.shape != gradients.shape:
        raise ModelError(
            f"activation shape {activations.shape} != gradient shape {gradients.shape}"
        )
    if logits.ndim != 3:
        raise ModelError("logits must be (C, H, W)")
    class_id = int(meta["class_id"])
    if not 0 <= class_id < logits.shape[0]:
        raise ModelError(f"meta class {class_id} out of range for {logits.shape[0]} classes")
    region = None
    if meta.get("region") is not None:
        region = rle_decode(meta["region"])
    return BundleSource(image, activations, gradients, logits, class_id, region, meta.get("layer", TARGET_LAYER))
