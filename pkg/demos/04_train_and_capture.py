# Train the three-layer toy segmentation net with Dice loss, then capture
# target-layer activations and the analytic gradients of a region score,
# cross-checked here against finite differences.
import numpy as np

from xaiseg import model, pipeline, synth

result = synth.generate(synth.SynthConfig(seed=3, image_size=(48, 48), train_count=12, eval_count=4))
xs, ys = pipeline.build_training_arrays(result.train, result.images)

net = model.train_toy(xs, ys, model.TrainConfig(epochs=40, seed=3))
print(f"dice loss: {net.loss_history[0]:.3f} (epoch 1) -> {net.loss_history[-1]:.3f} (epoch {len(net.loss_history)})")

image = result.images[result.eval.images[0].id]
scores = net.forward(image)
print("logit maps:", scores.logits.shape, "| per-pixel prob sum:", scores.probabilities.sum(axis=0).mean())

# Capture at the 16-channel target layer for the cable class (channel 1).
region = scores.predicted_mask(1)
if not region.any():
    region = np.ones(image.shape[1:], dtype=bool)
acts, grads = net.capture(image, region=region, class_id=1)
print("activations:", acts.shape, "gradients:", grads.shape)

# The gradients are exact: nudging one activation moves the region score by
# gradient * step. Pick a pixel inside the region and the head's strongest
# channel so the value is visibly nonzero.
i, j = map(int, np.argwhere(region)[len(np.argwhere(region)) // 2])
k = int(np.abs(net.w3[1]).argmax())
step = 1e-3
def region_score_of(a):
    logits = np.tensordot(net.w3, a, axes=(1, 0)) + net.b3[:, None, None]
    return logits[1][region].mean()

moved = acts.copy()
moved[k, i, j] += step
fd = (region_score_of(moved) - region_score_of(acts)) / step
print(f"finite difference {fd:+.6f} vs captured gradient {grads[k, i, j]:+.6f}")
