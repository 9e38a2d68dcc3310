# The array substrate every other capability builds on: rectification,
# pooling, half-pixel-center bilinear resize, [0,1] normalization, NPY IO.
import numpy as np

from xaiseg import tensorops as T

t = np.array([[-2.0, 0.0], [1.5, 4.0]])
print("input:\n", t)
print("relu:\n", T.relu(t))

stack = np.stack([t, 10 * t, -t])
print("per-channel spatial means:", T.global_average(stack))

# The resize convention is half-pixel centers: output pixel (r, c) samples
# ((r+0.5)*h/out_h - 0.5, (c+0.5)*w/out_w - 0.5). Resizing a map to its own
# size is therefore the identity, and a constant map stays constant.
checker = np.array([[0.0, 1.0], [1.0, 0.0]])
print("2x2 checker upsampled to 4x4:\n", T.bilinear_resize(checker, 4, 4))

# Constant maps normalize to all-zeros on purpose: a flat heatmap carries
# no localization evidence, and the metrics treat it as such.
print("normalize [2, 4, 6]:", T.minmax_normalize([2.0, 4.0, 6.0]))
print("normalize constant:", T.minmax_normalize([5.0, 5.0]))

T.save_npy("/tmp/xaiseg_demo_map.npy", T.bilinear_resize(checker, 8, 8))
back = T.load_npy("/tmp/xaiseg_demo_map.npy")
print("NPY round-trip shape:", back.shape, "dtype:", back.dtype)
