import numpy as np


def make_training_data(n=6, size=16, classes=3, seed=0):
    """Tiny blob-vs-background task, quick enough for unit tests."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for _ in range(n):
        img = rng.uniform(0.0, 0.15, size=(3, size, size))
        label = np.zeros((size, size), dtype=int)
        for c in range(1, classes):
            r, cc = rng.integers(2, size - 6, size=2)
            img[:, r : r + 4, cc : cc + 4] = 0.4 * c
            label[r : r + 4, cc : cc + 4] = c
        xs.append(img)
        ys.append(np.stack([(label == c) for c in range(classes)]).astype(float))
    return np.array(xs), np.array(ys)
