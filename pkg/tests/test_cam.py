import numpy as np
import pytest

from xaiseg import cam
from xaiseg import model as M
from xaiseg.tensorops import bilinear_resize, minmax_normalize

from helpers import make_training_data


def scalar_gradcam_pp(acts, grads, eps=1e-8):
    """Loop-based transcription of the gradient-power formula, used as oracle."""
    k, h, w = acts.shape
    out = np.zeros((h, w))
    for ki in range(k):
        a_sum = acts[ki].sum()
        w_k = 0.0
        for i in range(h):
            for j in range(w):
                g = grads[ki, i, j]
                alpha = g**2 / (2 * g**2 + a_sum * g**3 + eps)
                w_k += alpha * max(g, 0.0)
        out += w_k * acts[ki]
    return np.maximum(out, 0.0)


class StubModel:
    """Live-model stand-in with fixed activations, for ScoreCAM edge cases."""

    live = True

    def __init__(self, acts, class_count=2):
        self.acts = np.asarray(acts, dtype=np.float64)
        self.class_count = class_count

    def forward(self, image):
        h, w = image.shape[1], image.shape[2]
        logits = np.zeros((self.class_count, h, w))
        logits[1] = image.mean(axis=0)
        return M.ScoreMaps(logits=logits)

    def capture(self, image, region=None, class_id=0):
        return self.acts.copy(), np.zeros_like(self.acts)


class TestGradCam:
    def test_zero_gradients_zero_map(self):
        emap = cam.gradcam(np.random.default_rng(0).uniform(size=(4, 5, 5)), np.zeros((4, 5, 5)))
        assert (emap.values == 0).all()

    def test_single_channel_hand_case(self):
        acts = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        grads = np.ones((1, 2, 2))
        emap = cam.gradcam(acts, grads)
        np.testing.assert_allclose(emap.values, [[0.0, 1 / 3], [2 / 3, 1.0]], atol=1e-12)

    def test_gradient_scaling_invariance(self):
        rng = np.random.default_rng(1)
        acts = rng.uniform(size=(3, 4, 4))
        grads = rng.normal(size=(3, 4, 4))
        base = cam.gradcam(acts, grads).values
        for lam in (0.5, 3.0, 100.0):
            np.testing.assert_allclose(cam.gradcam(acts, lam * grads).values, base, atol=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(cam.CamError, match="must both be"):
            cam.gradcam(np.zeros((2, 3, 3)), np.zeros((2, 4, 4)))


class TestHiResCam:
    def test_equals_gradcam_under_constant_gradients(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            acts = rng.normal(size=(5, 6, 6))
            grads = np.repeat(rng.normal(size=(5, 1, 1)), 36, axis=1).reshape(5, 6, 6)
            np.testing.assert_allclose(
                cam.hirescam_raw(acts, grads), cam.gradcam_raw(acts, grads), atol=1e-6
            )

    def test_zero_gradients(self):
        emap = cam.hirescam(np.ones((2, 3, 3)), np.zeros((2, 3, 3)))
        assert (emap.values == 0).all()

    def test_product_support_hot_pixel(self):
        acts = np.full((1, 2, 2), 5.0)
        grads = np.array([[[1.0, 0.0], [0.0, 0.0]]])
        emap = cam.hirescam(acts, grads)
        assert emap.values[0, 0] == 1.0
        assert emap.values.sum() == 1.0


class TestGradCamPP:
    def test_zero_gradients(self):
        emap = cam.gradcam_pp(np.ones((2, 4, 4)), np.zeros((2, 4, 4)))
        assert (emap.values == 0).all()

    def test_constant_case_normalizes_to_zero(self):
        acts = np.full((1, 3, 3), 2.0)
        grads = np.full((1, 3, 3), 0.7)
        emap = cam.gradcam_pp(acts, grads)
        assert (emap.values == 0).all()

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            acts = rng.uniform(size=(2, 3, 3))
            grads = rng.normal(size=(2, 3, 3))
            np.testing.assert_allclose(
                cam.gradcam_pp_raw(acts, grads), scalar_gradcam_pp(acts, grads), atol=1e-6
            )


class TestXGradCam:
    def test_equals_gradcam_under_constant_gradients(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            acts = rng.uniform(0.5, 2.0, size=(4, 5, 5))  # nonnegative sums
            grads = np.repeat(rng.normal(size=(4, 1, 1)), 25, axis=1).reshape(4, 5, 5)
            np.testing.assert_allclose(
                cam.xgradcam_raw(acts, grads), cam.gradcam_raw(acts, grads), atol=1e-6
            )

    def test_zero_gradients(self):
        emap = cam.xgradcam(np.ones((2, 3, 3)), np.zeros((2, 3, 3)))
        assert (emap.values == 0).all()

    def test_uniform_activations_zero_after_normalize(self):
        acts = np.full((1, 4, 4), 3.0)
        grads = np.random.default_rng(5).normal(size=(1, 4, 4))
        emap = cam.xgradcam(acts, grads)
        assert (emap.values == 0).all()


class TestScoreCam:
    def test_single_channel_is_normalized_activation(self):
        rng = np.random.default_rng(6)
        acts = rng.normal(size=(1, 4, 4))
        stub = StubModel(acts)
        image = rng.uniform(size=(3, 8, 8))
        emap = cam.scorecam(stub, image, class_id=1, region=np.ones((8, 8), dtype=bool))
        expected = minmax_normalize(bilinear_resize(np.maximum(acts[0], 0.0), 8, 8))
        np.testing.assert_allclose(emap.values, expected, atol=1e-9)

    def test_all_constant_channels_error(self):
        stub = StubModel(np.ones((3, 4, 4)))
        with pytest.raises(cam.CamError, match="no informative channels"):
            cam.scorecam(stub, np.ones((3, 8, 8)), class_id=1, region=np.ones((8, 8), dtype=bool))

    def test_decomposition_oracle_on_toy_model(self):
        x, y = make_training_data(n=6, size=16, classes=3, seed=2)
        net = M.train_toy(x, y, M.TrainConfig(epochs=8, seed=2))
        image = x[0]
        region = np.ones((16, 16), dtype=bool)
        emap, details = cam.scorecam(net, image, class_id=1, region=region, return_details=True)

        acts, _ = net.capture(image, region=region, class_id=1)
        shifted = details["scores"] - details["baseline"]
        weights = np.exp(shifted - shifted.max())
        weights /= weights.sum()
        raw = np.maximum(np.tensordot(weights, acts[details["informative"]], axes=(0, 0)), 0.0)
        expected = minmax_normalize(raw)
        np.testing.assert_allclose(emap.values, expected, atol=1e-6)

    def test_bundle_rejected(self, tmp_path):
        rng = np.random.default_rng(7)
        M.save_bundle(
            tmp_path / "b",
            rng.uniform(size=(3, 8, 8)),
            rng.uniform(size=(16, 4, 4)),
            rng.normal(size=(16, 4, 4)),
            rng.normal(size=(2, 8, 8)),
            class_id=1,
        )
        src = M.load_bundle(tmp_path / "b")
        with pytest.raises(M.ModelError, match="live model"):
            cam.scorecam(src, src.image, class_id=1, region=np.ones((8, 8), dtype=bool))


@pytest.fixture(scope="module")
def net_and_image():
    x, y = make_training_data(n=6, size=16, classes=3, seed=2)
    net = M.train_toy(x, y, M.TrainConfig(epochs=8, seed=2))
    return net, x[0]


class TestExplain:

    def test_all_methods_produce_valid_maps(self, net_and_image):
        net, image = net_and_image
        region = np.ones((16, 16), dtype=bool)
        for method in cam.METHOD_KEYS:
            emap = cam.explain(net, image, method, class_id=1, region=region)
            assert emap.values.shape == (16, 16)
            assert emap.values.min() >= 0.0 and emap.values.max() <= 1.0
            if emap.values.any():
                assert emap.values.max() == 1.0
            assert emap.runtime_ms > 0
            assert emap.method == method

    def test_gradient_methods_work_on_bundle(self, net_and_image, tmp_path):
        net, image = net_and_image
        region = np.ones((16, 16), dtype=bool)
        acts, grads = net.capture(image, region=region, class_id=1)
        logits = net.forward(image).logits
        M.save_bundle(tmp_path / "b", image, acts, grads, logits, class_id=1, region=region)
        src = M.load_bundle(tmp_path / "b")
        for method in cam.GRADIENT_METHODS:
            live = cam.explain(net, image, method, class_id=1, region=region)
            stored = cam.explain(src, image, method, class_id=1, region=region)
            np.testing.assert_allclose(stored.values, live.values, atol=1e-9)

    def test_unknown_method(self, net_and_image):
        net, image = net_and_image
        with pytest.raises(cam.CamError, match="unknown method"):
            cam.explain(net, image, "smoothgrad", class_id=0)
