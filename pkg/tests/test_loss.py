import numpy as np
import pytest

from fullband_se import autodiff as ad
from fullband_se.loss import IamLossParams, iam_male_loss, iam_weight, ideal_amplitude_mask

from test_autodiff import fd_grad

E = np.e


class TestIdealAmplitudeMask:
    def test_equal_magnitudes_give_unity(self, rng):
        mag = rng.uniform(0.5, 2.0, (10, 10))
        assert np.allclose(ideal_amplitude_mask(mag, mag), 1.0, atol=1e-6)

    def test_zero_clean_gives_zero(self, rng):
        noisy = rng.uniform(0.5, 2.0, (4, 4))
        assert np.all(ideal_amplitude_mask(np.zeros((4, 4)), noisy) == 0.0)

    def test_half_ratio(self):
        assert ideal_amplitude_mask(np.array([2.0]), np.array([4.0]), gamma=1.0)[0] == \
            pytest.approx(0.5, abs=1e-8)

    def test_may_exceed_one(self):
        assert ideal_amplitude_mask(np.array([3.0]), np.array([1.0]))[0] > 1.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ideal_amplitude_mask(np.array([-1.0]), np.array([1.0]))


class TestIamWeight:
    def test_mask_one(self):
        assert iam_weight(np.array([1.0]), a=2.0, b=1.0)[0] == pytest.approx(E, abs=1e-9)

    def test_mask_zero(self):
        assert iam_weight(np.array([0.0]), a=2.0, b=1.0)[0] == pytest.approx(E**2, abs=1e-9)

    def test_large_mask_tends_to_one(self):
        w = iam_weight(np.array([1e9]), a=2.0, b=1.0)[0]
        assert 1.0 < w < 1.0 + 1e-8

    def test_strictly_decreasing(self):
        grid = np.linspace(0.0, 10.0, 1000)
        w = iam_weight(grid)
        assert np.all(np.diff(w) < 0.0)


class TestIamMaleLoss:
    def test_zero_when_prediction_matches(self, rng):
        clean = rng.uniform(0.0, 2.0, (6, 9))
        noisy = clean + rng.uniform(0.0, 1.0, (6, 9))
        assert iam_male_loss(clean, clean, noisy) == 0.0

    def test_single_bin_hand_value(self):
        # clean 0, noisy 1 -> mask 0 -> weight e^2; |ln(e-1+1) - ln(1)| = 1.
        loss = iam_male_loss(np.array([[E - 1.0]]), np.array([[0.0]]), np.array([[1.0]]))
        assert loss == pytest.approx(E**2, abs=1e-6)

    def test_linear_in_weights(self, rng):
        clean = rng.uniform(0.0, 2.0, (5, 5))
        noisy = rng.uniform(0.1, 2.0, (5, 5))
        pred = rng.uniform(0.0, 2.0, (5, 5))
        base = iam_male_loss(pred, clean, noisy, IamLossParams(a=2.0))
        # doubling every weight: w' = e^{a'/(b+M)} with a' chosen per-bin is not
        # a single parameter change, so scale explicitly via the definition
        m = ideal_amplitude_mask(clean, noisy)
        w = iam_weight(m)
        direct = np.sum(w * np.abs(np.log1p(pred) - np.log1p(clean)))
        assert base == pytest.approx(direct, rel=1e-12)
        doubled = np.sum((2.0 * w) * np.abs(np.log1p(pred) - np.log1p(clean)))
        assert doubled == pytest.approx(2.0 * base, rel=1e-12)

    def test_nonnegative_and_zero_iff_equal(self, rng):
        clean = rng.uniform(0.0, 2.0, (8, 8))
        noisy = rng.uniform(0.1, 2.0, (8, 8))
        pred = clean.copy()
        pred[3, 3] += 0.5
        assert iam_male_loss(pred, clean, noisy) > 0.0

    def test_permutation_symmetry(self, rng):
        clean = rng.uniform(0.0, 2.0, 40)
        noisy = rng.uniform(0.1, 2.0, 40)
        pred = rng.uniform(0.0, 2.0, 40)
        perm = rng.permutation(40)
        a = iam_male_loss(pred, clean, noisy)
        b = iam_male_loss(pred[perm], clean[perm], noisy[perm])
        assert a == pytest.approx(b, rel=1e-12)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError, match="shape"):
            iam_male_loss(np.zeros((2, 3)), np.zeros((3, 2)), np.zeros((3, 2)))

    def test_gradient_matches_finite_differences(self, rng):
        clean = rng.uniform(0.0, 2.0, (4, 6))
        noisy = rng.uniform(0.1, 2.0, (4, 6))
        pred = ad.parameter(rng.uniform(0.05, 2.0, (4, 6)))

        def make():
            return iam_male_loss(pred, clean, noisy)

        loss = make()
        ad.backward(loss)
        numeric = fd_grad(make, pred)
        err = np.linalg.norm(pred.grad - numeric) / np.linalg.norm(numeric)
        assert err < 1e-3

    def test_tensor_and_ndarray_paths_agree(self, rng):
        clean = rng.uniform(0.0, 2.0, (4, 6))
        noisy = rng.uniform(0.1, 2.0, (4, 6))
        pred = rng.uniform(0.0, 2.0, (4, 6))
        assert iam_male_loss(ad.constant(pred), clean, noisy).item() == \
            pytest.approx(iam_male_loss(pred, clean, noisy), rel=1e-12)
