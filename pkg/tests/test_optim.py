import numpy as np
import pytest

from sard.nn.optim import Adam, DivergenceError, lr_at


class TestSchedule:
    def test_step_boundaries(self):
        assert lr_at(0) == pytest.approx(0.002)
        assert lr_at(4) == pytest.approx(0.002)
        assert lr_at(5) == pytest.approx(0.002 * 0.8)
        assert lr_at(9) == pytest.approx(0.002 * 0.8)
        assert lr_at(10) == pytest.approx(0.002 * 0.8 ** 2)
        assert lr_at(49) == pytest.approx(0.002 * 0.8 ** 9)

    def test_custom_parameters(self):
        assert lr_at(7, lr0=0.1, decay=0.5, decay_step=2) == pytest.approx(0.1 * 0.5 ** 3)

    def test_rejects_negative_epoch(self):
        with pytest.raises(ValueError):
            lr_at(-1)


class TestAdam:
    def test_matches_reference_implementation(self):
        gen = np.random.default_rng(0)
        p = gen.standard_normal(6)
        ref = p.copy()
        adam = Adam([("p", p)], beta1=0.9, beta2=0.999, eps=1e-8)

        m = np.zeros_like(ref)
        v = np.zeros_like(ref)
        lr = 0.01
        for t in range(1, 6):
            g = gen.standard_normal(6)
            adam.step([("p", g)], lr)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            mhat = m / (1 - 0.9 ** t)
            vhat = v / (1 - 0.999 ** t)
            ref -= lr * mhat / (np.sqrt(vhat) + 1e-8)
            np.testing.assert_allclose(p, ref, rtol=1e-12)

    def test_first_step_is_signed_lr(self):
        p = np.array([1.0, 1.0])
        adam = Adam([("p", p)])
        g = np.array([0.3, -0.7])
        adam.step([("p", g)], lr=0.01)
        # bias correction makes mhat = g, vhat = g^2 on step one
        np.testing.assert_allclose(p, [1.0 - 0.01, 1.0 + 0.01], atol=1e-6)

    def test_updates_in_place(self):
        p = np.zeros(3)
        adam = Adam([("p", p)])
        before = p
        adam.step([("p", np.ones(3))], lr=0.1)
        assert before is p and p[0] != 0.0

    def test_divergence_error_names_parameter(self):
        p = np.zeros(2)
        adam = Adam([("layer03.w", p)])
        bad = np.array([1.0, np.nan])
        with pytest.raises(DivergenceError, match="layer03.w"):
            adam.step([("layer03.w", bad)], lr=0.1)

    def test_gradient_count_mismatch(self):
        adam = Adam([("a", np.zeros(2)), ("b", np.zeros(2))])
        with pytest.raises(ValueError, match="gradients"):
            adam.step([("a", np.zeros(2))], lr=0.1)

    def test_gradient_shape_mismatch(self):
        adam = Adam([("a", np.zeros(2))])
        with pytest.raises(ValueError, match="does not match"):
            adam.step([("a", np.zeros(3))], lr=0.1)
