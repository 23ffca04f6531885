"""Loss values against frozen references and their exact identities.

Scalar reference values were computed independently with scipy
(scipy.special.log_softmax / softmax and hand-reduced expressions) and
are frozen here as literals. Structural identities (smoothing
decomposition, gradient equivalences, stop-gradient behavior) are
checked over seeded random batches.
"""
from __future__ import annotations

import numpy as np
import pytest

from retrolearn.losses import (
    LOG_FLOOR,
    cross_entropy,
    kl_divergence,
    lsr_loss,
    lwr_loss,
    lwr_loss_parts,
    max_entropy_loss,
    softmax_temperature,
)
from retrolearn.tensor import ShapeError, Tape, Tensor


def entropy(p):
    p = np.asarray(p)
    return float(-(p[p > 0] * np.log(p[p > 0])).sum())


class TestSoftmaxTemperature:
    def test_reference_value(self):
        # scipy.special.softmax(np.array([2., 0.]) / 2)
        out = softmax_temperature(np.array([2.0, 0.0]), tau=2.0)
        np.testing.assert_allclose(
            out, [0.7310585786300049, 0.2689414213699951], rtol=0, atol=1e-16
        )

    def test_tensor_and_array_paths_agree(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            z = rng.normal(size=(4, 6)) * rng.uniform(0.1, 20)
            tau = float(rng.uniform(0.3, 15))
            a = softmax_temperature(z, tau)
            b = softmax_temperature(Tensor(z), tau).values
            np.testing.assert_allclose(a, b, atol=1e-14)

    def test_rows_sum_to_one_even_for_extreme_logits(self):
        z = np.array([[1e4, 0.0, -1e4], [-1e4, -1e4, -1e4]])
        out = softmax_temperature(z, 1.0)
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out.sum(axis=1), [1.0, 1.0], atol=1e-12)

    def test_entropy_grows_with_temperature(self):
        """Softening must monotonically flatten any non-uniform row."""
        z = np.array([3.0, 1.0, -2.0, 0.5])
        taus = [0.5, 1.0, 2.0, 5.0, 10.0, 100.0]
        entropies = [entropy(softmax_temperature(z, t)) for t in taus]
        assert all(a < b for a, b in zip(entropies, entropies[1:]))
        assert entropies[-1] < np.log(4) + 1e-9

    def test_rejects_nonpositive_temperature(self):
        with pytest.raises(ValueError):
            softmax_temperature(np.array([1.0, 2.0]), tau=0.0)


class TestCrossEntropy:
    def test_reference_values(self):
        # -log_softmax([1,2,3])[2] and -log_softmax([1,0])[0] via scipy
        loss = cross_entropy(Tensor([[1.0, 2.0, 3.0]]), np.array([2]))
        np.testing.assert_allclose(loss.item(), 0.4076059644443804, atol=1e-15)
        loss = cross_entropy(Tensor([[1.0, 0.0]]), np.array([0]))
        np.testing.assert_allclose(loss.item(), 0.31326168751822286, atol=1e-15)

    def test_gradient_is_probs_minus_onehot_over_batch(self):
        rng = np.random.default_rng(0)
        z = rng.normal(size=(8, 5)) * 2
        y = rng.integers(0, 5, size=8)
        t = Tensor(z, requires_grad=True)
        with Tape() as tape:
            tape.backward(cross_entropy(t, y))
        probs = softmax_temperature(z, 1.0)
        onehot = np.eye(5)[y]
        np.testing.assert_allclose(t.grad, (probs - onehot) / 8.0, atol=1e-12)

    def test_label_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            cross_entropy(Tensor([[0.0, 1.0]]), np.array([0, 1]))


class TestKlDivergence:
    def test_reference_value(self):
        # KL([0.6, 0.4] || softmax([1,0]/2)), softened probs from scipy
        student = softmax_temperature(np.array([1.0, 0.0]), tau=2.0)
        np.testing.assert_allclose(
            student, [0.6224593312018546, 0.37754066879814546], atol=1e-16
        )
        val = kl_divergence(np.array([0.6, 0.4]), student)
        np.testing.assert_allclose(val.item(), 0.0010653171708501809, atol=1e-16)

    def test_hand_cases(self):
        # KL([1,0] || [.5,.5]) = ln 2; zero target entries contribute nothing
        val = kl_divergence(np.array([1.0, 0.0]), np.array([0.5, 0.5]))
        np.testing.assert_allclose(val.item(), np.log(2.0), atol=1e-12)
        val = kl_divergence(np.array([0.3, 0.7]), np.array([0.3, 0.7]))
        assert val.item() == 0.0

    def test_nonnegative_on_random_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            p = rng.dirichlet(np.ones(6), size=3)
            q = rng.dirichlet(np.ones(6), size=3)
            assert kl_divergence(p, q).item() >= 0.0

    def test_gradient_into_live_second_argument(self):
        # d/dq of sum p (log p - log q) is -p/q (single row, batch of 1)
        q = Tensor([[0.5, 0.5]], requires_grad=True)
        p = np.array([[0.6, 0.4]])
        with Tape() as tape:
            tape.backward(kl_divergence(p, q))
        np.testing.assert_allclose(q.grad, [[-1.2, -0.8]], atol=1e-12)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            kl_divergence(np.array([0.9, 0.2]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            kl_divergence(np.array([-0.1, 1.1]), np.array([0.5, 0.5]))
        with pytest.raises(ShapeError):
            kl_divergence(np.array([1.0]), np.array([0.5, 0.5]))


class TestLwrLoss:
    def test_reference_composite_value(self):
        # alpha*CE + beta*tau^2*KL with all three pieces from scipy:
        # 0.5*0.31326168751822286 + 0.5*4*0.0010653171708501809
        loss = lwr_loss(
            Tensor([[1.0, 0.0]]), np.array([0]), np.array([[0.6, 0.4]]),
            tau=2.0, alpha=0.5, beta=0.5,
        )
        np.testing.assert_allclose(loss.item(), 0.1587614781008118, atol=1e-15)

    def test_parts_recombine_exactly(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            B, C = int(rng.integers(2, 9)), int(rng.integers(2, 7))
            z = Tensor(rng.normal(size=(B, C)) * 3, requires_grad=True)
            y = rng.integers(0, C, size=B)
            s = rng.dirichlet(np.ones(C), size=B)
            tau = float(rng.uniform(0.5, 10))
            alpha = float(rng.uniform(0, 1))
            total_loss, hard, retro = lwr_loss_parts(z, y, s, tau, alpha, 1 - alpha)
            lhs = total_loss.item()
            rhs = alpha * hard.item() + (1 - alpha) * tau * tau * retro.item()
            np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_retro_part_matches_generic_divergence(self):
        """The fused retrospection term equals KL(stored || student).

        Logits are kept mild: the generic divergence floors probabilities
        near 1e-12 while the fused term works in exact log space, so the
        two only coincide away from that regime.
        """
        rng = np.random.default_rng(5)
        for _ in range(20):
            z = rng.normal(size=(5, 4)) * 2
            s = rng.dirichlet(np.ones(4), size=5)
            tau = float(rng.uniform(1.0, 8))
            _, _, retro = lwr_loss_parts(Tensor(z), np.zeros(5, dtype=int), s, tau, 0.5, 0.5)
            direct = kl_divergence(s, softmax_temperature(z, tau))
            np.testing.assert_allclose(retro.item(), direct.item(), atol=1e-10)

    def test_retro_gradient_is_probs_minus_stored(self):
        # with alpha=0, beta=1: grad = tau^2 * (softmax(z/tau) - s) / (B*tau)
        rng = np.random.default_rng(11)
        z = rng.normal(size=(6, 3)) * 2
        s = rng.dirichlet(np.ones(3), size=6)
        tau = 4.0
        t = Tensor(z, requires_grad=True)
        with Tape() as tape:
            tape.backward(lwr_loss(t, np.zeros(6, dtype=int), s, tau, 0.0, 1.0))
        want = tau * (softmax_temperature(z, tau) - s) / 6.0
        np.testing.assert_allclose(t.grad, want, atol=1e-12)

    def test_stored_labels_are_detached(self):
        """Perturbing stored labels moves the value, never receives gradient."""
        z = np.random.default_rng(0).normal(size=(4, 3))
        y = np.array([0, 1, 2, 0])
        s1 = np.full((4, 3), 1.0 / 3)
        s2 = s1.copy()
        s2[:, 0] += 0.1
        s2[:, 1] -= 0.1
        v1 = lwr_loss(Tensor(z), y, s1, tau=2.0, alpha=0.5, beta=0.5).item()
        v2 = lwr_loss(Tensor(z), y, s2, tau=2.0, alpha=0.5, beta=0.5).item()
        assert v1 != v2

        stored = Tensor(s2, requires_grad=True)
        t = Tensor(z, requires_grad=True)
        with Tape() as tape:
            tape.backward(lwr_loss(t, y, stored, tau=2.0, alpha=0.5, beta=0.5))
        assert t.grad is not None and np.any(t.grad != 0.0)
        assert stored.grad is None or not np.any(stored.grad)

    def test_finite_at_extreme_logits(self):
        z = Tensor(np.array([[1e4, -1e4, 0.0]]), requires_grad=True)
        s = np.array([[0.2, 0.5, 0.3]])
        with Tape() as tape:
            loss = lwr_loss(z, np.array([1]), s, tau=2.0, alpha=0.5, beta=0.5)
            tape.backward(loss)
        assert np.isfinite(loss.item())
        assert np.all(np.isfinite(z.grad))

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            lwr_loss(Tensor([[0.0, 1.0]]), np.array([0]), np.array([[0.5, 0.5]]),
                     tau=1.0, alpha=-0.1, beta=1.1)


class TestLsrLoss:
    def test_reference_value(self):
        # 0.9 * CE + 0.1 * mean cross-entropy vs uniform, scipy pieces
        loss = lsr_loss(Tensor([[1.0, 0.0]]), np.array([0]), epsilon=0.1)
        np.testing.assert_allclose(loss.item(), 0.3632616875182229, atol=1e-15)

    def test_epsilon_zero_is_plain_cross_entropy(self):
        rng = np.random.default_rng(9)
        z = rng.normal(size=(5, 4))
        y = rng.integers(0, 4, size=5)
        a = lsr_loss(Tensor(z), y, epsilon=0.0).item()
        b = cross_entropy(Tensor(z), y).item()
        assert a == b

    def test_matches_smoothed_target_cross_entropy(self):
        """Both readings of label smoothing give the same number."""
        rng = np.random.default_rng(21)
        for _ in range(20):
            B, C = int(rng.integers(2, 7)), int(rng.integers(2, 6))
            z = rng.normal(size=(B, C)) * 3
            y = rng.integers(0, C, size=B)
            eps = float(rng.uniform(0, 0.5))
            lp = np.log(softmax_temperature(z, 1.0))
            target = (1 - eps) * np.eye(C)[y] + eps / C
            direct = -(target * lp).sum(axis=1).mean()
            np.testing.assert_allclose(
                lsr_loss(Tensor(z), y, eps).item(), direct, atol=1e-12
            )

    def test_gradient_identity_with_uniform_retrospection(self):
        """Smoothing epsilon behaves as keeping weight alpha = 1 - epsilon
        on the hard term with uniform stored labels at tau = 1."""
        rng = np.random.default_rng(31)
        worst = 0.0
        for _ in range(25):
            B, C = int(rng.integers(2, 10)), int(rng.integers(2, 8))
            z = rng.normal(size=(B, C)) * 3
            y = rng.integers(0, C, size=B)
            uniform = np.full((B, C), 1.0 / C)

            t1 = Tensor(z, requires_grad=True)
            with Tape() as tape:
                tape.backward(lsr_loss(t1, y, epsilon=0.1))
            t2 = Tensor(z, requires_grad=True)
            with Tape() as tape:
                tape.backward(lwr_loss(t2, y, uniform, tau=1.0, alpha=0.9, beta=0.1))
            worst = max(worst, float(np.abs(t1.grad - t2.grad).max()))
        assert worst < 1e-9

    def test_epsilon_range_validated(self):
        with pytest.raises(ValueError):
            lsr_loss(Tensor([[0.0, 1.0]]), np.array([0]), epsilon=1.0)


class TestMaxEntropyLoss:
    def test_reference_value(self):
        # CE - 0.1 * H(softmax([1,0])) = 0.31326... - 0.1 * 0.58220...
        loss = max_entropy_loss(Tensor([[1.0, 0.0]]), np.array([0]), weight=0.1)
        np.testing.assert_allclose(loss.item(), 0.2550413766294011, atol=1e-15)

    def test_zero_weight_is_plain_cross_entropy(self):
        rng = np.random.default_rng(13)
        z = rng.normal(size=(6, 3))
        y = rng.integers(0, 3, size=6)
        a = max_entropy_loss(Tensor(z), y, weight=0.0).item()
        b = cross_entropy(Tensor(z), y).item()
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_entropy_bonus_prefers_flatter_predictions(self):
        sharp = Tensor([[8.0, 0.0]])
        flat = Tensor([[0.5, 0.0]])
        y = np.array([0])
        ce_gap = cross_entropy(sharp, y).item() - cross_entropy(flat, y).item()
        me_gap = (
            max_entropy_loss(sharp, y, weight=0.5).item()
            - max_entropy_loss(flat, y, weight=0.5).item()
        )
        # the entropy bonus moves the comparison toward the flat prediction
        assert me_gap > ce_gap


class TestClampFloor:
    def test_floor_is_tiny_but_positive(self):
        assert 0.0 < LOG_FLOOR <= 1e-9
