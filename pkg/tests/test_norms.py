"""Regularizers, subgradients, and output-preserving rescalings."""

import numpy as np
import pytest

from pesvlab import netcore as nc, norms
from pesvlab.netcore import ActivationSpec, NetParams, UnsupportedActivationError

from test_netcore import random_net


class TestPesvNorm:
    def test_zero_weights(self):
        p = NetParams.from_arrays([np.zeros((3, 4)), np.zeros((1, 3))])
        assert norms.pesv_norm(p) == 0.0

    def test_two_layer_hand_eval(self):
        """2*||(3,4)|| + 3*||(0,5)|| = 2*5 + 3*5 = 25."""
        p = NetParams.from_arrays(
            [np.array([[3.0, 4.0], [0.0, 5.0]]), np.array([[2.0, -3.0]])]
        )
        assert norms.pesv_norm(p) == 25.0

    def test_unit_single_path(self):
        p = NetParams.from_arrays(
            [np.array([[0.6, 0.8]]), np.array([[1.0]]), np.array([[1.0]])]
        )
        assert norms.pesv_norm(p) == pytest.approx(1.0, rel=1e-15)

    def test_output_scaling_linearity(self):
        rng = np.random.default_rng(0)
        p = random_net(rng, (3, 2), 2)
        base = norms.pesv_norm(p)
        scaled = [np.array(w) for w in p.layers]
        scaled[-1] *= 3.5
        assert norms.pesv_norm(scaled) == pytest.approx(3.5 * base, rel=1e-12)


class TestMatrixProductVariant:
    def test_equals_pesv_when_nonnegative(self):
        rng = np.random.default_rng(1)
        layers = [np.abs(rng.normal(size=(3, 4))), np.abs(rng.normal(size=(2, 3))),
                  np.abs(rng.normal(size=(1, 2)))]
        p = NetParams.from_arrays(layers)
        assert norms.pesv_matrixproduct_variant(p) == pytest.approx(
            norms.pesv_norm(p), rel=1e-12
        )

    def test_sign_cancellation(self):
        """Opposite hidden signs cancel in the product form: 0 versus 2."""
        p = NetParams.from_arrays(
            [np.array([[1.0, 0.0]]), np.array([[1.0], [-1.0]]), np.array([[1.0, 1.0]])]
        )
        assert norms.pesv_matrixproduct_variant(p) == 0.0
        assert norms.pesv_norm(p) == 2.0

    def test_zero_weights(self):
        p = NetParams.from_arrays([np.zeros((2, 3)), np.zeros((1, 2))])
        assert norms.pesv_matrixproduct_variant(p) == 0.0

    def test_never_exceeds_pesv(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            p = random_net(rng, (3, 4, 2), 3)
            assert norms.pesv_matrixproduct_variant(p) <= norms.pesv_norm(p) + 1e-12


class TestPesvSubgradient:
    def test_two_layer_hand_eval(self):
        p = NetParams.from_arrays([np.array([[3.0, 4.0]]), np.array([[2.0]])])
        g = norms.pesv_subgradient(p)
        np.testing.assert_allclose(g[1], [[5.0]])
        np.testing.assert_allclose(g[0], [[2 * 0.6, 2 * 0.8]])

    def test_zero_params_zero_subgradient(self):
        p = NetParams.from_arrays([np.zeros((2, 3)), np.zeros((1, 2))])
        for g in norms.pesv_subgradient(p):
            assert np.all(g == 0.0)

    def test_matches_finite_differences(self):
        """FD oracle on a positive-weight net (no kinks)."""
        rng = np.random.default_rng(3)
        layers = [
            np.abs(rng.normal(size=(3, 4))) + 0.1,
            np.abs(rng.normal(size=(2, 3))) + 0.1,
            np.abs(rng.normal(size=(1, 2))) + 0.1,
        ]
        g = norms.pesv_subgradient(layers)
        eps = 1e-6
        for li in range(3):
            for i in range(layers[li].shape[0]):
                for j in range(layers[li].shape[1]):
                    hi = [w.copy() for w in layers]
                    lo = [w.copy() for w in layers]
                    hi[li][i, j] += eps
                    lo[li][i, j] -= eps
                    fd = (norms.pesv_norm(hi) - norms.pesv_norm(lo)) / (2 * eps)
                    assert abs(fd - g[li][i, j]) <= 1e-5 * max(abs(fd), 1.0)


class TestWeightDecay:
    def test_cases(self):
        assert norms.weight_decay_norm(
            NetParams.from_arrays([np.zeros((2, 3)), np.zeros((1, 2))])
        ) == 0.0
        p = NetParams.from_arrays([np.array([[3.0, 4.0]]), np.array([[2.0]])])
        assert norms.weight_decay_norm(p) == 29.0
        doubled = [2.0 * np.array(w) for w in p.layers]
        assert norms.weight_decay_norm(doubled) == 4 * 29.0

    def test_subgradient_is_gradient(self):
        rng = np.random.default_rng(4)
        p = random_net(rng, (3,), 2)
        for g, w in zip(norms.weight_decay_subgradient(p), p.layers):
            np.testing.assert_array_equal(g, 2.0 * w)


class TestMixedMaxNorm:
    def test_zeros(self):
        p = NetParams.from_arrays([np.zeros((2, 3)), np.zeros((1, 2))])
        assert norms.mixed_max_norm(p, 1, 2) == 0.0

    def test_hand_eval(self):
        """max{||a||_1-ish rows, first-layer l2 rows} = max{3, 5} = 5."""
        p = NetParams.from_arrays(
            [np.array([[3.0, 4.0], [1.0, 0.0]]), np.array([[1.0, -2.0]])]
        )
        assert norms.mixed_max_norm(p, 1, 2) == 5.0

    def test_single_weight(self):
        p = NetParams.from_arrays([np.zeros((2, 3)), np.array([[0.0, 7.0]])])
        assert norms.mixed_max_norm(p, 1, 2) == 7.0

    def test_rejects_bad_exponents(self):
        p = NetParams.from_arrays([np.ones((1, 2)), np.ones((1, 1))])
        with pytest.raises(ValueError):
            norms.mixed_max_norm(p, 0.5, 2)

    def test_subgradient_matches_fd(self):
        rng = np.random.default_rng(5)
        layers = [rng.normal(size=(3, 4)), rng.normal(size=(1, 3))]
        g = norms.mixed_max_subgradient(layers, 1, 2)
        eps = 1e-7
        base = norms.mixed_max_norm(layers, 1, 2)
        # directional check: moving along the subgradient increases the max norm
        moved = [w + eps * gi for w, gi in zip(layers, g)]
        gnorm2 = sum(float(np.sum(gi * gi)) for gi in g)
        assert norms.mixed_max_norm(moved, 1, 2) == pytest.approx(
            base + eps * gnorm2, rel=1e-4
        )


class TestRescaleNeuron:
    def test_identity_when_c_is_one(self):
        rng = np.random.default_rng(6)
        p = random_net(rng, (3, 2), 2)
        q = norms.rescale_neuron(p, 1, 1, 1.0)
        for a, b in zip(p.layers, q.layers):
            np.testing.assert_array_equal(a, b)

    def test_rejects_nonpositive_factor(self):
        p = NetParams.from_arrays([np.ones((2, 3)), np.ones((1, 2))])
        with pytest.raises(ValueError):
            norms.rescale_neuron(p, 1, 0, 0.0)

    def test_relu_outputs_unchanged(self):
        rng = np.random.default_rng(7)
        act = ActivationSpec.relu()
        p = random_net(rng, (4, 3), 2)
        x = rng.normal(size=(100, 3))
        base = nc.forward(p, act, x)
        for layer, width in ((1, 4), (2, 3)):
            for j in range(width):
                q = norms.rescale_neuron(p, layer, j, 2.0)
                got = nc.forward(q, act, x)
                np.testing.assert_allclose(got, base, rtol=1e-10, atol=1e-14)

    def test_pesv_invariant(self):
        """Path products are invariant under per-neuron rescaling."""
        rng = np.random.default_rng(8)
        p = random_net(rng, (4, 3), 2)
        base = norms.pesv_norm(p)
        for c in (0.25, 1.7, 10.0):
            q = norms.rescale_neuron(p, 2, 1, c)
            assert norms.pesv_norm(q) == pytest.approx(base, rel=1e-10)


class TestBalanceRelu:
    def test_two_layer_closed_form(self):
        """|a| = ||w||_2 = sqrt(2) after balancing; weight decay = 2 nu."""
        p = NetParams.from_arrays([np.array([[0.3, 0.4]]), np.array([[4.0]])])
        b = norms.balance_relu(p, ActivationSpec.relu())
        assert np.linalg.norm(b.layers[0]) == pytest.approx(np.sqrt(2), rel=1e-12)
        assert abs(b.layers[1][0, 0]) == pytest.approx(np.sqrt(2), rel=1e-12)
        assert norms.weight_decay_norm(b) == pytest.approx(4.0, rel=1e-12)
        assert norms.weight_decay_norm(b) == pytest.approx(
            2 * norms.pesv_norm(b), rel=1e-12
        )

    def test_fixed_point_returned_unchanged(self):
        p = NetParams.from_arrays(
            [np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[1.0, -1.0]])]
        )
        b = norms.balance_relu(p, ActivationSpec.relu())
        for a, c in zip(p.layers, b.layers):
            assert np.max(np.abs(a - c)) <= 1e-12

    def test_three_layer_outputs_and_decay(self):
        rng = np.random.default_rng(9)
        act = ActivationSpec.relu()
        p = random_net(rng, (4, 3), 2)
        b = norms.balance_relu(p, act)
        x = rng.normal(size=(200, 3))
        f0, f1 = nc.forward(p, act, x), nc.forward(b, act, x)
        assert np.max(np.abs(f0 - f1)) <= 1e-9 * max(1.0, np.max(np.abs(f0)))
        assert norms.weight_decay_norm(b) <= norms.weight_decay_norm(p) + 1e-12

    def test_two_layer_decay_equals_twice_pesv(self):
        rng = np.random.default_rng(10)
        for seed in range(5):
            p = random_net(np.random.default_rng(seed), (6,), 3)
            b = norms.balance_relu(p, ActivationSpec.relu())
            assert norms.weight_decay_norm(b) == pytest.approx(
                2 * norms.pesv_norm(b), rel=1e-9
            )

    def test_balance_minimizes_over_sampled_rescalings(self):
        """No random per-neuron rescaling beats the balanced weight decay."""
        rng = np.random.default_rng(11)
        p = random_net(rng, (3, 3), 2)
        b = norms.balance_relu(p, ActivationSpec.relu())
        wd_bal = norms.weight_decay_norm(b)
        for _ in range(200):
            q = p
            for layer, width in ((1, 3), (2, 3)):
                for j in range(width):
                    q = norms.rescale_neuron(q, layer, j, float(rng.uniform(0.2, 5.0)))
            assert norms.weight_decay_norm(q) >= wd_bal - 1e-9

    def test_max_norm_canonical_rescaling_two_layer(self):
        """Per-neuron rescaling to common row norm sqrt(nu) puts the mixed
        max norm at exactly sqrt(nu) on a hand-built depth-2 net."""
        p = NetParams.from_arrays(
            [np.array([[3.0, 4.0], [0.0, 5.0]]), np.array([[2.0, -3.0]])]
        )
        nu = norms.pesv_norm(p)  # 25
        t = np.sqrt(nu)
        q = p
        for j in range(2):
            row_norm = np.linalg.norm(q.layers[0][j])
            q = norms.rescale_neuron(q, 1, j, t / row_norm)
        assert norms.mixed_max_norm(q, 1, 2) == pytest.approx(t, rel=1e-12)
        assert norms.pesv_norm(q) == pytest.approx(nu, rel=1e-12)

    def test_rejects_non_homogeneous(self):
        p = NetParams.from_arrays([np.ones((1, 2)), np.ones((1, 1))])
        tab = ActivationSpec.tabulated([-1.0, 0.0, 1.0], [0.0, 0.0, 0.9])
        with pytest.raises(UnsupportedActivationError):
            norms.balance_relu(p, tab)

    def test_dead_neuron_cleanup(self):
        """A neuron with zero incoming weights has its outgoing zeroed."""
        p = NetParams.from_arrays(
            [np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[5.0, 1.0]])]
        )
        b = norms.balance_relu(p, ActivationSpec.relu())
        assert b.layers[1][0, 0] == 0.0
        x = np.random.default_rng(0).normal(size=(50, 2))
        act = ActivationSpec.relu()
        np.testing.assert_allclose(
            nc.forward(b, act, x), nc.forward(p, act, x), rtol=1e-12, atol=1e-15
        )
