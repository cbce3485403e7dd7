import json

import numpy as np
import pytest

from shortcutlab.activations import ActivationTriple
from shortcutlab.network import (
    Dataset,
    ShortcutNetwork,
    batch_forward,
    end_to_end_map,
    flatten,
    forward,
    gradient,
    load_network,
    loss,
    save_network,
    unflatten,
    zero_network,
)
from shortcutlab.rng import Rng

from util import random_dataset, random_network


def _interpreter_forward(net, x):
    """Straight-line scalar re-implementation of one forward pass."""
    acts = {"identity": lambda v: v,
            "relu": lambda v: v if v > 0 else 0.0,
            "tanh": np.tanh}
    pre, mid, post = (acts[k] for k in net.activations.names)
    u = [float(v) for v in x]
    for r in range(net.R):
        h = [pre(v) for v in u]
        for l in range(net.n):
            w = net.weights[r][l]
            z = [sum(w[i][j] * h[j] for j in range(net.d)) for i in range(net.d)]
            if l == 0 and net.biases is not None:
                z = [z[i] + net.biases[r][i] for i in range(net.d)]
            h = [mid(v) for v in z] if l < net.n - 1 else [post(v) for v in z]
        u = [u[i] + h[i] for i in range(net.d)] if net.shortcut else h
    return np.array(u)


class TestForward:
    def test_zero_weights_identity_map(self):
        for acts in ("identity,identity,identity", "tanh,relu,tanh"):
            net = zero_network(3, 2, 4, ActivationTriple.from_names(acts))
            x = np.array([0.3, -1.2, 2.0])
            assert np.array_equal(forward(net, x), x)

    def test_single_linear_unit(self):
        m = Rng(1).normal_matrix(3, 3)
        net = ShortcutNetwork(3, 1, 1, [[m]])
        x = Rng(2).normal(3)
        assert np.allclose(forward(net, x), (m + np.eye(3)) @ x, atol=1e-14)

    def test_matches_interpreter_oracle(self):
        net = random_network(4, 2, 2, acts="identity,relu,identity", seed=3)
        x = Rng(4).normal(4)
        assert np.max(np.abs(forward(net, x) - _interpreter_forward(net, x))) <= 1e-12

    def test_biased_unit_matches_interpreter(self):
        net = random_network(3, 2, 2, acts="identity,relu,identity", seed=5)
        net = ShortcutNetwork(3, 2, 2, net.weights, net.activations,
                              biases=[Rng(6).normal(3), Rng(7).normal(3)])
        x = Rng(8).normal(3)
        assert np.max(np.abs(forward(net, x) - _interpreter_forward(net, x))) <= 1e-12

    def test_dimension_mismatch_rejected(self):
        net = zero_network(3, 1, 1)
        with pytest.raises(ValueError):
            forward(net, np.ones(4))


class TestEndToEndMap:
    def test_zero_weights(self):
        assert np.array_equal(end_to_end_map(zero_network(4, 2, 3)), np.eye(4))

    def test_single_unit_expansion(self):
        a1 = Rng(9).normal_matrix(3, 3)
        a2 = Rng(10).normal_matrix(3, 3)
        net = ShortcutNetwork(3, 2, 1, [[a1, a2]])
        assert np.allclose(end_to_end_map(net), a2 @ a1 + np.eye(3), atol=1e-14)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_consistent_with_forward(self, seed):
        net = random_network(3, 2, 3, seed=seed)
        x = Rng(100 + seed).normal(3)
        assert np.allclose(end_to_end_map(net) @ x, forward(net, x), atol=1e-12)

    def test_nonlinear_rejected(self):
        net = zero_network(3, 2, 1, ActivationTriple.from_names("identity,relu,identity"))
        with pytest.raises(ValueError):
            end_to_end_map(net)

    def test_plain_network_is_weight_product(self):
        net = random_network(3, 1, 3, seed=11, shortcut=False)
        expected = net.weights[2][0] @ net.weights[1][0] @ net.weights[0][0]
        assert np.allclose(end_to_end_map(net), expected, atol=1e-14)


class TestLoss:
    def test_zero_weights_value(self):
        data = random_dataset(3, 5, seed=12)
        net = zero_network(3, 2, 2)
        expected = np.sum((data.Y - data.X) ** 2) / (2 * data.m)
        assert loss(net, data) == pytest.approx(expected, rel=1e-14)

    def test_exact_fit_gives_zero(self):
        net = random_network(3, 2, 2, seed=13)
        X = Rng(14).normal_matrix(3, 6)
        data = Dataset(X, batch_forward(net, X))
        assert loss(net, data) <= 1e-28

    def test_matches_per_sample_loop_oracle(self):
        net = random_network(3, 2, 2, acts="tanh,relu,identity", seed=15)
        data = random_dataset(3, 4, seed=16)
        total = 0.0
        for mu in range(data.m):
            out = _interpreter_forward(net, data.X[:, mu])
            total += sum((data.Y[i, mu] - out[i]) ** 2 for i in range(3))
        assert loss(net, data) == pytest.approx(total / (2 * data.m), rel=1e-12)


def _fd_loss_gradient(net, data, h=1e-5):
    w0 = flatten(net)
    g = np.zeros_like(w0)
    for j in range(w0.size):
        wp = w0.copy()
        wp[j] += h
        wm = w0.copy()
        wm[j] -= h
        g[j] = (loss(unflatten(wp, net), data) - loss(unflatten(wm, net), data)) / (2 * h)
    return g


class TestGradient:
    def test_zero_at_exact_fit(self):
        net = random_network(3, 1, 2, seed=17)
        X = Rng(18).normal_matrix(3, 5)
        data = Dataset(X, batch_forward(net, X))
        assert np.max(np.abs(gradient(net, data))) <= 1e-12

    @pytest.mark.parametrize("acts", ["identity,identity,identity", "tanh,relu,tanh"])
    def test_zero_at_zero_point_for_two_matrix_paths(self, acts):
        data = random_dataset(3, 5, seed=19)
        net = zero_network(3, 2, 2, ActivationTriple.from_names(acts))
        assert np.max(np.abs(gradient(net, data))) == 0.0

    @pytest.mark.parametrize(
        "d,n,R,acts,seed",
        [
            (3, 1, 2, "identity,identity,identity", 20),
            (3, 2, 2, "tanh,tanh,tanh", 21),
            (4, 3, 1, "identity,tanh,identity", 22),
            (2, 2, 3, "tanh,identity,tanh", 23),
        ],
    )
    def test_matches_finite_differences(self, d, n, R, acts, seed):
        net = random_network(d, n, R, acts=acts, seed=seed)
        data = random_dataset(d, 6, seed=seed + 1000)
        diff = np.abs(gradient(net, data) - _fd_loss_gradient(net, data))
        assert np.max(diff) <= 1e-6

    def test_relu_away_from_kinks_matches_fd(self):
        # keep every relu pre-activation at least 1e-3 from the kink so the
        # finite-difference stencil never crosses it
        for seed in range(30, 40):
            net = random_network(3, 2, 2, acts="identity,relu,identity", seed=seed, scale=0.8)
            data = random_dataset(3, 5, seed=seed + 2000)
            u = data.X
            margin = np.inf
            for r in range(net.R):
                z = net.weights[r][0] @ net.activations.pre(u)
                margin = min(margin, float(np.min(np.abs(z))))
                u = u + net.activations.post(
                    net.weights[r][1] @ net.activations.mid(z)
                )
            if margin < 1e-3:
                continue
            diff = np.abs(gradient(net, data) - _fd_loss_gradient(net, data))
            assert np.max(diff) <= 1e-6
            break
        else:
            pytest.fail("no seed produced pre-activations clear of the kink")

    def test_biased_network_gradient(self):
        base = random_network(3, 2, 2, acts="identity,relu,identity", seed=41, scale=0.8)
        net = ShortcutNetwork(3, 2, 2, base.weights, base.activations,
                              biases=[np.array([0.3, -0.2, 0.5]), np.array([0.1, 0.4, -0.6])])
        data = random_dataset(3, 5, seed=42)
        diff = np.abs(gradient(net, data) - _fd_loss_gradient(net, data))
        assert np.max(diff) <= 1e-6


class TestFlatten:
    def test_round_trip(self):
        net = random_network(3, 2, 2, acts="identity,relu,identity", seed=43)
        back = unflatten(flatten(net), net)
        for r in range(net.R):
            for l in range(net.n):
                assert np.array_equal(net.weights[r][l], back.weights[r][l])

    def test_column_major_order_within_matrix(self):
        w = np.array([[1.0, 3.0], [2.0, 4.0]])
        net = ShortcutNetwork(2, 1, 1, [[w]])
        # order is w[0,0], w[1,0], w[0,1], w[1,1]
        assert np.array_equal(flatten(net), np.array([1.0, 2.0, 3.0, 4.0]))

    def test_second_unit_offset(self):
        # for d=2, n=2 the first entry of unit 2's first matrix sits at
        # flat position 8 (0-based), i.e. index 9 in 1-based counting
        net = zero_network(2, 2, 2)
        net.weights[1][0][0, 0] = 7.0
        assert flatten(net)[8] == 7.0
        assert int(np.count_nonzero(flatten(net))) == 1

    def test_biases_follow_all_weights(self):
        net = zero_network(2, 2, 2, ActivationTriple.from_names("identity,relu,identity"),
                           with_biases=True)
        net.biases[1][0] = 5.0
        flat = flatten(net)
        assert flat.size == 2 * 2 * 4 + 2 * 2
        assert flat[2 * 2 * 4 + 2] == 5.0

    def test_length_mismatch_rejected(self):
        net = zero_network(2, 1, 1)
        with pytest.raises(ValueError):
            unflatten(np.zeros(5), net)


class TestInvariants:
    def test_zeroing_one_matrix_per_unit_gives_identity(self):
        net = random_network(3, 2, 3, acts="identity,relu,identity", seed=44)
        for r in range(net.R):
            net.weights[r][1] = np.zeros((3, 3))
        x = Rng(45).normal(3)
        assert np.array_equal(forward(net, x), x)

    def test_permuting_zero_units_keeps_loss(self):
        data = random_dataset(3, 4, seed=46)
        net = zero_network(3, 2, 3)
        permuted = ShortcutNetwork(3, 2, 3, [net.weights[i] for i in (2, 0, 1)],
                                   net.activations)
        assert loss(net, data) == loss(permuted, data)


class TestSerialization:
    def test_json_round_trip(self, tmp_path):
        net = random_network(3, 2, 2, acts="identity,relu,identity", seed=47)
        path = tmp_path / "net.json"
        save_network(net, path)
        back = load_network(path)
        assert back.d == net.d and back.n == net.n and back.R == net.R
        assert back.activations.names == net.activations.names
        assert back.shortcut == net.shortcut
        for r in range(net.R):
            for l in range(net.n):
                assert np.array_equal(net.weights[r][l], back.weights[r][l])

    def test_json_schema_fields(self, tmp_path):
        net = zero_network(2, 2, 1, ActivationTriple.from_names("identity,relu,identity"),
                           with_biases=True)
        path = tmp_path / "net.json"
        save_network(net, path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        assert set(doc) == {"d", "n", "R", "activations", "weights", "biases", "shortcut"}
        assert doc["weights"][0][0] == [[0.0, 0.0], [0.0, 0.0]]

    def test_bias_rules_enforced(self):
        with pytest.raises(ValueError):
            ShortcutNetwork(2, 1, 1, [[np.zeros((2, 2))]], biases=[np.zeros(2)])
