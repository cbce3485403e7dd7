import math

import numpy as np
import pytest

from shortcutlab.constructor import (
    ConstructionError,
    SpherePath,
    build_small_norm_network,
    check_sphere_path,
    dataset_min_distance,
    make_column_mover,
    min_distance,
    plan_sphere_path,
    verify_construction,
)
from shortcutlab.datasets import sphere_onehot_dataset
from shortcutlab.linalg import frobenius_norm
from shortcutlab.network import Dataset, batch_forward
from shortcutlab.rng import Rng


def _unit_columns(d, m, seed):
    x = Rng(seed).normal_matrix(d, m)
    return x / np.linalg.norm(x, axis=0, keepdims=True)


class TestMinDistance:
    def test_orthonormal_basis(self):
        e = np.eye(3)
        assert min_distance([e[:, 0], e[:, 1], e[:, 2]]) == pytest.approx(math.sqrt(2.0))

    def test_duplicate_gives_zero(self):
        v = np.array([1.0, 0.0, 0.0])
        assert min_distance([v, np.array([0.0, 1.0, 0.0]), v.copy()]) == 0.0

    def test_matches_all_pairs_loop_oracle(self):
        cols = _unit_columns(4, 10, seed=1)
        vecs = [cols[:, j] for j in range(10)]
        best = math.inf
        for i in range(10):
            for j in range(i + 1, 10):
                best = min(best, float(np.linalg.norm(vecs[i] - vecs[j])))
        assert min_distance(vecs) == pytest.approx(best, rel=1e-12)

    def test_fewer_than_two_rejected(self):
        with pytest.raises(ValueError):
            min_distance([np.ones(3)])


class TestColumnMover:
    def _instance(self, seed=2):
        # well-separated unit columns and a nearby target for column 0
        A = np.eye(5)[:, :3].copy()
        mix = _unit_columns(5, 1, seed)[:, 0]
        target = A[:, 0] + 0.25 * (mix - A[:, 0])
        target /= np.linalg.norm(target)
        rho = min(
            min_distance([A[:, j] for j in range(3)]),
            min_distance([target, A[:, 1], A[:, 2]]),
        )
        return A, target, rho

    def test_moves_exactly_one_column(self):
        A, target, rho = self._instance()
        unit = make_column_mover(A, 0, target, rho)
        got = unit.apply(A)
        expected = A.copy()
        expected[:, 0] = target
        assert np.max(np.abs(got - expected)) <= 1e-12

    def test_frobenius_norm_identity(self):
        A, target, rho = self._instance()
        unit = make_column_mover(A, 0, target, rho)
        step = float(np.linalg.norm(target - A[:, 0]))
        expected = math.sqrt(8.0 * step) / rho
        assert frobenius_norm(unit.W1) == pytest.approx(expected, rel=1e-12)
        assert frobenius_norm(unit.W2) == pytest.approx(expected, rel=1e-12)

    def test_relu_kills_untouched_columns(self):
        A, target, rho = self._instance()
        unit = make_column_mover(A, 0, target, rho)
        pre = unit.W1 @ A + unit.b[:, None]
        # first pre-activation component of every non-moved column is
        # (sqrt(8 step)/rho) (a_0 . a_j - 1 + rho^2/8) <= 0
        for j in (1, 2):
            assert pre[0, j] <= 1e-12
            assert np.max(np.maximum(pre[:, j], 0.0)) <= 1e-12

    def test_locality_over_random_conforming_instances(self):
        for seed in range(3, 8):
            A = _unit_columns(6, 4, seed)
            if min_distance([A[:, j] for j in range(4)]) < 0.5:
                continue
            rho = 0.5
            direction = _unit_columns(6, 1, seed + 50)[:, 0]
            target = A[:, 2] + 0.2 * direction
            target /= np.linalg.norm(target)
            mod = A.copy()
            mod[:, 2] = target
            if min_distance([mod[:, j] for j in range(4)]) < rho / 2:
                continue
            unit = make_column_mover(A, 2, target, rho)
            got = unit.apply(A)
            assert np.max(np.abs(got - mod)) <= 1e-12

    def test_zero_step_rejected(self):
        A, _, rho = self._instance()
        with pytest.raises(ConstructionError):
            make_column_mover(A, 0, A[:, 0].copy(), rho)

    def test_min_distance_precondition_enforced(self):
        A = np.eye(5)[:, :3].copy()
        target = A[:, 1] + 1e-3 * (A[:, 0] - A[:, 1])
        target /= np.linalg.norm(target)  # lands almost on column 1
        with pytest.raises(ConstructionError, match="min column distance"):
            make_column_mover(A, 0, target, 1.0)

    def test_narrow_width_rejected(self):
        A = np.eye(2)
        with pytest.raises(ConstructionError):
            make_column_mover(A, 0, np.array([0.0, 1.0]), 0.5)


class TestSpherePath:
    def test_clean_geodesic(self):
        A = np.eye(5)[:, :2].copy()
        target = np.zeros(5)
        target[2] = 1.0
        path = plan_sphere_path(A, 0, target, rho=0.8, delta=0.3)
        w = path.waypoints
        assert np.allclose(w[0], A[:, 0]) and np.allclose(w[-1], target)
        steps = np.linalg.norm(np.diff(w, axis=0), axis=1)
        assert np.max(steps) <= 0.3 + 1e-12
        # arc length of a clean quarter circle
        assert steps.sum() <= math.pi
        assert check_sphere_path(path, [A[:, 1]], 0.8) == []

    def test_target_equals_column(self):
        A = np.eye(4)[:, :2].copy()
        path = plan_sphere_path(A, 0, A[:, 0].copy(), rho=0.5, delta=0.2)
        assert path.waypoints.shape[0] == 1

    def test_obstacle_on_geodesic_gets_cleared(self):
        # obstacle sits right on the great circle between start and target
        start = np.array([1.0, 0.0, 0.0, 0.0])
        target = np.array([0.0, 1.0, 0.0, 0.0])
        mid = (start + target) / np.linalg.norm(start + target)
        A = np.stack([start, mid], axis=1)
        rho = 0.6
        path = plan_sphere_path(A, 0, target, rho=rho, delta=0.25)
        assert check_sphere_path(path, [mid], rho) == []
        dists = np.linalg.norm(path.waypoints - mid[None, :], axis=1)
        assert np.min(dists) >= rho / 2 - 1e-12

    def test_verifier_catches_violations(self):
        w = np.array([[1.0, 0.0, 0.0], [0.8, 0.6, 0.0], [0.0, 1.0, 0.0]])
        path = SpherePath(w, 0, step_cap=0.5)
        probs = check_sphere_path(path, [np.array([0.79, 0.61, 0.0])], rho=1.0)
        assert any("clearance" in p for p in probs)
        long_path = SpherePath(np.array([[1.0, 0, 0], [0, 1.0, 0]]), 0, step_cap=0.5)
        probs = check_sphere_path(long_path, [], rho=1.0)
        assert any("step" in p for p in probs)

    def test_endpoint_too_close_to_obstacle_rejected(self):
        start = np.array([1.0, 0.0, 0.0])
        target = np.array([0.0, 1.0, 0.0])
        blocker = np.array([0.999, 0.0447, 0.0])
        blocker /= np.linalg.norm(blocker)
        A = np.stack([start, blocker], axis=1)
        with pytest.raises(ConstructionError):
            plan_sphere_path(A, 0, target, rho=0.5, delta=0.2)


class TestBuildSmallNormNetwork:
    def test_exact_fit_and_audit(self):
        data = sphere_onehot_dataset(5, 3, seed=9)
        rec = build_small_norm_network(data, R=40)
        out = batch_forward(rec.network, data.X)
        assert float(np.max(np.linalg.norm(out - data.Y, axis=0))) <= 1e-9
        report = verify_construction(rec.network, data, rec.rho, rec.delta, rec.paths)
        assert report.passed
        assert report.units_used == rec.units_used <= 40

    def test_single_sample_direct_geodesic(self):
        data = sphere_onehot_dataset(4, 1, seed=10)
        # delta = pi / R, and the direct arc is at most pi, so R units
        # always suffice
        rec = build_small_norm_network(data, R=6)
        assert rec.units_used <= 6
        out = batch_forward(rec.network, data.X)
        assert float(np.max(np.abs(out - data.Y))) <= 1e-9

    def test_norm_bound_scaling_with_R(self):
        data = sphere_onehot_dataset(5, 3, seed=11)
        recs = {R: build_small_norm_network(data, R) for R in (30, 60, 120)}
        bounds = {R: math.sqrt(8.0 * rec.delta) / rec.rho for R, rec in recs.items()}
        assert bounds[30] / bounds[60] == pytest.approx(math.sqrt(2.0), rel=1e-12)
        maxes = {R: rec.max_frobenius for R, rec in recs.items()}
        assert maxes[30] >= maxes[60] - 1e-12 >= maxes[120] - 2e-12
        # measured max norm between R and 4R approaches the half ratio
        assert 0.35 <= maxes[120] / maxes[30] <= 0.65

    def test_intermediate_matrices_keep_clearance(self):
        data = sphere_onehot_dataset(6, 4, seed=12)
        rec = build_small_norm_network(data, R=60)
        assert rec.min_intermediate_distance >= rec.rho / 2 - 1e-12

    def test_unit_budget_within_worst_case_step_bound(self):
        data = sphere_onehot_dataset(5, 3, seed=13)
        rec = build_small_norm_network(data, R=50)
        # worst-case steps per column: path length over the step cap
        per_column = math.ceil(
            (rec.rho * (data.m - 1) / 2.0 + 1.0) * math.pi / rec.delta
        )
        assert rec.units_used <= data.m * per_column

    def test_non_unit_inputs_rejected(self):
        data = sphere_onehot_dataset(5, 3, seed=14)
        bad = Dataset(2.0 * data.X, data.Y)
        with pytest.raises(ConstructionError, match="unit 2-norm"):
            build_small_norm_network(bad, R=10)

    def test_duplicate_targets_rejected(self):
        X = _unit_columns(5, 3, seed=15)
        Y = np.zeros((5, 3))
        Y[0, 0] = 1.0
        Y[0, 1] = 1.0  # duplicate label
        Y[1, 2] = 1.0
        with pytest.raises(ConstructionError, match="minimum distance"):
            build_small_norm_network(Dataset(X, Y), R=10)

    def test_non_onehot_targets_rejected(self):
        X = _unit_columns(5, 2, seed=16)
        Y = X.copy()
        with pytest.raises(ConstructionError, match="one-hot"):
            build_small_norm_network(Dataset(X, Y), R=10)

    def test_too_few_units_rejected(self):
        data = sphere_onehot_dataset(5, 3, seed=17)
        with pytest.raises(ConstructionError, match="not enough"):
            build_small_norm_network(data, R=2)


class TestVerifyConstruction:
    def test_detects_perturbed_weight(self):
        data = sphere_onehot_dataset(5, 3, seed=18)
        rec = build_small_norm_network(data, R=40)
        rec.network.weights[0][0][0, 0] += 0.1
        report = verify_construction(rec.network, data, rec.rho, rec.delta, rec.paths)
        assert not report.checks["exact_fit"]
        assert not report.passed

    def test_norm_bound_matches_direct_recomputation(self):
        data = sphere_onehot_dataset(5, 3, seed=19)
        rec = build_small_norm_network(data, R=40)
        report = verify_construction(rec.network, data, rec.rho, rec.delta)
        norms = [
            float(np.sqrt(np.sum(w * w)))
            for unit in rec.network.weights
            for w in unit
        ]
        assert report.max_frobenius == pytest.approx(max(norms), rel=1e-15)
        assert report.checks["norm_bound"]

    def test_measured_rho_matches_dataset_min_distance(self):
        data = sphere_onehot_dataset(5, 3, seed=20)
        rec = build_small_norm_network(data, R=40)
        assert rec.rho == pytest.approx(dataset_min_distance(data), rel=1e-15)
