"""Constructive exact-fit networks with per-matrix norms shrinking in depth.

The building block is a residual unit that relocates exactly one column of
a matrix of unit vectors while leaving every other column untouched: the
first matrix projects onto the moving column, a bias shifts everything so
the relu kills all other columns, and the second matrix injects the
displacement. Chaining such units along a planned path on the unit sphere
(never coming closer than half the dataset's minimum distance to any
other column or target) turns the input matrix into the target matrix
exactly, with every weight matrix of Frobenius norm sqrt(8 * step) / rho.
More units mean shorter steps and smaller norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationTriple, IDENTITY, RELU
from .linalg import frobenius_norm
from .network import Dataset, ShortcutNetwork, batch_forward

_UNIT_TOL = 1e-9


class ConstructionError(ValueError):
    """Input data violates an assumption of the construction."""


class PathPlanningError(RuntimeError):
    """The sphere path planner could not satisfy its clearance contract."""


def min_distance(vectors) -> float:
    """Smallest pairwise euclidean distance among the given vectors."""
    vs = np.asarray([np.asarray(v, dtype=np.float64).ravel() for v in vectors])
    if vs.ndim != 2 or vs.shape[0] < 2:
        raise ValueError("min_distance needs at least two vectors")
    sq = np.sum(vs * vs, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (vs @ vs.T)
    iu = np.triu_indices(vs.shape[0], k=1)
    return float(np.sqrt(max(float(np.min(d2[iu])), 0.0)))


def dataset_min_distance(data: Dataset) -> float:
    """Minimum distance over all input and target columns together."""
    cols = [data.X[:, j] for j in range(data.m)] + [data.Y[:, j] for j in range(data.m)]
    return min_distance(cols)


@dataclass
class ColumnMoverUnit:
    """One residual unit (W1, W2, b) that moves a single column.

    Only row 0 of W1, column 0 of W2 and component 0 of b are nonzero;
    both weight matrices have Frobenius norm sqrt(8 * step) / rho where
    step is the length of the column displacement.
    """

    W1: np.ndarray
    W2: np.ndarray
    b: np.ndarray
    step: float

    def apply(self, A: np.ndarray) -> np.ndarray:
        return self.W2 @ np.maximum(self.W1 @ A + self.b[:, None], 0.0) + A


def make_column_mover(A, i: int, target, rho: float) -> ColumnMoverUnit:
    """Unit that maps column i of A to ``target`` and fixes the rest.

    Requires unit-norm columns, width >= 3, and both the input matrix and
    the modified one to keep min pairwise column distance >= rho / 2; the
    relu-kill argument needs exactly that clearance.
    """
    A = np.asarray(A, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64).ravel()
    d, m = A.shape
    if d < 3:
        raise ConstructionError("column movers need width d >= 3")
    if not 0 <= i < m:
        raise ValueError(f"column index {i} out of range for {m} columns")
    if rho <= 0.0:
        raise ConstructionError("rho must be positive")
    norms = np.linalg.norm(A, axis=0)
    if np.max(np.abs(norms - 1.0)) > _UNIT_TOL or abs(np.linalg.norm(target) - 1.0) > _UNIT_TOL:
        raise ConstructionError("columns and target must have unit norm")
    a_i = A[:, i].copy()
    step = float(np.linalg.norm(target - a_i))
    if step == 0.0:
        raise ConstructionError("target equals the current column (zero step)")
    if m >= 2:
        modified = A.copy()
        modified[:, i] = target
        for name, mat in (("input", A), ("modified", modified)):
            dm = min_distance([mat[:, j] for j in range(m)])
            if dm < rho / 2.0 - 1e-12:
                raise ConstructionError(
                    f"{name} matrix has min column distance {dm:.3e} < rho/2 = {rho / 2.0:.3e}"
                )
    coef = math.sqrt(8.0 * step) / rho
    w1 = np.zeros((d, d))
    w1[0, :] = coef * a_i
    w2 = np.zeros((d, d))
    w2[:, 0] = (math.sqrt(8.0 / step) / rho) * (target - a_i)
    b = np.zeros(d)
    b[0] = coef * (rho * rho / 8.0 - 1.0)
    return ColumnMoverUnit(w1, w2, b, step)


@dataclass
class SpherePath:
    """Waypoints (rows, all unit norm) for one moving column.

    Consecutive waypoints are at most ``step_cap`` apart and every
    waypoint keeps clearance rho/2 from all obstacles handed to the
    planner.
    """

    waypoints: np.ndarray
    column_index: int
    step_cap: float


def check_sphere_path(path: SpherePath, obstacles, rho: float) -> list[str]:
    """Invariant verifier; returns a list of violations (empty = valid)."""
    problems = []
    w = np.asarray(path.waypoints, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] < 1:
        return ["waypoint array must be 2-D and nonempty"]
    norms = np.linalg.norm(w, axis=1)
    bad = np.max(np.abs(norms - 1.0))
    if bad > 1e-12:
        problems.append(f"waypoint norm deviates from 1 by {bad:.3e}")
    if w.shape[0] > 1:
        steps = np.linalg.norm(np.diff(w, axis=0), axis=1)
        worst = float(np.max(steps))
        if worst > path.step_cap * (1.0 + 1e-9):
            problems.append(f"step {worst:.3e} exceeds cap {path.step_cap:.3e}")
    obstacles = list(obstacles)
    if obstacles:
        obs = np.asarray([np.asarray(o, dtype=np.float64).ravel() for o in obstacles])
        dists = np.linalg.norm(w[:, None, :] - obs[None, :, :], axis=2)
        closest = float(np.min(dists))
        if closest < rho / 2.0 - 1e-12:
            problems.append(f"clearance {closest:.3e} below rho/2 = {rho / 2.0:.3e}")
    return problems


def _slerp(a: np.ndarray, b: np.ndarray, segments: int) -> np.ndarray:
    """segments + 1 points along the minor great-circle arc a -> b."""
    dot = float(np.clip(a @ b, -1.0, 1.0))
    theta = math.acos(dot)
    if theta < 1e-14 or segments < 1:
        return np.vstack([a, b]) if segments >= 1 else a[None, :]
    ts = np.linspace(0.0, 1.0, segments + 1)
    sin_t = math.sin(theta)
    pts = (
        (np.sin((1.0 - ts) * theta) / sin_t)[:, None] * a[None, :]
        + (np.sin(ts * theta) / sin_t)[:, None] * b[None, :]
    )
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return pts


def _perpendicular(v: np.ndarray, avoid=None) -> np.ndarray:
    """Deterministic unit vector orthogonal to v (and to ``avoid`` if given)."""
    d = v.shape[0]
    for k in range(d):
        e = np.zeros_like(v)
        e[k] = 1.0
        u = e - (v @ e) * v
        if avoid is not None:
            u = u - (avoid @ u) * avoid
        nu = np.linalg.norm(u)
        if nu > 1e-6:
            return u / nu
    raise PathPlanningError("could not build a perpendicular direction")


def _densify(pts: np.ndarray, delta: float) -> np.ndarray:
    """Insert geodesic midpoints until consecutive chords are within delta."""
    out = [pts[0]]
    for k in range(1, pts.shape[0]):
        prev = out[-1]
        nxt = pts[k]
        gap = float(np.linalg.norm(nxt - prev))
        if gap > delta * (1.0 + 1e-12):
            seg_theta = math.acos(float(np.clip(prev @ nxt, -1.0, 1.0)))
            segs = max(2, math.ceil(seg_theta / (2.0 * math.asin(min(delta / 2.0, 1.0)))))
            out.extend(_slerp(prev, nxt, segs)[1:])
        else:
            out.append(nxt)
    return np.asarray(out)


def _detour_around(pts: np.ndarray, o: np.ndarray, theta_t: float, delta: float) -> np.ndarray:
    """Reroute every run of waypoints inside the obstacle cap.

    Points closer (in angle) than theta_t to o are replaced by an arc on
    the circle of angular radius theta_t around o, walked from the entry
    tangent direction to the exit one. When entry and exit tangents are
    opposite (the obstacle sits exactly on the path's great circle) the
    arc goes over a deterministic perpendicular, which is what breaks out
    of the geodesic plane.
    """
    angles = np.arccos(np.clip(pts @ o, -1.0, 1.0))
    bad = angles < theta_t
    if not np.any(bad):
        return pts
    if bad[0] or bad[-1]:
        raise PathPlanningError("a path endpoint lies inside an obstacle cap")
    out = []
    k = 0
    npts = pts.shape[0]
    while k < npts:
        if not bad[k]:
            out.append(pts[k])
            k += 1
            continue
        k1 = k
        while k1 + 1 < npts and bad[k1 + 1]:
            k1 += 1
        entry, exit_ = pts[k - 1], pts[k1 + 1]

        def tangent(p):
            u = p - (o @ p) * o
            nu = np.linalg.norm(u)
            return u / nu if nu > 1e-9 else _perpendicular(o)

        u_in, u_out = tangent(entry), tangent(exit_)
        dot = float(np.clip(u_in @ u_out, -1.0, 1.0))
        ang = math.acos(dot)
        if ang > math.pi - 1e-8:
            mid = _perpendicular(o, avoid=u_in)
            us = np.vstack([_slerp(u_in, mid, 8), _slerp(mid, u_out, 8)[1:]])
        else:
            arc = max(ang * math.sin(theta_t), 1e-12)
            us = _slerp(u_in, u_out, max(2, math.ceil(arc / delta) + 1))
        ring = math.cos(theta_t) * o[None, :] + math.sin(theta_t) * us
        ring /= np.linalg.norm(ring, axis=1, keepdims=True)
        out.extend(ring)
        k = k1 + 1
    return np.asarray(out)


def plan_sphere_path(
    A,
    i: int,
    target,
    rho: float,
    delta: float,
    extra_obstacles=(),
) -> SpherePath:
    """Plan waypoints moving column i of A to ``target`` on the unit sphere.

    Obstacles are the other columns of A plus any ``extra_obstacles``
    (typically targets this column must not crowd). Geodesic interpolation
    first; any stretch that enters an obstacle's cap (10%-padded rho/2
    clearance) is rerouted along a circle of fixed angular radius around
    that obstacle, then the path is re-densified and re-checked. The
    invariant verifier has the final word: a path that cannot be made
    valid raises PathPlanningError rather than being returned.
    """
    A = np.asarray(A, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64).ravel()
    d, m = A.shape
    if d < 3:
        raise ConstructionError("sphere path planning needs width d >= 3")
    if rho <= 0.0 or delta <= 0.0:
        raise ConstructionError("rho and delta must be positive")
    norms = np.linalg.norm(A, axis=0)
    if np.max(np.abs(norms - 1.0)) > _UNIT_TOL or abs(np.linalg.norm(target) - 1.0) > _UNIT_TOL:
        raise ConstructionError("columns and target must have unit norm")
    start = A[:, i].copy()
    obstacles = [A[:, j].copy() for j in range(m) if j != i]
    obstacles += [np.asarray(o, dtype=np.float64).ravel() for o in extra_obstacles]
    for o in obstacles:
        if np.linalg.norm(o - start) < rho - 1e-12 or np.linalg.norm(o - target) < rho - 1e-12:
            raise ConstructionError("an obstacle sits closer than rho to a path endpoint")

    if float(np.linalg.norm(target - start)) <= 1e-15:
        return SpherePath(start[None, :].copy(), i, delta)

    clearance = 0.55 * rho  # rho/2 plus a 10% planning margin
    theta_t = 2.0 * math.asin(min(clearance / 2.0, 1.0))
    theta = math.acos(float(np.clip(start @ target, -1.0, 1.0)))
    if theta > math.pi - 1e-8:
        # antipodal endpoints: route through a deterministic perpendicular
        mid = _perpendicular(start)
        half = max(1, math.ceil((theta / 2.0) / delta))
        pts = np.vstack([_slerp(start, mid, half), _slerp(mid, target, half)[1:]])
    else:
        pts = _slerp(start, target, max(1, math.ceil(theta / delta)))

    if obstacles:
        obs = np.asarray(obstacles)
        for _ in range(50):
            pts = _densify(pts, delta)
            dists = np.linalg.norm(pts[:, None, :] - obs[None, :, :], axis=2)
            worst_per_obstacle = np.min(dists, axis=0)
            if np.min(worst_per_obstacle) >= clearance * (1.0 - 1e-12):
                break
            j = int(np.argmin(worst_per_obstacle))
            pts = _detour_around(pts, obs[j], theta_t, delta)
        else:
            raise PathPlanningError("could not clear all obstacles within the iteration budget")
        pts = _densify(pts, delta)

    path = SpherePath(pts, i, delta)
    problems = check_sphere_path(path, obstacles, rho)
    if np.linalg.norm(pts[0] - start) > 1e-12 or np.linalg.norm(pts[-1] - target) > 1e-12:
        problems.append("path endpoints moved")
    # discretisation emits steps between delta/2 and delta, so allow twice
    # the ideal-packing step bound plus slack for ring joins
    bound = math.ceil(math.pi * (rho * len(obstacles) / 2.0 + 1.0) / delta)
    if pts.shape[0] > 2 * bound + 4:
        problems.append(f"waypoint count {pts.shape[0]} exceeds bound {bound} plus margin")
    if problems:
        raise PathPlanningError("; ".join(problems))
    return path


EQ3_ACTIVATIONS = ActivationTriple(IDENTITY, RELU, IDENTITY)


@dataclass
class ConstructionRecord:
    """A built exact-fit network plus everything needed to audit it."""

    network: ShortcutNetwork
    rho: float
    delta: float
    units_used: int
    paths: list = field(default_factory=list)
    max_frobenius: float = 0.0
    min_intermediate_distance: float = math.inf


def _check_assumptions(data: Dataset) -> float:
    """Validate unit inputs / one-hot targets and return the measured rho."""
    X, Y, m = data.X, data.Y, data.m
    if data.d < 3:
        raise ConstructionError("construction needs width d >= 3")
    norms = np.linalg.norm(X, axis=0)
    if np.max(np.abs(norms - 1.0)) > _UNIT_TOL:
        raise ConstructionError("assumption violated: input columns must have unit 2-norm")
    for j in range(m):
        col = Y[:, j]
        ones = np.where(col == 1.0)[0]
        if ones.size != 1 or np.count_nonzero(col) != 1:
            raise ConstructionError(
                "assumption violated: target columns must be one-hot basis vectors"
            )
    rho = dataset_min_distance(data) if m >= 1 else 0.0
    if rho <= 0.0:
        raise ConstructionError(
            "assumption violated: minimum distance over all inputs and targets is zero "
            "(duplicate labels or coincident points); perturb the dataset first"
        )
    return rho


def build_small_norm_network(data: Dataset, R: int, rho: float | None = None) -> ConstructionRecord:
    """Exact-fit network of R two-matrix relu units with bounded norms.

    The per-step cap is delta = m * (rho * (m - 1) / 2 + 1) * pi / R, the
    worst-case total path length spread over the requested units, so every
    weight matrix satisfies |W|_F <= sqrt(8 * delta) / rho and the bound
    shrinks like 1/sqrt(R). Surplus units are exact identities (all-zero
    weights). Columns are moved one at a time; while one moves, the
    stationary columns and all other targets are obstacles.
    """
    if R < 1:
        raise ConstructionError("R must be a positive number of residual units")
    measured = _check_assumptions(data)
    if rho is None:
        rho = measured
    elif not 0.0 < rho <= measured + 1e-12:
        raise ConstructionError(
            f"requested rho {rho} exceeds the measured minimum distance {measured:.6e}"
        )
    d, m = data.d, data.m
    delta = m * (rho * (m - 1) / 2.0 + 1.0) * math.pi / R

    work = data.X.copy()
    units: list[ColumnMoverUnit] = []
    paths: list[SpherePath] = []
    min_inter = math.inf
    if m >= 2:
        min_inter = min(min_inter, min_distance([work[:, j] for j in range(m)]))
    for col in range(m):
        extras = [data.Y[:, j] for j in range(m) if j != col]
        path = plan_sphere_path(work, col, data.Y[:, col], rho, delta, extras)
        paths.append(path)
        for wp in path.waypoints[1:]:
            units.append(make_column_mover(work, col, wp, rho))
            work[:, col] = wp
            if m >= 2:
                min_inter = min(min_inter, min_distance([work[:, j] for j in range(m)]))
        if len(units) > R:
            raise ConstructionError(
                f"R={R} units are not enough: construction needs {len(units)} so far; "
                "increase R"
            )
    used = len(units)
    if used > R:
        raise ConstructionError(f"R={R} units are not enough: construction needs {used}")
    weights = [[u.W1, u.W2] for u in units]
    biases = [u.b for u in units]
    for _ in range(R - used):
        weights.append([np.zeros((d, d)), np.zeros((d, d))])
        biases.append(np.zeros(d))
    net = ShortcutNetwork(d, 2, R, weights, EQ3_ACTIVATIONS, biases, shortcut=True)
    max_frob = max((frobenius_norm(u.W1) for u in units), default=0.0)
    return ConstructionRecord(
        network=net,
        rho=rho,
        delta=delta,
        units_used=used,
        paths=paths,
        max_frobenius=max_frob,
        min_intermediate_distance=min_inter,
    )


@dataclass
class ConstructionReport:
    """Pass/fail per audit check plus the headline numbers."""

    checks: dict
    fit_error: float
    max_frobenius: float
    norm_bound: float
    units_used: int
    m: int
    d: int
    rho: float
    R: int
    delta: float

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def verify_construction(
    net: ShortcutNetwork,
    data: Dataset,
    rho: float,
    delta: float,
    paths=None,
) -> ConstructionReport:
    """Audit an exact-fit construction.

    Checks the fit, the global Frobenius bound sqrt(8 * delta) / rho, and,
    when the planner's paths are available, the per-unit norm identity
    |W1|_F = |W2|_F = sqrt(8 * step) / rho, the path invariants, and the
    rho/2 minimum column distance of every intermediate working matrix.
    """
    out = batch_forward(net, data.X)
    fit_error = float(np.max(np.linalg.norm(out - data.Y, axis=0)))
    bound = math.sqrt(8.0 * delta) / rho
    norms = [frobenius_norm(w) for unit in net.weights for w in unit]
    max_frob = max(norms)
    checks = {
        "exact_fit": fit_error <= 1e-9,
        "norm_bound": max_frob <= bound * (1.0 + 1e-12),
    }
    units_used = sum(1 for unit in net.weights if any(np.any(w != 0.0) for w in unit))
    if paths is not None:
        work = data.X.copy()
        m = data.m
        unit_norms_ok = True
        paths_ok = True
        min_inter = math.inf
        k = 0
        for path in paths:
            col = path.column_index
            extras = [data.Y[:, j] for j in range(m) if j != col]
            obstacles = [work[:, j] for j in range(m) if j != col] + extras
            if check_sphere_path(path, obstacles, rho):
                paths_ok = False
            for wp in path.waypoints[1:]:
                step = float(np.linalg.norm(wp - work[:, col]))
                expect = math.sqrt(8.0 * step) / rho
                w1n = frobenius_norm(net.weights[k][0])
                w2n = frobenius_norm(net.weights[k][1])
                if abs(w1n - expect) > 1e-12 * max(1.0, expect) or abs(
                    w2n - expect
                ) > 1e-12 * max(1.0, expect):
                    unit_norms_ok = False
                work[:, col] = wp
                if m >= 2:
                    min_inter = min(min_inter, min_distance([work[:, j] for j in range(m)]))
                k += 1
        checks["unit_norms"] = unit_norms_ok
        checks["sphere_paths"] = paths_ok
        if m >= 2:
            checks["min_distance"] = min_inter >= rho / 2.0 - 1e-12
    return ConstructionReport(
        checks=checks,
        fit_error=fit_error,
        max_frobenius=max_frob,
        norm_bound=bound,
        units_used=units_used,
        m=data.m,
        d=data.d,
        rho=rho,
        R=net.R,
        delta=delta,
    )
