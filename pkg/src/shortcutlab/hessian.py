"""Loss Hessians at the zero point, spectrum reports, stationarity probes.

Two routes to the same Hessian exist on purpose. ``finite_difference_hessian``
differentiates the exact gradient numerically and works at any point for
any activations; ``zero_point_hessian`` assembles the closed-form Hessian
at the all-zero parameter point, which exists for path lengths 1 and 2 and
is built from second-moment matrices of the training set. For path length
3 and beyond the zero-point Hessian vanishes identically
(:func:`high_order_zero_hessian`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .activations import Activation, ActivationTriple
from .linalg import abs_percentile, as_matrix, sym_eig, vec_transpose_permutation
from .network import Dataset, ShortcutNetwork, flatten, gradient, loss, unflatten, zero_network

MOMENT_TAGS = ("XX", "YX", "XpreX", "YpreX")


def _differentiation_activations(net: ShortcutNetwork, data: Dataset) -> ActivationTriple:
    """Activation triple to differentiate through at this base point.

    A relu slot whose arguments sit exactly at the kink across every unit
    and sample (which is what happens at the all-zero parameter point) is
    differentiated through its local slope-1 model, i.e. the identity.
    Central differences straddle the kink and would otherwise average the
    two one-sided slopes to 1/2, halving exactly the curvature terms the
    derivative-at-zero convention is meant to keep. Away from kinks every
    slot is left alone.
    """
    acts = net.activations
    if "relu" not in acts.names:
        return acts
    from .activations import IDENTITY
    from .network import _unit_forward

    slot_max = {"pre": 0.0, "mid": 0.0, "post": 0.0}
    u = data.X
    for r in range(net.R):
        u, tr = _unit_forward(net, r, u, keep=True)
        slot_max["pre"] = max(slot_max["pre"], float(np.max(np.abs(tr["u"]))))
        for z in tr["zs"][: net.n - 1]:
            slot_max["mid"] = max(slot_max["mid"], float(np.max(np.abs(z))))
        slot_max["post"] = max(slot_max["post"], float(np.max(np.abs(tr["zs"][net.n - 1]))))
    slots = {}
    for name, act in zip(("pre", "mid", "post"), (acts.pre, acts.mid, acts.post)):
        if act.kind == "relu" and slot_max[name] == 0.0:
            slots[name] = IDENTITY
        else:
            slots[name] = act
    return ActivationTriple(slots["pre"], slots["mid"], slots["post"])


def finite_difference_hessian(net: ShortcutNetwork, data: Dataset) -> np.ndarray:
    """Central differences of the exact gradient, symmetrised.

    Row j holds (g(w + h e_j) - g(w - h e_j)) / (2h) with
    h = 1e-4 * max(1, |w|_inf); the result is averaged with its transpose.
    Relu slots pinned at their kink at the base point are differentiated
    through the slope-1 local model (see _differentiation_activations).
    """
    w0 = flatten(net)
    if not np.all(np.isfinite(w0)):
        raise ValueError("network parameters must be finite")
    diff_acts = _differentiation_activations(net, data)
    template = net
    if diff_acts != net.activations:
        template = ShortcutNetwork(
            net.d, net.n, net.R, [[w.copy() for w in unit] for unit in net.weights],
            diff_acts,
            None if net.biases is None else [b.copy() for b in net.biases],
            net.shortcut,
        )
    h = 1e-4 * max(1.0, float(np.max(np.abs(w0))) if w0.size else 1.0)
    p = w0.size
    rows = np.empty((p, p))
    for j in range(p):
        wp = w0.copy()
        wp[j] += h
        wm = w0.copy()
        wm[j] -= h
        gp = gradient(unflatten(wp, template), data)
        gm = gradient(unflatten(wm, template), data)
        rows[j] = (gp - gm) / (2.0 * h)
    return 0.5 * (rows + rows.T)


def moment_matrix(data: Dataset, pre: Activation, tag: str) -> np.ndarray:
    """Second-moment matrix (1/m) * sum_mu a^mu (b^mu)^T over the samples.

    The tag picks the pairing: "XX" and "YX" pair raw columns, while
    "XpreX" and "YpreX" pair against the pre-activated inputs.
    """
    if tag not in MOMENT_TAGS:
        raise ValueError(f"unknown moment tag {tag!r}; expected one of {MOMENT_TAGS}")
    m = data.m
    if tag == "XX":
        return (data.X @ data.X.T) / m
    if tag == "YX":
        return (data.Y @ data.X.T) / m
    px = pre(data.X)
    if tag == "XpreX":
        return (data.X @ px.T) / m
    return (data.Y @ px.T) / m


def residual_cross_moment(data: Dataset, pre: Activation) -> np.ndarray:
    """Moment of the identity-map residual (x - y) against pre-activated x."""
    return moment_matrix(data, pre, "XpreX") - moment_matrix(data, pre, "YpreX")


def zero_point_hessian(data: Dataset, acts: ActivationTriple, n: int, R: int) -> np.ndarray:
    """Closed-form Hessian of the loss at the all-zero parameter point.

    n = 2: block diagonal with R copies of [[0, A^T], [A, 0]] where
    A = mid'(0) * post'(0) * blockdiag_d(M) P^T and M is the residual
    cross moment. Its spectrum is R*d copies of the +/- square roots of
    eigs(M^T M), which is why the conditioning does not depend on R.

    n = 1 (identity pre/post only): block Toeplitz with B on the diagonal,
    A below, A^T above; B = P blockdiag_d(S_xx) P^T and
    A = blockdiag_d(S_xx - S_yx) P^T + B.
    """
    d = data.d
    if R < 1:
        raise ValueError("R must be positive")
    perm = vec_transpose_permutation(d)
    dd = d * d
    if n == 2:
        m = residual_cross_moment(data, acts.pre)
        scale = acts.mid.deriv_at_zero * acts.post.deriv_at_zero
        a_blk = scale * (np.kron(np.eye(d), m) @ perm.T)
        unit = np.zeros((2 * dd, 2 * dd))
        unit[:dd, dd:] = a_blk.T
        unit[dd:, :dd] = a_blk
        return np.kron(np.eye(R), unit)
    if n == 1:
        if acts.pre.kind != "identity" or acts.post.kind != "identity":
            raise ValueError(
                "the closed-form single-matrix Hessian is only available for "
                "identity pre/post activations"
            )
        s_xx = moment_matrix(data, acts.pre, "XX")
        s_yx = moment_matrix(data, acts.pre, "YX")
        b_blk = perm @ np.kron(np.eye(d), s_xx) @ perm.T
        a_blk = np.kron(np.eye(d), s_xx - s_yx) @ perm.T + b_blk
        h = np.zeros((R * dd, R * dd))
        for r1 in range(R):
            for r2 in range(R):
                if r1 == r2:
                    blk = b_blk
                elif r1 > r2:
                    blk = a_blk
                else:
                    blk = a_blk.T
                h[r1 * dd : (r1 + 1) * dd, r2 * dd : (r2 + 1) * dd] = blk
        return h
    raise ValueError(
        "closed-form Hessian exists for path lengths 1 and 2 only; for "
        "longer paths it is the zero matrix (use high_order_zero_hessian)"
    )


def high_order_zero_hessian(n: int, R: int, d: int) -> np.ndarray:
    """The (identically zero) Hessian at zero for path length n >= 3."""
    if n < 3:
        raise ValueError("the zero Hessian applies to path lengths n >= 3")
    p = R * n * d * d
    return np.zeros((p, p))


@dataclass
class SpectrumReport:
    """Spectrum summary of a symmetric Hessian.

    ``cond_proxy`` is |lambda|_max over the nearest-rank 10th percentile of
    absolute eigenvalues, a robust stand-in for the condition number;
    ``index`` is the fraction of strictly negative eigenvalues (relative
    threshold -1e-10 * |lambda|_max so numerical zeros do not count).
    """

    eigenvalues: np.ndarray
    loss_at_point: float
    lambda_max: float
    lambda_p10: float
    cond_proxy: float
    index: float
    degenerate: bool


def spectrum(h, loss_at_point: float, percentile: float = 0.1) -> SpectrumReport:
    hm = as_matrix(h)
    dec = sym_eig(hm)
    ev = dec.eigenvalues
    lam_max = float(np.max(np.abs(ev)))
    lam_p = abs_percentile(ev, percentile)
    cond = math.inf if lam_p == 0.0 else lam_max / lam_p
    threshold = -1e-10 * lam_max
    index = float(np.count_nonzero(ev < threshold)) / ev.size
    degenerate = lam_p <= 1e-14 * max(lam_max, 1.0)
    return SpectrumReport(
        eigenvalues=ev,
        loss_at_point=float(loss_at_point),
        lambda_max=lam_max,
        lambda_p10=lam_p,
        cond_proxy=cond,
        index=index,
        degenerate=degenerate,
    )


class DegenerateDirectionError(RuntimeError):
    """All probe directions produced no measurable loss change."""


def stationarity_order_probe(
    data: Dataset,
    acts: ActivationTriple,
    n: int,
    R: int,
    seed: int,
    num_eps: int = 8,
    max_tries: int = 10,
):
    """Fit the local growth exponent of the loss around the zero point.

    Draws a random unit direction v in parameter space, measures
    |L(eps * v) - L(0)| on ``num_eps`` log-spaced eps in [1e-3, 1e-1], and
    returns the least-squares slope of log|dL| against log eps. Only
    measurable points enter the fit: a loss change below 1e-14 is
    indistinguishable from rounding noise in a loss of order one, and for
    steep high-order directions the smallest eps can round to exactly
    zero. A direction with fewer than half its points measurable (or none
    at all) is degenerate and gets redrawn, up to ``max_tries`` times.

    For path length n the slope comes out at n (or above, on directions
    that also kill the n-th order term): the zero point is stationary to
    order n - 1.
    """
    from .rng import Rng

    if n >= 3 and not acts.all_smooth:
        raise ValueError("probes with n >= 3 need smooth activations (identity or tanh)")
    template = zero_network(data.d, n, R, acts)
    l0 = loss(template, data)
    p = template.param_count
    eps = np.logspace(-1.0, -3.0, num_eps)
    rng = Rng(seed)
    min_points = max(3, num_eps // 2)
    for _ in range(max_tries):
        v = rng.normal(p)
        v /= np.linalg.norm(v)
        deltas = np.array(
            [abs(loss(unflatten(e * v, template), data) - l0) for e in eps]
        )
        usable = deltas > 1e-14
        if np.count_nonzero(usable) < min_points:
            continue
        slope = np.polyfit(np.log(eps[usable]), np.log(deltas[usable]), 1)[0]
        return float(slope)
    raise DegenerateDirectionError(
        f"no direction out of {max_tries} produced a measurable loss change"
    )
