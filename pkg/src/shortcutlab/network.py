"""Shortcut networks: construction, evaluation, loss, exact gradients.

A network stacks R residual units of width d. Each unit feeds its input
through a transformation path of n weight matrices, with activations
applied before the first matrix, between consecutive matrices, and after
the last one, then adds the unit input back (identity shortcut). With
``shortcut=False`` the skip branch is dropped and the same stack becomes a
plain feed-forward network; that variant exists as an experimental
baseline and keeps the identical parameter layout.

The flat parameter layout, shared with all Hessian code, orders weights
unit by unit, matrix by matrix, column-major within each matrix; bias
vectors (present only on the two-matrix relu variant) follow after all
weights, unit by unit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .activations import IDENTITY_TRIPLE, ActivationTriple


@dataclass
class Dataset:
    """Paired input/target columns: X and Y are both d x m."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Y = np.asarray(self.Y, dtype=np.float64)
        if self.X.ndim != 2 or self.Y.ndim != 2:
            raise ValueError("X and Y must be 2-D with one column per sample")
        if self.X.shape != self.Y.shape:
            raise ValueError(f"X and Y shapes differ: {self.X.shape} vs {self.Y.shape}")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Y))):
            raise ValueError("dataset has non-finite entries")

    @property
    def d(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]


@dataclass
class ShortcutNetwork:
    """R residual units, each with n weight matrices of size d x d.

    ``weights[r][l]`` is the l-th matrix on unit r's transformation path.
    Biases are only allowed on the simplified two-matrix relu unit
    (identity pre/post, relu mid), where the bias is added right after the
    first matrix.
    """

    d: int
    n: int
    R: int
    weights: list
    activations: ActivationTriple = field(default_factory=lambda: IDENTITY_TRIPLE)
    biases: list | None = None
    shortcut: bool = True

    def __post_init__(self):
        if self.d < 1 or self.n < 1 or self.R < 1:
            raise ValueError("d, n and R must all be positive")
        if len(self.weights) != self.R:
            raise ValueError(f"expected {self.R} units, got {len(self.weights)}")
        ws = []
        for r, unit in enumerate(self.weights):
            if len(unit) != self.n:
                raise ValueError(f"unit {r} has {len(unit)} matrices, expected {self.n}")
            mats = []
            for w in unit:
                w = np.asarray(w, dtype=np.float64)
                if w.shape != (self.d, self.d):
                    raise ValueError(f"weight matrix shape {w.shape}, expected {(self.d, self.d)}")
                mats.append(w)
            ws.append(mats)
        self.weights = ws
        if self.biases is not None:
            ok_mid = self.activations.names in (
                ("identity", "relu", "identity"),
                # identity mid is the differentiation model of the relu
                # unit at its kink; the Hessian code relies on it
                ("identity", "identity", "identity"),
            )
            if self.n != 2 or not ok_mid:
                raise ValueError(
                    "biases are only supported on the two-matrix relu unit "
                    "(identity pre/post, relu mid)"
                )
            if len(self.biases) != self.R:
                raise ValueError(f"expected {self.R} bias vectors, got {len(self.biases)}")
            bs = []
            for b in self.biases:
                b = np.asarray(b, dtype=np.float64).ravel()
                if b.shape != (self.d,):
                    raise ValueError(f"bias shape {b.shape}, expected {(self.d,)}")
                bs.append(b)
            self.biases = bs

    @property
    def param_count(self) -> int:
        count = self.R * self.n * self.d * self.d
        if self.biases is not None:
            count += self.R * self.d
        return count

    def copy(self) -> "ShortcutNetwork":
        return ShortcutNetwork(
            d=self.d,
            n=self.n,
            R=self.R,
            weights=[[w.copy() for w in unit] for unit in self.weights],
            activations=self.activations,
            biases=None if self.biases is None else [b.copy() for b in self.biases],
            shortcut=self.shortcut,
        )


def zero_network(
    d: int,
    n: int,
    R: int,
    activations: ActivationTriple = IDENTITY_TRIPLE,
    with_biases: bool = False,
    shortcut: bool = True,
) -> ShortcutNetwork:
    """All-zero weights: every residual unit is the exact identity map."""
    weights = [[np.zeros((d, d)) for _ in range(n)] for _ in range(R)]
    biases = [np.zeros(d) for _ in range(R)] if with_biases else None
    return ShortcutNetwork(d, n, R, weights, activations, biases, shortcut)


def _unit_forward(net: ShortcutNetwork, r: int, u: np.ndarray, keep: bool = False):
    acts = net.activations
    a = acts.pre(u)
    h = a
    hs = [a]
    zs = []
    for l in range(net.n):
        z = net.weights[r][l] @ h
        if l == 0 and net.biases is not None:
            z = z + net.biases[r][:, None]
        if l < net.n - 1:
            h = acts.mid(z)
            hs.append(h)
        else:
            h = acts.post(z)
        zs.append(z)
    out = u + h if net.shortcut else h
    if keep:
        return out, {"u": u, "hs": hs, "zs": zs}
    return out


def batch_forward(net: ShortcutNetwork, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != net.d:
        raise ValueError(f"input shape {X.shape} incompatible with width {net.d}")
    u = X
    for r in range(net.R):
        u = _unit_forward(net, r, u)
    return u


def forward(net: ShortcutNetwork, x) -> np.ndarray:
    """Evaluate the network on a single d-vector."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape != (net.d,):
        raise ValueError(f"input length {x.size}, expected {net.d}")
    return batch_forward(net, x[:, None])[:, 0]


def end_to_end_map(net: ShortcutNetwork) -> np.ndarray:
    """The single matrix a purely linear network multiplies by."""
    if not net.activations.all_identity:
        raise ValueError("end-to-end map is only defined for identity activations")
    if net.biases is not None:
        raise ValueError("end-to-end map is only defined for bias-free networks")
    total = np.eye(net.d)
    for r in range(net.R):
        path = np.eye(net.d)
        for l in range(net.n):
            path = net.weights[r][l] @ path
        unit = path + np.eye(net.d) if net.shortcut else path
        total = unit @ total
    return total


def loss(net: ShortcutNetwork, data: Dataset) -> float:
    """Mean squared error with the 1/(2m) normalisation."""
    if data.d != net.d:
        raise ValueError(f"data width {data.d} incompatible with network width {net.d}")
    resid = data.Y - batch_forward(net, data.X)
    return float(np.sum(resid * resid) / (2.0 * data.m))


def loss_and_gradient(net: ShortcutNetwork, data: Dataset):
    """Loss plus the exact reverse-mode gradient in flat parameter order."""
    if data.d != net.d:
        raise ValueError(f"data width {data.d} incompatible with network width {net.d}")
    acts = net.activations
    u = data.X
    traces = []
    for r in range(net.R):
        u, tr = _unit_forward(net, r, u, keep=True)
        traces.append(tr)
    out = u
    m = data.m
    value = float(np.sum((data.Y - out) ** 2) / (2.0 * m))

    g = (out - data.Y) / m  # dL/d(out)
    grads_w = [[None] * net.n for _ in range(net.R)]
    grads_b = [None] * net.R if net.biases is not None else None
    for r in range(net.R - 1, -1, -1):
        tr = traces[r]
        dz = acts.post.deriv(tr["zs"][net.n - 1]) * g
        for l in range(net.n - 1, -1, -1):
            grads_w[r][l] = dz @ tr["hs"][l].T
            dh = net.weights[r][l].T @ dz
            if l == 0:
                if grads_b is not None:
                    grads_b[r] = dz.sum(axis=1)
                da = dh
            else:
                dz = acts.mid.deriv(tr["zs"][l - 1]) * dh
        du_path = acts.pre.deriv(tr["u"]) * da
        g = du_path + g if net.shortcut else du_path
    flat = np.concatenate(
        [gw.ravel(order="F") for unit in grads_w for gw in unit]
        + ([gb for gb in grads_b] if grads_b is not None else [])
    )
    return value, flat


def gradient(net: ShortcutNetwork, data: Dataset) -> np.ndarray:
    return loss_and_gradient(net, data)[1]


def flatten(net: ShortcutNetwork) -> np.ndarray:
    """Parameters in the shared flat order (column-major per matrix)."""
    parts = [w.ravel(order="F") for unit in net.weights for w in unit]
    if net.biases is not None:
        parts.extend(net.biases)
    return np.concatenate(parts)


def unflatten(values, template: ShortcutNetwork) -> ShortcutNetwork:
    """Inverse of :func:`flatten` for the template's shape and metadata."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size != template.param_count:
        raise ValueError(f"expected {template.param_count} values, got {values.size}")
    d, n, R = template.d, template.n, template.R
    dd = d * d
    weights = []
    pos = 0
    for _ in range(R):
        unit = []
        for _ in range(n):
            unit.append(values[pos : pos + dd].reshape((d, d), order="F").copy())
            pos += dd
        weights.append(unit)
    biases = None
    if template.biases is not None:
        biases = []
        for _ in range(R):
            biases.append(values[pos : pos + d].copy())
            pos += d
    return ShortcutNetwork(d, n, R, weights, template.activations, biases, template.shortcut)


def network_to_dict(net: ShortcutNetwork) -> dict:
    doc = {
        "d": net.d,
        "n": net.n,
        "R": net.R,
        "activations": list(net.activations.names),
        "weights": [[w.tolist() for w in unit] for unit in net.weights],
        "shortcut": net.shortcut,
    }
    if net.biases is not None:
        doc["biases"] = [b.tolist() for b in net.biases]
    return doc


def network_from_dict(doc: dict) -> ShortcutNetwork:
    return ShortcutNetwork(
        d=int(doc["d"]),
        n=int(doc["n"]),
        R=int(doc["R"]),
        weights=doc["weights"],
        activations=ActivationTriple.from_names(doc["activations"]),
        biases=doc.get("biases"),
        shortcut=bool(doc.get("shortcut", True)),
    )


def save_network(net: ShortcutNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(network_to_dict(net), f, indent=1)
        f.write("\n")


def load_network(path) -> ShortcutNetwork:
    with open(path, "r", encoding="utf-8") as f:
        return network_from_dict(json.load(f))
