"""Dense real matrix kernel shared by the rest of the toolkit.

Covers validated products, a symmetric eigensolver (cyclic Jacobi, with a
LAPACK fast path above a size cutoff), the vec-transpose permutation used
to compress Hessian blocks, seeded random orthogonal matrices, and
nearest-rank percentiles of absolute values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import Rng

# Cyclic Jacobi below this dimension, LAPACK's symmetric solver above it.
# Both satisfy the same residual and orthonormality contracts; Jacobi in
# numpy costs ~0.2 s per sweep already at 128 and the report paths need
# matrices up to ~1600.
JACOBI_MAX_DIM = 128


def as_matrix(a) -> np.ndarray:
    """Coerce to a finite float64 2-D array."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64)))


@dataclass
class EigenDecomposition:
    """Full spectrum of a symmetric matrix.

    ``eigenvalues`` is sorted ascending and column k of ``eigenvectors``
    pairs with ``eigenvalues[k]``; the eigenvector matrix is orthonormal.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def jacobi_eigh(h: np.ndarray, max_sweeps: int = 50, tol: float = 1e-12):
    """Cyclic Jacobi eigensolver for a symmetric matrix.

    Sweeps rotate every (p, q) pair in order until the off-diagonal
    Frobenius norm drops below ``tol`` times the matrix norm (or the sweep
    budget runs out, which for symmetric input does not happen in
    practice thanks to quadratic convergence).

    Returns (eigenvalues ascending, eigenvector columns).
    """
    a = np.array(h, dtype=np.float64)
    nn = a.shape[0]
    q = np.eye(nn)
    hnorm = float(np.linalg.norm(a))
    if hnorm == 0.0 or nn == 1:
        order = np.argsort(np.diag(a), kind="stable")
        return np.diag(a)[order].copy(), q[:, order].copy()
    threshold = tol * hnorm
    for _ in range(max_sweeps):
        off = math.sqrt(max(float(np.sum(a * a) - np.sum(np.diag(a) ** 2)), 0.0))
        if off <= threshold:
            break
        for p in range(nn - 1):
            for r in range(p + 1, nn):
                apq = a[p, r]
                if apq == 0.0:
                    continue
                diff = a[r, r] - a[p, p]
                if abs(diff) + 100.0 * abs(apq) == abs(diff):
                    # off-diagonal entry negligible against the diagonal
                    # gap: small-angle rotation avoids overflowing tau
                    t = apq / diff
                else:
                    tau = diff / (2.0 * apq)
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                cp = a[:, p].copy()
                cr = a[:, r].copy()
                a[:, p] = c * cp - s * cr
                a[:, r] = s * cp + c * cr
                rp = a[p, :].copy()
                rr = a[r, :].copy()
                a[p, :] = c * rp - s * rr
                a[r, :] = s * rp + c * rr
                a[p, r] = 0.0
                a[r, p] = 0.0
                qp = q[:, p].copy()
                qr = q[:, r].copy()
                q[:, p] = c * qp - s * qr
                q[:, r] = s * qp + c * qr
    evals = np.diag(a).copy()
    order = np.argsort(evals, kind="stable")
    return evals[order], q[:, order].copy()


def sym_eig(h) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix.

    The input is symmetrised as (H + H^T)/2 after checking that the
    asymmetry is within 1e-9 relative Frobenius tolerance; anything worse
    is rejected rather than silently averaged away.
    """
    m = as_matrix(h)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got {m.shape}")
    hnorm = float(np.linalg.norm(m))
    if float(np.linalg.norm(m - m.T)) > 1e-9 * hnorm:
        raise ValueError("matrix is not symmetric within tolerance")
    sym = 0.5 * (m + m.T)
    if sym.shape[0] <= JACOBI_MAX_DIM:
        evals, vecs = jacobi_eigh(sym)
    else:
        evals, vecs = np.linalg.eigh(sym)
    order = np.argsort(evals, kind="stable")
    return EigenDecomposition(
        eigenvalues=np.ascontiguousarray(evals[order]),
        eigenvectors=np.ascontiguousarray(vecs[:, order]),
    )


def vec_transpose_permutation(d: int) -> np.ndarray:
    """The d^2 x d^2 permutation P with P @ vec(M) = vec(M^T).

    vec stacks columns; P has a single 1 per row and column, with
    P[i, j] = 1 exactly when i = (j mod d) * d + j // d (0-based).
    """
    if d < 1:
        raise ValueError("d must be a positive integer")
    dd = d * d
    p = np.zeros((dd, dd))
    for j in range(dd):
        i = (j % d) * d + j // d
        p[i, j] = 1.0
    return p


def random_orthogonal(seed, d: int) -> np.ndarray:
    """Seeded random d x d orthogonal matrix.

    QR of a Gaussian matrix with the column signs fixed so R has a
    nonnegative diagonal, which makes the draw a well-defined function of
    the seed. ``seed`` may be an int or an existing Rng stream.
    """
    if d < 1:
        raise ValueError("d must be a positive integer")
    rng = seed if isinstance(seed, Rng) else Rng(seed)
    g = rng.normal_matrix(d, d)
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


def abs_percentile(values, q: float) -> float:
    """Nearest-rank percentile of the absolute values.

    Sorts |values| ascending and returns the element at 1-based index
    ceil(q * N). No interpolation.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("percentile of an empty array")
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    s = np.sort(np.abs(v))
    idx = max(math.ceil(q * s.size), 1) - 1
    return float(s[idx])
