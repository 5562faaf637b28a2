"""Dense symmetric-matrix kernel.

Symmetric matrices are plain ``numpy`` arrays; :func:`sym_matrix` is the
single ingest point that checks shape, finiteness and symmetry.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import FactorizationError, InvalidInputError, NumericFailure

__all__ = [
    "DEFAULT_TOL",
    "SpectralDecomposition",
    "sym_matrix",
    "trace_inner",
    "spectral_decompose",
    "is_negative_definite",
    "min_eigenvalue",
    "solve_spd",
]

#: Default relative tolerance; scaled by matrix magnitude where used.
DEFAULT_TOL = 1e-10

_MAX_SWEEPS = 100


def sym_matrix(a, *, sym_tol=1e-12, name="matrix"):
    """Return ``a`` as a finite symmetric float array.

    Asymmetry up to ``sym_tol`` (relative to the largest entry) is averaged
    away; anything larger is rejected.
    """
    arr = np.array(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidInputError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.abs(arr).max()))
    if np.abs(arr - arr.T).max() > sym_tol * scale:
        raise InvalidInputError(f"{name} is not symmetric")
    return 0.5 * (arr + arr.T)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues sorted descending with column-paired orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T

    def __iter__(self):
        # allows ``w, v = spectral_decompose(s)``
        yield self.eigenvalues
        yield self.eigenvectors


def trace_inner(a, b):
    """Trace inner product ``tr(a b)`` of two symmetric matrices.

    Evaluated as the element-wise sum of ``a * b`` so the result is exactly
    symmetric in its arguments.
    """
    a = sym_matrix(a, name="a")
    b = sym_matrix(b, name="b")
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def spectral_decompose(s, *, max_sweeps=_MAX_SWEEPS):
    """Eigen-decompose a symmetric matrix with cyclic Jacobi rotations.

    Parameters
    ----------
    s : array_like, shape (n, n)
        Symmetric input.
    max_sweeps : int
        Cap on full sweeps over the off-diagonal pairs.

    Returns
    -------
    SpectralDecomposition
        Eigenvalues descending. Each eigenvector is signed so that its
        largest-magnitude component is positive.

    Raises
    ------
    NumericFailure
        If the off-diagonal mass has not vanished after ``max_sweeps``.
    """
    a = sym_matrix(s).copy()
    n = a.shape[0]
    v = np.eye(n)
    frob = np.linalg.norm(a)
    if n > 1 and frob > 0.0:
        target = 1e-15 * frob
        negligible = 1e-18 * frob
        for _ in range(max_sweeps):
            off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
            if off <= target:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if abs(apq) <= negligible:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if abs(theta) > 1e150:
                        t = 0.5 / theta
                    else:
                        t = np.copysign(1.0, theta) / (abs(theta) + np.hypot(theta, 1.0))
                    c = 1.0 / np.hypot(t, 1.0)
                    sn = t * c
                    ap = a[:, p].copy()
                    aq = a[:, q].copy()
                    a[:, p] = c * ap - sn * aq
                    a[:, q] = sn * ap + c * aq
                    ap = a[p, :].copy()
                    aq = a[q, :].copy()
                    a[p, :] = c * ap - sn * aq
                    a[q, :] = sn * ap + c * aq
                    a[p, q] = a[q, p] = 0.0
                    vp = v[:, p].copy()
                    vq = v[:, q].copy()
                    v[:, p] = c * vp - sn * vq
                    v[:, q] = sn * vp + c * vq
        else:
            raise NumericFailure(f"Jacobi did not converge in {max_sweeps} sweeps")

    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    lead = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[lead, np.arange(n)])
    signs[signs == 0] = 1.0
    return SpectralDecomposition(w, v * signs)


def min_eigenvalue(s):
    return float(spectral_decompose(s).eigenvalues[-1])


def is_negative_definite(s, tol=0.0):
    """True iff the largest eigenvalue of ``s`` is below ``-tol``."""
    if tol < 0:
        raise InvalidInputError("tol must be non-negative")
    return bool(spectral_decompose(s).eigenvalues[0] < -tol)


def solve_spd(s, rhs):
    """Solve ``s x = rhs`` for symmetric positive definite ``s`` by Cholesky."""
    s = sym_matrix(s)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != s.shape[0]:
        raise InvalidInputError("right-hand side length does not match matrix")
    try:
        factor = scipy.linalg.cho_factor(s, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError("matrix is not positive definite") from exc
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
