"""Dense symmetric linear algebra for desk-scale matrices."""
from dataclasses import dataclass
import math

import numpy as np

from . import _kernels

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class LinAlgError(ValueError):
    pass


class ConvergenceError(LinAlgError):
    pass


def sym(m, check=True, atol=1e-10):
    """Return ``m`` as a float array with exactly symmetric entries.

    The upper and lower triangles are averaged; with ``check`` the input must
    already be symmetric up to ``atol`` relative to its largest entry.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise LinAlgError(f"expected a square matrix, got shape {m.shape}")
    if check:
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        if np.max(np.abs(m - m.T), initial=0.0) > atol * scale:
            raise LinAlgError("matrix is not symmetric")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class EigDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def sym_eig(m, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Eigenvalues come back in ascending order with matching orthonormal
    eigenvector columns.
    """
    a = np.ascontiguousarray(sym(m))
    n = a.shape[0]
    if n == 0:
        return EigDecomposition(np.zeros(0), np.zeros((0, 0)))
    if not np.isfinite(a).all():
        raise LinAlgError("matrix has non-finite entries")
    w, v, sweeps, off, ok = _kernels.jacobi_eigh(a, tol, max_sweeps)
    if not ok:
        raise ConvergenceError(
            f"Jacobi eigensolver did not converge for order {n} after "
            f"{max_sweeps} sweeps (off-diagonal residual {off:.3e})"
        )
    order = np.argsort(w, kind="stable")
    return EigDecomposition(np.asarray(w)[order], np.asarray(v)[:, order], int(sweeps))


def eigvalsh(m):
    return sym_eig(m).eigenvalues


def min_eig(m):
    return float(sym_eig(m).eigenvalues[0])


def is_positive_definite(m, margin=0.0):
    """True iff the smallest eigenvalue of the symmetric ``m`` exceeds ``margin``."""
    m = sym(m)
    if m.shape[0] == 0:
        return True
    return min_eig(m) > margin


def kron(a, b):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    ra, ca = a.shape
    rb, cb = b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(ra * rb, ca * cb)


def sym_inv_sqrt(m):
    """Symmetric positive definite S with S @ S equal to inv(m)."""
    d = sym_eig(m)
    lo = float(d.eigenvalues[0]) if d.eigenvalues.size else 1.0
    if lo <= 0.0:
        raise LinAlgError(
            f"sym_inv_sqrt needs a positive definite matrix; smallest eigenvalue is {lo:.3e}"
        )
    v = d.eigenvectors
    return sym((v / np.sqrt(d.eigenvalues)) @ v.T, check=False)


def spectral_norm(m):
    """Largest singular value, via the eigenvalues of m^T m."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0.0
    g = m.T @ m if m.shape[0] >= m.shape[1] else m @ m.T
    top = float(sym_eig(g).eigenvalues[-1])
    return math.sqrt(max(top, 0.0))


def expm(a, order=18):
    """Matrix exponential by scaling and squaring with a truncated Taylor series.

    The argument is scaled below norm 1/2 so that the truncation remainder of an
    order-18 series is far below 1e-12 relative.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[0]
    nrm = float(np.max(np.sum(np.abs(a), axis=1))) if n else 0.0
    s = 0
    if nrm > 0.5:
        s = int(math.ceil(math.log2(nrm / 0.5)))
    x = a / (2.0**s)
    term = np.eye(n)
    out = np.eye(n)
    for k in range(1, order + 1):
        term = term @ x / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def zoh_discretize(a_cont, b_cont, T):
    """Zero-order-hold discretisation of ``dx/dt = a x + b u`` at step ``T``.

    Returns ``(exp(a T), int_0^T exp(a s) ds b)``, both read off a single
    exponential of the augmented block matrix ``[[a, b], [0, 0]]``.
    """
    if not T > 0:
        raise ValueError("sampling time T must be positive")
    a = np.atleast_2d(np.asarray(a_cont, dtype=float))
    b = np.asarray(b_cont, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    n, m = b.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = a
    aug[:n, n:] = b
    e = expm(aug * T)
    return e[:n, :n], e[:n, n:]
