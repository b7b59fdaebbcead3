"""Stochastic positive-real feasibility and the synchronization conditions.

Every condition here is a Riccati equation of the common shape

    P = sum_k w_k F_k^T (P + P B (Sigma - B^T P B)^-1 B^T P) F_k + Q0,

with ``w_0 = 1`` for the nominal closed loop ``F_0`` and the remaining terms
carrying the multiplicative noise.  It is solved by damped fixed-point
iteration from ``P_0 = R``.  The map is monotone on the admissible set
``Sigma - B^T P B > 0`` and ``P_1 >= P_0``, so the iterates increase and
converge exactly when a solution exists; divergence, loss of admissibility
or the iteration cap mean "infeasible".
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels
from .graph import (
    DisconnectedGraphError,
    edge_vector,
    laplacian,
    spectra as graph_spectra,
    sync_complement,
    torus_distinct_eigenvalues,
)
from .linalg import is_positive_definite, kron, sym


class InputError(ValueError):
    pass


class SizeCapError(InputError):
    pass


@dataclass
class SolverOptions:
    eta: float = 0.5
    max_iter: int = 10_000
    tol: float = 1e-9
    blowup: float = 1e12
    pd_margin: float = 1e-9
    r_scale: float = 1e-6

    def replace(self, **kw):
        d = dict(self.__dict__)
        d.update(kw)
        return SolverOptions(**d)


DEFAULT_OPTIONS = SolverOptions()


def _as2d(x, name):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InputError(f"{name} must be a matrix")
    return a


@dataclass
class LureSystem:
    """Discrete-time Lur'e component ``x+ = A x - B phi(C x)``.

    ``D`` bounds the sector of ``phi`` and ``D1`` its incremental sector;
    ``D1`` defaults to ``D``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    D1: np.ndarray = None

    def __post_init__(self):
        self.A = _as2d(self.A, "A")
        self.B = _as2d(self.B, "B")
        if np.ndim(self.C) == 1:
            self.C = np.asarray(self.C, dtype=float).reshape(1, -1)
        self.C = _as2d(self.C, "C")
        self.D = _as2d(self.D, "D")
        self.D1 = self.D.copy() if self.D1 is None else _as2d(self.D1, "D1")
        n, m = self.n, self.m
        if self.A.shape != (n, n):
            raise InputError(f"A must be square, got {self.A.shape}")
        if self.B.shape != (n, m):
            raise InputError(f"B must be {n}x{m}, got {self.B.shape}")
        if self.C.shape != (m, n):
            raise InputError(f"C must be {m}x{n}, got {self.C.shape}")
        for name in ("D", "D1"):
            if getattr(self, name).shape != (m, m):
                raise InputError(f"{name} must be {m}x{m}, got {getattr(self, name).shape}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def Sigma(self):
        return sym(self.D + self.D.T, check=False)

    @property
    def Sigma1(self):
        return sym(self.D1 + self.D1.T, check=False)

    @property
    def A0(self):
        return self.A - self.B @ np.linalg.solve(self.Sigma, self.C)

    @property
    def A0_incremental(self):
        return self.A - self.B @ np.linalg.solve(self.Sigma1, self.C)

    def check_sectors(self, incremental=True):
        if not is_positive_definite(self.Sigma):
            raise InputError("Sigma = D + D^T must be positive definite")
        if incremental and not is_positive_definite(self.Sigma1):
            raise InputError("Sigma1 = D1 + D1^T must be positive definite")


@dataclass
class StructuredUncertainty:
    """Multiplicative perturbation ``A + sum_i xi_i A_i`` with ``var(xi_i) = sigma_i^2``."""

    terms: list = field(default_factory=list)

    def __post_init__(self):
        terms = []
        for Ai, var in self.terms:
            if var < 0:
                raise InputError("uncertainty variances must be nonnegative")
            terms.append((_as2d(Ai, "A_i"), float(var)))
        self.terms = terms

    def scaled(self, factor):
        return StructuredUncertainty([(Ai, var * factor) for Ai, var in self.terms])


@dataclass
class FeasibilityCertificate:
    feasible: bool
    P: np.ndarray
    residual: float
    iterations: int
    binding_condition: str = None
    parts: tuple = ()

    def __bool__(self):
        return bool(self.feasible)

    def summary(self):
        verdict = "feasible" if self.feasible else f"infeasible ({self.binding_condition})"
        return f"{verdict}; residual {self.residual:.3e}; iterations {self.iterations}"


_STATUS_TAG = {
    _kernels.DIVERGED: "divergence",
    _kernels.DOMAIN_LOST: "sigma_minus_BtPB",
    _kernels.ITERATION_CAP: "iteration_cap",
}


def riccati_rhs(P, F, weights, B, Sigma, Q0):
    """Evaluate the right-hand side of the common Riccati form (plain numpy)."""
    S = Sigma - B.T @ P @ B
    PB = P @ B
    X = P + PB @ np.linalg.solve(S, PB.T)
    out = np.array(Q0, dtype=float, copy=True)
    for Fk, wk in zip(F, weights):
        out += wk * Fk.T @ X @ Fk
    return 0.5 * (out + out.T)


def solve_riccati(F, weights, B, Sigma, Q0, R, opts=None):
    """Solve the common Riccati form by damped fixed-point iteration."""
    opts = opts or DEFAULT_OPTIONS
    F = np.ascontiguousarray(np.stack([np.asarray(f, dtype=float) for f in F]))
    w = np.ascontiguousarray(np.asarray(weights, dtype=float))
    B = np.ascontiguousarray(B, dtype=float)
    Sigma = np.ascontiguousarray(Sigma, dtype=float)
    Q0 = np.ascontiguousarray(Q0, dtype=float)
    P0 = np.ascontiguousarray(R, dtype=float)
    P, res, it, status = _kernels.riccati_iterate(
        F, w, B, Sigma, Q0, P0, float(opts.eta), int(opts.max_iter),
        float(opts.tol), float(opts.blowup), float(opts.pd_margin),
    )
    P = sym(P, check=False)
    if status != _kernels.CONVERGED:
        return FeasibilityCertificate(False, P, float(res), int(it), _STATUS_TAG[status])
    tag = None
    if not is_positive_definite(P, opts.pd_margin):
        tag = "positivity_P"
    elif not is_positive_definite(Sigma - B.T @ P @ B, opts.pd_margin):
        tag = "sigma_minus_BtPB"
    elif not res <= opts.tol * (1.0 + np.linalg.norm(P)):
        tag = "residual"
    return FeasibilityCertificate(tag is None, P, float(res), int(it), tag)


def _default_R(R, n, opts):
    if R is None:
        return opts.r_scale * np.eye(n)
    R = sym(_as2d(R, "R"))
    if R.shape != (n, n) or not is_positive_definite(R):
        raise InputError(f"R must be a symmetric positive definite {n}x{n} matrix")
    return R


def _check_unc(sys, unc):
    unc = unc or StructuredUncertainty()
    for Ai, _ in unc.terms:
        if Ai.shape != (sys.n, sys.n):
            raise InputError(f"uncertainty matrices must be {sys.n}x{sys.n}, got {Ai.shape}")
    return unc


def solve_stochastic_prl(sys, unc=None, R_P=None, opts=None):
    """Primal stochastic positive-real Riccati for ``A + sum xi_i A_i``."""
    opts = opts or DEFAULT_OPTIONS
    sys.check_sectors(incremental=False)
    unc = _check_unc(sys, unc)
    R = _default_R(R_P, sys.n, opts)
    Sigma = sys.Sigma
    F = [sys.A0] + [Ai for Ai, _ in unc.terms]
    w = [1.0] + [v for _, v in unc.terms]
    Q0 = sys.C.T @ np.linalg.solve(Sigma, sys.C) + R
    return solve_riccati(F, w, sys.B, Sigma, Q0, R, opts)


def solve_dual_prl(sys, unc=None, R_Q=None, opts=None):
    """Dual form: the primal Riccati applied to ``(A^T, C^T, B^T)``; holds ``Q``."""
    opts = opts or DEFAULT_OPTIONS
    sys.check_sectors(incremental=False)
    unc = _check_unc(sys, unc)
    R = _default_R(R_Q, sys.n, opts)
    Sigma = sys.Sigma
    F = [sys.A0.T] + [Ai.T for Ai, _ in unc.terms]
    w = [1.0] + [v for _, v in unc.terms]
    Q0 = sys.B @ np.linalg.solve(Sigma, sys.B.T) + R
    return solve_riccati(F, w, sys.C.T, Sigma, Q0, R, opts)


def _coupling(sys, G):
    G = coupling_matrix(sys, G)
    if G.shape != (sys.n, sys.m):
        raise InputError(f"G must be {sys.n}x{sys.m}, got {G.shape}")
    return G @ sys.C


def coupling_matrix(sys, G):
    """Accept an ``n x m`` matrix, or a scalar ``g`` meaning ``g * C^T``."""
    G = np.asarray(G, dtype=float)
    if G.ndim == 0 or G.size == 1 and (sys.n, sys.m) != (1, 1):
        return float(G) * sys.C.T
    return _as2d(G, "G")


@dataclass
class FullSyncProblem:
    """Matrices of the ``(N-1) n``-order synchronization Riccati."""

    F0: np.ndarray
    A_alpha: list
    variances: list
    B: np.ndarray
    C: np.ndarray
    Sigma1: np.ndarray
    U: np.ndarray
    Lambda_hat: np.ndarray


def full_sync_problem(g, sys, G):
    N, n = g.n_nodes, sys.n
    GC = _coupling(sys, G)
    U = sync_complement(N)
    Lam = sym(U.T @ laplacian(g) @ U, check=False)
    I = np.eye(N - 1)
    F0 = kron(I, sys.A0_incremental) - kron(Lam, GC)
    A_alpha, var = [], []
    for i, j, mu, v in g.unc_edges:
        lh = U.T @ edge_vector(i, j, N)
        A_alpha.append(kron(np.outer(lh, lh), GC))
        var.append(v)
    return FullSyncProblem(
        F0=F0,
        A_alpha=A_alpha,
        variances=var,
        B=kron(I, sys.B),
        C=kron(I, sys.C),
        Sigma1=kron(I, sys.Sigma1),
        U=U,
        Lambda_hat=Lam,
    )


def check_full_sync_condition(g, sys, G, opts=None, R=None, state_cap=256):
    """Synchronization Riccati on the full ``(N-1) n`` transverse state."""
    opts = opts or DEFAULT_OPTIONS
    sys.check_sectors()
    if g.n_nodes * sys.n > state_cap:
        raise SizeCapError(
            f"{g.n_nodes} nodes x {sys.n} states exceeds the {state_cap}-dimensional cap; "
            "use the reduced condition instead"
        )
    graph_spectra(g)  # connectivity
    pr = full_sync_problem(g, sys, G)
    size = pr.F0.shape[0]
    Rm = _default_R(R, size, opts)
    F = [pr.F0] + pr.A_alpha
    w = [1.0] + pr.variances
    Q0 = pr.C.T @ np.linalg.solve(pr.Sigma1, pr.C) + Rm
    return solve_riccati(F, w, pr.B, pr.Sigma1, Q0, Rm, opts)


def mode_condition(sys, G, lam, intensity, opts=None, R=None, mean_gain=1.0):
    """Per-eigenvalue ``n``-order Riccati.

    Nominal loop ``A0 - mean_gain * lam * G C``; the noise term enters through
    ``G C`` with weight ``intensity``.
    """
    opts = opts or DEFAULT_OPTIONS
    GC = _coupling(sys, G)
    Rm = _default_R(R, sys.n, opts)
    Sigma1 = sys.Sigma1
    F = [sys.A0_incremental - mean_gain * lam * GC, GC]
    w = [1.0, float(intensity)]
    Q0 = sys.C.T @ np.linalg.solve(Sigma1, sys.C) + Rm
    return solve_riccati(F, w, sys.B, Sigma1, Q0, Rm, opts)


def reduced_mode_condition(sys, G, lam, gamma_bar, tau, opts=None, R=None):
    """Reduced condition at one eigenvalue: noise intensity ``2 gamma_bar tau lam``."""
    return mode_condition(sys, G, lam, 2.0 * gamma_bar * tau * lam, opts, R)


def _combine(parts):
    bad = [(label, c) for label, c in parts if not c.feasible]
    ref = bad[0][1] if bad else max((c for _, c in parts), key=lambda c: c.residual)
    binding = f"{bad[0][0]}: {bad[0][1].binding_condition}" if bad else None
    return FeasibilityCertificate(
        feasible=not bad,
        P=ref.P,
        residual=max(c.residual for _, c in parts),
        iterations=sum(c.iterations for _, c in parts),
        binding_condition=binding,
        parts=tuple(parts),
    )


def check_reduced_sync_condition(sys, G, spectra, gamma_bar=None, opts=None, R=None):
    """Size-independent condition checked at both ends of the nominal spectrum."""
    sys.check_sectors()
    gb = spectra.gamma_bar if gamma_bar is None else float(gamma_bar)
    if gb < 0:
        raise InputError("gamma_bar must be nonnegative")
    ends = [("lambda_2", spectra.lambda2)]
    if not math.isclose(spectra.lambdaN, spectra.lambda2, rel_tol=1e-12, abs_tol=1e-12):
        ends.append(("lambda_N", spectra.lambdaN))
    parts = [
        (label, reduced_mode_condition(sys, G, lam, gb, spectra.tau, opts, R))
        for label, lam in ends
    ]
    return _combine(parts)


def check_mode_conditions(eigenvalues, sys, G, mu=1.0, sigma_sq=0.0, opts=None, R=None):
    """Per-mode condition at every listed nonzero eigenvalue.

    Each mode sees the nominal loop ``A0 - mu lam G C`` and a noise channel
    ``G C`` of intensity ``sigma_sq lam^2`` (one weight shared by all links).
    """
    sys.check_sectors()
    if mu <= 0 or sigma_sq < 0:
        raise InputError("mode conditions need mu > 0 and sigma_sq >= 0")
    lams = [float(x) for x in eigenvalues if x > 1e-8]
    if not lams:
        raise InputError("no nonzero eigenvalues to check")
    parts = [
        (f"lambda={lam:.10g}", mode_condition(sys, G, lam, sigma_sq * lam * lam, opts, R, mean_gain=mu))
        for lam in lams
    ]
    return _combine(parts)


def check_torus_matrix_condition(spec, sys, G, mu, sigma_sq, opts=None, R=None):
    """Per-mode condition for a torus whose links share one weight ``mu + xi``."""
    return check_mode_conditions(torus_distinct_eigenvalues(spec), sys, G, mu, sigma_sq, opts, R)


def sector_check(nonlinearity, D, sample_grid, D1=None):
    """Check both sector inequalities of ``nonlinearity`` on a grid of outputs.

    Pointwise: ``phi(y)^T (y - D phi(y)) > 0`` for every nonzero grid point.
    Incremental: the same with differences of two grid points and ``D1``.
    """
    Y = np.asarray(sample_grid, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] == 0:
        raise InputError("sample grid is empty")
    D = _as2d(D, "D")
    D1 = D if D1 is None else _as2d(D1, "D1")
    Phi = np.array([np.atleast_1d(nonlinearity(y if y.size > 1 else y[0])) for y in Y], dtype=float)
    nz = np.any(Y != 0.0, axis=1)
    point = np.einsum("ij,ij->i", Phi, Y - Phi @ D.T)
    if not np.all(point[nz] > 0.0):
        return False
    iu = np.triu_indices(Y.shape[0], 1)
    dY = Y[iu[0]] - Y[iu[1]]
    dP = Phi[iu[0]] - Phi[iu[1]]
    keep = np.any(dY != 0.0, axis=1)
    inc = np.einsum("ij,ij->i", dP, dY - dP @ D1.T)
    return bool(np.all(inc[keep] > 0.0))
