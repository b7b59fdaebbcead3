"""Synchronization margins: small gain, scalar torus closed form, critical CoD."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import io
import math

import numpy as np

from .graph import TorusSpec, torus_extreme_eigs
from .linalg import LinAlgError, is_positive_definite, spectral_norm, sym, sym_inv_sqrt
from .prl import check_full_sync_condition, check_reduced_sync_condition, full_sync_problem


class MarginError(ValueError):
    pass


class DeterministicallyInfeasible(MarginError):
    pass


# ---------------------------------------------------------------------------
# small gain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmallGainCertificate:
    rho: float
    sigma_critical_sq: float
    sigma_sq: float
    holds: bool


def small_gain_margin(P, problem, sigma_sq):
    """Loop-gain test ``sigma^2 rho(M)^2 < 1`` built from a feasible ``P``.

    ``problem`` is a :class:`~lursync.prl.FullSyncProblem`; its nominal loop
    ``F0`` plays the part of the deterministic system matrix and its
    ``A_alpha`` the uncertainty channels.
    """
    P = sym(P, check=False)
    B, C, S1 = problem.B, problem.C, problem.Sigma1
    S_hat = sym(np.linalg.inv(P) - B @ np.linalg.solve(S1, B.T), check=False)
    if not is_positive_definite(S_hat):
        raise MarginError("S_hat = P^-1 - B Sigma1^-1 B^T is not positive definite")
    T_hat = P - C.T @ np.linalg.solve(S1, C)
    F0 = problem.F0
    W = sym(T_hat - F0.T @ np.linalg.solve(S_hat, F0), check=False)
    if not is_positive_definite(W):
        raise MarginError("T_hat - F0^T S_hat^-1 F0 is not positive definite")
    try:
        s_inv_half = sym_inv_sqrt(S_hat)
        w_inv_half = sym_inv_sqrt(W)
    except LinAlgError as exc:  # pragma: no cover - guarded by the checks above
        raise MarginError(str(exc)) from exc
    if problem.A_alpha:
        M = np.vstack([s_inv_half @ Ak @ w_inv_half for Ak in problem.A_alpha])
        rho = spectral_norm(M)
    else:
        rho = 0.0
    crit = math.inf if rho == 0.0 else 1.0 / rho**2
    return SmallGainCertificate(
        rho=rho,
        sigma_critical_sq=crit,
        sigma_sq=float(sigma_sq),
        holds=bool(sigma_sq * rho * rho < 1.0),
    )


def small_gain_for_graph(g, sys, G, sigma_sq, reference_sigma_sq=None, opts=None):
    """Solve the full synchronization Riccati at a common link variance, then
    evaluate the small-gain certificate at ``sigma_sq``.

    ``reference_sigma_sq`` (default ``sigma_sq``) is the variance the Riccati
    is solved at.  Returns ``(certificate, small_gain)``; ``small_gain`` is
    ``None`` when the Riccati is infeasible.
    """
    ref = sigma_sq if reference_sigma_sq is None else reference_sigma_sq
    gv = g.with_variances(ref)
    cert = check_full_sync_condition(gv, sys, G, opts)
    if not cert.feasible:
        return cert, None
    return cert, small_gain_margin(cert.P, full_sync_problem(gv, sys, G), sigma_sq)


# ---------------------------------------------------------------------------
# scalar agents on a torus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarTorusParams:
    """Scalar agents ``x+ = a x - phi(x)`` with sector ``D = delta / 2``,
    coupled with gain ``g`` over links of weight ``mu + xi``."""

    a: float
    delta: float
    g: float
    mu: float
    sigma_sq: float

    def __post_init__(self):
        if not self.delta > 1.0:
            raise MarginError("delta must exceed 1")
        if not self.mu > 0.0:
            raise MarginError("mu must be positive")
        if not self.sigma_sq >= 0.0:
            raise MarginError("sigma_sq must be nonnegative")

    @property
    def a0(self):
        return self.a - 1.0 / self.delta

    @property
    def bound(self):
        return (1.0 - 1.0 / self.delta) ** 2

    def alpha_sq(self, lam):
        return (self.a0 - self.mu * lam * self.g) ** 2 + self.sigma_sq * lam * lam * self.g * self.g


@dataclass(frozen=True)
class TorusMargin:
    lambda_2: float
    lambda_N: float
    lambda_sup: float
    alpha_sq_2: float
    alpha_sq_N: float
    rho_SM: float  # nan when deterministically infeasible
    deterministic_feasible: bool

    @property
    def feasible(self):
        return self.deterministic_feasible and self.rho_SM > 0.0


def scalar_torus_feasible(p, spec):
    lam2, lamN = torus_extreme_eigs(spec)
    return p.bound > max(p.alpha_sq(lam2), p.alpha_sq(lamN))


def scalar_torus_margin(p, spec):
    lam2, lamN = torus_extreme_eigs(spec)
    a2, aN = p.alpha_sq(lam2), p.alpha_sq(lamN)
    # ties (up to roundoff in the eigenvalues) resolve toward lambda_2
    lam_sup = lam2 if a2 >= aN - 1e-12 * max(abs(a2), abs(aN), 1.0) else lamN
    denom = p.bound - (p.a0 - p.mu * lam_sup * p.g) ** 2
    if denom > 0.0:
        rho = 1.0 - p.sigma_sq * (lam_sup * p.g) ** 2 / denom
        det_ok = True
    else:
        rho = math.nan
        det_ok = False
    return TorusMargin(lam2, lamN, lam_sup, a2, aN, rho, det_ok)


def torus_sweep(p, N, k_range, d_range, threads=1):
    """``rho_SM`` over a grid of neighbour counts and torus dimensions.

    Rows are ``(d, k, rho_sm, feasible)`` in row-major ``(d, k)`` order;
    ``rho_sm`` is nan for deterministically infeasible cells.
    """
    cells = [(d, k) for d in d_range for k in k_range]

    def one(cell):
        d, k = cell
        tm = scalar_torus_margin(p, TorusSpec(N, k, d))
        return (d, k, tm.rho_SM, tm.feasible)

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, cells))
    return [one(c) for c in cells]


def optimal_k(rows):
    """Per dimension, the ``k`` with the largest feasible margin (smallest k on ties)."""
    best = {}
    for d, k, rho, ok in rows:
        best.setdefault(d, None)
        if not ok:
            continue
        cur = best[d]
        if cur is None or rho > cur[1]:
            best[d] = (k, rho)
    return {d: (v[0] if v else None) for d, v in best.items()}


def sweep_csv(rows):
    out = io.StringIO()
    out.write("d,k,rho_sm,feasible\n")
    for d, k, rho, ok in rows:
        out.write(f"{d},{k},{rho:.12g},{'true' if ok else 'false'}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# critical coefficient of dispersion
# ---------------------------------------------------------------------------


def critical_cod(sys, G, spectra, tol=1e-3, cap=2.0**20, opts=None):
    """Largest ``gamma_bar`` certified by the reduced condition, by bisection.

    Returns ``math.inf`` when the condition still holds at ``cap``.
    """

    def ok(gb):
        return check_reduced_sync_condition(sys, G, spectra, gamma_bar=gb, opts=opts).feasible

    if not ok(0.0):
        raise DeterministicallyInfeasible(
            "reduced synchronization condition fails at zero dispersion (deterministically infeasible)"
        )
    lo, hi = 0.0, 1.0
    while ok(hi):
        lo = hi
        if hi >= cap:
            return math.inf
        hi = min(2.0 * hi, cap)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo
