"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The public names at the bottom (``jacobi_eigh``, ``riccati_iterate``,
``simulate_trials``) dispatch according to ``_accel.USE_NUMBA``.
The ``*_nb`` / ``*_np`` variants stay importable for cross-checking and
benchmarking.
"""
import math

import numpy as np

from . import _accel
from ._accel import njit

# status codes shared by the Riccati kernels
CONVERGED = 0
DIVERGED = 1
DOMAIN_LOST = 2
ITERATION_CAP = 3

# nonlinearity codes shared by the simulation kernels
NL_ZERO = 0
NL_LINEAR = 1
NL_CHUA = 2
NL_CUBIC = 3
NL_TANH = 4


# ---------------------------------------------------------------------------
# cyclic Jacobi eigensolver
# ---------------------------------------------------------------------------


def _rotation(app, aqq, apq):
    theta = (aqq - app) / (2.0 * apq)
    if abs(theta) > 1e150:
        t = 0.5 / theta
    else:
        t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
        if theta < 0.0:
            t = -t
    c = 1.0 / math.sqrt(t * t + 1.0)
    return c, t * c


_rotation_nb = njit(_rotation)


@njit
def jacobi_eigh_nb(a_in, tol, max_sweeps):
    n = a_in.shape[0]
    a = a_in.copy()
    v = np.eye(n)
    scale = math.sqrt(np.sum(a * a))
    off = 0.0
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        off = math.sqrt(2.0 * off)
        if off <= tol * scale or off == 0.0:
            return np.diag(a).copy(), v, sweep, off, True
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                c, s = _rotation_nb(a[p, p], a[q, q], apq)
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return np.diag(a).copy(), v, max_sweeps, off, False


def jacobi_eigh_np(a_in, tol, max_sweeps):
    a = np.array(a_in, dtype=float, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    scale = math.sqrt(float(np.sum(a * a)))
    iu = np.triu_indices(n, 1)
    off = 0.0
    for sweep in range(max_sweeps + 1):
        off = math.sqrt(2.0 * float(np.sum(a[iu] ** 2)))
        if off <= tol * scale or off == 0.0:
            return np.diag(a).copy(), v, sweep, off, True
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                c, s = _rotation(a[p, p], a[q, q], apq)
                cp = a[:, p].copy()
                cq = a[:, q]
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp = a[p, :].copy()
                rq = a[q, :]
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, max_sweeps, off, False


# ---------------------------------------------------------------------------
# generic Riccati fixed point
#
#   RHS(P) = Q0 + sum_k w_k F_k^T (P + P B S^-1 B^T P) F_k,   S = Sigma - B^T P B
# ---------------------------------------------------------------------------


@njit
def _min_eig_nb(m):
    return np.linalg.eigvalsh(0.5 * (m + m.T))[0]


@njit
def _rhs_nb(P, F, w, B, Sigma, Q0):
    S = Sigma - B.T @ P @ B
    PB = P @ B
    X = P + PB @ np.linalg.solve(S, PB.T)
    R = Q0.copy()
    for k in range(F.shape[0]):
        if w[k] != 0.0:
            R += w[k] * (F[k].T @ X @ F[k])
    return 0.5 * (R + R.T)


@njit
def riccati_iterate_nb(F, w, B, Sigma, Q0, P0, eta, max_iter, tol, blowup, margin):
    P = P0.copy()
    res = np.inf
    if _min_eig_nb(Sigma - B.T @ P @ B) <= margin:
        return P, res, 0, DOMAIN_LOST
    for it in range(max_iter):
        R = _rhs_nb(P, F, w, B, Sigma, Q0)
        res = math.sqrt(np.sum((R - P) ** 2))
        if res <= tol * (1.0 + math.sqrt(np.sum(P * P))):
            return P, res, it, CONVERGED
        step = eta
        while True:
            Pn = (1.0 - step) * P + step * R
            if not np.isfinite(Pn).all() or math.sqrt(np.sum(Pn * Pn)) > blowup:
                return Pn, res, it + 1, DIVERGED
            if _min_eig_nb(Sigma - B.T @ Pn @ B) > margin:
                break
            step *= 0.5
            if step < eta / 64.0:
                return P, res, it + 1, DOMAIN_LOST
        P = Pn
    return P, res, max_iter, ITERATION_CAP


def _rhs_np(P, F, w, B, Sigma, Q0):
    S = Sigma - B.T @ P @ B
    PB = P @ B
    X = P + PB @ np.linalg.solve(S, PB.T)
    R = Q0.copy()
    for k in range(F.shape[0]):
        if w[k] != 0.0:
            R += w[k] * (F[k].T @ X @ F[k])
    return 0.5 * (R + R.T)


def riccati_iterate_np(F, w, B, Sigma, Q0, P0, eta, max_iter, tol, blowup, margin):
    def min_eig(m):
        return np.linalg.eigvalsh(0.5 * (m + m.T))[0]

    P = P0.copy()
    res = np.inf
    if min_eig(Sigma - B.T @ P @ B) <= margin:
        return P, res, 0, DOMAIN_LOST
    for it in range(max_iter):
        R = _rhs_np(P, F, w, B, Sigma, Q0)
        res = float(np.linalg.norm(R - P))
        if res <= tol * (1.0 + np.linalg.norm(P)):
            return P, res, it, CONVERGED
        step = eta
        while True:
            Pn = (1.0 - step) * P + step * R
            if not np.isfinite(Pn).all() or np.linalg.norm(Pn) > blowup:
                return Pn, res, it + 1, DIVERGED
            if min_eig(Sigma - B.T @ Pn @ B) > margin:
                break
            step *= 0.5
            if step < eta / 64.0:
                return P, res, it + 1, DOMAIN_LOST
        P = Pn
    return P, res, max_iter, ITERATION_CAP


# ---------------------------------------------------------------------------
# Monte Carlo network stepping
# ---------------------------------------------------------------------------


def _phi_scalar(y, kind, p):
    if kind == NL_ZERO:
        return 0.0
    if kind == NL_LINEAR:
        return p[0] * y
    if kind == NL_CHUA:
        eps, m0, m1 = p[0], p[1], p[2]
        if abs(y) <= 1.0:
            return eps * y
        sgn = 1.0 if y > 0.0 else -1.0
        return (eps - m0 + m1) * y + (m0 - m1) * sgn
    if kind == NL_CUBIC:
        return p[0] * y * y * y
    if kind == NL_TANH:
        return p[0] * math.tanh(y)
    return math.nan


_phi_scalar_nb = njit(_phi_scalar)


def phi_np(y, kind, p):
    y = np.asarray(y, dtype=float)
    if kind == NL_ZERO:
        return np.zeros_like(y)
    if kind == NL_LINEAR:
        return p[0] * y
    if kind == NL_CHUA:
        eps, m0, m1 = p[0], p[1], p[2]
        outer = (eps - m0 + m1) * y + (m0 - m1) * np.sign(y)
        return np.where(np.abs(y) <= 1.0, eps * y, outer)
    if kind == NL_CUBIC:
        return p[0] * y**3
    if kind == NL_TANH:
        return p[0] * np.tanh(y)
    raise ValueError(f"unknown nonlinearity code {kind}")


@njit(nogil=True)
def simulate_trials_nb(x0, A, B, C, G, ei, ej, w, vnoise, nl_kind, nl_p, blowup):
    trials, N, n = x0.shape
    horizon = w.shape[1]
    m = C.shape[0]
    E = ei.shape[0]
    use_v = vnoise.shape[0] > 0
    err = np.full((trials, horizon + 1), np.nan)
    div_at = np.full(trials, -1, dtype=np.int64)
    x = np.empty((N, n))
    xn = np.empty((N, n))
    y = np.empty((N, m))
    u = np.empty((N, m))
    for tr in range(trials):
        x[:, :] = x0[tr]
        for t in range(horizon + 1):
            # centred sum of squares
            e = 0.0
            for c in range(n):
                mean = 0.0
                for i in range(N):
                    mean += x[i, c]
                mean /= N
                for i in range(N):
                    d = x[i, c] - mean
                    e += d * d
            if not math.isfinite(e) or e > blowup:
                div_at[tr] = t
                break
            err[tr, t] = e
            if t == horizon:
                break
            for i in range(N):
                for r in range(m):
                    s = 0.0
                    for c in range(n):
                        s += C[r, c] * x[i, c]
                    y[i, r] = s
            # u_i = sum_j w_ij (y_i - y_j)
            u[:, :] = 0.0
            for k in range(E):
                a = ei[k]
                b = ej[k]
                wk = w[tr, t, k]
                for r in range(m):
                    d = wk * (y[a, r] - y[b, r])
                    u[a, r] += d
                    u[b, r] -= d
            for i in range(N):
                for c in range(n):
                    s = 0.0
                    for cc in range(n):
                        s += A[c, cc] * x[i, cc]
                    for r in range(m):
                        s -= B[c, r] * _phi_scalar_nb(y[i, r], nl_kind, nl_p)
                        s -= G[c, r] * u[i, r]
                    if use_v:
                        s += vnoise[tr, t, i, c]
                    xn[i, c] = s
            x[:, :] = xn
    return err, div_at


def simulate_trials_np(x0, A, B, C, G, ei, ej, w, vnoise, nl_kind, nl_p, blowup):
    x = np.array(x0, dtype=float, copy=True)
    trials, N, n = x.shape
    horizon = w.shape[1]
    use_v = vnoise.shape[0] > 0
    err = np.full((trials, horizon + 1), np.nan)
    div_at = np.full(trials, -1, dtype=np.int64)
    alive = np.ones(trials, dtype=bool)
    for t in range(horizon + 1):
        dev = x - x.mean(axis=1, keepdims=True)
        e = np.einsum("tij,tij->t", dev, dev)
        bad = alive & (~np.isfinite(e) | (e > blowup))
        div_at[bad] = t
        alive &= ~bad
        err[alive, t] = e[alive]
        if t == horizon or not alive.any():
            break
        with np.errstate(all="ignore"):
            y = x @ C.T
            d = w[:, t, :, None] * (y[:, ei, :] - y[:, ej, :])
            u = np.zeros_like(y)
            np.add.at(u, (slice(None), ei), d)
            np.add.at(u, (slice(None), ej), -d)
            xn = x @ A.T - phi_np(y, nl_kind, nl_p) @ B.T - u @ G.T
            if use_v:
                xn += vnoise[:, t]
        x = np.where(alive[:, None, None], xn, 0.0)
    return err, div_at


if _accel.USE_NUMBA:
    jacobi_eigh = jacobi_eigh_nb
    riccati_iterate = riccati_iterate_nb
    simulate_trials = simulate_trials_nb
else:
    jacobi_eigh = jacobi_eigh_np
    riccati_iterate = riccati_iterate_np
    simulate_trials = simulate_trials_np
