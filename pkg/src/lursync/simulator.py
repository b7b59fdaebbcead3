"""Monte Carlo simulation of Lur'e networks over randomly weighted links."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels
from .graph import TorusSpec, UncertainGraph, torus_graph
from .linalg import zoh_discretize
from .prl import InputError, LureSystem, coupling_matrix

NOISE_MODELS = ("gaussian", "shifted-bernoulli")
BLOWUP = 1e150


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Nonlinearity:
    """Componentwise static nonlinearity understood by the stepping kernels.

    ``kind`` is one of ``zero``, ``linear`` (gain), ``chua`` (epsilon, m0,
    m1), ``cubic`` (c) or ``tanh`` (c).
    """

    kind: str
    params: tuple = ()

    _CODES = {
        "zero": (_kernels.NL_ZERO, 0),
        "linear": (_kernels.NL_LINEAR, 1),
        "chua": (_kernels.NL_CHUA, 3),
        "cubic": (_kernels.NL_CUBIC, 1),
        "tanh": (_kernels.NL_TANH, 1),
    }

    def __post_init__(self):
        if self.kind not in self._CODES:
            raise InputError(f"unknown nonlinearity {self.kind!r}; choose from {sorted(self._CODES)}")
        want = self._CODES[self.kind][1]
        if len(self.params) != want:
            raise InputError(f"nonlinearity {self.kind!r} takes {want} parameter(s), got {len(self.params)}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @property
    def code(self):
        return self._CODES[self.kind][0]

    def param_array(self):
        return np.array(self.params + (0.0,) * (3 - len(self.params)))

    def __call__(self, y):
        return _kernels.phi_np(y, self.code, self.param_array())


@dataclass(frozen=True)
class ChuaParams:
    """Chua circuit in dimensionless form with a three-segment diode."""

    alpha: float = 7.5
    beta: float = 15.0
    epsilon: float = 0.3
    m0: float = -0.1
    m1: float = 0.2

    @property
    def max_slope(self):
        return max(self.epsilon, self.epsilon - self.m0 + self.m1)

    @property
    def min_slope(self):
        return min(self.epsilon, self.epsilon - self.m0 + self.m1)


def chua_nonlinearity(y, p=ChuaParams()):
    """Diode characteristic: slope ``epsilon`` on ``|y| <= 1``, ``epsilon - m0 + m1`` outside."""
    return _kernels.phi_np(y, _kernels.NL_CHUA, np.array([p.epsilon, p.m0, p.m1]))


def chua_continuous(p=ChuaParams()):
    """Continuous-time ``(A, B, C)`` of one circuit with the diode pulled out."""
    a = p.alpha
    A = np.array([[0.0, a, 0.0], [1.0, -1.0, 1.0], [0.0, -p.beta, 0.0]])
    B = np.array([[a], [0.0], [0.0]])
    C = np.array([[1.0, 0.0, 0.0]])
    return A, B, C


def build_chua_network_system(p=ChuaParams(), T=0.01, D=None, D1=None):
    """Zero-order-hold Chua component ``(LureSystem, Nonlinearity)``.

    The diode is pulled out as ``phi``; the linear part keeps the capacitor and
    inductor dynamics.  ``D`` defaults to ``0.99 / max_slope`` so the sector
    (and, with the same value, the incremental sector) contains the diode.
    """
    if p.min_slope <= 0.0:
        raise InputError("the diode slopes must be positive to lie in a sector")
    Ac, Bc, C = chua_continuous(p)
    Ad, Bd = zoh_discretize(Ac, Bc, T)
    if D is None:
        D = 0.99 / p.max_slope
    sys = LureSystem(Ad, Bd, C, np.atleast_2d(D), None if D1 is None else np.atleast_2d(D1))
    return sys, Nonlinearity("chua", (p.epsilon, p.m0, p.m1))


# ---------------------------------------------------------------------------
# configuration and stepping
# ---------------------------------------------------------------------------


@dataclass
class NetworkSimConfig:
    """Everything one Monte Carlo run needs.

    ``graph`` is an :class:`UncertainGraph` (independent link noise) or a
    :class:`TorusSpec` (one noise sample shared by every link per step, with
    ``torus_mu`` and ``torus_sigma_sq``).  Initial states are
    ``init_center + init_spread * N(0, 1)`` per agent and trial.
    """

    system: LureSystem
    nonlinearity: Nonlinearity
    graph: object
    G: object = 1.0
    noise: str = "gaussian"
    additive_noise: float = 0.0
    horizon: int = 1000
    trials: int = 100
    seed: int = 0
    init_center: object = None
    init_spread: float = 1.0
    torus_mu: float = 1.0
    torus_sigma_sq: float = 0.0
    transient_frac: float = 0.1
    beta_margin: float = 1e-3
    r2_min: float = 0.9
    growth_factor: float = 10.0

    def __post_init__(self):
        if self.noise not in NOISE_MODELS:
            raise InputError(f"noise model must be one of {NOISE_MODELS}, got {self.noise!r}")
        if self.horizon < 1 or self.trials < 1:
            raise InputError("horizon and trials must be positive")
        if self.additive_noise < 0:
            raise InputError("additive_noise must be nonnegative")
        if isinstance(self.graph, TorusSpec):
            if self.torus_mu <= 0 or self.torus_sigma_sq < 0:
                raise InputError("torus needs mu > 0 and sigma_sq >= 0")
        elif not isinstance(self.graph, UncertainGraph):
            raise InputError("graph must be an UncertainGraph or a TorusSpec")
        self.G = coupling_matrix(self.system, self.G)
        if self.G.shape != (self.system.n, self.system.m):
            raise InputError(f"G must be {self.system.n}x{self.system.m}, got {self.G.shape}")

    @property
    def shared_noise(self):
        return isinstance(self.graph, TorusSpec)

    def edge_arrays(self):
        """``(ei, ej, mu, var)`` over all links; torus links carry the shared statistics."""
        g = self.graph
        if self.shared_noise:
            g = torus_graph(g, self.torus_mu, self.torus_sigma_sq)
        e = g.edges
        ei = np.array([x[0] for x in e], dtype=np.int64)
        ej = np.array([x[1] for x in e], dtype=np.int64)
        mu = np.array([x[2] for x in e], dtype=float)
        var = np.array([x[3] for x in e], dtype=float)
        return ei, ej, mu, var

    @property
    def n_nodes(self):
        return self.graph.n_nodes


def sample_link_weights(rng, mu, var, model, steps):
    """Link weights for ``steps`` time steps, shape ``(steps, len(mu))``.

    ``gaussian`` draws ``mu + sqrt(var) N(0,1)``.  ``shifted-bernoulli`` keeps
    the link at ``mu / p`` with probability ``p = mu^2 / (mu^2 + var)`` and
    drops it otherwise, which has the same mean and variance.
    """
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    if model == "gaussian":
        return mu + np.sqrt(var) * rng.standard_normal((steps, mu.size))
    if model == "shifted-bernoulli":
        p = mu * mu / (mu * mu + var)
        return np.where(rng.random((steps, mu.size)) < p, mu / p, 0.0)
    raise InputError(f"unknown noise model {model!r}")


def _trial_inputs(cfg, trial, ei, mu, var):
    rng = np.random.default_rng([cfg.seed, trial])
    N, n = cfg.n_nodes, cfg.system.n
    center = np.zeros(n) if cfg.init_center is None else np.asarray(cfg.init_center, dtype=float)
    x0 = center + cfg.init_spread * rng.standard_normal((N, n))
    if cfg.shared_noise:
        w1 = sample_link_weights(rng, mu[:1], var[:1], cfg.noise, cfg.horizon)
        w = np.repeat(w1, ei.size, axis=1)
    else:
        w = sample_link_weights(rng, mu, var, cfg.noise, cfg.horizon)
    v = None
    if cfg.additive_noise > 0:
        v = math.sqrt(cfg.additive_noise) * rng.standard_normal((cfg.horizon, N, n))
    return x0, w, v


def sync_error(state, N=None, n=None):
    """Centred sum of squares ``sum_i |x_i - mean|^2`` over the agents.

    ``state`` is ``(N, n)`` or stacked of length ``N * n``.  Equals
    ``1/(2N) sum_ij |x_i - x_j|^2``.
    """
    x = np.asarray(state, dtype=float)
    if x.ndim == 1:
        if N is None:
            raise InputError("a stacked state needs N")
        x = x.reshape(N, -1 if n is None else n)
    d = x - x.mean(axis=0)
    return float(np.sum(d * d))


def step_network(state, cfg, rng=None, weights=None, vnoise=None):
    """One synchronous update of every agent.

    Link weights are drawn from ``rng`` under ``cfg.noise`` unless given;
    additive noise is drawn iff ``cfg.additive_noise > 0`` and ``vnoise`` is
    not supplied.  Works on ``(N, n)`` or stacked states and returns the
    same layout.
    """
    sys = cfg.system
    ei, ej, mu, var = cfg.edge_arrays()
    x0 = np.asarray(state, dtype=float)
    x = x0.reshape(cfg.n_nodes, sys.n)
    if weights is None:
        if rng is None:
            raise InputError("step_network needs an rng or explicit weights")
        if cfg.shared_noise:
            weights = np.repeat(sample_link_weights(rng, mu[:1], var[:1], cfg.noise, 1)[0], ei.size)
        else:
            weights = sample_link_weights(rng, mu, var, cfg.noise, 1)[0]
    if vnoise is None and cfg.additive_noise > 0:
        if rng is None:
            raise InputError("additive noise needs an rng")
        vnoise = math.sqrt(cfg.additive_noise) * rng.standard_normal(x.shape)
    y = x @ sys.C.T
    d = np.asarray(weights, dtype=float)[:, None] * (y[ei] - y[ej])
    u = np.zeros_like(y)
    np.add.at(u, ei, d)
    np.add.at(u, ej, -d)
    xn = x @ sys.A.T - cfg.nonlinearity(y) @ sys.B.T - u @ cfg.G.T
    if vnoise is not None:
        xn = xn + np.reshape(vnoise, xn.shape)
    return xn.reshape(x0.shape)


# ---------------------------------------------------------------------------
# running and classifying
# ---------------------------------------------------------------------------


@dataclass
class SyncTrace:
    err: np.ndarray  # mean synchronization error per step over surviving trials
    K_hat: float
    beta_hat: float
    r2: float
    verdict: str  # "sync", "desync" or "inconclusive"
    diverged_count: int
    trials: int
    per_trial: np.ndarray = field(default=None, repr=False)

    def to_csv(self):
        lines = ["t,err"]
        lines += [f"{t},{e:.12g}" for t, e in enumerate(self.err)]
        return "\n".join(lines) + "\n"


def fit_decay(t, err):
    """Least-squares fit ``log err = log K + t log beta``; returns ``(K, beta, r2)``."""
    t = np.asarray(t, dtype=float)
    le = np.log(np.asarray(err, dtype=float))
    if t.size < 2:
        return float(np.exp(le[0])) if t.size else 0.0, 0.0, 0.0
    A = np.column_stack([np.ones_like(t), t])
    coef, *_ = np.linalg.lstsq(A, le, rcond=None)
    fit = A @ coef
    ss_tot = float(np.sum((le - le.mean()) ** 2))
    ss_res = float(np.sum((le - fit) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(coef[0])), float(np.exp(coef[1])), r2


def classify(err, cfg, diverged, trials):
    """Turn a mean error trace into ``(K_hat, beta_hat, r2, verdict)``."""
    if diverged > 0.5 * trials:
        return math.nan, math.inf, math.nan, "desync"
    err = np.asarray(err, dtype=float)
    H = err.size - 1
    if np.all(err == 0.0):
        return 0.0, 0.0, 1.0, "sync"
    start = int(math.floor(cfg.transient_frac * H))
    t = np.arange(start, H + 1)
    e = err[start:]
    edge = max(1, int(0.05 * e.size))
    head, tail = float(np.mean(e[:edge])), float(np.mean(e[-edge:]))
    if cfg.additive_noise > 0:
        # fit the part of the transient that sits clearly above the noise floor
        floor = float(np.mean(err[-max(1, H // 10):]))
        keep = err > 2.0 * floor
        keep[:start] = keep[:start] & (np.count_nonzero(keep[start:]) < 5)
        t_fit = np.nonzero(keep)[0]
        if t_fit.size < 5:
            return float(err[0]), 0.0, 1.0, "sync" if tail < cfg.growth_factor * head else "desync"
        K, beta, r2 = fit_decay(t_fit, err[t_fit] - floor)
        growth = tail > cfg.growth_factor * head and tail > cfg.growth_factor * floor
    else:
        good = e > 0.0
        K, beta, r2 = fit_decay(t[good], e[good])
        growth = tail >= cfg.growth_factor * head
    if growth:
        return K, beta, r2, "desync"
    if beta < 1.0 - cfg.beta_margin and r2 >= cfg.r2_min:
        return K, beta, r2, "sync"
    return K, beta, r2, "inconclusive"


def simulate(cfg, threads=1):
    """Run ``cfg.trials`` independent trials and classify the mean error trace.

    Trial ``i`` draws everything from ``numpy.random.default_rng([seed, i])``,
    so results do not depend on ``threads``.
    """
    ei, ej, mu, var = cfg.edge_arrays()
    sys = cfg.system
    trials = cfg.trials
    chunks = _chunks(trials, max(1, int(threads or 1)))

    def run(rng_range):
        lo, hi = rng_range
        ins = [_trial_inputs(cfg, tr, ei, mu, var) for tr in range(lo, hi)]
        x0 = np.stack([a[0] for a in ins])
        w = np.stack([a[1] for a in ins])
        if cfg.additive_noise > 0:
            v = np.stack([a[2] for a in ins])
        else:
            v = np.zeros((0, 0, 0, 0))
        return _kernels.simulate_trials(
            np.ascontiguousarray(x0),
            np.ascontiguousarray(sys.A),
            np.ascontiguousarray(sys.B),
            np.ascontiguousarray(sys.C),
            np.ascontiguousarray(cfg.G),
            ei,
            ej,
            np.ascontiguousarray(w),
            v,
            cfg.nonlinearity.code,
            cfg.nonlinearity.param_array(),
            BLOWUP,
        )

    if len(chunks) > 1:
        with ThreadPoolExecutor(len(chunks)) as ex:
            outs = list(ex.map(run, chunks))
    else:
        outs = [run(chunks[0])]
    per_trial = np.concatenate([o[0] for o in outs])
    div_at = np.concatenate([o[1] for o in outs])
    diverged = int(np.count_nonzero(div_at >= 0))
    with np.errstate(all="ignore"):
        alive = np.isfinite(per_trial)
        cnt = alive.sum(axis=0)
        mean_err = np.where(cnt > 0, np.nansum(per_trial, axis=0) / np.maximum(cnt, 1), np.nan)
    K, beta, r2, verdict = classify(np.nan_to_num(mean_err, nan=np.inf), cfg, diverged, trials)
    return SyncTrace(mean_err, K, beta, r2, verdict, diverged, trials, per_trial)


def _chunks(total, parts):
    parts = min(parts, total)
    bounds = np.linspace(0, total, parts + 1).astype(int)
    return [(int(bounds[i]), int(bounds[i + 1])) for i in range(parts)]
