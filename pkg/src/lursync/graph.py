"""Uncertain graph Laplacians, their spectra, and torus networks.

Laplacians use the positive semidefinite convention: diagonal entries carry
the total incident weight and off-diagonal entries are ``-mu_ij``.  Nodes are
0-based.
"""
from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from .linalg import sym_eig, kron

CONNECTIVITY_TOL = 1e-8
TORUS_MATRIX_CAP = 4096
TORUS_EIGENVALUE_CAP = 1_000_000


class GraphError(ValueError):
    pass


class DisconnectedGraphError(GraphError):
    pass


def _edge_key(i, j):
    i, j = int(i), int(j)
    return (i, j) if i < j else (j, i)


@dataclass
class UncertainGraph:
    """Nodes ``0..n_nodes-1`` with deterministic and uncertain weighted edges.

    ``det_edges`` holds ``(i, j, mu)``; ``unc_edges`` holds ``(i, j, mu, var)``
    where ``var`` is the variance of the zero-mean weight perturbation.
    """

    n_nodes: int
    det_edges: list = field(default_factory=list)
    unc_edges: list = field(default_factory=list)

    def __post_init__(self):
        self.n_nodes = int(self.n_nodes)
        if self.n_nodes < 1:
            raise GraphError("a graph needs at least one node")
        det, unc, seen = [], [], set()
        for e in self.det_edges:
            i, j, mu = e
            det.append(self._check(i, j, mu, 0.0, seen))
        for e in self.unc_edges:
            i, j, mu, var = e
            unc.append(self._check(i, j, mu, var, seen))
        self.det_edges = [(i, j, mu) for i, j, mu, _ in det]
        self.unc_edges = unc

    def _check(self, i, j, mu, var, seen):
        if i == j:
            raise GraphError(f"self-loop at node {i}")
        i, j = _edge_key(i, j)
        if i < 0 or j >= self.n_nodes:
            raise GraphError(f"edge ({i}, {j}) outside 0..{self.n_nodes - 1}")
        if (i, j) in seen:
            raise GraphError(f"duplicate edge ({i}, {j})")
        seen.add((i, j))
        mu, var = float(mu), float(var)
        if not mu > 0:
            raise GraphError(f"edge ({i}, {j}) needs a positive mean weight, got {mu}")
        if not var >= 0:
            raise GraphError(f"edge ({i}, {j}) needs a nonnegative variance, got {var}")
        return (i, j, mu, var)

    @property
    def edges(self):
        """All edges as ``(i, j, mu, var)``, deterministic ones first."""
        return [(i, j, mu, 0.0) for i, j, mu in self.det_edges] + list(self.unc_edges)

    def with_variances(self, var):
        """Copy with every uncertain edge given variance ``var`` (scalar or callable)."""
        f = var if callable(var) else (lambda i, j, mu, v: var)
        unc = [(i, j, mu, float(f(i, j, mu, v))) for i, j, mu, v in self.unc_edges]
        return UncertainGraph(self.n_nodes, list(self.det_edges), unc)

    def with_cod(self, gamma):
        """Copy with every uncertain edge set to coefficient of dispersion ``gamma``."""
        return self.with_variances(lambda i, j, mu, v: gamma * mu)

    def scaled(self, factor):
        """Copy with every mean weight multiplied by ``factor``; CoD per edge kept."""
        det = [(i, j, mu * factor) for i, j, mu in self.det_edges]
        unc = [(i, j, mu * factor, v * factor) for i, j, mu, v in self.unc_edges]
        return UncertainGraph(self.n_nodes, det, unc)


def _laplacian_of(n, edges):
    L = np.zeros((n, n))
    for e in edges:
        i, j, mu = e[0], e[1], e[2]
        L[i, j] -= mu
        L[j, i] -= mu
        L[i, i] += mu
        L[j, j] += mu
    return L


def laplacian(g):
    """Nominal Laplacian; uncertain edges contribute their mean weight."""
    return _laplacian_of(g.n_nodes, g.edges)


def split_laplacians(g):
    """``(L_d, L_u)`` built from the deterministic and the uncertain edges."""
    return _laplacian_of(g.n_nodes, g.det_edges), _laplacian_of(g.n_nodes, g.unc_edges)


def edge_vector(i, j, n_nodes):
    """Incidence vector with +1 at node ``i`` and -1 at node ``j``."""
    if i == j:
        raise GraphError(f"invalid edge ({i}, {j}): endpoints coincide")
    if not (0 <= i < n_nodes and 0 <= j < n_nodes):
        raise GraphError(f"invalid edge ({i}, {j}) for {n_nodes} nodes")
    ell = np.zeros(n_nodes)
    ell[i] = 1.0
    ell[j] = -1.0
    return ell


def sync_complement(n_nodes):
    """Orthonormal basis of the complement of the all-ones direction.

    Built from the Householder reflector that maps ``e_1`` onto
    ``1/sqrt(N)``; its remaining ``N-1`` columns are returned.
    """
    N = int(n_nodes)
    if N < 2:
        raise GraphError("need at least two nodes")
    v = -np.full(N, 1.0 / math.sqrt(N))
    v[0] += 1.0
    H = np.eye(N) - 2.0 * np.outer(v, v) / (v @ v)
    return H[:, 1:].copy()


@dataclass(frozen=True)
class GraphSpectra:
    lambda2: float
    lambdaN: float
    lambda2_d: float
    lambdaN_u: float
    tau: float
    gamma_bar: float
    eigenvalues: tuple = ()

    @property
    def nonzero_eigenvalues(self):
        return tuple(self.eigenvalues[1:])


def tau_factor(lambdaN_u, lambda2_d):
    """Placement factor of the uncertain links.

    With no uncertain edges the factor is irrelevant (it always multiplies a
    zero CoD); 1.0 is returned so the value stays inside ``(0, 1]``.
    """
    if lambdaN_u <= 0.0:
        return 1.0
    return lambdaN_u / (lambdaN_u + max(lambda2_d, 0.0))


def spectra(g):
    N = g.n_nodes
    if N < 2:
        raise DisconnectedGraphError("cannot synchronize a network with fewer than two nodes")
    ev = sym_eig(laplacian(g)).eigenvalues
    if ev[1] <= CONNECTIVITY_TOL:
        raise DisconnectedGraphError(
            f"cannot synchronize a disconnected network (lambda_2 = {ev[1]:.3e})"
        )
    Ld, Lu = split_laplacians(g)
    ev_d = sym_eig(Ld).eigenvalues
    ev_u = sym_eig(Lu).eigenvalues
    lam2_d = max(float(ev_d[1]), 0.0)
    lamN_u = max(float(ev_u[-1]), 0.0)
    gammas = [v / mu for _, _, mu, v in g.unc_edges]
    return GraphSpectra(
        lambda2=float(ev[1]),
        lambdaN=float(ev[-1]),
        lambda2_d=lam2_d,
        lambdaN_u=lamN_u,
        tau=tau_factor(lamN_u, lam2_d),
        gamma_bar=max(gammas, default=0.0),
        eigenvalues=tuple(float(x) for x in ev),
    )


# ---------------------------------------------------------------------------
# torus networks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusSpec:
    """``d``-dimensional torus of ``N`` agents per ring.

    Each agent links to the agents at ring offsets ``+-1 .. +-k`` in every
    dimension.  ``k = N // 2`` is the complete ring (for even ``N`` the
    antipodal link is counted once).
    """

    N: int
    k: int
    d: int = 1

    def __post_init__(self):
        if self.N < 2:
            raise GraphError("torus needs N >= 2")
        if self.d < 1:
            raise GraphError("torus needs d >= 1")
        if not 1 <= self.k <= self.N // 2:
            raise GraphError(f"torus needs 1 <= k <= {self.N // 2} for N = {self.N}, got k = {self.k}")

    @property
    def n_nodes(self):
        return self.N**self.d


def ring_offsets(N, k):
    return sorted({m % N for m in range(1, k + 1)} | {(-m) % N for m in range(1, k + 1)})


def ring_laplacian(N, k):
    L = np.zeros((N, N))
    for s in ring_offsets(N, k):
        for i in range(N):
            L[i, (i + s) % N] -= 1.0
    L += np.diag(-L.sum(axis=1))
    return L


def ring_eigenvalues(N, k):
    """Eigenvalues of the 1-D ring Laplacian, indexed by Fourier mode ``j``."""
    j = np.arange(N)[:, None]
    s = np.asarray(ring_offsets(N, k), dtype=float)[None, :]
    lam = np.sum(1.0 - np.cos(2.0 * np.pi * j * s / N), axis=1)
    lam[0] = 0.0
    return lam


def torus_eigenvalues(spec):
    """All ``N**d`` eigenvalues (as d-fold sums of ring eigenvalues), ascending."""
    if spec.n_nodes > TORUS_EIGENVALUE_CAP:
        raise GraphError(
            f"{spec.n_nodes} eigenvalues requested; use torus_extreme_eigs or "
            f"torus_distinct_eigenvalues for large tori"
        )
    lam1 = ring_eigenvalues(spec.N, spec.k)
    tot = np.zeros(1)
    for _ in range(spec.d):
        tot = (tot[:, None] + lam1[None, :]).ravel()
    return np.sort(tot)


def torus_distinct_eigenvalues(spec, decimals=10):
    """Distinct nonzero torus eigenvalues (rounded to ``decimals`` for dedup)."""
    lam1 = np.unique(np.round(ring_eigenvalues(spec.N, spec.k), decimals))
    vals = {0.0}
    for _ in range(spec.d):
        vals = {round(a + b, decimals) for a in vals for b in lam1}
        if len(vals) > TORUS_EIGENVALUE_CAP:
            raise GraphError("too many distinct torus eigenvalues; use torus_extreme_eigs")
    return np.array(sorted(v for v in vals if v > CONNECTIVITY_TOL))


def torus_laplacian(spec):
    """Materialised Kronecker-sum Laplacian and its analytic eigenvalues."""
    n = spec.n_nodes
    if n > TORUS_MATRIX_CAP:
        raise GraphError(
            f"torus with {n} nodes exceeds the {TORUS_MATRIX_CAP}-node materialisation cap; "
            "use torus_extreme_eigs / torus_eigenvalues (eigenvalue-only mode)"
        )
    L1 = ring_laplacian(spec.N, spec.k)
    L = np.zeros((n, n))
    for i in range(spec.d):
        left = np.eye(spec.N ** (spec.d - 1 - i))
        right = np.eye(spec.N**i)
        L += kron(kron(left, L1), right)
    return L, torus_eigenvalues(spec)


def torus_extreme_eigs(spec):
    """``(lambda_2, lambda_max)`` of the torus without building any matrix."""
    lam1 = ring_eigenvalues(spec.N, spec.k)
    nz = lam1[1:]
    return float(np.min(nz)), float(spec.d * np.max(nz))


def torus_graph(spec, mu=1.0, var=0.0):
    """Torus as an :class:`UncertainGraph`, every link uncertain with weight ``mu``."""
    idx = np.arange(spec.n_nodes).reshape((spec.N,) * spec.d)
    edges = set()
    for axis in range(spec.d):
        for s in ring_offsets(spec.N, spec.k):
            nb = np.roll(idx, -s, axis=axis)
            for a, b in zip(idx.ravel(), nb.ravel()):
                edges.add(_edge_key(a, b))
    unc = [(i, j, mu, var) for i, j in sorted(edges)]
    return UncertainGraph(spec.n_nodes, [], unc)


def ring_graph(N, mu=1.0, var=0.0, uncertain=True):
    edges = [(i, (i + 1) % N) for i in range(N)] if N > 2 else [(0, 1)]
    edges = sorted({_edge_key(i, j) for i, j in edges})
    if uncertain:
        return UncertainGraph(N, [], [(i, j, mu, var) for i, j in edges])
    return UncertainGraph(N, [(i, j, mu) for i, j in edges], [])


def complete_graph(N, mu=1.0, var=0.0, uncertain=True):
    edges = list(itertools.combinations(range(N), 2))
    if uncertain:
        return UncertainGraph(N, [], [(i, j, mu, var) for i, j in edges])
    return UncertainGraph(N, [(i, j, mu) for i, j in edges], [])
