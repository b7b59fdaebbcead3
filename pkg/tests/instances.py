"""Seeded random problem instances shared by the test modules."""
import numpy as np

from lursync.graph import UncertainGraph
from lursync.prl import LureSystem


def random_connected_graph(rng, n_nodes, p_extra=0.5, p_uncertain=0.6, cod=(0.0, 1.0)):
    """Random spanning tree plus extra edges; some edges uncertain with random CoD."""
    order = rng.permutation(n_nodes)
    pairs = {tuple(sorted((int(order[i]), int(order[rng.integers(0, i)])))) for i in range(1, n_nodes)}
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.random() < p_extra:
                pairs.add((i, j))
    det, unc = [], []
    for i, j in sorted(pairs):
        mu = float(rng.uniform(0.5, 1.5))
        if rng.random() < p_uncertain:
            unc.append((i, j, mu, float(rng.uniform(*cod)) * mu))
        else:
            det.append((i, j, mu))
    if not unc:
        i, j, mu = det.pop()
        unc.append((i, j, mu, float(rng.uniform(*cod)) * mu))
    return UncertainGraph(n_nodes, det, unc)


def random_lure_system(rng, lambda_max=1.0, n=2, radius=(0.5, 1.1), sector=(2.0, 8.0), gain=(0.05, 0.3)):
    """Single-input Lur'e system with ``C`` close to ``B^T``; returns ``(sys, G)``.

    ``G`` is a multiple of ``C^T`` scaled by ``1 / lambda_max`` so that roughly
    half of the draws pass the synchronization checks.
    """
    A = rng.standard_normal((n, n))
    A *= rng.uniform(*radius) / max(abs(np.linalg.eigvals(A)))
    B = rng.standard_normal((n, 1))
    C = B.T + 0.3 * rng.standard_normal((1, n))
    D = np.array([[rng.uniform(*sector)]])
    G = rng.uniform(*gain) * C.T / float((C @ C.T)[0, 0]) / lambda_max
    return LureSystem(A, B, C, D), G
