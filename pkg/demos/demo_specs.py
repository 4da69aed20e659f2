"""Shared model builders for the demo scripts."""

import numpy as np

from blockpost import Bernoulli, ConnectivityMatrix, ModelSpec, ModelVariant


def affiliation_spec(Q=2, lam=0.8, nu=0.2, a=0.1, alpha=None):
    """Community graph: one within-group and one between-group value."""
    fam = Bernoulli(a)
    vals = np.full((Q, Q), nu)
    np.fill_diagonal(vals, lam)
    pi = ConnectivityMatrix(vals, fam)
    if alpha is None:
        alpha = [1.0 / Q] * Q
    return ModelSpec(ModelVariant.sbm(), alpha, alpha, pi)


def asymmetric_graph_spec(a=0.1, values=((0.2, 0.8), (0.8, 0.8))):
    """Graph spec with no block symmetry (trivial group)."""
    fam = Bernoulli(a)
    pi = ConnectivityMatrix(np.asarray(values, dtype=float), fam)
    return ModelSpec(ModelVariant.sbm(), [0.5, 0.5], [0.5, 0.5], pi)
