"""Shared fixtures and independent numerical oracles.

The oracles here deliberately avoid the code paths they check: gradients and
Hessians are verified against central finite differences, and the LP solver
against exhaustive vertex enumeration of the feasible polytope.
"""

from itertools import combinations, product

import numpy as np
import pytest

from influencekit import trainer as tr
from influencekit.datamodel import gen_class_blobs, gen_separable_noisy
from influencekit.presets import NOISY_GEOMETRY


# ---------------------------------------------------------------------------
# Finite-difference oracles
# ---------------------------------------------------------------------------

def fd_gradient(f, theta, h=1e-5):
    """Central finite-difference gradient of a scalar function."""
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        g[i] = (f(tp) - f(tm)) / (2.0 * h)
    return g


def fd_hessian(f, theta, h=1e-4):
    """Central finite-difference Hessian via gradient differences."""
    p = len(theta)
    hess = np.zeros((p, p))
    for i in range(p):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        hess[:, i] = (fd_gradient(f, tp, h) - fd_gradient(f, tm, h)) / (2.0 * h)
    return 0.5 * (hess + hess.T)


# ---------------------------------------------------------------------------
# Brute-force LP oracle: enumerate every vertex of {box} ∩ {Aw >= b}
# ---------------------------------------------------------------------------

def brute_force_lp(p, target_idx, alpha, bounds, tol=1e-9):
    """Optimal objective of the reweighting LP by vertex enumeration.

    Applies the same pinning rule as the solver (zero objective coefficient
    => weight fixed at 1). Returns None when no vertex is feasible.
    """
    p = np.asarray(p, dtype=np.float64)
    n, k = p.shape
    lo, hi = bounds
    c = p[:, list(target_idx)].sum(axis=1)
    rhs = np.asarray(alpha) * p.sum(axis=0)

    pinned = c == 0.0
    base = np.ones(n)
    free_idx = np.flatnonzero(~pinned)
    nf = len(free_idx)
    if nf == 0:
        lhs = p.sum(axis=0)
        return 0.0 if np.all(lhs >= rhs - tol) else None
    a_free = p[free_idx].T                       # (K, nf)
    rhs_free = rhs - p[pinned].sum(axis=0)

    best = None
    for m in range(0, min(k, nf) + 1):
        for tight in combinations(range(k), m):
            for free_vars in combinations(range(nf), m):
                rest = [i for i in range(nf) if i not in free_vars]
                assignments = (np.array(list(product([lo, hi],
                                                     repeat=len(rest))))
                               if rest else np.zeros((1, 0)))
                # candidate vertices for every bound assignment at once
                ws = np.empty((len(assignments), nf))
                ws[:, rest] = assignments
                if m:
                    at = a_free[np.ix_(list(tight), list(free_vars))]
                    b_t = np.broadcast_to(rhs_free[list(tight)],
                                          (len(assignments), m)).copy()
                    if rest:
                        b_t -= assignments @ a_free[np.ix_(list(tight), rest)].T
                    try:
                        ws[:, list(free_vars)] = np.linalg.solve(at, b_t.T).T
                    except np.linalg.LinAlgError:
                        continue
                ok = ((ws >= lo - tol).all(axis=1)
                      & (ws <= hi + tol).all(axis=1)
                      & (ws @ a_free.T >= rhs_free - tol).all(axis=1))
                if ok.any():
                    val = float((ws[ok] @ c[free_idx]).max())
                    if best is None or val > best:
                        best = val
    return best


# ---------------------------------------------------------------------------
# Small shared fixtures
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def tiny_blobs():
    """3-class, 2-D blobs small enough for exhaustive checks."""
    train = gen_class_blobs(12, [[0, 0], [3, 0], [0, 3]], 0.8, seed=11)
    val = gen_class_blobs(30, [[0, 0], [3, 0], [0, 3]], 0.8, seed=12,
                          split_tag="validation")
    return train, val


@pytest.fixture(scope="session")
def tiny_noisy():
    train = gen_separable_noisy(20, 20, 4, 2, seed=5, geometry=NOISY_GEOMETRY)
    val = gen_separable_noisy(150, 150, 0, 0, seed=1005,
                              geometry=NOISY_GEOMETRY, split_tag="validation")
    return train, val


@pytest.fixture(scope="session")
def logistic_config():
    return tr.ModelConfig(architecture="logistic", learning_rate=0.5,
                          weight_decay=1e-3, batch_size=16, epochs=40, seed=3)


@pytest.fixture(scope="session")
def mlp_config():
    return tr.ModelConfig(architecture="mlp", hidden_width=6, learning_rate=0.3,
                          weight_decay=1e-3, batch_size=16, epochs=40, seed=3)


def random_params(config, input_dim, num_classes, rng, scale=0.4):
    """Seeded non-degenerate parameters for derivative checks."""
    base = tr.init_params(config, input_dim, num_classes)
    return base.with_theta(base.theta + scale * rng.standard_normal(len(base.theta)))
