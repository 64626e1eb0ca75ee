import numpy as np
import pytest

from cnext.data import build_locals, generate_ridge_synthetic, partition_homogeneous
from cnext.graph import build_ring, metropolis_hastings_weights
from cnext.objective import LocalData, ridge_objective, logistic_objective, ridge_closed_form_optimum


def make_ridge(n_agents=5, p=4, N=50, lam=0.5, seed=7):
    ds = generate_ridge_synthetic(N, p, seed)
    part = partition_homogeneous(ds, n_agents, seed)
    return ridge_objective(build_locals(ds, part), lam)


def make_logistic(n_agents=4, p=5, m=12, lam=0.1, seed=3):
    rng = np.random.default_rng(seed)
    locals_ = []
    for _ in range(n_agents):
        A = rng.standard_normal((m, p))
        w = rng.standard_normal(p)
        b = np.where(A @ w + 0.3 * rng.standard_normal(m) >= 0, 1.0, -1.0)
        locals_.append(LocalData(A=A, b=b))
    return logistic_objective(locals_, lam)


@pytest.fixture(scope="session")
def small_ridge():
    """ring-5, p=4 ridge instance used by the exact-invariant suites."""
    obj = make_ridge(n_agents=5, p=4, N=50, lam=0.5, seed=7)
    net = metropolis_hastings_weights(build_ring(5))
    return obj, net


@pytest.fixture(scope="session")
def ridge10():
    """The synthetic benchmark instance: p=20, n=10, N=500, lambda=0.5, seed 42, MH ring."""
    ds = generate_ridge_synthetic(500, 20, 42)
    part = partition_homogeneous(ds, 10, 42)
    obj = ridge_objective(build_locals(ds, part), 0.5)
    net = metropolis_hastings_weights(build_ring(10))
    x_star = ridge_closed_form_optimum(obj)
    return obj, net, x_star


@pytest.fixture(scope="session")
def small_logistic():
    return make_logistic()
