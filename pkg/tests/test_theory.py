import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cnext.compress import make_scheme
from cnext.graph import build_ring, metropolis_hastings_weights
from cnext.theory import (ContractionMatrix, Theta, TheoryConstants, build_A, check_sufficient_conditions,
                          default_epsilon, spectral_radius)


def constants_for(mu, L, rho, beta, C, r, delta, theta, tau_x=None, tau_y=None):
    """Assemble TheoryConstants without a Network (test-local shim)."""

    class _Net:
        def __init__(self):
            self.rho = rho
            self.beta = beta

        def rho_tilde(self, gamma):
            return (1.0 - gamma) + gamma * rho

    class _Scheme:
        pass

    s = _Scheme()
    s.C, s.r, s.delta = C, r, delta
    return TheoryConstants.build(mu, L, _Net(), s, theta, tau_x=tau_x, tau_y=tau_y)


def hand_coded_A(mu, L, rho, beta, C, a_x, a_y, c1, c2, eta, gamma, n):
    """Second, independent transcription of the 5x5 coupling matrix."""
    rt = (1 - gamma) + gamma * rho
    rb = 1 - rt
    k1, k2, k3, k4 = c1 * beta ** 2, c1 * C * beta ** 2, c2 * beta ** 2, c2 * C * beta ** 2
    return np.array([
        [1 - 3 * eta * mu / (2 * L) + eta ** 3 * mu ** 3 / (2 * L ** 3),
         eta ** 2 * L ** 2 / (mu ** 2 * n) + 2 * eta * L ** 3 / (mu ** 3 * n),
         eta ** 2 / (mu ** 2 * n) + 2 * eta * L / (mu ** 3 * n), 0, 0],
        [8 * L ** 2 * eta ** 2 * n / (mu ** 2 * rb),
         (1 + rt ** 2) / 2 + 8 * L ** 2 * eta ** 2 / (mu ** 2 * rb),
         4 * eta ** 2 / (mu ** 2 * rb),
         2 * gamma ** 2 * beta ** 2 * C ** 2 / rb, 0],
        [24 * L ** 4 * eta ** 2 * n / (mu ** 2 * rb),
         6 * L ** 2 * gamma ** 2 * beta ** 2 / rb + 24 * L ** 4 * eta ** 2 / (mu ** 2 * rb),
         (1 + rt ** 2) / 2 + 12 * L ** 2 * eta ** 2 / (mu ** 2 * rb),
         6 * L ** 2 * gamma ** 2 * beta ** 2 * C / rb,
         2 * gamma ** 2 * beta ** 2 * C / rb],
        [4 * L ** 2 * eta ** 2 * n * c1 / mu ** 2,
         gamma ** 2 * k1 + 4 * L ** 2 * eta ** 2 * c1 / mu ** 2,
         2 * eta ** 2 * c1 / mu ** 2,
         a_x + gamma ** 2 * k2, 0],
        [12 * L ** 4 * eta ** 2 * n * c2 / mu ** 2,
         3 * L ** 2 * gamma ** 2 * k3 + 12 * L ** 4 * eta ** 2 * c2 / mu ** 2,
         gamma ** 2 * k3 + 6 * L ** 2 * eta ** 2 * c2 / mu ** 2,
         3 * L ** 2 * gamma ** 2 * k4,
         a_y + gamma ** 2 * k3],
    ])


def test_opt_entry_at_step_size_boundary():
    # at eta = 2L/(3mu) the linear terms cancel and the entry equals eta^3 mu^3/(2L^3);
    # the boundary is reachable only when 2L/(3mu) <= mu/L, i.e. kappa^2 <= 3/2
    mu, L = 1.0, 1.2
    eta = 2 * L / (3 * mu)
    assert eta <= mu / L
    theta = Theta(eta=eta, gamma=0.5, alpha_x=1.0, alpha_y=1.0)
    tc = constants_for(mu, L, 0.6, 1.2, 0.75, 1.0, 0.25, theta)
    A = build_A(tc, theta, n=5).A
    assert A[0, 0] == pytest.approx(eta ** 3 * mu ** 3 / (2 * L ** 3), rel=1e-12)
    assert A[0, 0] >= 0


def test_limit_no_progress_without_steps():
    theta = Theta(eta=1e-12, gamma=1e-9, alpha_x=1.0, alpha_y=1.0)
    tc = constants_for(2.0, 3.0, 0.8, 1.3, 0.5, 1.0, 0.5, theta)
    A = build_A(tc, theta, n=4).A
    assert A[1, 1] == pytest.approx(1.0, abs=1e-8)
    assert A[0, 0] == pytest.approx(1.0, abs=1e-8)


def test_all_entries_match_hand_coded_transcription():
    rng = np.random.default_rng(77)
    for _ in range(100):
        mu = rng.uniform(0.5, 5.0)
        L = mu * rng.uniform(1.0, 10.0)
        rho = rng.uniform(0.0, 0.95)
        beta = rng.uniform(0.0, 2.0)
        C = rng.uniform(0.0, 3.0)
        r = rng.uniform(1.0, 4.0)
        delta = rng.uniform(0.05, 1.0)
        alpha = rng.uniform(0.05, 1.0) / r
        n = int(rng.integers(2, 30))
        eta = rng.uniform(0.0, 1.0) * min(2 * L / (3 * mu), mu / L)
        gamma = rng.uniform(0.01, 1.0)
        theta = Theta(eta=eta, gamma=gamma, alpha_x=alpha, alpha_y=alpha)
        tc = constants_for(mu, L, rho, beta, C, r, delta, theta)
        A = build_A(tc, theta, n).A
        oracle = hand_coded_A(mu, L, rho, beta, C, tc.a_x, tc.a_y, tc.c1, tc.c2, eta, gamma, n)
        assert np.allclose(A, oracle, rtol=1e-12, atol=0)


def test_nonnegativity_under_step_cap():
    rng = np.random.default_rng(88)
    for _ in range(200):
        mu = rng.uniform(0.5, 4.0)
        L = mu * rng.uniform(1.0, 8.0)
        theta = Theta(eta=rng.uniform(0.0, 1.0) * min(2 * L / (3 * mu), mu / L),
                      gamma=rng.uniform(0.01, 1.0), alpha_x=0.5, alpha_y=0.5)
        tc = constants_for(mu, L, rng.uniform(0, 0.9), rng.uniform(0, 2), rng.uniform(0, 2),
                           1.0, rng.uniform(0.1, 1.0), theta)
        A = build_A(tc, theta, n=6).A
        assert A.min() >= 0.0


def test_spectral_radius_trivial_cases():
    theta = Theta(eta=0.01, gamma=0.5, alpha_x=1.0, alpha_y=1.0)
    assert spectral_radius(np.zeros((5, 5))) == 0.0
    assert spectral_radius(np.diag([0.5, 0.1, 0.2, 0.3, 0.4])) == pytest.approx(0.5)
    M = ContractionMatrix(A=np.diag([0.5] * 5), theta=theta)
    assert spectral_radius(M) == pytest.approx(0.5)


def test_spectral_radius_power_iteration_oracle():
    rng = np.random.default_rng(5)
    for _ in range(20):
        A = rng.uniform(0.0, 1.0, size=(5, 5))
        v = np.ones(5)
        lam = 0.0
        for _ in range(2000):
            w = A @ v
            lam = np.linalg.norm(w)
            v = w / lam
        assert spectral_radius(A) == pytest.approx(lam, abs=1e-8)


def test_invalid_arguments_name_the_inequality():
    theta_bad = Theta(eta=10.0, gamma=0.5, alpha_x=1.0, alpha_y=1.0)
    tc = constants_for(1.0, 5.0, 0.5, 1.0, 0.5, 1.0, 0.5,
                       Theta(eta=0.01, gamma=0.5, alpha_x=1.0, alpha_y=1.0))
    with pytest.raises(ValueError, match="2L"):
        build_A(tc, theta_bad, n=4)
    with pytest.raises(ValueError, match="alpha"):
        constants_for(1.0, 5.0, 0.5, 1.0, 0.5, 2.0, 1.0,
                      Theta(eta=0.01, gamma=0.5, alpha_x=1.0, alpha_y=1.0))


def test_feasible_point_report(ridge10):
    obj, net, _ = ridge10
    scheme = make_scheme("identity", obj.p)
    theta = Theta(eta=1e-10, gamma=5e-3, alpha_x=1.0, alpha_y=1.0)
    tc = TheoryConstants.build(obj.mu, obj.L, net, scheme, theta)
    eps = default_epsilon(tc, theta, net.n)
    rep = check_sufficient_conditions(tc, theta, eps, net.n)
    assert rep["pass"]
    assert rep["rho_A"] < 1
    assert rep["direct_contraction"]["ok"]
    # report is JSON-serializable and round-trips
    blob = json.dumps(rep)
    assert json.loads(blob) == json.loads(json.dumps(json.loads(blob)))


def test_eta_exceeding_gamma_over_kappa_flagged(ridge10):
    obj, net, _ = ridge10
    scheme = make_scheme("identity", obj.p)
    gamma = 5e-3
    eta = 2.0 * gamma / obj.kappa  # violates the fourth bound but stays under the cap
    theta = Theta(eta=eta, gamma=gamma, alpha_x=1.0, alpha_y=1.0)
    tc = TheoryConstants.build(obj.mu, obj.L, net, scheme, theta)
    rep = check_sufficient_conditions(tc, theta, default_epsilon(tc, theta, net.n), net.n)
    assert not rep["stsz_ok"]["gamma_over_kappa"]
    assert not rep["pass"]


def test_grid_sweep_feasible_region_nonempty_and_sound(ridge10):
    # 10x10 (eta, gamma) sweep on the ring-10 ridge constants, identity operator
    obj, net, _ = ridge10
    scheme = make_scheme("identity", obj.p)
    n_pass = 0
    for eta in np.geomspace(1e-10, 1e-3, 10):
        for gamma in np.geomspace(1e-3, 1.0, 10):
            theta = Theta(eta=float(eta), gamma=float(gamma), alpha_x=1.0, alpha_y=1.0)
            try:
                tc = TheoryConstants.build(obj.mu, obj.L, net, scheme, theta)
                eps = default_epsilon(tc, theta, net.n)
                rep = check_sufficient_conditions(tc, theta, eps, net.n)
            except ValueError:
                continue
            if rep["pass"]:
                n_pass += 1
                assert rep["rho_A"] < 1
                assert rep["direct_contraction"]["ok"]
    assert n_pass > 0


def test_both_typographic_variants_reported(ridge10):
    obj, net, _ = ridge10
    scheme = make_scheme("randomk", obj.p, k=5)
    theta = Theta(eta=1e-6, gamma=0.1, alpha_x=1.0, alpha_y=1.0)
    tc = TheoryConstants.build(obj.mu, obj.L, net, scheme, theta)
    rep = check_sufficient_conditions(tc, theta, np.ones(5), net.n)
    assert "row2_sqrt" in rep["eta_bounds"] and "row2_sqrt_proof" in rep["eta_bounds"]
    assert "rhs" in rep["system"]["eps3_floor"] and "rhs_proof" in rep["system"]["eps3_floor"]
    assert rep["eta_bounds"]["row2_sqrt_proof"] < rep["eta_bounds"]["row2_sqrt"]


def test_checker_rejects_bad_eps(ridge10):
    obj, net, _ = ridge10
    scheme = make_scheme("identity", obj.p)
    theta = Theta(eta=1e-6, gamma=0.5, alpha_x=1.0, alpha_y=1.0)
    tc = TheoryConstants.build(obj.mu, obj.L, net, scheme, theta)
    with pytest.raises(ValueError):
        check_sufficient_conditions(tc, theta, np.array([1.0, -1.0, 1.0, 1.0, 1.0]), net.n)


@settings(deadline=None, max_examples=40)
@given(st.floats(min_value=1e-6, max_value=0.66), st.floats(min_value=0.01, max_value=1.0))
def test_rho_decreases_with_eta_at_feasible_scale(scale, gamma):
    # with a well-conditioned instance the certified region is broad; the spectral
    # radius stays below 1 across it
    mu, L = 1.0, 1.2
    theta = Theta(eta=scale * min(2 * L / (3 * mu), mu / L), gamma=gamma,
                  alpha_x=1.0, alpha_y=1.0)
    tc = constants_for(mu, L, 0.3, 0.8, 0.0, 1.0, 1.0, theta)
    A = build_A(tc, theta, n=4).A
    assert np.all(A >= 0)
    assert np.isfinite(spectral_radius(A))
