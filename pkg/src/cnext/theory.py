"""Contraction matrix A(theta), its spectral radius, and the sufficient-condition checks.

The coupled evolution of (optimization, consensus, tracking, two compression-memory)
squared errors obeys e(t+1) <= A(theta) e(t) componentwise whenever
eta <= min(2L/(3mu), mu/L); rho(A) < 1 then yields a linear rate. The sufficient
conditions bound eta and gamma through a positive certificate vector
eps = (eps1, eps2, L^2 eps3, eps4, L^2 eps5) with A eps <= (1 - eta/(2 kappa)) eps.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .compress import CompressionScheme
from .graph import Network

# the certificate margins scale like eta/kappa and can sit within a few ulps of 1 in
# float64, so the componentwise check and rho(A) are evaluated in extended precision
_DPS = 50


@dataclass(frozen=True)
class Theta:
    """Hyperparameter vector (eta, gamma, alpha_x, alpha_y)."""

    eta: float
    gamma: float
    alpha_x: float
    alpha_y: float


@dataclass(frozen=True)
class TheoryConstants:
    mu: float
    L: float
    kappa: float
    rho: float
    rho_tilde: float
    beta: float
    C: float
    r: float
    delta: float
    tau_x: float
    tau_y: float
    c1: float
    c2: float
    a_x: float
    a_y: float
    k1: float
    k2: float
    k3: float
    k4: float

    @classmethod
    def build(cls, mu: float, L: float, net: Network, scheme: CompressionScheme,
              theta: Theta, tau_x: float | None = None, tau_y: float | None = None
              ) -> "TheoryConstants":
        """Derive every constant from the problem, network, scheme and theta.

        tau defaults to the midpoint of its admissible open interval
        (1, 1/(1 - alpha r delta)); when alpha r delta = 1 the interval is (1, inf)
        and tau = 2 is used.
        """
        rho, beta = net.rho, net.beta
        rho_tilde = net.rho_tilde(theta.gamma)
        C, r, delta = scheme.C, scheme.r, scheme.delta
        tau_x = _tau_default(theta.alpha_x, r, delta) if tau_x is None else tau_x
        tau_y = _tau_default(theta.alpha_y, r, delta) if tau_y is None else tau_y
        a_x = tau_x * (1.0 - theta.alpha_x * r * delta)
        a_y = tau_y * (1.0 - theta.alpha_y * r * delta)
        if tau_x <= 1 or a_x >= 1:
            raise ValueError(f"tau_x={tau_x} must satisfy 1 < tau_x with a_x = tau_x(1 - alpha_x r delta) < 1, got a_x={a_x}")
        if tau_y <= 1 or a_y >= 1:
            raise ValueError(f"tau_y={tau_y} must satisfy 1 < tau_y with a_y = tau_y(1 - alpha_y r delta) < 1, got a_y={a_y}")
        c1 = 3.0 * tau_x / (tau_x - 1.0)
        c2 = 3.0 * tau_y / (tau_y - 1.0)
        return cls(mu=mu, L=L, kappa=L / mu, rho=rho, rho_tilde=rho_tilde, beta=beta,
                   C=C, r=r, delta=delta, tau_x=tau_x, tau_y=tau_y, c1=c1, c2=c2,
                   a_x=a_x, a_y=a_y,
                   k1=c1 * beta ** 2, k2=c1 * C * beta ** 2,
                   k3=c2 * beta ** 2, k4=c2 * C * beta ** 2)


def _tau_default(alpha: float, r: float, delta: float) -> float:
    s = 1.0 - alpha * r * delta
    if s < 0:
        raise ValueError(f"alpha r delta = {alpha * r * delta} exceeds 1; need alpha in (0, 1/r]")
    if s == 0.0:
        return 2.0
    return 0.5 * (1.0 + 1.0 / s)


@dataclass(frozen=True)
class ContractionMatrix:
    A: np.ndarray  # 5 x 5, nonnegative under the step-size cap
    theta: Theta


def build_A(tc: TheoryConstants, theta: Theta, n: int) -> ContractionMatrix:
    """Fill the 25 entries of the error-coupling matrix.

    Raises on violated preconditions, naming the broken inequality.
    """
    mu, L, C = tc.mu, tc.L, tc.C
    eta, gamma = theta.eta, theta.gamma
    eta_cap = min(2.0 * L / (3.0 * mu), mu / L)
    if eta > eta_cap:
        raise ValueError(f"eta <= min(2L/(3mu), mu/L) violated: eta={eta} > {eta_cap:.6g}")
    if not (0 < gamma <= 1):
        raise ValueError(f"gamma in (0, 1] violated: gamma={gamma}")
    if tc.a_x >= 1:
        raise ValueError(f"a_x < 1 violated: a_x={tc.a_x}")
    if tc.a_y >= 1:
        raise ValueError(f"a_y < 1 violated: a_y={tc.a_y}")
    rt = tc.rho_tilde
    rb = 1.0 - rt
    if rb <= 0:
        raise ValueError(f"1 - rho_tilde must be positive, got {rb}")
    b2, g2, e2 = tc.beta ** 2, gamma ** 2, eta ** 2

    A = np.zeros((5, 5))
    A[0, 0] = 1.0 - 1.5 * eta * mu / L + 0.5 * eta ** 3 * mu ** 3 / L ** 3
    A[0, 1] = e2 * L ** 2 / (mu ** 2 * n) + 2.0 * eta * L ** 3 / (mu ** 3 * n)
    A[0, 2] = e2 / (mu ** 2 * n) + 2.0 * eta * L / (mu ** 3 * n)

    A[1, 0] = 8.0 * L ** 2 * e2 * n / (mu ** 2 * rb)
    A[1, 1] = (1.0 + rt ** 2) / 2.0 + 8.0 * L ** 2 * e2 / (mu ** 2 * rb)
    A[1, 2] = 4.0 * e2 / (mu ** 2 * rb)
    A[1, 3] = 2.0 * g2 * b2 * C ** 2 / rb

    A[2, 0] = 24.0 * L ** 4 * e2 * n / (mu ** 2 * rb)
    A[2, 1] = 6.0 * L ** 2 * g2 * b2 / rb + 24.0 * L ** 4 * e2 / (mu ** 2 * rb)
    A[2, 2] = (1.0 + rt ** 2) / 2.0 + 12.0 * L ** 2 * e2 / (mu ** 2 * rb)
    A[2, 3] = 6.0 * L ** 2 * g2 * b2 * C / rb
    A[2, 4] = 2.0 * g2 * b2 * C / rb

    A[3, 0] = 4.0 * L ** 2 * e2 * n * tc.c1 / mu ** 2
    A[3, 1] = g2 * tc.k1 + 4.0 * L ** 2 * e2 * tc.c1 / mu ** 2
    A[3, 2] = 2.0 * e2 * tc.c1 / mu ** 2
    A[3, 3] = tc.a_x + g2 * tc.k2

    A[4, 0] = 12.0 * L ** 4 * e2 * n * tc.c2 / mu ** 2
    A[4, 1] = 3.0 * L ** 2 * g2 * tc.k3 + 12.0 * L ** 4 * e2 * tc.c2 / mu ** 2
    A[4, 2] = g2 * tc.k3 + 6.0 * L ** 2 * e2 * tc.c2 / mu ** 2
    A[4, 3] = 3.0 * L ** 2 * g2 * tc.k4
    A[4, 4] = tc.a_y + g2 * tc.k3
    return ContractionMatrix(A=A, theta=theta)


def spectral_radius(M: ContractionMatrix | np.ndarray) -> float:
    A = M.A if isinstance(M, ContractionMatrix) else np.asarray(M)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def _mp_matrix(A: np.ndarray) -> mp.matrix:
    M = mp.matrix(A.shape[0], A.shape[1])
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            M[i, j] = mp.mpf(float(A[i, j]))
    return M


def _mp_spectral_radius(A: np.ndarray) -> mp.mpf:
    with mp.workdps(_DPS):
        evals, _ = mp.eig(_mp_matrix(A))
        return max(abs(ev) for ev in evals)


def _rho_and_flag(A: np.ndarray) -> tuple[float, bool]:
    """(rho(A), rho < 1); decided in extended precision only near the boundary."""
    rho = spectral_radius(A)
    if abs(rho - 1.0) > 1e-9:
        return rho, rho < 1.0
    rho_mp = _mp_spectral_radius(A)
    return float(rho_mp), bool(rho_mp < 1)


def _mp_certificate_holds(A: np.ndarray, eps_vec: np.ndarray, q: float) -> bool:
    """Exact-precision check of A eps <= q eps componentwise (inputs are float64 exact)."""
    with mp.workdps(_DPS):
        M = _mp_matrix(A)
        v = mp.matrix([mp.mpf(float(x)) for x in eps_vec])
        lhs = M * v
        qm = mp.mpf(float(q))
        return all(lhs[i] <= qm * v[i] for i in range(5))


def check_sufficient_conditions(tc: TheoryConstants, theta: Theta, eps: np.ndarray, n: int) -> dict:
    """Evaluate the sufficient step-size conditions and the eps-certificate they imply.

    Returns a JSON-serializable report: one entry per inequality, both typographic
    variants where the source conditions are uneven (reported separately; the overall
    flag uses the stricter one), the direct componentwise check
    A (eps1, eps2, L^2 eps3, eps4, L^2 eps5) <= (1 - eta/(2 kappa)) * same,
    and rho(A). Never raises on infeasible parameters; it reports them.
    """
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (5,) or np.any(eps <= 0):
        raise ValueError("eps must be 5 strictly positive reals")
    e1, e2, e3, e4, e5 = eps
    mu, L, kappa, C = tc.mu, tc.L, tc.kappa, tc.C
    eta, gamma = theta.eta, theta.gamma
    rho, rt, b2 = tc.rho, tc.rho_tilde, tc.beta ** 2
    rb = 1.0 - rt
    eps_hat = 2.0 * n * e1 + 2.0 * e2 + e3
    eps_bar = tc.k1 * e2 + tc.k2 * e4
    eps_breve = 3.0 * tc.k3 * e2 + tc.k3 * e3 + 3.0 * tc.k4 * e4 + tc.k3 * e5

    eta_bounds = {
        "eps_ratio": e1 / (3.0 * kappa ** 3 * e2 / n + 3.0 * kappa * e3 / (mu ** 2 * n)),
        "kappa_sqrt23": kappa * np.sqrt(2.0 / 3.0),
        "gamma_gap_kappa6": gamma * (1.0 - rho) * kappa / 6.0,
        "gamma_over_kappa": gamma / kappa,
        "row2_sqrt": (0.25 / kappa) * np.sqrt(gamma * (1.0 - rho) * rb * e2 / eps_hat),
        "row2_sqrt_proof": (0.25 / kappa) * np.sqrt(gamma * (1.0 - rho) * rb * e2 / (3.0 * eps_hat)),
        "row3_sqrt": (1.0 / (12.0 * kappa)) * np.sqrt(gamma * (1.0 - rho) * rb * e3 / eps_hat),
    }
    gamma_bounds = {
        "one": 1.0,
        "row4_sqrt": np.sqrt((1.0 - tc.a_x) * e4 / (2.0 * tc.c1 * eps_hat + eps_bar + e4 / (2.0 * kappa ** 2))),
        "row5_sqrt": np.sqrt((1.0 - tc.a_y) * e5 / (6.0 * tc.c2 * eps_hat + eps_breve + e5 / (2.0 * kappa ** 2))),
    }
    if b2 == 0.0:
        sys3_rhs = sys3_rhs_proof = np.inf
    else:
        sys3_rhs = rb * (1.0 - rho) * e3 / (24.0 * gamma * b2)
        sys3_rhs_proof = rt * (1.0 - rho) * e3 / (24.0 * gamma * b2)
    sys2_rhs = np.inf if C == 0.0 else rb * (1.0 - rho) / (8.0 * gamma ** 2 * b2 * C ** 2)
    sys3_lhs = 3.0 * e2 + 3.0 * C * e4 + C * e5
    # where statement and derivation disagree typographically, both are reported and
    # the flags follow the derivation (the statement's variant of the third inequality
    # makes its own feasible set empty as gamma -> 0)
    system = {
        "eps1_over_eps2": {
            "lhs": e1 / e2,
            "rhs": 6.0 * kappa ** 4 / n + 6.0 * kappa ** 2 * e3 / (mu ** 2 * n * e2),
            "ok": e1 / e2 >= 6.0 * kappa ** 4 / n + 6.0 * kappa ** 2 * e3 / (mu ** 2 * n * e2),
        },
        "eps4_over_eps2": {
            "lhs": e4 / e2,
            "rhs": sys2_rhs,
            "ok": e4 / e2 <= sys2_rhs,
        },
        "eps3_floor": {
            "lhs": sys3_lhs,
            "rhs": sys3_rhs,
            "rhs_proof": sys3_rhs_proof,
            "ok": sys3_lhs <= sys3_rhs_proof,
        },
    }

    eta_flagged = dict(eta_bounds)
    eta_flagged["row2_sqrt"] = eta_bounds["row2_sqrt_proof"]
    del eta_flagged["row2_sqrt_proof"]
    stsz_ok = {name: bool(eta <= bound) for name, bound in eta_flagged.items()}
    constsz_ok = {name: bool(gamma <= bound) for name, bound in gamma_bounds.items()}
    system_ok = {name: bool(entry["ok"]) for name, entry in system.items()}

    direct = {"ok": False, "reason": None, "rho_A": None, "rho_lt_1": False}
    try:
        A = build_A(tc, theta, n).A
        q = 1.0 - eta / (2.0 * kappa)
        eps_vec = np.array([e1, e2, L ** 2 * e3, e4, L ** 2 * e5])
        direct["ok"] = _mp_certificate_holds(A, eps_vec, q)
        direct["rho_A"], direct["rho_lt_1"] = _rho_and_flag(A)
    except ValueError as exc:
        direct["reason"] = str(exc)

    passed = all(stsz_ok.values()) and all(constsz_ok.values()) and all(system_ok.values()) \
        and direct["ok"] and direct["rho_lt_1"]
    return {
        "theta": {"eta": eta, "gamma": gamma, "alpha_x": theta.alpha_x, "alpha_y": theta.alpha_y},
        "eps": eps.tolist(),
        "eta_bounds": {k: float(v) for k, v in eta_bounds.items()},
        "gamma_bounds": {k: float(v) for k, v in gamma_bounds.items()},
        "stsz_ok": stsz_ok,
        "constsz_ok": constsz_ok,
        "system": {k: {kk: (float(vv) if isinstance(vv, (int, float, np.floating)) else bool(vv))
                       for kk, vv in entry.items()} for k, entry in system.items()},
        "system_ok": system_ok,
        "direct_contraction": direct,
        "rho_A": direct["rho_A"],
        "pass": bool(passed),
    }


def default_epsilon(tc: TheoryConstants, theta: Theta, n: int) -> np.ndarray:
    """Deterministic construction of the certificate vector for check_sufficient_conditions.

    Whenever rho(A) < q = 1 - eta/(2 kappa), the resolvent v = (qI - A)^{-1} w is a
    strictly positive vector with A v < q v for any positive w (the Neumann series of
    the resolvent is nonnegative). The search scans a small grid of source vectors w,
    maps v back to raw coordinates (the gt/comp_y slots carry an L^2 factor), and
    returns the first candidate that also satisfies the stated structural
    inequalities; it falls back to the best stated-only construction otherwise.
    """
    candidates: list[np.ndarray] = []
    try:
        A = build_A(tc, theta, n).A
        candidates.extend(_chained_candidates(A, tc, theta, n))
    except ValueError:
        pass
    candidates.append(_stated_floor_epsilon(tc, theta, n))
    best, best_key = None, (-1, -np.inf)
    for eps in candidates:
        rep = check_sufficient_conditions(tc, theta, eps, n)
        n_ok = sum(rep["system_ok"].values()) + sum(rep["stsz_ok"].values()) \
            + sum(rep["constsz_ok"].values()) + int(rep["direct_contraction"]["ok"])
        key = (int(rep["pass"]), n_ok)
        if key > best_key:
            best, best_key = eps, key
        if rep["pass"]:
            return eps
    return best


def _chained_candidates(A: np.ndarray, tc: TheoryConstants, theta: Theta, n: int,
                        margin: float = 1.05) -> list[np.ndarray]:
    """Chain the certificate rows into explicit floors/caps with a 5% margin.

    With eps2 = 1, rows 1 and 3 force floors on eps1 and eps3, row 2 caps eps4, and
    rows 4/5 force floors on eps4/eps5; eps5 is additionally scanned upward because
    the gamma bound of the last stated condition grows with it until saturation.
    """
    L, kappa, mu, C = tc.L, tc.kappa, tc.mu, tc.C
    gamma = theta.gamma
    q = 1.0 - theta.eta / (2.0 * kappa)
    out: list[np.ndarray] = []
    if q <= A[0, 0] or q <= A[2, 2] or q <= A[3, 3] or q <= A[4, 4]:
        return out
    e2 = 1.0
    # row 3 ignoring the eps4/eps5 inflow (they are re-added below), then row 1
    e3 = margin * (A[2, 1] * e2) / ((q - A[2, 2]) * L ** 2)
    e3 = max(e3, 1e-12)
    for _ in range(3):  # short fixed-point pass for the circular eps3/eps1/eps4/eps5 terms
        e1_direct = (A[0, 1] * e2 + A[0, 2] * L ** 2 * e3) / (q - A[0, 0])
        e1_stated = (6.0 * kappa ** 4 / n + 6.0 * kappa ** 2 * e3 / (mu ** 2 * n)) * e2
        e1 = margin * max(e1_direct, e1_stated)
        # row 2 slack caps eps4 (A[1,3] = 0 for C = 0: unconstrained)
        slack2 = (q - A[1, 1]) * e2 - A[1, 0] * e1 - A[1, 2] * L ** 2 * e3
        if slack2 <= 0:
            return out
        cap4_direct = np.inf if A[1, 3] == 0.0 else slack2 / (A[1, 3] * margin)
        b2 = tc.beta ** 2
        cap4_stated = np.inf if C == 0.0 else \
            (1.0 - tc.rho_tilde) * (1.0 - tc.rho) / (8.0 * gamma ** 2 * b2 * C ** 2)
        floor4 = margin * (A[3, 0] * e1 + A[3, 1] * e2 + A[3, 2] * L ** 2 * e3) / (q - A[3, 3])
        e4 = min(cap4_direct, cap4_stated, max(floor4, 1.0) * 1e12)
        if e4 < floor4:
            return out
        e4 = max(0.9 * e4, floor4)
        floor5 = margin * (A[4, 0] * e1 + A[4, 1] * e2 + A[4, 2] * L ** 2 * e3
                           + A[4, 3] * e4) / ((q - A[4, 4]) * L ** 2)
        floor5 = max(floor5, 1e-12)
        # row 3 slack caps eps5 through A[2,4] (zero when C = 0)
        slack3 = (q - A[2, 2]) * L ** 2 * e3 - A[2, 0] * e1 - A[2, 1] * e2 - A[2, 3] * e4
        cap5 = np.inf if A[2, 4] == 0.0 else slack3 / (A[2, 4] * L ** 2 * margin)
        for mult5 in (1.0, 1e2, 1e4, 1e8):
            e5 = min(floor5 * mult5, cap5)
            if e5 < floor5:
                continue
            eps = np.array([e1, e2, e3, e4, e5])
            if np.all(eps > 0) and np.all(np.isfinite(eps)):
                out.append(eps)
        # feed the eps4/eps5 inflow back into the row-3 floor
        e5_ref = min(floor5 * 1e4, cap5) if np.isfinite(cap5) else floor5 * 1e4
        e3_new = margin * (A[2, 0] * e1 + A[2, 1] * e2 + A[2, 3] * e4
                           + A[2, 4] * L ** 2 * max(e5_ref, floor5)) / ((q - A[2, 2]) * L ** 2)
        if not np.isfinite(e3_new) or e3_new <= 0:
            break
        if abs(e3_new - e3) <= 1e-6 * e3:
            break
        e3 = max(e3, e3_new)
    return out


def _stated_floor_epsilon(tc: TheoryConstants, theta: Theta, n: int) -> np.ndarray:
    """Chain the stated structural inequalities into equalities with a small margin."""
    rho, rt, b2 = tc.rho, tc.rho_tilde, tc.beta ** 2
    rb = 1.0 - rt
    kappa, mu, C = tc.kappa, tc.mu, tc.C
    gamma = theta.gamma
    margin = 1.0 + 1e-9
    e2 = 1.0
    e5 = 1.0
    if C == 0.0:
        e4 = 1.0
    else:
        e4 = 0.5 * rb * (1.0 - rho) / (8.0 * gamma ** 2 * b2 * C ** 2)
    if b2 == 0.0:
        e3 = 1.0
    else:
        e3 = margin * 24.0 * gamma * b2 * (3.0 * e2 + 3.0 * C * e4 + C * e5) \
            / ((1.0 - rho) * rt)
    e1 = margin * (6.0 * kappa ** 4 / n + 6.0 * kappa ** 2 * e3 / (mu ** 2 * n)) * e2
    return np.array([e1, e2, e3, e4, e5])
