"""Local objective families (ridge, logistic), their curvature bounds, and the centralized baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

RIDGE = "ridge"
LOGISTIC = "logistic"


class ConvergenceError(RuntimeError):
    """Raised when the centralized baseline exhausts its iteration budget."""

    def __init__(self, message: str, last_iterate: np.ndarray):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class LocalData:
    """One agent's samples: features A (m x p) and targets/labels b (m,)."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.A.ndim != 2 or self.b.shape != (self.A.shape[0],):
            raise ValueError(f"inconsistent local data shapes {self.A.shape}, {self.b.shape}")
        if self.A.shape[0] < 1:
            raise ValueError("local data needs at least one sample")

    @property
    def m(self) -> int:
        return self.A.shape[0]


def ridge_value_grad_hess(d: LocalData, lam: float, x: np.ndarray):
    """f_i(x) = ||A x - b||^2 + lam ||x||^2 with gradient and (constant) Hessian."""
    res = d.A @ x - d.b
    value = float(res @ res) + lam * float(x @ x)
    grad = 2.0 * (d.A.T @ res) + 2.0 * lam * x
    hess = 2.0 * (d.A.T @ d.A) + 2.0 * lam * np.eye(x.shape[0])
    return value, grad, hess


def logistic_value_grad_hess(d: LocalData, lam: float, x: np.ndarray):
    """Mean logistic loss over +-1 labels plus (lam/2) ||x||^2, computed overflow-safely."""
    margins = d.b * (d.A @ x)
    # log(1 + exp(-m)) == logaddexp(0, -m), stable for either sign of m
    value = float(np.mean(np.logaddexp(0.0, -margins))) + 0.5 * lam * float(x @ x)
    sig_neg = expit(-margins)  # sigma(-m) = 1/(1+e^m)
    grad = d.A.T @ (-d.b * sig_neg) / d.m + lam * x
    w = sig_neg * (1.0 - sig_neg)  # sigma(m)(1-sigma(m)), symmetric in the sign of m
    hess = (d.A.T * w) @ d.A / d.m + lam * np.eye(x.shape[0])
    return value, grad, hess


@dataclass
class Objective:
    """Average of n local functions, with global strong-convexity / smoothness bounds."""

    kind: str
    lam: float
    locals: list[LocalData]
    mu: float = 0.0
    L: float = 0.0
    _chol_cache: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in (RIDGE, LOGISTIC):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.kind == LOGISTIC:
            for d in self.locals:
                if not np.all(np.isin(d.b, (-1.0, 1.0))):
                    raise ValueError("logistic labels must be in {-1, +1}")
        if self.mu == 0.0 and self.L == 0.0:
            self.mu, self.L = estimate_mu_L(self)

    @property
    def n(self) -> int:
        return len(self.locals)

    @property
    def p(self) -> int:
        return self.locals[0].A.shape[1]

    @property
    def kappa(self) -> float:
        return self.L / self.mu

    def _vgh(self, i: int, x: np.ndarray):
        if self.kind == RIDGE:
            return ridge_value_grad_hess(self.locals[i], self.lam, x)
        return logistic_value_grad_hess(self.locals[i], self.lam, x)

    def value_i(self, i: int, x: np.ndarray) -> float:
        return self._vgh(i, x)[0]

    def grad_i(self, i: int, x: np.ndarray) -> np.ndarray:
        return self._vgh(i, x)[1]

    def hess_i(self, i: int, x: np.ndarray) -> np.ndarray:
        return self._vgh(i, x)[2]

    def value(self, x: np.ndarray) -> float:
        """Global objective (1/n) sum_i f_i(x)."""
        return sum(self.value_i(i, x) for i in range(self.n)) / self.n

    def grad(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros_like(x, dtype=float)
        for i in range(self.n):
            g += self.grad_i(i, x)
        return g / self.n

    def hess(self, x: np.ndarray) -> np.ndarray:
        H = np.zeros((self.p, self.p))
        for i in range(self.n):
            H += self.hess_i(i, x)
        return H / self.n

    def grad_stack(self, X: np.ndarray) -> np.ndarray:
        """Row i holds grad f_i(x_i) for the n x p iterate matrix X."""
        return np.stack([self.grad_i(i, X[i]) for i in range(self.n)])

    def hess_solve_i(self, i: int, x: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        """Solve hess f_i(x) d = rhs by Cholesky; ridge Hessians are constant and cached."""
        if self.kind == RIDGE:
            if self._chol_cache is None:
                self._chol_cache = [cho_factor(self.hess_i(j, np.zeros(self.p))) for j in range(self.n)]
            return cho_solve(self._chol_cache[i], rhs)
        return cho_solve(cho_factor(self.hess_i(i, x)), rhs)


def ridge_objective(locals_: list[LocalData], lam: float) -> Objective:
    return Objective(kind=RIDGE, lam=lam, locals=locals_)


def logistic_objective(locals_: list[LocalData], lam: float) -> Objective:
    return Objective(kind=LOGISTIC, lam=lam, locals=locals_)


def estimate_mu_L(obj: Objective) -> tuple[float, float]:
    """Uniform curvature bounds mu I <= hess f_i(x) <= L I over all agents and points.

    Ridge: exact per-agent extreme eigenvalues of the constant Hessians.
    Logistic: mu = lam (the loss curvature can vanish), L = lam + max_i lambda_max(A_i^T A_i / m_i)/4.
    """
    if obj.kind == RIDGE:
        lo, hi = np.inf, 0.0
        for d in obj.locals:
            ev = np.linalg.eigvalsh(2.0 * (d.A.T @ d.A))
            lo = min(lo, max(ev[0], 0.0))
            hi = max(hi, ev[-1])
        return 2.0 * obj.lam + lo, 2.0 * obj.lam + hi
    hi = 0.0
    for d in obj.locals:
        ev = np.linalg.eigvalsh(d.A.T @ d.A / d.m)
        hi = max(hi, ev[-1])
    return obj.lam, obj.lam + hi / 4.0


def ridge_closed_form_optimum(obj: Objective) -> np.ndarray:
    """x* = (sum_i A_i^T A_i + n lam I)^{-1} sum_i A_i^T b_i, via SPD factorization."""
    if obj.kind != RIDGE:
        raise ValueError("closed form only exists for the ridge objective")
    p = obj.p
    G = obj.n * obj.lam * np.eye(p)
    rhs = np.zeros(p)
    for d in obj.locals:
        G += d.A.T @ d.A
        rhs += d.A.T @ d.b
    return cho_solve(cho_factor(G), rhs)


def centralized_newton(obj: Objective, x0: np.ndarray, tol: float = 1e-10,
                       max_iter: int = 200) -> tuple[np.ndarray, float]:
    """Damped Newton with Armijo backtracking (c = 1e-4, shrink 0.5, initial step 1).

    Baseline optimizer for residual plots; stops at ||grad f(x)|| <= tol.
    """
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        g = obj.grad(x)
        if np.linalg.norm(g) <= tol:
            return x, obj.value(x)
        H = obj.hess(x)
        d = cho_solve(cho_factor(H), -g)
        f0 = obj.value(x)
        slope = float(g @ d)
        t = 1.0
        while obj.value(x + t * d) > f0 + 1e-4 * t * slope:
            t *= 0.5
            if t < 1e-14:
                break
        x = x + t * d
    if np.linalg.norm(obj.grad(x)) <= tol:
        return x, obj.value(x)
    raise ConvergenceError(f"Newton failed to reach tol={tol} in {max_iter} iterations", x)
