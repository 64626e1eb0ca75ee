"""Synchronous-round solver: compressed Newton-type updates with gradient tracking.

One round compresses both streams (decision matrix X and tracker Y) against their
memories, mixes the estimates through the consensus weights, takes a local
curvature-scaled step, and refreshes the tracker with the gradient increment:

    X <- X - gamma (Xhat - Xhat_w) - eta D,   D rows d_i = [hess f_i(x_i)]^{-1} y_i
    Y <- Y - gamma (Yhat - Yhat_w) + grad F(X_new) - grad F(X_old)

with Y(0) = grad F(X(0)). Identity compression reduces the communication to
Wtilde = (1-gamma) I + gamma W averaging (the uncompressed algorithm); swapping the
Newton direction for the raw tracker gives the first-order comparator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .compress import (CompressState, CompressionScheme, agent_streams, compress_round,
                       make_scheme, IDENTITY)
from .graph import Network
from .objective import Objective

MODE_CNEXT = "cnext"
MODE_FIRST_ORDER_GT = "first_order_gt"
MODE_UNCOMPRESSED_GIANT = "uncompressed_giant"
MODES = (MODE_CNEXT, MODE_FIRST_ORDER_GT, MODE_UNCOMPRESSED_GIANT)

# substream ids for the root seed split
_STREAM_X, _STREAM_Y, _STREAM_INIT = 0, 1, 2


class DivergenceError(RuntimeError):
    """A state quantity became non-finite; names the offending quantity and round."""

    def __init__(self, quantity: str, t: int):
        super().__init__(f"divergence at round {t}: non-finite entries in {quantity}")
        self.quantity = quantity
        self.t = t


class NumericalError(RuntimeError):
    """Local Hessian solve failed (numerically non-SPD)."""

    def __init__(self, agent: int, t: int):
        super().__init__(f"Hessian Cholesky failed for agent {agent} at round {t}")
        self.agent = agent
        self.t = t


@dataclass(frozen=True)
class HyperParams:
    eta: float
    gamma: float
    alpha_x: float
    alpha_y: float
    T: int
    tol: float = 0.0

    def __post_init__(self):
        # zero steps are admitted so the no-op round is expressible; the theory-side
        # constraints (gamma > 0, eta > 0) are enforced where the theory needs them
        if not (0 <= self.gamma <= 1):
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.eta < 0 or self.alpha_x <= 0 or self.alpha_y <= 0:
            raise ValueError("eta must be nonnegative and the alphas positive")
        if self.T < 0 or self.tol < 0:
            raise ValueError("T and tol must be nonnegative")


def warn_theory_violations(hp: HyperParams, obj: Objective, scheme: CompressionScheme) -> list[str]:
    """Flag (without rejecting) hyperparameters outside the sufficient-condition ranges."""
    msgs = []
    eta_cap = min(2.0 * obj.L / (3.0 * obj.mu), obj.mu / obj.L)
    if hp.eta > eta_cap:
        msgs.append(f"eta={hp.eta} exceeds min(2L/(3mu), mu/L)={eta_cap:.6g}")
    if max(hp.alpha_x, hp.alpha_y) > 1.0 / scheme.r:
        msgs.append(f"alpha=({hp.alpha_x}, {hp.alpha_y}) exceeds 1/r={1.0 / scheme.r:.6g} "
                    f"for scheme {scheme.label()}")
    for m in msgs:
        warnings.warn(m, stacklevel=2)
    return msgs


@dataclass
class SolverState:
    X: np.ndarray  # n x p decision matrix
    Y: np.ndarray  # n x p tracker matrix
    prev_grad: np.ndarray  # grad F(X(t)) cache
    comp_x: CompressState
    comp_y: CompressState
    t: int = 0
    bits_cum: int = 0

    def copy(self) -> "SolverState":
        return SolverState(X=self.X.copy(), Y=self.Y.copy(), prev_grad=self.prev_grad.copy(),
                           comp_x=CompressState(self.comp_x.H.copy(), self.comp_x.Hw.copy(),
                                                self.comp_x.alpha),
                           comp_y=CompressState(self.comp_y.H.copy(), self.comp_y.Hw.copy(),
                                                self.comp_y.alpha),
                           t=self.t, bits_cum=self.bits_cum)


@dataclass(frozen=True)
class ErrorVector:
    """Single-realization squared norms of the five coupled errors."""

    opt: float
    cons: float
    gt: float
    comp_x: float
    comp_y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.opt, self.cons, self.gt, self.comp_x, self.comp_y])


@dataclass(frozen=True)
class RoundRecord:
    t: int
    bits_cum: int
    errors: ErrorVector
    residual: float
    accuracy: float | None = None
    op_err_x: float = 0.0  # ||Xhat - X||_F^2 of the round that produced this state
    op_err_y: float = 0.0


def init_state(obj: Objective, net: Network, hp: HyperParams, seed: int) -> SolverState:
    """Uniform[0,1] initialization of X and both memories; Y(0) forced to grad F(X(0))."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(_STREAM_INIT, 0))))
    n, p = net.n, obj.p
    X0 = rng.uniform(size=(n, p))
    Hx0 = rng.uniform(size=(n, p))
    Hy0 = rng.uniform(size=(n, p))
    g0 = obj.grad_stack(X0)
    return SolverState(X=X0, Y=g0.copy(), prev_grad=g0,
                       comp_x=CompressState.init(Hx0, net.W, hp.alpha_x),
                       comp_y=CompressState.init(Hy0, net.W, hp.alpha_y))


def newton_directions(X: np.ndarray, Y: np.ndarray, obj: Objective, t: int = 0) -> np.ndarray:
    """Rows d_i = [hess f_i(x_i)]^{-1} y_i via per-agent Cholesky solves."""
    D = np.empty_like(Y)
    for i in range(X.shape[0]):
        try:
            D[i] = obj.hess_solve_i(i, X[i], Y[i])
        except np.linalg.LinAlgError as exc:
            raise NumericalError(i, t) from exc
    return D


@dataclass(frozen=True)
class StepInfo:
    bits: int
    op_err_x: float
    op_err_y: float


def step(state: SolverState, obj: Objective, net: Network, scheme: CompressionScheme,
         hp: HyperParams, mode: str,
         rngs_x: list[np.random.Generator], rngs_y: list[np.random.Generator]) -> StepInfo:
    """One synchronous round; mutates `state` in place and returns round diagnostics."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    t = state.t
    rx = compress_round(state.comp_x, state.X, scheme, net.W, rngs_x)
    ry = compress_round(state.comp_y, state.Y, scheme, net.W, rngs_y)

    if mode == MODE_FIRST_ORDER_GT:
        D = state.Y
    else:
        D = newton_directions(state.X, state.Y, obj, t)

    # operator errors of this round's encodings, against the streams as compressed
    op_err_x = float(np.sum((rx.Zhat - state.X) ** 2))
    op_err_y = float(np.sum((ry.Zhat - state.Y) ** 2))

    X_new = state.X - hp.gamma * (rx.Zhat - rx.Zhat_w) - hp.eta * D
    if not np.all(np.isfinite(X_new)):
        raise DivergenceError("X", t)
    g_new = obj.grad_stack(X_new)
    Y_new = state.Y - hp.gamma * (ry.Zhat - ry.Zhat_w) + g_new - state.prev_grad
    if not np.all(np.isfinite(Y_new)):
        raise DivergenceError("Y", t)

    state.X = X_new
    state.Y = Y_new
    state.prev_grad = g_new
    state.bits_cum += rx.bits + ry.bits
    state.t = t + 1
    return StepInfo(bits=rx.bits + ry.bits, op_err_x=op_err_x, op_err_y=op_err_y)


def measure_errors(state: SolverState, obj: Objective, x_star: np.ndarray) -> ErrorVector:
    """The five squared error norms of the current state (single realization)."""
    xbar = state.X.mean(axis=0)
    ybar = state.Y.mean(axis=0)
    with np.errstate(over="ignore"):  # overflow here is caught as divergence below
        ev = ErrorVector(
            opt=float(np.sum((xbar - x_star) ** 2)),
            cons=float(np.sum((state.X - xbar) ** 2)),
            gt=float(np.sum((state.Y - ybar) ** 2)),
            comp_x=float(np.sum((state.X - state.comp_x.H) ** 2)),
            comp_y=float(np.sum((state.Y - state.comp_y.H) ** 2)),
        )
    arr = ev.as_array()
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DivergenceError("error vector", state.t)
    return ev


def tracking_gap(state: SolverState) -> float:
    """|| (1/n) 1^T Y - (1/n) 1^T grad F(X) ||, exactly zero in exact arithmetic."""
    return float(np.linalg.norm((state.Y - state.prev_grad).mean(axis=0)))


def run(obj: Objective, net: Network, scheme: CompressionScheme, hp: HyperParams, mode: str,
        seed: int, x_star: np.ndarray | None = None, f_star: float | None = None,
        test_data: tuple[np.ndarray, np.ndarray] | None = None,
        state0: SolverState | None = None) -> list[RoundRecord]:
    """Iterate `step` for T rounds (or until the mean-gradient norm reaches tol > 0).

    Returns one record per round including t = 0. A supplied `state0` overrides the
    seeded initialization (the operator substreams still come from `seed`).
    """
    if mode == MODE_UNCOMPRESSED_GIANT:
        scheme = make_scheme(IDENTITY, obj.p)
    if x_star is None:
        x_star = baseline_optimum(obj)
    if f_star is None:
        f_star = obj.value(x_star)
    state = state0.copy() if state0 is not None else init_state(obj, net, hp, seed)
    rngs_x = agent_streams(seed, _STREAM_X, net.n)
    rngs_y = agent_streams(seed, _STREAM_Y, net.n)

    records = [_record(state, obj, x_star, f_star, test_data, StepInfo(0, 0.0, 0.0))]
    for _ in range(hp.T):
        if hp.tol > 0 and float(np.linalg.norm(state.prev_grad.mean(axis=0))) <= hp.tol:
            break
        info = step(state, obj, net, scheme, hp, mode, rngs_x, rngs_y)
        records.append(_record(state, obj, x_star, f_star, test_data, info))
    return records


def _record(state: SolverState, obj: Objective, x_star: np.ndarray, f_star: float,
            test_data, info: StepInfo) -> RoundRecord:
    xbar = state.X.mean(axis=0)
    residual = obj.value(xbar) - f_star
    acc = None
    if test_data is not None:
        U, v = test_data
        pred = np.where(U @ xbar >= 0.0, 1.0, -1.0)
        acc = float(np.mean(pred == v))
    return RoundRecord(t=state.t, bits_cum=state.bits_cum,
                       errors=measure_errors(state, obj, x_star),
                       residual=residual, accuracy=acc,
                       op_err_x=info.op_err_x, op_err_y=info.op_err_y)


def baseline_optimum(obj: Objective) -> np.ndarray:
    """Closed form for ridge, centralized damped Newton for logistic."""
    from .objective import RIDGE, centralized_newton, ridge_closed_form_optimum

    if obj.kind == RIDGE:
        return ridge_closed_form_optimum(obj)
    x, _ = centralized_newton(obj, np.zeros(obj.p), tol=1e-12, max_iter=500)
    return x


def network_giant_reference(obj: Objective, net: Network, hp: HyperParams, seed: int,
                            state0: SolverState | None = None) -> list[np.ndarray]:
    """Directly coded uncompressed reference: X <- Wtilde X - eta D, Y <- Wtilde Y + dG.

    Wtilde = (1-gamma) I + gamma W. Used to verify that identity compression recovers
    plain weighted averaging; returns the sequence of X iterates including X(0).
    """
    state = state0.copy() if state0 is not None else init_state(obj, net, hp, seed)
    Wt = (1.0 - hp.gamma) * np.eye(net.n) + hp.gamma * net.W
    X, Y, g = state.X, state.Y, state.prev_grad
    out = [X.copy()]
    for t in range(hp.T):
        D = newton_directions(X, Y, obj, t)
        X_new = Wt @ X - hp.eta * D
        g_new = obj.grad_stack(X_new)
        Y = Wt @ Y + g_new - g
        X, g = X_new, g_new
        out.append(X.copy())
    return out
