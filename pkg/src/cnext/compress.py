"""Compression operators and the stateful difference-compression round.

Four concrete operators plus identity. Each scheme carries the contract constant C
(E||Q(x) - x||^2 <= C ||x||^2), a scaling r > 0 and a contraction factor delta in (0, 1]
such that E||Q(x)/r - x||^2 <= (1 - delta) ||x||^2, and a deterministic per-vector wire
cost in bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IDENTITY = "identity"
QNBBQ = "qnbbq"  # q-norm b-bit dithered quantizer, q = inf
RANDOMK = "randomk"
TOPK = "topk"
QNORMSIGNED = "qnormsigned"  # q-norm signed compression, q = inf

ALL_KINDS = (IDENTITY, QNBBQ, RANDOMK, TOPK, QNORMSIGNED)


@dataclass(frozen=True)
class CompressionScheme:
    kind: str
    b: int | None = None  # bit depth (qnbbq)
    k: int | None = None  # kept coordinates (randomk / topk)
    q: float = np.inf  # norm index; only inf is implemented
    C: float = 0.0
    r: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.C < 0 or self.r <= 0 or not (0 < self.delta <= 1):
            raise ValueError(f"invalid scheme constants C={self.C}, r={self.r}, delta={self.delta}")

    def label(self) -> str:
        if self.kind == QNBBQ:
            return f"qnbbq(b={self.b})"
        if self.kind in (RANDOMK, TOPK):
            return f"{self.kind}(k={self.k})"
        return self.kind


def bits_per_vector(scheme: CompressionScheme, p: int) -> int:
    """Wire cost of transmitting one compressed p-vector.

    Deterministic by design: Random-k charges for k coordinates (its expected count)
    so cumulative bit counts depend only on (scheme, p, n, T).
    """
    log2p = (p - 1).bit_length()  # ceil(log2 p), 0 for p = 1
    if scheme.kind == IDENTITY:
        return 64 * p
    if scheme.kind == QNBBQ:
        return (1 + scheme.b) * p
    if scheme.kind == RANDOMK:
        return (32 + log2p) * scheme.k
    if scheme.kind == TOPK:
        return (64 + log2p) * scheme.k
    if scheme.kind == QNORMSIGNED:
        return p + 32
    raise ValueError(scheme.kind)


def compress_vector(scheme: CompressionScheme, x: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Apply the operator to one vector; returns (Q(x), bit cost).

    All randomness (dither for the quantizer, the Bernoulli mask for Random-k) is drawn
    from `rng` only. Zero input maps to zero for every scheme.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("compress_vector: input has non-finite entries")
    p = x.shape[-1]
    bits = bits_per_vector(scheme, p)

    if scheme.kind == IDENTITY:
        return x.copy(), bits

    if scheme.kind == QNBBQ:
        s = np.max(np.abs(x))
        if s == 0.0:  # the formula divides by ||x||_inf
            return np.zeros_like(x), bits
        half_levels = 2.0 ** (scheme.b - 1)
        u = rng.uniform(0.0, 1.0, size=x.shape)
        levels = np.floor(half_levels * np.abs(x) / s + u)
        return (s / half_levels) * np.sign(x) * levels, bits

    if scheme.kind == RANDOMK:
        if scheme.k > p:
            raise ValueError(f"randomk: k={scheme.k} exceeds p={p}")
        mask = rng.random(x.shape) < scheme.k / p
        return x * mask, bits

    if scheme.kind == TOPK:
        if scheme.k > p:
            raise ValueError(f"topk: k={scheme.k} exceeds p={p}")
        # stable sort on -|x| breaks magnitude ties by lowest index
        keep = np.argsort(-np.abs(x), kind="stable")[: scheme.k]
        q = np.zeros_like(x)
        q[keep] = x[keep]
        return q, bits

    if scheme.kind == QNORMSIGNED:
        s = np.max(np.abs(x))
        if s == 0.0:
            return np.zeros_like(x), bits
        return s * np.sign(x), bits

    raise ValueError(scheme.kind)


def verify_contract(scheme: CompressionScheme, samples: list[np.ndarray], rng: np.random.Generator,
                    n_draws: int = 10_000) -> float:
    """Measured contract constant: max over samples of empirical E||Q(x) - x||^2 / ||x||^2."""
    worst = 0.0
    for x in samples:
        x = np.asarray(x, dtype=float)
        nx2 = float(x @ x)
        if nx2 == 0.0:
            raise ValueError("verify_contract: samples must be nonzero")
        draws = 1 if _is_deterministic(scheme) else n_draws
        acc = 0.0
        for _ in range(draws):
            q, _ = compress_vector(scheme, x, rng)
            d = q - x
            acc += float(d @ d)
        worst = max(worst, acc / draws / nx2)
    return worst


def measure_scaled_contraction(scheme: CompressionScheme, samples: list[np.ndarray],
                               rng: np.random.Generator, n_draws: int = 10_000) -> float:
    """Measured (1 - delta): max over samples of empirical E||Q(x)/r - x||^2 / ||x||^2."""
    worst = 0.0
    for x in samples:
        x = np.asarray(x, dtype=float)
        nx2 = float(x @ x)
        if nx2 == 0.0:
            raise ValueError("measure_scaled_contraction: samples must be nonzero")
        draws = 1 if _is_deterministic(scheme) else n_draws
        acc = 0.0
        for _ in range(draws):
            q, _ = compress_vector(scheme, x, rng)
            d = q / scheme.r - x
            acc += float(d @ d)
        worst = max(worst, acc / draws / nx2)
    return worst


def _is_deterministic(scheme: CompressionScheme) -> bool:
    return scheme.kind in (IDENTITY, TOPK, QNORMSIGNED)


def make_scheme(kind: str, p: int, b: int = 2, k: int | None = None,
                measured_C: float | None = None, rng: np.random.Generator | None = None,
                n_samples: int = 32, n_draws: int = 2_000) -> CompressionScheme:
    """Build a scheme with its (C, r, delta) constants.

    Random-k / Top-k carry closed-form constants (C = 1 - k/p, delta = k/p, r = 1).
    The quantizer and norm-signed schemes have no published constants, so C is measured
    on standard-normal samples unless supplied: the unbiased quantizer then scales with
    r = 1 + C (delta = 1/(1+C)); norm-signed uses the worst-case scaling r = p, delta = 1/p.
    """
    if kind == IDENTITY:
        return CompressionScheme(IDENTITY, C=0.0, r=1.0, delta=1.0)
    if kind == RANDOMK:
        if k is None or not (1 <= k <= p):
            raise ValueError(f"randomk needs 1 <= k <= p, got k={k}, p={p}")
        return CompressionScheme(RANDOMK, k=k, C=1.0 - k / p, r=1.0, delta=k / p)
    if kind == TOPK:
        if k is None or not (1 <= k <= p):
            raise ValueError(f"topk needs 1 <= k <= p, got k={k}, p={p}")
        return CompressionScheme(TOPK, k=k, C=1.0 - k / p, r=1.0, delta=k / p)
    if kind == QNBBQ:
        if measured_C is None:
            probe = CompressionScheme(QNBBQ, b=b, C=1.0, r=1.0, delta=1.0)
            measured_C = _measure_C(probe, p, rng, n_samples, n_draws)
        return CompressionScheme(QNBBQ, b=b, C=measured_C, r=1.0 + measured_C,
                                 delta=1.0 / (1.0 + measured_C))
    if kind == QNORMSIGNED:
        if measured_C is None:
            probe = CompressionScheme(QNORMSIGNED, C=1.0, r=1.0, delta=1.0)
            measured_C = _measure_C(probe, p, rng, n_samples, n_draws)
        return CompressionScheme(QNORMSIGNED, C=measured_C, r=float(p), delta=1.0 / p)
    raise ValueError(f"unknown scheme kind {kind!r}")


def _measure_C(probe: CompressionScheme, p: int, rng: np.random.Generator | None,
               n_samples: int, n_draws: int) -> float:
    rng = np.random.default_rng(0) if rng is None else rng
    samples = [rng.standard_normal(p) for _ in range(n_samples)]
    return verify_contract(probe, samples, rng, n_draws=n_draws)


@dataclass
class CompressState:
    """Auxiliary compression memory for one stream: H and its neighbor-weighted copy H^w.

    Invariant (given Hw(0) = W H(0)): Hw = W H at every round, up to roundoff.
    """

    H: np.ndarray
    Hw: np.ndarray
    alpha: float

    @classmethod
    def init(cls, H0: np.ndarray, W: np.ndarray, alpha: float) -> "CompressState":
        if not (alpha > 0):
            raise ValueError(f"alpha must be positive, got {alpha}")
        H0 = np.asarray(H0, dtype=float).copy()
        return cls(H=H0, Hw=W @ H0, alpha=alpha)


@dataclass(frozen=True)
class CompressedRound:
    """Outputs of one Compress call: estimates, their weighted averages, the wire payload."""

    Zhat: np.ndarray
    Zhat_w: np.ndarray
    Q: np.ndarray
    bits: int


def compress_round(state: CompressState, Z: np.ndarray, scheme: CompressionScheme,
                   W: np.ndarray, rngs: list[np.random.Generator]) -> CompressedRound:
    """One round of difference compression for an n x p stream.

    Encode Q = C(Z - H) row-wise with per-agent randomness, form the estimates
    Zhat = Q + H and Zhat_w = Hw + W Q, then mix the memories
    H <- (1-alpha) H + alpha Zhat and Hw <- (1-alpha) Hw + alpha Zhat_w.
    Mutates `state` and returns the round outputs; bits = n * per-vector cost.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.shape != state.H.shape:
        raise ValueError(f"shape mismatch: Z {Z.shape} vs state {state.H.shape}")
    n = Z.shape[0]
    Q = np.empty_like(Z)
    bits = 0
    for i in range(n):
        Q[i], row_bits = compress_vector(scheme, Z[i] - state.H[i], rngs[i])
        bits += row_bits
    Zhat = Q + state.H
    Zhat_w = state.Hw + W @ Q
    a = state.alpha
    state.H = (1.0 - a) * state.H + a * Zhat
    state.Hw = (1.0 - a) * state.Hw + a * Zhat_w
    return CompressedRound(Zhat=Zhat, Zhat_w=Zhat_w, Q=Q, bits=bits)


def agent_streams(seed: int, stream: int, n: int) -> list[np.random.Generator]:
    """Independent per-agent generators for one stream, split off a single root seed.

    Counter-based spawn keys make the draws identical under any execution schedule:
    agent i of stream s always sees the substream (s, i) of the root seed.
    """
    return [np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, i))))
            for i in range(n)]
