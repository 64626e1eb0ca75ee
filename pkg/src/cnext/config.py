"""Experiment configuration: JSON file with nested blocks, defaults mirroring the tuned runs."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from .compress import ALL_KINDS
from .solver import HyperParams, MODES, MODE_CNEXT

COVTYPE_PATH_ENV = "CNEXT_COVTYPE_PATH"


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; message carries the offending field path."""


# tuned step sizes for the synthetic ridge benchmark, by scheme
RIDGE_ETA = {"qnbbq": 0.0095, "randomk": 0.0012, "topk": 0.006, "qnormsigned": 0.021}
RIDGE_DEFAULTS = {"lambda": 0.5, "gamma": 0.6, "alpha": 1.0, "T": 5000}

# tuned (gamma, eta) for the binary-classification benchmark, by (scheme, topology)
LOGISTIC_GAMMA_ETA = {
    ("qnbbq", "ring"): (0.35, 0.093), ("qnbbq", "expander"): (0.20, 0.09),
    ("topk", "ring"): (0.40, 0.098), ("topk", "expander"): (0.21, 0.08),
    ("qnormsigned", "ring"): (0.35, 0.095), ("qnormsigned", "expander"): (0.30, 0.095),
}
LOGISTIC_DEFAULTS = {"lambda": 0.1, "alpha": 0.5, "T": 1000}


@dataclass(frozen=True)
class DataConfig:
    source: str  # "synthetic" | "covtype"
    n_samples: int = 500
    p: int = 20
    noise_std: float = 0.1
    path: str | None = None
    p_reduced: int = 10


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: str  # "ridge" | "logistic"
    lam: float
    data: DataConfig


@dataclass(frozen=True)
class NetworkConfig:
    kind: str  # "ring" | "expander" | "custom"
    n: int
    degree: int | None = None
    adjacency: list | None = None  # for "custom"


@dataclass(frozen=True)
class SchemeConfig:
    kind: str
    b: int = 2
    k: int | None = None


@dataclass(frozen=True)
class Variant:
    name: str
    mode: str
    scheme: SchemeConfig
    eta: float | None = None
    gamma: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    objective: ObjectiveConfig
    network: NetworkConfig
    scheme: SchemeConfig
    hyperparams: HyperParams
    mode: str = MODE_CNEXT
    seed: int = 42
    seeds: tuple[int, ...] | None = None
    output_dir: str = "results/run"
    variants: tuple[Variant, ...] = ()
    tau_x: float | None = None
    tau_y: float | None = None
    eps: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        d = {
            "objective": {"kind": self.objective.kind, "lambda": self.objective.lam,
                          "data": vars(self.objective.data).copy()},
            "network": {"kind": self.network.kind, "n": self.network.n,
                        "degree": self.network.degree},
            "scheme": {"kind": self.scheme.kind, "b": self.scheme.b, "k": self.scheme.k},
            "hyperparams": {"eta": self.hyperparams.eta, "gamma": self.hyperparams.gamma,
                            "alpha_x": self.hyperparams.alpha_x, "alpha_y": self.hyperparams.alpha_y,
                            "T": self.hyperparams.T, "tol": self.hyperparams.tol},
            "mode": self.mode, "seed": self.seed,
            "seeds": list(self.seeds) if self.seeds else None,
            "output_dir": self.output_dir,
        }
        if self.variants:
            d["compare"] = {"variants": [
                {"name": v.name, "mode": v.mode,
                 "scheme": {"kind": v.scheme.kind, "b": v.scheme.b, "k": v.scheme.k},
                 "eta": v.eta, "gamma": v.gamma} for v in self.variants]}
        if self.eps is not None or self.tau_x is not None or self.tau_y is not None:
            d["theory"] = {"tau_x": self.tau_x, "tau_y": self.tau_y,
                           "eps": list(self.eps) if self.eps else None}
        return d


def _req(block: dict, key: str, path: str):
    if key not in block or block[key] is None:
        raise ConfigError(f"missing required field {path}.{key}")
    return block[key]


def _opt(block: dict, key: str, default):
    v = block.get(key)
    return default if v is None else v


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate and fill defaults; raises ConfigError with the offending field path."""
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be an object")
    try:
        obj_raw = _req(raw, "objective", "$")
        kind = _req(obj_raw, "kind", "objective")
        if kind not in ("ridge", "logistic"):
            raise ConfigError(f"objective.kind must be ridge|logistic, got {kind!r}")
        defaults = RIDGE_DEFAULTS if kind == "ridge" else LOGISTIC_DEFAULTS
        lam = float(_opt(obj_raw, "lambda", defaults["lambda"]))
        data_raw = _opt(obj_raw, "data", {})
        source = _opt(data_raw, "source", "synthetic" if kind == "ridge" else "covtype")
        if source not in ("synthetic", "covtype"):
            raise ConfigError(f"objective.data.source must be synthetic|covtype, got {source!r}")
        if kind == "logistic" and source == "synthetic":
            raise ConfigError("objective.data.source: the synthetic generator produces real "
                              "targets; the logistic objective needs covtype")
        path = data_raw.get("path") or os.environ.get(COVTYPE_PATH_ENV)
        data = DataConfig(source=source,
                          n_samples=int(_opt(data_raw, "n_samples", 500)),
                          p=int(_opt(data_raw, "p", 20 if source == "synthetic" else 10)),
                          noise_std=float(_opt(data_raw, "noise_std", 0.1)),
                          path=path,
                          p_reduced=int(_opt(data_raw, "p_reduced", 10)))
        objective = ObjectiveConfig(kind=kind, lam=lam, data=data)

        net_raw = _req(raw, "network", "$")
        net_kind = _req(net_raw, "kind", "network")
        if net_kind not in ("ring", "expander", "custom"):
            raise ConfigError(f"network.kind must be ring|expander|custom, got {net_kind!r}")
        network = NetworkConfig(kind=net_kind, n=int(_req(net_raw, "n", "network")),
                                degree=(int(net_raw["degree"]) if net_raw.get("degree") else None),
                                adjacency=net_raw.get("adjacency"))
        if net_kind == "expander" and network.degree is None:
            raise ConfigError("network.degree is required for the expander topology")

        scheme = _parse_scheme(_req(raw, "scheme", "$"), "scheme")
        p_eff = data.p if source == "synthetic" else data.p_reduced
        if scheme.k is not None and scheme.k > p_eff:
            raise ConfigError(f"scheme.k={scheme.k} exceeds problem dimension p={p_eff}")

        hp_raw = _opt(raw, "hyperparams", {})
        eta = hp_raw.get("eta")
        gamma = hp_raw.get("gamma")
        if kind == "ridge":
            if eta is None:
                eta = RIDGE_ETA.get(scheme.kind)
            if gamma is None:
                gamma = defaults["gamma"]
        else:
            key = (scheme.kind, net_kind)
            if key in LOGISTIC_GAMMA_ETA:
                g0, e0 = LOGISTIC_GAMMA_ETA[key]
                gamma = g0 if gamma is None else gamma
                eta = e0 if eta is None else eta
        if eta is None:
            raise ConfigError(f"hyperparams.eta is required (no tuned default for scheme {scheme.kind!r})")
        if gamma is None:
            raise ConfigError("hyperparams.gamma is required for this objective/scheme combination")
        alpha_def = defaults["alpha"]
        try:
            hyper = HyperParams(eta=float(eta), gamma=float(gamma),
                                alpha_x=float(_opt(hp_raw, "alpha_x", alpha_def)),
                                alpha_y=float(_opt(hp_raw, "alpha_y", alpha_def)),
                                T=int(_opt(hp_raw, "T", defaults["T"])),
                                tol=float(_opt(hp_raw, "tol", 0.0)))
        except ValueError as exc:
            raise ConfigError(f"hyperparams: {exc}") from exc

        mode = _opt(raw, "mode", MODE_CNEXT)
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        seeds = raw.get("seeds")
        variants = []
        for i, v in enumerate(_opt(raw, "compare", {}).get("variants", [])):
            vscheme = _parse_scheme(_req(v, "scheme", f"compare.variants[{i}]"), f"compare.variants[{i}].scheme")
            vmode = _opt(v, "mode", MODE_CNEXT)
            if vmode not in MODES:
                raise ConfigError(f"compare.variants[{i}].mode invalid: {vmode!r}")
            variants.append(Variant(name=_opt(v, "name", f"{vmode}:{vscheme.kind}"),
                                    mode=vmode, scheme=vscheme,
                                    eta=(float(v["eta"]) if v.get("eta") is not None else None),
                                    gamma=(float(v["gamma"]) if v.get("gamma") is not None else None)))
        theory_raw = _opt(raw, "theory", {})
        eps = theory_raw.get("eps")
        if eps is not None:
            eps = tuple(float(e) for e in eps)
            if len(eps) != 5 or any(e <= 0 for e in eps):
                raise ConfigError("theory.eps must be 5 positive reals")
        return ExperimentConfig(
            objective=objective, network=network, scheme=scheme, hyperparams=hyper,
            mode=mode, seed=int(_opt(raw, "seed", 42)),
            seeds=tuple(int(s) for s in seeds) if seeds else None,
            output_dir=str(_opt(raw, "output_dir", "results/run")),
            variants=tuple(variants),
            tau_x=theory_raw.get("tau_x"), tau_y=theory_raw.get("tau_y"), eps=eps)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc


def _parse_scheme(raw: dict, path: str) -> SchemeConfig:
    kind = _req(raw, "kind", path)
    if kind not in ALL_KINDS:
        raise ConfigError(f"{path}.kind must be one of {ALL_KINDS}, got {kind!r}")
    k = raw.get("k")
    if kind in ("randomk", "topk") and k is None:
        raise ConfigError(f"{path}.k is required for {kind}")
    return SchemeConfig(kind=kind, b=int(_opt(raw, "b", 2)), k=(int(k) if k is not None else None))


def load_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    """Read the JSON config file and apply flat CLI overrides (flags win over file values)."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: line {exc.lineno}, col {exc.colno}: {exc.msg}") from exc
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        block = raw
        *parents, leaf = key.split(".")
        for part in parents:
            block = block.setdefault(part, {})
        block[leaf] = value
    return parse_config(raw)
