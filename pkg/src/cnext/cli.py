"""Experiment harness CLI: run / compare / theory / verify-ops.

Every run directory receives a trace CSV (fixed column order) and a JSON manifest
carrying the resolved config, seed, measured scheme constants, and the bit-accounting
convention, enough to reproduce the run bit-exactly.

Exit codes: 0 ok, 2 config error, 3 divergence, 4 io error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .compress import (CompressionScheme, make_scheme, measure_scaled_contraction,
                       verify_contract, ALL_KINDS, QNBBQ, QNORMSIGNED)
from .config import ConfigError, ExperimentConfig, SchemeConfig, load_config
from .data import build_locals, generate_ridge_synthetic, load_covtype, partition_homogeneous
from .graph import build_circulant_expander, build_custom, build_ring, metropolis_hastings_weights
from .objective import logistic_objective, ridge_objective
from .solver import (DivergenceError, HyperParams, NumericalError, RoundRecord,
                     baseline_optimum, run, warn_theory_violations)
from .theory import Theta, TheoryConstants, build_A, check_sufficient_conditions, default_epsilon, spectral_radius

CSV_COLUMNS = ("t", "bits_cum", "opt_err", "cons_err", "gt_err",
               "comp_x_err", "comp_y_err", "residual", "accuracy")
BIT_CONVENTION = "bits_cum counts both transmitted streams (X and Y): 2 * n * per-vector cost per round"

# substream id for operator-constant measurement (0/1 = runtime streams, 2 = init)
_STREAM_MEASURE = 3


class _Experiment:
    """Everything a run needs, assembled once from a config."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        net_cfg = cfg.network
        if net_cfg.kind == "ring":
            topo = build_ring(net_cfg.n)
        elif net_cfg.kind == "expander":
            topo = build_circulant_expander(net_cfg.n, net_cfg.degree)
        else:
            topo = build_custom(np.asarray(net_cfg.adjacency, dtype=bool))
        self.net = metropolis_hastings_weights(topo)

        data_cfg = cfg.objective.data
        if data_cfg.source == "synthetic":
            self.ds = generate_ridge_synthetic(data_cfg.n_samples, data_cfg.p, cfg.seed,
                                               data_cfg.noise_std)
        else:
            if not data_cfg.path:
                raise ConfigError("covtype source needs objective.data.path or $CNEXT_COVTYPE_PATH")
            self.ds = load_covtype(data_cfg.path, data_cfg.p_reduced, cfg.seed, net_cfg.n)
        part = partition_homogeneous(self.ds, net_cfg.n, cfg.seed)
        self.partition = part
        locals_ = build_locals(self.ds, part)
        if cfg.objective.kind == "ridge":
            self.obj = ridge_objective(locals_, cfg.objective.lam)
            self.test_data = None
        else:
            self.obj = logistic_objective(locals_, cfg.objective.lam)
            self.test_data = self.ds.test() if self.ds.test_idx.size else None
        self.scheme = self.build_scheme(cfg.scheme)
        self.x_star = baseline_optimum(self.obj)
        self.f_star = self.obj.value(self.x_star)

    @property
    def p(self) -> int:
        return self.obj.p

    def build_scheme(self, sc: SchemeConfig) -> CompressionScheme:
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(self.cfg.seed, spawn_key=(_STREAM_MEASURE, 0))))
        return make_scheme(sc.kind, self.p, b=sc.b, k=sc.k, rng=rng)

    def manifest(self, hp: HyperParams, mode: str, scheme: CompressionScheme,
                 extra: dict | None = None) -> dict:
        man = {
            "config": self.cfg.to_dict(),
            "resolved": {
                "mode": mode, "seed": self.cfg.seed,
                "hyperparams": {"eta": hp.eta, "gamma": hp.gamma, "alpha_x": hp.alpha_x,
                                "alpha_y": hp.alpha_y, "T": hp.T, "tol": hp.tol},
                "scheme": _scheme_dict(scheme),
                "network": {"n": self.net.n, "rho": self.net.rho, "beta": self.net.beta},
                "objective": {"mu": self.obj.mu, "L": self.obj.L, "kappa": self.obj.kappa,
                              "m_i": self.partition.m_i, "dropped_samples": self.partition.dropped},
                "theory_warnings": warn_theory_violations(hp, self.obj, scheme),
                "data_extras": {k: v for k, v in self.ds.extras.items() if k != "x_hidden"},
            },
            "bit_convention": BIT_CONVENTION,
            "version": __version__,
            "numpy": np.__version__,
        }
        if extra:
            man.update(extra)
        return man


def _scheme_dict(s: CompressionScheme) -> dict:
    return {"kind": s.kind, "b": s.b, "k": s.k, "C": s.C, "r": s.r, "delta": s.delta,
            "label": s.label()}


def atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def records_to_csv(records: list[RoundRecord]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        e = r.errors
        acc = "" if r.accuracy is None else repr(r.accuracy)
        lines.append(",".join((str(r.t), str(r.bits_cum), repr(e.opt), repr(e.cons),
                               repr(e.gt), repr(e.comp_x), repr(e.comp_y),
                               repr(r.residual), acc)))
    return "\n".join(lines) + "\n"


def averaged_csv(per_seed: list[list[RoundRecord]]) -> str:
    lengths = {len(rs) for rs in per_seed}
    if len(lengths) != 1:
        raise ValueError("seed averaging needs equal-length traces (run with tol = 0)")
    lines = [",".join(CSV_COLUMNS)]
    for rows in zip(*per_seed):
        t = rows[0].t
        bits = rows[0].bits_cum
        cols = []
        for getter in (lambda r: r.errors.opt, lambda r: r.errors.cons, lambda r: r.errors.gt,
                       lambda r: r.errors.comp_x, lambda r: r.errors.comp_y,
                       lambda r: r.residual):
            cols.append(repr(float(np.mean([getter(r) for r in rows]))))
        accs = [r.accuracy for r in rows]
        acc = "" if accs[0] is None else repr(float(np.mean(accs)))
        lines.append(",".join((str(t), str(bits), *cols, acc)))
    return "\n".join(lines) + "\n"


def cmd_run(cfg: ExperimentConfig) -> int:
    exp = _Experiment(cfg)
    hp, mode, scheme = cfg.hyperparams, cfg.mode, exp.scheme
    os.makedirs(cfg.output_dir, exist_ok=True)
    seeds = cfg.seeds if cfg.seeds else (cfg.seed,)
    per_seed = []
    try:
        for seed in seeds:
            records = run(exp.obj, exp.net, scheme, hp, mode, seed,
                          x_star=exp.x_star, f_star=exp.f_star, test_data=exp.test_data)
            per_seed.append(records)
            if len(seeds) > 1:
                atomic_write(os.path.join(cfg.output_dir, f"trace_seed{seed}.csv"),
                             records_to_csv(records))
    except (DivergenceError, NumericalError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc),
               "t": exc.t, "quantity": getattr(exc, "quantity", None),
               "agent": getattr(exc, "agent", None)}
        atomic_write(os.path.join(cfg.output_dir, "manifest.json"),
                     json.dumps(exp.manifest(hp, mode, scheme, {"divergence": err}),
                                indent=2, sort_keys=True) + "\n")
        print(json.dumps(err), file=sys.stderr)
        return 3
    csv_text = records_to_csv(per_seed[0]) if len(per_seed) == 1 else averaged_csv(per_seed)
    atomic_write(os.path.join(cfg.output_dir, "trace.csv"), csv_text)
    atomic_write(os.path.join(cfg.output_dir, "manifest.json"),
                 json.dumps(exp.manifest(hp, mode, scheme, {"seeds": list(seeds)}),
                            indent=2, sort_keys=True) + "\n")
    print(f"wrote {os.path.join(cfg.output_dir, 'trace.csv')} "
          f"({len(per_seed[0])} rows per seed, {len(seeds)} seed(s))")
    return 0


def cmd_compare(cfg: ExperimentConfig) -> int:
    if len(cfg.variants) < 2:
        raise ConfigError("compare needs at least 2 variants in compare.variants")
    exp = _Experiment(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    lines = ["variant," + ",".join(CSV_COLUMNS)]
    summary = {}
    for v in cfg.variants:
        scheme = exp.build_scheme(v.scheme)
        hp = HyperParams(eta=v.eta if v.eta is not None else cfg.hyperparams.eta,
                         gamma=v.gamma if v.gamma is not None else cfg.hyperparams.gamma,
                         alpha_x=cfg.hyperparams.alpha_x, alpha_y=cfg.hyperparams.alpha_y,
                         T=cfg.hyperparams.T, tol=cfg.hyperparams.tol)
        entry = {"scheme": _scheme_dict(scheme), "mode": v.mode,
                 "eta": hp.eta, "gamma": hp.gamma, "diverged": None}
        try:
            records = run(exp.obj, exp.net, scheme, hp, v.mode, cfg.seed,
                          x_star=exp.x_star, f_star=exp.f_star, test_data=exp.test_data)
        except (DivergenceError, NumericalError) as exc:
            # a diverging variant is a comparison outcome, not a harness failure
            entry["diverged"] = {"error": type(exc).__name__, "message": str(exc), "t": exc.t}
            records = []
        for r in records:
            e = r.errors
            acc = "" if r.accuracy is None else repr(r.accuracy)
            lines.append(",".join((v.name, str(r.t), str(r.bits_cum), repr(e.opt),
                                   repr(e.cons), repr(e.gt), repr(e.comp_x), repr(e.comp_y),
                                   repr(r.residual), acc)))
        entry["final_residual"] = records[-1].residual if records else None
        summary[v.name] = entry
    atomic_write(os.path.join(cfg.output_dir, "compare.csv"), "\n".join(lines) + "\n")
    atomic_write(os.path.join(cfg.output_dir, "manifest.json"),
                 json.dumps(exp.manifest(cfg.hyperparams, cfg.mode, exp.scheme,
                                         {"variants": summary}), indent=2, sort_keys=True) + "\n")
    print(f"wrote {os.path.join(cfg.output_dir, 'compare.csv')} ({len(cfg.variants)} variants)")
    return 0


def cmd_theory(cfg: ExperimentConfig, ops_manifest: str | None = None) -> int:
    exp = _Experiment(cfg)
    scheme = exp.scheme
    if ops_manifest:
        with open(ops_manifest) as fh:
            table = json.load(fh)["schemes"]
        row = table.get(scheme.kind)
        if row is not None and scheme.kind in (QNBBQ, QNORMSIGNED):
            scheme = make_scheme(scheme.kind, exp.p, b=cfg.scheme.b, k=cfg.scheme.k,
                                 measured_C=row["C"])
            if row.get("delta_measured"):
                scheme = CompressionScheme(scheme.kind, b=scheme.b, k=scheme.k, C=scheme.C,
                                           r=scheme.r, delta=row["delta_measured"])
    hp = cfg.hyperparams
    theta = Theta(eta=hp.eta, gamma=hp.gamma, alpha_x=hp.alpha_x, alpha_y=hp.alpha_y)
    report: dict = {"scheme": _scheme_dict(scheme),
                    "network": {"n": exp.net.n, "rho": exp.net.rho, "beta": exp.net.beta,
                                "rho_tilde": exp.net.rho_tilde(hp.gamma)},
                    "objective": {"mu": exp.obj.mu, "L": exp.obj.L, "kappa": exp.obj.kappa}}
    try:
        tc = TheoryConstants.build(exp.obj.mu, exp.obj.L, exp.net, scheme, theta,
                                   tau_x=cfg.tau_x, tau_y=cfg.tau_y)
        eps = np.asarray(cfg.eps) if cfg.eps is not None else default_epsilon(tc, theta, exp.net.n)
        M = build_A(tc, theta, exp.net.n)
        report["A"] = M.A.tolist()
        report["rho_A"] = spectral_radius(M)
        report["sufficient_conditions"] = check_sufficient_conditions(tc, theta, eps, exp.net.n)
    except ValueError as exc:
        report["error"] = str(exc)  # constraint violations are reported, not fatal
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_verify_ops(cfg: ExperimentConfig, n_samples: int = 32, n_draws: int = 2000) -> int:
    exp = _Experiment(cfg)
    p = exp.p
    rng = np.random.default_rng(cfg.seed)
    samples = [rng.standard_normal(p) for _ in range(n_samples)]
    table = {}
    for kind in ALL_KINDS:
        k = cfg.scheme.k if cfg.scheme.k is not None else min(5, p)
        scheme = make_scheme(kind, p, b=cfg.scheme.b, k=k, rng=rng,
                             n_samples=n_samples, n_draws=n_draws)
        measured_C = verify_contract(scheme, samples, rng, n_draws=n_draws)
        one_minus_delta = measure_scaled_contraction(scheme, samples, rng, n_draws=n_draws)
        table[kind] = dict(_scheme_dict(scheme), C_measured=measured_C,
                           delta_measured=max(0.01, 1.0 - one_minus_delta))
    os.makedirs(cfg.output_dir, exist_ok=True)
    out = {"p": p, "n_samples": n_samples, "n_draws": n_draws, "schemes": table}
    path = os.path.join(cfg.output_dir, "ops_manifest.json")
    atomic_write(path, json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cnext", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "compare", "theory", "verify-ops"):
        sp = sub.add_parser(name)
        sp.add_argument("-c", "--config", required=True, help="JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--eta", type=float)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--T", type=int)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--mode", choices=("cnext", "first_order_gt", "uncompressed_giant"))
        sp.add_argument("--scheme", choices=ALL_KINDS)
        sp.add_argument("--k", type=int)
        sp.add_argument("--b", type=int)
        sp.add_argument("--output-dir")
        if name == "theory":
            sp.add_argument("--ops-manifest", help="reuse measured operator constants")
        if name == "verify-ops":
            sp.add_argument("--n-samples", type=int, default=32)
            sp.add_argument("--n-draws", type=int, default=2000)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {
        "seed": args.seed, "mode": args.mode, "output_dir": args.output_dir,
        "hyperparams.eta": args.eta, "hyperparams.gamma": args.gamma,
        "hyperparams.T": args.T, "hyperparams.tol": args.tol,
        "scheme.kind": args.scheme, "scheme.k": args.k, "scheme.b": args.b,
    }
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        if args.command == "theory":
            return cmd_theory(cfg, ops_manifest=getattr(args, "ops_manifest", None))
        return cmd_verify_ops(cfg, n_samples=args.n_samples, n_draws=args.n_draws)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
