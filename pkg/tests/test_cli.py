import json
import os

import numpy as np
import pytest

from cnext.cli import main

BASE = {
    "objective": {"kind": "ridge", "lambda": 0.5,
                  "data": {"source": "synthetic", "n_samples": 50, "p": 4}},
    "network": {"kind": "ring", "n": 5},
    "scheme": {"kind": "randomk", "k": 2},
    "hyperparams": {"eta": 0.002, "gamma": 0.6, "alpha_x": 0.5, "alpha_y": 0.5, "T": 10},
    "mode": "cnext",
    "seed": 42,
}


def write_config(tmp_path, name="config.json", **updates):
    cfg = json.loads(json.dumps(BASE))
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    cfg.setdefault("output_dir", str(tmp_path / "out"))
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path), cfg["output_dir"]


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


def test_run_writes_trace_and_manifest(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["run", "-c", cfg]) == 0
    header, rows = read_csv(os.path.join(out, "trace.csv"))
    assert header == ["t", "bits_cum", "opt_err", "cons_err", "gt_err",
                      "comp_x_err", "comp_y_err", "residual", "accuracy"]
    assert len(rows) == 11
    assert rows[0][0] == "0" and rows[0][1] == "0"
    man = json.loads(open(os.path.join(out, "manifest.json")).read())
    assert man["resolved"]["scheme"]["C"] == pytest.approx(0.5)
    assert man["resolved"]["seed"] == 42
    assert "bit_convention" in man


def test_run_t_zero_single_row(tmp_path):
    cfg, out = write_config(tmp_path, hyperparams={"T": 0})
    assert main(["run", "-c", cfg]) == 0
    _, rows = read_csv(os.path.join(out, "trace.csv"))
    assert len(rows) == 1


def test_run_is_byte_deterministic(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["run", "-c", cfg]) == 0
    first = open(os.path.join(out, "trace.csv"), "rb").read()
    assert main(["run", "-c", cfg]) == 0
    second = open(os.path.join(out, "trace.csv"), "rb").read()
    assert first == second


def test_seed_averaging(tmp_path):
    cfg, out = write_config(tmp_path, seeds=[1, 2, 3], hyperparams={"T": 5})
    assert main(["run", "-c", cfg]) == 0
    per_seed = []
    for s in (1, 2, 3):
        _, rows = read_csv(os.path.join(out, f"trace_seed{s}.csv"))
        per_seed.append(np.array([[float(c) for c in r[:8]] for r in rows]))
    _, avg_rows = read_csv(os.path.join(out, "trace.csv"))
    avg = np.array([[float(c) for c in r[:8]] for r in avg_rows])
    recomputed = np.mean(per_seed, axis=0)
    assert np.allclose(avg[:, 2:], recomputed[:, 2:], rtol=1e-12)
    assert np.array_equal(avg[:, 0], per_seed[0][:, 0])


def test_flag_overrides_beat_file_values(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["run", "-c", cfg, "--T", "3", "--scheme", "identity",
                 "--output-dir", str(tmp_path / "o2")]) == 0
    _, rows = read_csv(str(tmp_path / "o2" / "trace.csv"))
    assert len(rows) == 4
    man = json.loads(open(str(tmp_path / "o2" / "manifest.json")).read())
    assert man["resolved"]["scheme"]["kind"] == "identity"


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"network": {"kind": "ring", "n": 5}}))
    assert main(["run", "-c", str(bad)]) == 2
    assert "objective" in capsys.readouterr().err

    cfg, _ = write_config(tmp_path, scheme={"kind": "randomk", "k": 9})
    assert main(["run", "-c", cfg]) == 2

    notjson = tmp_path / "nj.json"
    notjson.write_text("{nope")
    assert main(["run", "-c", str(notjson)]) == 2
    assert "line" in capsys.readouterr().err


def test_divergence_exit_3(tmp_path, capsys):
    cfg, out = write_config(tmp_path, mode="first_order_gt",
                            hyperparams={"eta": 0.9, "T": 300})
    assert main(["run", "-c", cfg]) == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "DivergenceError"
    man = json.loads(open(os.path.join(out, "manifest.json")).read())
    assert man["divergence"]["quantity"] in ("X", "Y", "error vector")


def test_compare_identity_variants_identical(tmp_path):
    variants = [
        {"name": "cnext-id", "mode": "cnext", "scheme": {"kind": "identity"}},
        {"name": "giant", "mode": "uncompressed_giant", "scheme": {"kind": "topk", "k": 2}},
        {"name": "rk", "mode": "cnext", "scheme": {"kind": "randomk", "k": 2}},
    ]
    cfg, out = write_config(tmp_path, compare={"variants": variants},
                            hyperparams={"T": 8, "eta": 0.002, "gamma": 0.6,
                                         "alpha_x": 1.0, "alpha_y": 1.0})
    assert main(["compare", "-c", cfg]) == 0
    header, rows = read_csv(os.path.join(out, "compare.csv"))
    assert header[0] == "variant"
    by_variant = {}
    for r in rows:
        by_variant.setdefault(r[0], []).append(r[1:])
    assert by_variant["cnext-id"] == by_variant["giant"]

    # per-variant bit columns follow the per-scheme wire formulas exactly, for all t
    n, p = 5, 4
    costs = {"cnext-id": 64 * p, "giant": 64 * p, "rk": (32 + 2) * 2}
    for name, rws in by_variant.items():
        for r in rws:
            t, bits = int(r[0]), int(r[1])
            assert bits == 2 * n * costs[name] * t


def test_compare_tolerates_diverging_variant(tmp_path):
    variants = [
        {"name": "newton", "mode": "cnext", "scheme": {"kind": "identity"}},
        {"name": "raw-gt", "mode": "first_order_gt", "scheme": {"kind": "identity"},
         "eta": 0.9},
    ]
    cfg, out = write_config(tmp_path, compare={"variants": variants},
                            hyperparams={"T": 400, "eta": 0.01, "gamma": 0.6,
                                         "alpha_x": 1.0, "alpha_y": 1.0})
    assert main(["compare", "-c", cfg]) == 0
    man = json.loads(open(os.path.join(out, "manifest.json")).read())
    assert man["variants"]["raw-gt"]["diverged"] is not None
    assert man["variants"]["newton"]["diverged"] is None


def test_theory_report_roundtrips(tmp_path, capsys):
    cfg, _ = write_config(tmp_path, scheme={"kind": "identity"},
                          hyperparams={"eta": 1e-8, "gamma": 0.01, "T": 1,
                                       "alpha_x": 1.0, "alpha_y": 1.0})
    assert main(["theory", "-c", cfg]) == 0
    report = json.loads(capsys.readouterr().out)
    assert np.asarray(report["A"]).shape == (5, 5)
    assert report["rho_A"] < 1
    assert "sufficient_conditions" in report and "pass" in report["sufficient_conditions"]


def test_theory_reports_violations_without_failing(tmp_path, capsys):
    cfg, _ = write_config(tmp_path, scheme={"kind": "identity"},
                          hyperparams={"eta": 5.0, "gamma": 0.5, "T": 1})
    assert main(["theory", "-c", cfg]) == 0
    report = json.loads(capsys.readouterr().out)
    assert "error" in report and "2L" in report["error"]


def test_verify_ops_table_feeds_theory(tmp_path, capsys):
    cfg, out = write_config(tmp_path, scheme={"kind": "qnormsigned"},
                            hyperparams={"eta": 1e-8, "gamma": 0.01, "T": 1,
                                         "alpha_x": 0.2, "alpha_y": 0.2})
    assert main(["verify-ops", "-c", cfg, "--n-samples", "8", "--n-draws", "400"]) == 0
    capsys.readouterr()
    table = json.loads(open(os.path.join(out, "ops_manifest.json")).read())["schemes"]
    assert set(table) == {"identity", "qnbbq", "randomk", "topk", "qnormsigned"}
    assert table["identity"]["C_measured"] == 0.0
    # this config carries k=2, p=4, so the closed form is 1 - k/p = 0.5
    assert table["randomk"]["C_measured"] == pytest.approx(table["randomk"]["C"], abs=0.05)
    assert all(np.isfinite(row["C_measured"]) for row in table.values())

    assert main(["theory", "-c", cfg, "--ops-manifest",
                 os.path.join(out, "ops_manifest.json")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["scheme"]["C"] == pytest.approx(table["qnormsigned"]["C"])
    assert report["scheme"]["delta"] == pytest.approx(table["qnormsigned"]["delta_measured"])


def test_missing_covtype_path_is_config_error(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("CNEXT_COVTYPE_PATH", raising=False)
    cfg, _ = write_config(tmp_path, objective={"kind": "logistic", "lambda": 0.1,
                                               "data": {"source": "covtype"}},
                          hyperparams={"eta": 0.093, "gamma": 0.35, "T": 2})
    assert main(["run", "-c", cfg]) == 2
    assert "covtype" in capsys.readouterr().err
