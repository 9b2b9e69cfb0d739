import json

import numpy as np

from momentode.cli import main
from momentode.data import read_csv


def _write_config(tmp_path, config, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


def _run(args):
    return main([str(a) for a in args])


def test_unknown_config_key_is_schema_violation(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"study": "logistic_independent", "bogus": 1})
    code = _run(["generate", "--config", cfg, "--out", tmp_path])
    err = json.loads(capsys.readouterr().err)
    assert code == 2 and err["error"] == "config"


def test_missing_config_file(tmp_path, capsys):
    code = _run(["generate", "--config", tmp_path / "absent.json", "--out", tmp_path])
    assert code == 2


def test_missing_data_file_exit_code(tmp_path, capsys):
    cfg = _write_config(
        tmp_path,
        {"study": "logistic_independent", "data": str(tmp_path / "no.csv"),
         "task": {"n_starts": 1, "maxfev": 10}},
    )
    code = _run(["fit", "--config", cfg, "--out", tmp_path])
    err = json.loads(capsys.readouterr().err)
    assert code == 3 and err["error"] == "missing_file"


def test_missing_copula_table_exit_code(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"study": "nonlinear_two_pool_single",
                                   "task": {"n_grid": 4}})
    code = _run(["density", "--config", cfg, "--out", tmp_path])
    err = json.loads(capsys.readouterr().err)
    assert code == 4 and err["error"] == "copula_table_missing"


def test_generate_then_fit_round_trip(tmp_path, capsys):
    gen_cfg = _write_config(
        tmp_path, {"study": "logistic_independent", "task": {"n_per_time": 5}}, "g.json"
    )
    assert _run(["generate", "--config", gen_cfg, "--seed", 3, "--out", tmp_path]) == 0
    capsys.readouterr()
    data = read_csv(tmp_path / "data.csv")
    assert data.n_total == 40

    fit_cfg = _write_config(
        tmp_path,
        {"study": "logistic_independent", "data": str(tmp_path / "data.csv"),
         "task": {"n_starts": 1, "maxfev": 250}},
        "f.json",
    )
    assert _run(["fit", "--config", fit_cfg, "--out", tmp_path]) == 0
    out = json.loads((tmp_path / "mle.json").read_text())
    assert len(out["xi_hat"]) == 7
    assert set(out) >= {"free_names", "loglik", "config_sha256", "seed"}


def test_density_degenerate_spec_is_spike(tmp_path, capsys):
    dist = {
        "parameters": [
            {"name": "r0", "family": "degenerate", "mu": 50.0},
            {"name": "lam", "family": "degenerate", "mu": 1.0},
            {"name": "R", "family": "degenerate", "mu": 300.0},
        ]
    }
    cfg = _write_config(tmp_path, {
        "model": "logistic",
        "plan": {"times": [4.0], "outputs": [{"raw": 0}]},
        "dist": dist,
        "surrogate": "normal",
        "task": {"n_grid": 101},
    })
    assert _run(["density", "--config", cfg, "--out", tmp_path]) == 0
    rows = [l for l in (tmp_path / "density.csv").read_text().splitlines()
            if not l.startswith("#")][1:]
    ys = np.array([float(r.split(",")[1]) for r in rows])
    pdf = np.array([float(r.split(",")[2]) for r in rows])
    peak = ys[np.argmax(pdf)]
    from momentode.models import Logistic

    r4 = float(np.asarray(Logistic().raw_columns([50.0, 1.0, 300.0], (4.0,))[0])[0])
    assert abs(peak - r4) < 1e-3
    assert np.ptp(ys) < 1.0  # essentially a point mass


def test_density_reruns_byte_identical(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"study": "logistic_independent",
                                   "task": {"n_grid": 41}})
    assert _run(["density", "--config", cfg, "--out", tmp_path / "a"]) == 0
    assert _run(["density", "--config", cfg, "--out", tmp_path / "b"]) == 0
    assert (tmp_path / "a/density.csv").read_bytes() == (
        tmp_path / "b/density.csv"
    ).read_bytes()


def test_copula_table_build_and_reuse(tmp_path, capsys):
    cfg = _write_config(tmp_path, {
        "task": {"n_omega": 5, "n_rho": 9, "quad_n": 64, "forward_n": 15}
    })
    assert _run(["copula-table", "--config", cfg, "--out", tmp_path]) == 0
    capsys.readouterr()
    dens_cfg = _write_config(tmp_path, {
        "study": "nonlinear_two_pool_single",
        "copula_table": str(tmp_path / "copula_table.bin"),
        "task": {"n_grid": 8},
    }, "d.json")
    assert _run(["density", "--config", dens_cfg, "--out", tmp_path]) == 0
    text = (tmp_path / "density.csv").read_text()
    assert text.splitlines()[2] == "time,y1,y2,pdf"


def test_validate_subcommand(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"study": "logistic_independent",
                                   "task": {"n": 4000}})
    assert _run(["validate", "--config", cfg, "--seed", 11, "--out", tmp_path]) == 0
    rep = json.loads((tmp_path / "validate.json").read_text())
    assert rep["n"] == 4000 and rep["seed"] == 11
    assert len(rep["ks"]) == 8
    worst = max(max(abs(z) for z in m["z_mu"]) for m in rep["moments"])
    assert worst < 6.0


def test_profile_subcommand_smoke(tmp_path, capsys):
    gen_cfg = _write_config(
        tmp_path, {"study": "logistic_independent", "task": {"n_per_time": 10}},
        "g.json",
    )
    assert _run(["generate", "--config", gen_cfg, "--seed", 1, "--out", tmp_path]) == 0
    cfg = _write_config(tmp_path, {
        "study": "logistic_independent",
        "data": str(tmp_path / "data.csv"),
        "task": {"params": ["mu_R"], "n_grid": 5, "n_starts": 1,
                 "maxfev": 400, "inner_maxfev": 300},
    }, "p.json")
    assert _run(["profile", "--config", cfg, "--out", tmp_path]) == 0
    payload = json.loads((tmp_path / "profiles.json").read_text())
    prof = payload["profiles"]["mu_R"]
    assert len(prof["grid"]) >= 5
    assert max(prof["values"]) <= 1e-6
    assert (tmp_path / "profile_mu_R.csv").exists()


def test_mcmc_subcommand_smoke(tmp_path, capsys):
    gen_cfg = _write_config(
        tmp_path, {"study": "linear_two_pool", "task": {"n_per_time": 5}}, "g.json"
    )
    assert _run(["generate", "--config", gen_cfg, "--seed", 2, "--out", tmp_path]) == 0
    cfg = _write_config(tmp_path, {
        "study": "linear_two_pool",
        "data": str(tmp_path / "data.csv"),
        "task": {"n_iters": 400, "n_chains": 2},
    }, "m.json")
    assert _run(["mcmc", "--config", cfg, "--out", tmp_path]) == 0
    summary = json.loads((tmp_path / "mcmc_summary.json").read_text())
    assert len(summary["map"]) == 5
    chain = (tmp_path / "chain_0.csv").read_text().splitlines()
    assert chain[0].endswith("logpost")
    assert len(chain) == 401
