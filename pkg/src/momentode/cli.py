"""Command-line pipeline: generate / fit / profile / mcmc / density /
copula-table / validate.

All subcommands read a JSON run config (schema below, unknown keys
rejected) and write machine-readable artifacts into ``--out``.  Every
artifact embeds the config hash and seed; re-running with an identical
config reproduces byte-identical numeric payloads.

Exit codes: 0 success, 2 config/schema violation, 3 missing data file,
4 missing copula table, 1 any other failure.  Failures emit a JSON error
object on stderr.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .data import read_csv, write_csv
from .distributions import DistSpec
from .errors import CopulaTableMissingError, MomentodeError, SpecValidationError
from .inference import (
    SnapshotProblem,
    find_mle,
    mcmc,
    mcmc_map,
    per_time_surrogates,
    profile,
)
from .models import ObservationPlan, ObservedOutput, get_model
from .ode import OdeOptions
from .sampling import generate_snapshot_data, oracle_report
from .studies import STUDIES, get_study
from .surrogates import CopulaTable, build_copula_table

_TASK_PROPS = {
    "n_per_time": {"type": "integer", "minimum": 1},
    "n_starts": {"type": "integer", "minimum": 1},
    "maxfev": {"type": "integer", "minimum": 1},
    "inner_maxfev": {"type": "integer", "minimum": 1},
    "params": {"type": ["array", "string"]},
    "n_grid": {"type": "integer", "minimum": 2},
    "n_iters": {"type": "integer", "minimum": 1},
    "n_chains": {"type": "integer", "minimum": 1},
    "burn": {"type": "number", "minimum": 0, "maximum": 0.99},
    "n": {"type": "integer", "minimum": 10},
    "ks_times": {"type": "array"},
    "lo": {"type": ["array", "number"]},
    "hi": {"type": ["array", "number"]},
    "n_omega": {"type": "integer", "minimum": 2},
    "n_rho": {"type": "integer", "minimum": 3},
    "quad_n": {"type": "integer", "minimum": 16},
    "forward_n": {"type": "integer", "minimum": 5},
    "rank_tol": {"type": "number"},
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "study": {"type": "string", "enum": sorted(STUDIES)},
        "surrogate": {"type": "string", "enum": ["normal", "gamma"]},
        "model": {"type": "string"},
        "plan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "times": {"type": "array", "items": {"type": "number"}},
                "outputs": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "raw": {"type": "integer"},
                            "noise": {"type": ["string", "null"]},
                            "noise_param": {"type": ["string", "null"]},
                        },
                    },
                },
            },
            "required": ["times", "outputs"],
        },
        "dist": {"type": "object"},
        "bounds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"lo": {"type": "array"}, "hi": {"type": "array"}},
            "required": ["lo", "hi"],
        },
        "xi": {"type": "array", "items": {"type": "number"}},
        "data": {"type": "string"},
        "copula_table": {"type": "string"},
        "ode": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rtol": {"type": "number"},
                "atol": {"type": "number"},
                "fixed_steps": {"type": ["integer", "null"]},
            },
        },
        "task": {
            "type": "object",
            "additionalProperties": False,
            "properties": _TASK_PROPS,
        },
    },
}


def _config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _load_config(path):
    import jsonschema

    try:
        with open(path) as fh:
            config = json.load(fh)
    except FileNotFoundError:
        raise SpecValidationError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise SpecValidationError(f"config is not valid JSON: {e}")
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise SpecValidationError(f"config schema violation: {e.message}")
    return config


def _build_problem(config):
    surrogate = config.get("surrogate")
    table = None
    if "copula_table" in config:
        table = CopulaTable.load(config["copula_table"])
    if "study" in config:
        kwargs = {}
        if surrogate:
            kwargs["surrogate"] = surrogate
        study = get_study(config["study"], **kwargs)
        problem = study.problem
        if table is not None:
            problem.copula_table = table
        bounds = study.bounds
    else:
        for key in ("model", "plan", "dist"):
            if key not in config:
                raise SpecValidationError(
                    f"config needs either 'study' or explicit '{key}'"
                )
        plan = ObservationPlan(
            times=tuple(config["plan"]["times"]),
            outputs=tuple(
                ObservedOutput(
                    raw=o.get("raw", 0),
                    noise=o.get("noise"),
                    noise_param=o.get("noise_param"),
                )
                for o in config["plan"]["outputs"]
            ),
        )
        ode = OdeOptions(**config.get("ode", {}))
        problem = SnapshotProblem(
            get_model(config["model"]),
            plan,
            DistSpec.from_dict(config["dist"]),
            surrogate or "gamma",
            table,
            ode,
        )
        bounds = None
        if "bounds" in config:
            bounds = (
                np.asarray(config["bounds"]["lo"], float),
                np.asarray(config["bounds"]["hi"], float),
            )
    if "bounds" in config:
        bounds = (
            np.asarray(config["bounds"]["lo"], float),
            np.asarray(config["bounds"]["hi"], float),
        )
    return problem, bounds


def _xi(config, problem):
    if "xi" in config:
        return np.asarray(config["xi"], float)
    return problem.xi_true()


def _require_bounds(bounds):
    if bounds is None:
        raise SpecValidationError("this command needs 'bounds' (or a named study)")
    return bounds


def _load_data(config):
    if "data" not in config:
        raise SpecValidationError("this command needs a 'data' CSV path")
    path = Path(config["data"])
    if not path.exists():
        raise FileNotFoundError(f"data file not found: {path}")
    return read_csv(path)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not JSON-serialisable: {type(o)}")


def _write_json(path, payload, config, seed):
    payload = dict(payload)
    payload["config_sha256"] = _config_hash(config)
    payload["seed"] = seed
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


# -- subcommands -------------------------------------------------------------


def _cmd_generate(config, args, out):
    problem, _ = _build_problem(config)
    n = config.get("task", {}).get("n_per_time", 10)
    data = generate_snapshot_data(problem, _xi(config, problem), n, args.seed)
    path = out / "data.csv"
    write_csv(path, data, header_comments=[
        f"config_sha256={_config_hash(config)}", f"seed={args.seed}",
    ])
    print(path)
    return 0


def _cmd_fit(config, args, out):
    problem, bounds = _build_problem(config)
    bounds = _require_bounds(bounds)
    data = _load_data(config)
    task = config.get("task", {})
    init = _xi(config, problem)
    res = find_mle(
        problem, data, init, bounds,
        n_starts=task.get("n_starts", 5), seed=args.seed,
        maxfev=task.get("maxfev"),
    )
    _write_json(out / "mle.json", {
        "free_names": problem.free_names,
        "xi_hat": res.xi,
        "loglik": res.loglik,
        "starts": res.starts,
        "n_eval": res.n_eval,
    }, config, args.seed)
    print(out / "mle.json")
    return 0


def _cmd_profile(config, args, out):
    problem, bounds = _build_problem(config)
    bounds = _require_bounds(bounds)
    data = _load_data(config)
    task = config.get("task", {})
    init = _xi(config, problem)
    res = find_mle(problem, data, init, bounds,
                   n_starts=task.get("n_starts", 5), seed=args.seed,
                   maxfev=task.get("maxfev"))
    params = task.get("params", "all")
    if params == "all":
        params = problem.free_names
    results = {}
    from joblib import Parallel, delayed

    jobs = (
        delayed(profile)(problem, data, res.xi, p, bounds,
                         n_grid=task.get("n_grid", 40),
                         inner_maxfev=task.get("inner_maxfev"))
        for p in params
    )
    for p, pr in zip(params, Parallel(n_jobs=args.threads)(jobs)):
        results[p] = pr
        with open(out / f"profile_{p}.csv", "w") as fh:
            fh.write(f"{p},profile_loglik\n")
            for g, v in zip(pr.grid, pr.values):
                fh.write(f"{float(g)!r},{float(v)!r}\n")
    _write_json(out / "profiles.json", {
        "xi_hat": res.xi,
        "loglik_hat": res.loglik,
        "threshold": -1.9207,
        "profiles": {
            p: {"grid": r.grid, "values": r.values, "ci": list(r.ci),
                "verdict": r.verdict, "failed": r.failed}
            for p, r in results.items()
        },
    }, config, args.seed)
    print(out / "profiles.json")
    return 0


def _cmd_mcmc(config, args, out):
    problem, bounds = _build_problem(config)
    bounds = _require_bounds(bounds)
    data = _load_data(config)
    task = config.get("task", {})
    chains = mcmc(
        problem, data, bounds,
        n_iters=task.get("n_iters", 20000),
        n_chains=task.get("n_chains", 3),
        seed=args.seed, burn=task.get("burn", 0.5),
    )
    names = problem.free_names
    for ch in chains:
        with open(out / f"chain_{ch.chain_index}.csv", "w") as fh:
            fh.write(",".join(names) + ",logpost\n")
            for row, lp in zip(ch.samples, ch.logpost):
                fh.write(",".join(repr(float(v)) for v in row) + f",{lp!r}\n")
    xi_map, l_map = mcmc_map(problem, data, chains, bounds)
    _write_json(out / "mcmc_summary.json", {
        "free_names": names,
        "map": xi_map,
        "map_loglik": l_map,
        "acceptance": {str(ch.chain_index): ch.accept_windows for ch in chains},
        "posterior_mean": np.mean(
            [ch.posterior_samples().mean(axis=0) for ch in chains], axis=0
        ),
        "n_outside": {str(ch.chain_index): ch.n_outside for ch in chains},
    }, config, args.seed)
    print(out / "mcmc_summary.json")
    return 0


def _cmd_density(config, args, out):
    problem, _ = _build_problem(config)
    xi = _xi(config, problem)
    task = config.get("task", {})
    n_grid = task.get("n_grid", 200)
    surs, oms = per_time_surrogates(problem, xi, return_moments=True)
    path = out / "density.csv"
    q = problem.plan.q
    with open(path, "w") as fh:
        fh.write("# config_sha256=%s\n" % _config_hash(config))
        fh.write("# seed=%s\n" % args.seed)
        if q == 1:
            fh.write("time,y,pdf\n")
        else:
            fh.write("time,y1,y2,pdf\n")
        for t, sur, om in zip(problem.plan.times, surs, oms):
            mu = np.atleast_1d(np.asarray(om.mu, float))
            sd = np.sqrt(np.atleast_1d(np.diag(np.atleast_2d(om.Sigma))))
            if q == 1:
                lo = task.get("lo", mu[0] - 5 * sd[0])
                hi = task.get("hi", mu[0] + 5 * sd[0])
                ys = np.linspace(lo, hi, n_grid)
                pdf = np.exp(sur.logpdf(ys))
                for y, p in zip(ys, pdf):
                    fh.write(f"{float(t)!r},{float(y)!r},{float(p)!r}\n")
            else:
                y1 = np.linspace(mu[0] - 4 * sd[0], mu[0] + 4 * sd[0], n_grid)
                y2 = np.linspace(mu[1] - 4 * sd[1], mu[1] + 4 * sd[1], n_grid)
                g1, g2 = np.meshgrid(y1, y2, indexing="ij")
                pts = np.column_stack([g1.ravel(), g2.ravel()])
                pdf = np.exp(sur.logpdf(pts))
                for (a, b), p in zip(pts, pdf):
                    fh.write(f"{float(t)!r},{float(a)!r},{float(b)!r},{float(p)!r}\n")
    print(path)
    return 0


def _cmd_copula_table(config, args, out):
    task = config.get("task", {})
    table = build_copula_table(
        n_omega=task.get("n_omega", 21),
        n_rho=task.get("n_rho", 41),
        quad_n=task.get("quad_n", 400),
        forward_n=task.get("forward_n", 81),
        n_jobs=args.threads,
    )
    path = out / "copula_table.bin"
    table.save(path)
    print(path)
    return 0


def _cmd_validate(config, args, out):
    problem, _ = _build_problem(config)
    task = config.get("task", {})
    report = oracle_report(
        problem, _xi(config, problem), task.get("n", 100_000), args.seed,
        ks_times=task.get("ks_times"),
    )
    _write_json(out / "validate.json", report, config, args.seed)
    print(out / "validate.json")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "fit": _cmd_fit,
    "profile": _cmd_profile,
    "mcmc": _cmd_mcmc,
    "density": _cmd_density,
    "copula-table": _cmd_copula_table,
    "validate": _cmd_validate,
}


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="momentode",
        description="Moment-matched surrogate inference for random-parameter ODE models",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run config")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", default=".", help="output directory")
    args = parser.parse_args(argv)

    try:
        config = _load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](config, args, out)
    except SpecValidationError as e:
        return _fail(2, "config", str(e))
    except CopulaTableMissingError as e:
        return _fail(4, "copula_table_missing", str(e))
    except FileNotFoundError as e:
        return _fail(3, "missing_file", str(e))
    except MomentodeError as e:
        return _fail(1, type(e).__name__, str(e))


if __name__ == "__main__":
    sys.exit(main())
