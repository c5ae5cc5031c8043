"""Command-line experiment runner.

Every subcommand accepts ``--config FILE`` (JSON). Flags given on the command
line override values from the file. Exit codes: 0 success, 1 failed
validation or a failed computation, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .amp import TRAJECTORY_CSV_COLUMNS, SideInfo, run_seed
from .io import fmt, parse_grid, write_csv, write_json
from .potential import (PotentialCurve, ThresholdNotFoundError, lambda_from_gamma, gamma_from_lambda,
                        potential_row, statistical_threshold)
from .priors import Prior, PriorKind
from .scalar_channel import QuadratureSpec
from .state_evolution import SE_CSV_COLUMNS, BracketError, algorithmic_threshold, se_csv_row, se_row
from .wishart import (WISHART_CSV_COLUMNS, WishartParams, lambda_from_gamma_v, wishart_csv_row,
                      wishart_row)

SUBCOMMANDS = ("potential-curve", "se-curve", "amp-run", "wishart-curve", "threshold", "validate")

DEFAULTS = {
    "prior": "bernoulli",
    "quad.nodes": 2000,
    "quad.half_width": 10.0,
    "workers": 1,
    "out": "-",
    "seed": 0,
    "seeds": 1,
    "t_max": 200,
    "init": "ones",
    "eps": 1.0,
    "onsager": True,
    "prior_u": "gaussian",
    "rho_u": 1.0,
    "prior_v": "bernoulli_rademacher",
    "alpha": 1.0,
    "kind": "both",
    "level": "quick",
}

# keys that never change the numbers, so they stay out of the CSV echo
_UNECHOED = ("workers", "out", "config")
_SNR_KEYS = ("lambda", "gamma", "w")


class ConfigError(ValueError):
    pass


def _parser() -> tuple[argparse.ArgumentParser, dict[str, set[str]]]:
    p = argparse.ArgumentParser(prog="sparsespike", description="Sparse spiked matrix experiments.")
    p.add_argument("--version", action="version", version=f"sparsespike {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    S = argparse.SUPPRESS

    def common(sp, snr=True):
        sp.add_argument("--config", default=S, help="JSON config file; flags take precedence")
        sp.add_argument("--out", default=S, help="output path ('-' for stdout)")
        sp.add_argument("--workers", type=int, default=S, help="process pool size")
        sp.add_argument("--quad-nodes", dest="quad.nodes", type=int, default=S)
        sp.add_argument("--quad-half-width", dest="quad.half_width", type=float, default=S)
        if snr:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--lambda", dest="lambda", default=S, help="SNR grid min:max:points[:log]")
            g.add_argument("--gamma", default=S, help="grid in the statistical scaling")
            g.add_argument("--w", default=S, help="grid in the algorithmic scaling lam rho^2")

    def prior_flags(sp):
        sp.add_argument("--prior", choices=[k.value for k in PriorKind], default=S)
        sp.add_argument("--rho", default=S, help="sparsity, or a comma list")

    sp = sub.add_parser("potential-curve", help="minimised potential along an SNR grid")
    common(sp)
    prior_flags(sp)

    sp = sub.add_parser("se-curve", help="state-evolution fixed points along an SNR grid")
    common(sp)
    prior_flags(sp)

    sp = sub.add_parser("amp-run", help="AMP on generated instances, one trajectory per seed")
    common(sp)
    prior_flags(sp)
    sp.add_argument("--n", type=int, default=S)
    sp.add_argument("--seeds", type=int, default=S, help="number of seeds")
    sp.add_argument("--seed", type=int, default=S, help="first seed")
    sp.add_argument("--t-max", dest="t_max", type=int, default=S)
    sp.add_argument("--init", choices=["ones", "side-info"], default=S)
    sp.add_argument("--eps", type=float, default=S, help="side-information strength")
    sp.add_argument("--no-onsager", dest="onsager", action="store_false", default=S)

    sp = sub.add_parser("wishart-curve", help="Wishart inf-sup solution along an SNR grid")
    common(sp)
    sp.add_argument("--prior-u", dest="prior_u", choices=[k.value for k in PriorKind], default=S)
    sp.add_argument("--rho-u", dest="rho_u", type=float, default=S)
    sp.add_argument("--prior-v", dest="prior_v", choices=[k.value for k in PriorKind if k.value != "gaussian"],
                    default=S)
    sp.add_argument("--rho-v", dest="rho_v", type=float, default=S)
    sp.add_argument("--alpha", type=float, default=S)

    sp = sub.add_parser("threshold", help="statistical and algorithmic thresholds")
    common(sp, snr=False)
    prior_flags(sp)
    sp.add_argument("--kind", choices=["statistical", "algorithmic", "both"], default=S)

    sp = sub.add_parser("validate", help="oracle checks, JSON report")
    common(sp, snr=False)
    sp.add_argument("--level", choices=["quick", "full"], default=S)
    sp.add_argument("--seed", type=int, default=S)
    keys = {name: {a.dest for a in sp._actions if a.dest not in ("help", "config")}
            for name, sp in sub.choices.items()}
    return p, keys


def _load_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    flat = {}
    for key, val in data.items():
        key = key.replace("-", "_")
        if key == "quad" and isinstance(val, dict):
            flat.update({f"quad.{k}": v for k, v in val.items()})
        elif key == "prior" and isinstance(val, dict):
            flat["prior"] = val.get("kind")
            if "rho" in val:
                flat["rho"] = val["rho"]
        else:
            flat[key] = val
    return flat


def merge_config(command: str, flags: dict, known: set[str]) -> dict:
    """Defaults, then the JSON file, then command-line flags."""
    cfg = {k: v for k, v in DEFAULTS.items() if k in known}
    if "config" in flags:
        data = _load_file(flags["config"])
        unknown = sorted(set(data) - known - {"command"})
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
        if any(k in flags for k in _SNR_KEYS):
            data = {k: v for k, v in data.items() if k not in _SNR_KEYS}
        cfg.update(data)
    cfg.update({k: v for k, v in flags.items() if k != "config"})
    cfg["command"] = command
    return cfg


def _echo(cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k not in _UNECHOED}


def _quad(cfg) -> QuadratureSpec:
    return QuadratureSpec(int(cfg["quad.nodes"]), float(cfg["quad.half_width"]))


def _rhos(cfg) -> list[float]:
    if "rho" not in cfg:
        raise ConfigError("--rho is required")
    rhos = parse_grid(cfg["rho"])
    if any(not (0 < r <= 1) for r in rhos):
        raise ConfigError("rho must lie in (0, 1]")
    return rhos


def _single(values, what):
    if len(values) != 1:
        raise ConfigError(f"{what} takes a single value here")
    return values[0]


def _snr_key(cfg, allowed=("lambda", "gamma", "w")) -> str:
    given = [k for k in ("lambda", "gamma", "w") if k in cfg]
    if len(given) != 1:
        raise ConfigError("supply exactly one of --lambda, --gamma, --w")
    if given[0] not in allowed:
        raise ConfigError(f"--{given[0]} is not available for this command")
    return given[0]


def _lambdas(cfg, rho: float) -> list[float]:
    key = _snr_key(cfg)
    vals = parse_grid(cfg[key])
    if any(v < 0 for v in vals):
        raise ConfigError(f"{key} values must be non-negative")
    if key == "lambda":
        return vals
    if key == "w":
        return [v / rho**2 for v in vals]
    if rho >= 1.0:
        raise ConfigError("the gamma scaling needs rho < 1")
    return [float(lambda_from_gamma(v, rho)) for v in vals]


def _prior(kind, rho=1.0) -> Prior:
    return Prior(PriorKind(kind), rho)


@contextmanager
def _pool(workers: int):
    if int(workers) > 1:
        with ProcessPoolExecutor(max_workers=int(workers)) as ex:
            yield ex
    else:
        yield None


def _mapper(pool):
    return map if pool is None else pool.map


def _emit_csv(cfg, columns, rows):
    out = cfg["out"]
    if out == "-":
        sys.stdout.write(f"# sparsespike {__version__} config={json.dumps(_echo(cfg), sort_keys=True)}\n")
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    else:
        write_csv(out, columns, rows, _echo(cfg), __version__)


def cmd_potential_curve(cfg) -> int:
    quad = _quad(cfg)
    rows = []
    with _pool(cfg["workers"]) as pool:
        for rho in _rhos(cfg):
            prior = _prior(cfg["prior"], rho)
            if not prior.is_discrete or rho >= 1.0:
                raise ConfigError("potential-curve needs a sparse discrete prior with rho < 1")
            gammas = [float(gamma_from_lambda(v, rho)) for v in _lambdas(cfg, rho)]
            if any(b < a for a, b in zip(gammas, gammas[1:])):
                raise ConfigError("the SNR grid must be ascending")
            res = list(_mapper(pool)(potential_row, [prior] * len(gammas), gammas, [quad] * len(gammas)))
            rows.extend(PotentialCurve(rho, res).csv_rows())
    _emit_csv(cfg, PotentialCurve.CSV_COLUMNS, rows)
    return 0


def cmd_se_curve(cfg) -> int:
    quad = _quad(cfg)
    rho = _single(_rhos(cfg), "--rho")
    prior = _prior(cfg["prior"], rho)
    if not prior.is_discrete:
        raise ConfigError("se-curve needs a sparse discrete prior")
    lams = _lambdas(cfg, rho)
    with _pool(cfg["workers"]) as pool:
        res = list(_mapper(pool)(se_row, [prior] * len(lams), lams, [quad] * len(lams)))
    _emit_csv(cfg, SE_CSV_COLUMNS, [se_csv_row(r) for r in res])
    return 0


def _amp_task(args):
    prior, n, lam, seed, t_max, init, quad, onsager = args
    return run_seed(prior, n, lam, seed, t_max, init, quad, onsager)


def cmd_amp_run(cfg) -> int:
    t0 = time.perf_counter()
    quad = _quad(cfg)
    rho = _single(_rhos(cfg), "--rho")
    prior = _prior(cfg["prior"], rho)
    if not prior.is_discrete:
        raise ConfigError("amp-run needs a sparse discrete prior")
    lam = _single(_lambdas(cfg, rho), "the SNR")
    if "n" not in cfg:
        raise ConfigError("--n is required")
    n, n_seeds, first = int(cfg["n"]), int(cfg["seeds"]), int(cfg["seed"])
    if n < 2 or n_seeds < 1 or int(cfg["t_max"]) < 1:
        raise ConfigError("need n >= 2, seeds >= 1 and t_max >= 1")
    if cfg["init"] == "ones":
        if prior.kind is not PriorKind.BERNOULLI:
            raise ConfigError("the all-ones start needs a Bernoulli prior; use --init side-info")
        init = "ones"
    elif cfg["init"] == "side-info":
        init = SideInfo(float(cfg["eps"]))
    else:
        raise ConfigError(f"unknown init {cfg['init']!r}")
    if cfg["out"] == "-":
        raise ConfigError("amp-run needs --out DIR")
    out = Path(cfg["out"])
    seeds = list(range(first, first + n_seeds))
    tasks = [(prior, n, lam, s, int(cfg["t_max"]), init, quad, bool(cfg["onsager"])) for s in seeds]
    with _pool(cfg["workers"]) as pool:
        trajs = list(_mapper(pool)(_amp_task, tasks))
    results = []
    echo = _echo(cfg)
    for seed, tr in zip(seeds, trajs):
        path = out / f"trajectory_seed{seed}.csv"
        write_csv(path, TRAJECTORY_CSV_COLUMNS, tr.csv_rows(), {**echo, "seed": seed}, __version__)
        fin = tr.final
        results.append({
            "seed": seed,
            "iterations": fin.t,
            "final_overlap": fin.overlap,
            "final_vector_mse_norm": fin.vector_mse_norm,
            "final_matrix_mse_norm": fin.matrix_mse_norm,
            "se_matrix_mse_norm": float(tr.se_matrix_mse()[-1]),
            "trajectory": path.name,
        })
    write_json(out / "summary.json", {"config": echo, "results": results, "version": __version__,
                                      "elapsed_seconds": time.perf_counter() - t0})
    return 0


def cmd_wishart_curve(cfg) -> int:
    quad = _quad(cfg)
    if "rho_v" not in cfg:
        raise ConfigError("--rho-v is required")
    pu = _prior(cfg["prior_u"], float(cfg["rho_u"]))
    pv = _prior(cfg["prior_v"], float(cfg["rho_v"]))
    alpha = float(cfg["alpha"])
    key = _snr_key(cfg, ("lambda", "gamma"))
    vals = parse_grid(cfg[key])
    if key == "gamma":
        if pv.rho >= 1.0:
            raise ConfigError("the gamma scaling needs rho_v < 1")
        vals = [float(lambda_from_gamma_v(g, pv.rho, alpha)) for g in vals]
    base = WishartParams(pu, pv, alpha, 0.0)
    params = [base.with_lambda(v) for v in vals]
    with _pool(cfg["workers"]) as pool:
        res = list(_mapper(pool)(wishart_row, params, [quad] * len(params)))
    _emit_csv(cfg, WISHART_CSV_COLUMNS, [wishart_csv_row(r) for r in res])
    return 0


THRESHOLD_CSV_COLUMNS = ("kind", "prior", "rho", "lambda", "gamma", "w")


def _threshold_task(args):
    kind, prior, quad = args
    rho = prior.rho
    lam = statistical_threshold(prior, quad).lambda_c if kind == "statistical" \
        else algorithmic_threshold(prior, quad).lambda_amp
    return (kind, prior.kind.value, rho, lam, lam * rho / (4.0 * abs(math.log(rho))), lam * rho * rho)


def cmd_threshold(cfg) -> int:
    quad = _quad(cfg)
    kinds = ["statistical", "algorithmic"] if cfg["kind"] == "both" else [cfg["kind"]]
    tasks = []
    for rho in _rhos(cfg):
        prior = _prior(cfg["prior"], rho)
        if not prior.is_discrete:
            raise ConfigError("thresholds need a sparse discrete prior")
        for k in kinds:
            if k == "statistical" and not rho < 0.5:
                raise ConfigError("the statistical threshold needs rho < 0.5")
            if k == "algorithmic" and rho > 0.05:
                raise ConfigError("the algorithmic threshold needs rho <= 0.05")
            tasks.append((k, prior, quad))
    with _pool(cfg["workers"]) as pool:
        rows = list(_mapper(pool)(_threshold_task, tasks))
    _emit_csv(cfg, THRESHOLD_CSV_COLUMNS, rows)
    return 0


def cmd_validate(cfg) -> int:
    from .validation import run_checks

    if cfg["level"] not in ("quick", "full"):
        raise ConfigError("--level must be quick or full")
    results = run_checks(cfg["level"], int(cfg["seed"]), _quad(cfg))
    text = write_json(None if cfg["out"] == "-" else cfg["out"], [r.to_json() for r in results])
    if cfg["out"] == "-":
        sys.stdout.write(text)
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "potential-curve": cmd_potential_curve,
    "se-curve": cmd_se_curve,
    "amp-run": cmd_amp_run,
    "wishart-curve": cmd_wishart_curve,
    "threshold": cmd_threshold,
    "validate": cmd_validate,
}


def run(argv=None) -> int:
    parser, known = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: usage already on stderr
        return int(exc.code or 0)
    flags = {k: v for k, v in vars(ns).items() if k != "command"}
    try:
        cfg = merge_config(ns.command, flags, known[ns.command])
        return COMMANDS[ns.command](cfg)
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"sparsespike {ns.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ThresholdNotFoundError, BracketError, RuntimeError) as exc:
        print(f"sparsespike {ns.command}: computation failed: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
