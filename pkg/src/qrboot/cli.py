"""Command-line front end.

Exit codes: 0 success, 2 configuration or parse error, 3 capacity guard,
4 every experiment size failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .bootstrap import BootstrapScheme, block_schedule, efron_resample, mbb_resample, write_trace
from .errors import CapabilityError, CapacityError, DomainError, NumericError, QRBootError
from .estimators import available_estimators, get_estimator
from .files import ensure_dir, read_measure_csv, read_path_csv, write_path_csv
from .measures import Box, DiscreteMeasure, interval, real_line
from .processes import ContaminationSpec, ProcessSpec, generate, mixing_diagnostics, varadarajan_diagnostic
from .prob_metrics import metric_relations
from .robustness import ExperimentConfig, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_FAILED = 0, 2, 3, 4


class ConfigError(DomainError):
    pass


def _f9(x) -> str:
    return "nan" if x is None else f"{float(x):.9f}"


def load_config(path) -> dict:
    """Read a TOML config; syntax errors carry the line number."""
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def _process_from(table: dict, where: str) -> ProcessSpec:
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    try:
        return ProcessSpec.from_dict(table)
    except KeyError as exc:
        raise ConfigError(f"[{where}] is missing key {exc}") from None


def _estimator_list(cfg: dict) -> list:
    if "estimators" in cfg:
        items = cfg["estimators"]
    elif "estimator" in cfg:
        items = [cfg["estimator"]]
    else:
        raise ConfigError(f"config names no estimator; registered: {', '.join(available_estimators())}")
    out = []
    for item in items:
        if isinstance(item, str):
            out.append(get_estimator(item))
        elif isinstance(item, dict) and "name" in item:
            params = dict(item.get("params", {}))
            params.update({k: v for k, v in item.items() if k not in ("name", "params")})
            out.append(get_estimator(item["name"], **params))
        else:
            raise ConfigError("estimator entries must be names or tables with a 'name'")
    return out


def experiment_configs(cfg: dict, seed: int | None = None, threads: int = 1) -> list[ExperimentConfig]:
    """One ExperimentConfig per estimator listed in the config."""
    if "process_p" not in cfg:
        raise ConfigError("experiment config needs a [process_p] table")
    p = _process_from(cfg["process_p"], "process_p")
    if "process_q" in cfg:
        q = _process_from(cfg["process_q"], "process_q")
    else:
        cont = cfg.get("contamination")
        q = p.with_contamination(ContaminationSpec.from_dict(cont) if cont else None)
    scheme = BootstrapScheme.from_dict(cfg.get("scheme", {}))
    if "n_grid" not in cfg:
        raise ConfigError("experiment config needs n_grid")
    out = []
    for est in _estimator_list(cfg):
        out.append(
            ExperimentConfig(
                process_p=p,
                process_q=q,
                scheme=scheme,
                estimator=est,
                n_grid=tuple(cfg["n_grid"]),
                outer_reps=int(cfg.get("outer_reps", 32)),
                inner_reps=int(cfg.get("inner_reps", 500)),
                seed=int(cfg.get("seed", 0) if seed is None else seed),
                method=cfg.get("method", "both"),
                max_atoms=int(cfg.get("max_atoms", 200)),
                error_resamples=int(cfg.get("error_resamples", 30)),
                threads=threads,
            )
        )
    return out


def _space_from_args(args, dim: int) -> Box:
    if args.space == "line":
        return real_line()
    if dim == 1:
        return interval(args.low, args.high)
    return Box(np.full(dim, args.low), np.full(dim, args.high))


def cmd_metric(args) -> int:
    p = read_measure_csv(args.p)
    q = read_measure_csv(args.q)
    dim = p.points.reshape(len(p), -1).shape[1]
    if q.points.reshape(len(q), -1).shape[1] != dim:
        raise ConfigError("the two measures have different dimensions")
    rel = metric_relations(p, q, _space_from_args(args, dim))
    print(f"d_bl {_f9(rel.d_bl)}")
    print(f"prohorov {_f9(rel.prohorov)}")
    print(f"sqrt_d_bl {_f9(rel.sqrt_d_bl)}")
    print(f"bl_le_two_prohorov {str(rel.bl_le_two_prohorov).lower()}")
    print(f"quadratic_lower_bound {str(rel.quadratic_lower_bound).lower()}")
    tag = "" if rel.asserted_regime else " (outside d_bl <= 0.25, recorded only)"
    print(f"prohorov_le_sqrt_bl {str(rel.prohorov_le_sqrt_bl).lower()}{tag}")
    return EXIT_OK


def _process_section(cfg: dict) -> ProcessSpec:
    if "process" in cfg:
        return _process_from(cfg["process"], "process")
    if "kind" in cfg:
        return _process_from(cfg, "top level")
    if "process_p" in cfg:
        return _process_from(cfg["process_p"], "process_p")
    raise ConfigError("config needs a [process] table")


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    spec = _process_section(cfg)
    seed = int(cfg.get("seed", 0) if args.seed is None else args.seed)
    n = int(args.n if args.n is not None else cfg.get("n", 0))
    path = generate(spec, n, seed)
    out = Path(args.out) if args.out else None
    if out is None:
        print("index,value")
        for i, v in enumerate(path.values.tolist(), start=1):
            print(f"{i},{v!r}")
    else:
        write_path_csv(out, path)
        print(f"wrote {n} values to {out}")
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    path = read_path_csv(args.path)
    seed = 0 if args.seed is None else args.seed
    if args.scheme == "efron":
        res = efron_resample(path, args.m, seed)
    else:
        sched = block_schedule(len(path), args.exponent, multivariate=args.exponent >= 1 / 3)
        res = mbb_resample(path, sched, seed, circular=not args.no_wrap)
    if args.out:
        write_path_csv(args.out, res)
        print(f"wrote {len(res)} values to {args.out}")
    else:
        print("index,value")
        for i, v in enumerate(res.values.tolist(), start=1):
            print(f"{i},{v!r}")
    if args.estimator:
        est = get_estimator(args.estimator)
        print(f"{args.estimator} {_f9(est.evaluate_samples(res.values)[0])}")
    return EXIT_OK


def cmd_alpha(args) -> int:
    if args.transition:
        try:
            rows = [[float(x) for x in r.split(",")] for r in args.transition.split(";")]
        except ValueError:
            raise ConfigError(f"cannot parse transition matrix {args.transition!r}") from None
        spec = ProcessSpec("markov_chain", {"transition": rows})
    elif args.config:
        spec = _process_section(load_config(args.config))
    else:
        raise ConfigError("alpha needs --transition or a config file")
    diag = mixing_diagnostics(spec, max_lag=args.max_lag, n_grid=tuple(args.n_grid), dimension=args.dim)
    print("lag alpha")
    for m, a in enumerate(diag.alpha_coeffs):
        print(f"{m} {_f9(a)}")
    print("n weak_bi_mixing_average")
    for n, v in diag.weak_bi_mixing_averages:
        print(f"{n} {_f9(v)}")
    if diag.gamma_hat is not None:
        print(f"gamma_hat {_f9(diag.gamma_hat)}")
        print(f"c_hat {_f9(diag.c_hat)}")
    if diag.bound_only:
        print("note: coefficients are the geometric upper bound |phi|^m / 4")
    if args.out:
        Path(args.out).write_text(json.dumps(diag.to_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_varadarajan(args) -> int:
    cfg = load_config(args.config)
    spec = _process_section(cfg)
    if "target" in cfg:
        t = cfg["target"]
        target = DiscreteMeasure(t["atoms"], t["weights"])
    else:
        target = spec.marginal(1)
        if target is None:
            raise ConfigError("process has no discrete marginal; give a [target] table with atoms and weights")
    seed = int(cfg.get("seed", 0) if args.seed is None else args.seed)
    grid = args.n_grid or cfg.get("n_grid", [100, 400, 1600])
    reps = args.reps or int(cfg.get("reps", 50))
    table = varadarajan_diagnostic(spec, target, grid, reps, seed)
    lines = ["n,median_d_bl"] + [f"{n},{_f9(d)}" for n, d in table]
    print("\n".join(lines))
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    return EXIT_OK


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_experiment(args) -> int:
    started = datetime.now(timezone.utc).isoformat()
    config_hash = _sha256(args.config)
    cfg = load_config(args.config)
    threads = args.threads or os.cpu_count() or 1
    configs = experiment_configs(cfg, seed=args.seed, threads=threads)
    out = ensure_dir(args.out or "qrboot-out")
    outputs = []
    any_ok = False
    print(f"{'estimator':<14}{'n':>7}{'input_proxy':>15}{'nested':>15}{'coupled':>15}{'err_nested':>15}")
    for config in configs:
        report = run_experiment(config)
        name = config.estimator.name
        stem = name if len(configs) == 1 or sum(c.estimator.name == name for c in configs) == 1 else f"{name}-{len(outputs)}"
        (out / f"{stem}.report.json").write_text(report.to_json())
        (out / f"{stem}.summary.csv").write_text(report.to_csv())
        outputs += [f"{stem}.report.json", f"{stem}.summary.csv"]
        any_ok |= report.ok
        for r in report.records:
            if r["status"] != "ok":
                print(f"{name:<14}{r['n']:>7}  failed: {r['error']}")
                continue
            print(f"{name:<14}{r['n']:>7}{_f9(r['input_proxy']):>15}{_f9(r['nested']):>15}{_f9(r['coupled']):>15}{_f9(r['err_nested']):>15}")
    manifest = {
        "config_path": str(args.config),
        "config_sha256": config_hash,
        "tool_version": __version__,
        "seed": configs[0].seed,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": outputs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return EXIT_OK if any_ok else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrboot", description="Bounded-Lipschitz robustness checks for bootstrap approximations.")
    parser.add_argument("--version", action="version", version=f"qrboot {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: number of cores)")
    common.add_argument("--out", default=None, help="output file or directory")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("metric", parents=[common], help="d_BL and Prohorov distance between two measure CSVs")
    m.add_argument("p")
    m.add_argument("q")
    m.add_argument("--space", choices=["box", "line"], default="box")
    m.add_argument("--low", type=float, default=0.0)
    m.add_argument("--high", type=float, default=1.0)
    m.set_defaults(func=cmd_metric)

    g = sub.add_parser("generate", parents=[common], help="draw a sample path from a process config")
    g.add_argument("config")
    g.add_argument("--n", type=int, default=None)
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("bootstrap", parents=[common], help="resample a path CSV")
    b.add_argument("path")
    b.add_argument("--scheme", choices=["efron", "moving_block"], default="efron")
    b.add_argument("--m", type=int, default=None, help="Efron resample size")
    b.add_argument("--exponent", type=float, default=0.25, help="block exponent")
    b.add_argument("--no-wrap", action="store_true", help="restrict block starts to 1..n-b+1")
    b.add_argument("--estimator", default=None, help="also print this estimator on the resample")
    b.set_defaults(func=cmd_bootstrap)

    a = sub.add_parser("alpha", parents=[common], help="mixing coefficients of a chain")
    a.add_argument("config", nargs="?")
    a.add_argument("--transition", default=None, help="rows separated by ';', entries by ','")
    a.add_argument("--max-lag", type=int, default=20)
    a.add_argument("--n-grid", type=int, nargs="+", default=[10, 100, 1000])
    a.add_argument("--dim", type=int, default=1)
    a.set_defaults(func=cmd_alpha)

    v = sub.add_parser("varadarajan", parents=[common], help="decay of d_BL(empirical, limit law) in n")
    v.add_argument("config")
    v.add_argument("--n-grid", type=int, nargs="+", default=None)
    v.add_argument("--reps", type=int, default=None)
    v.set_defaults(func=cmd_varadarajan)

    e = sub.add_parser("experiment", parents=[common], help="nested Monte Carlo robustness experiment")
    e.add_argument("config")
    e.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (DomainError, CapabilityError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, QRBootError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
