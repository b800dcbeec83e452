"""Batch front door: parse a YAML model/task configuration, dispatch to the
estimators and solvers, and write a delimited results table plus a run
manifest.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 crosscheck failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .crosscheck import run_scenario, scenario_names
from .idesolver import Grid, IDEConvergenceError, solve_barrier_moments, \
    solve_gerber_ide, solve_threshold_moments
from .model import JumpLaw, PenaltyFn, QuadratureError, RiskParams, validate_model
from .simulate import SimConfig, SimulationError, estimate_barrier_dividends, \
    estimate_gerber_shiu, estimate_ruin, estimate_threshold_dividends
from .specialfn import closed_barrier_value, closed_gerber_no_jumps, \
    closed_ruin_rho1, closed_threshold_value

__all__ = ["ConfigError", "RunConfig", "load_config", "run", "main"]

TABLE_COLUMNS = ("u", "value", "uncertainty", "method", "scenario", "n_or_grid")

TASK_TYPES = ("ruin", "gerber-shiu", "dividends-threshold", "dividends-barrier",
              "closed-form", "solve-ide", "crosscheck")

FORMULAS = ("ruin-corr1", "discounted-penalty", "threshold-value", "barrier-value")

VARIANTS = ("phi", "phi_s", "phi_d", "threshold-moments", "barrier-moments")


class ConfigError(ValueError):
    pass


def _require_keys(block: dict, allowed: set, required: set, where: str):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a mapping")
    for key in block:
        if key not in allowed:
            raise ConfigError(f"unknown key {where}.{key!r}")
    for key in required:
        if key not in block:
            raise ConfigError(f"missing key {where}.{key!r}")


def _parse_law(block: Optional[dict], role: str, where: str) -> Optional[JumpLaw]:
    if block is None:
        return None
    _require_keys(block, {"family", "mean", "p_down", "mean_down", "mean_up",
                          "mu", "sigma", "value", "values", "probs"},
                  {"family"}, where)
    fam = block["family"]
    try:
        if fam == "exponential":
            return JumpLaw.exponential(block["mean"], role)
        if fam == "mixed_exponential":
            return JumpLaw.mixed_exponential(block["p_down"], block["mean_down"],
                                             block["mean_up"], role)
        if fam == "normal":
            return JumpLaw.normal(block["mu"], block["sigma"], role)
        if fam == "point_mass":
            return JumpLaw.point_mass(block["value"], role)
        if fam == "shifted_lognormal":
            return JumpLaw.shifted_lognormal(block["mu"], block["sigma"], role)
        if fam == "empirical":
            return JumpLaw.empirical(block["values"], block["probs"], role)
    except KeyError as exc:
        raise ConfigError(f"{where} is missing parameter {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}.family {fam!r} is not a known jump family")


def _parse_penalty(block: Optional[dict], where: str) -> PenaltyFn:
    if block is None:
        return PenaltyFn("one")
    _require_keys(block, {"form", "k", "c", "bound"}, {"form"}, where)
    try:
        return PenaltyFn(form=block["form"], k=int(block.get("k", 1)),
                         c=float(block.get("c", 1.0)),
                         bound=float(block.get("bound", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    params: RiskParams
    claim_law: Optional[JumpLaw]
    return_law: Optional[JumpLaw]
    penalty: PenaltyFn
    task_type: str
    u_list: tuple
    b: Optional[float]
    mu: Optional[float]
    k_max: int
    y_grid: tuple
    formula: Optional[str]
    variant: Optional[str]
    scenario: Optional[str]
    sim: Optional[SimConfig]
    grid: Optional[Grid]
    out_dir: Path
    fmt: str
    raw: dict = field(repr=False, default_factory=dict)


def load_config(path: Path, overrides: Optional[dict] = None) -> RunConfig:
    """Parse and strictly validate a YAML run configuration."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level of the config must be a mapping")
    _require_keys(raw, {"model", "task", "numerics", "output"},
                  {"model", "task"}, "config")

    model = raw["model"]
    _require_keys(model, {"p", "sigma_P", "lambda_P", "r", "sigma_R",
                          "lambda_R", "rho", "delta", "claim_law",
                          "return_law", "penalty"},
                  {"p", "sigma_P", "r", "sigma_R"}, "model")
    try:
        params = RiskParams(
            p=float(model["p"]), sigma_P=float(model["sigma_P"]),
            lambda_P=float(model.get("lambda_P", 0.0)), r=float(model["r"]),
            sigma_R=float(model["sigma_R"]),
            lambda_R=float(model.get("lambda_R", 0.0)),
            rho=float(model.get("rho", 0.0)),
            delta=float(model.get("delta", 0.0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    claim_law = _parse_law(model.get("claim_law"), "claim", "model.claim_law")
    return_law = _parse_law(model.get("return_law"), "return", "model.return_law")
    penalty = _parse_penalty(model.get("penalty"), "model.penalty")

    task = raw["task"]
    _require_keys(task, {"type", "u", "b", "mu", "k_max", "y_grid", "formula",
                         "variant", "scenario"}, {"type"}, "task")
    ttype = task["type"]
    if ttype not in TASK_TYPES:
        raise ConfigError(f"task.type {ttype!r} not one of {TASK_TYPES}")
    u_list = tuple(float(x) for x in task.get("u", ()))
    formula = task.get("formula")
    variant = task.get("variant")
    scenario = task.get("scenario")
    if ttype == "closed-form":
        if formula not in FORMULAS:
            raise ConfigError(f"task.formula must be one of {FORMULAS}")
        if params.lambda_P != 0.0 or params.lambda_R != 0.0:
            raise ConfigError("closed forms require lambda_P = lambda_R = 0")
    if ttype == "solve-ide" and variant not in VARIANTS:
        raise ConfigError(f"task.variant must be one of {VARIANTS}")
    if ttype == "crosscheck":
        if scenario not in scenario_names():
            raise ConfigError(f"task.scenario must be one of "
                              f"{', '.join(scenario_names())}")
    elif not u_list and ttype != "crosscheck":
        raise ConfigError("task.u must list at least one probe surplus")

    numerics = raw.get("numerics", {}) or {}
    _require_keys(numerics, {"sim", "grid"}, set(), "numerics")
    sim_cfg = None
    if "sim" in numerics:
        sb = numerics["sim"]
        _require_keys(sb, {"dt", "t_max", "n_paths", "seed",
                           "bridge_correction", "scheme"},
                      {"dt", "t_max", "n_paths", "seed"}, "numerics.sim")
        try:
            sim_cfg = SimConfig(dt=float(sb["dt"]), t_max=float(sb["t_max"]),
                                n_paths=int(sb["n_paths"]), seed=int(sb["seed"]),
                                bridge_correction=bool(sb.get("bridge_correction", True)),
                                scheme=str(sb.get("scheme", "euler_on_2_5")))
        except ValueError as exc:
            raise ConfigError(f"numerics.sim: {exc}") from exc
    grid_cfg = None
    if "grid" in numerics:
        gb = numerics["grid"]
        _require_keys(gb, {"u_max", "n"}, {"u_max", "n"}, "numerics.grid")
        try:
            grid_cfg = Grid(u_max=float(gb["u_max"]), n=int(gb["n"]))
        except ValueError as exc:
            raise ConfigError(f"numerics.grid: {exc}") from exc

    output = raw.get("output", {}) or {}
    _require_keys(output, {"dir", "format"}, set(), "output")
    out_dir = Path(output.get("dir", "out"))
    fmt = output.get("format", "csv")
    if fmt not in ("csv", "tsv"):
        raise ConfigError("output.format must be csv or tsv")

    cfg = RunConfig(params=params, claim_law=claim_law, return_law=return_law,
                    penalty=penalty, task_type=ttype, u_list=u_list,
                    b=None if task.get("b") is None else float(task["b"]),
                    mu=None if task.get("mu") is None else float(task["mu"]),
                    k_max=int(task.get("k_max", 1)),
                    y_grid=tuple(float(y) for y in task.get("y_grid", (0.0,))),
                    formula=formula, variant=variant, scenario=scenario,
                    sim=sim_cfg, grid=grid_cfg, out_dir=out_dir, fmt=fmt,
                    raw=raw)
    if overrides:
        cfg = _apply_overrides(cfg, overrides)
    _check_task_requirements(cfg)
    return cfg


def _apply_overrides(cfg: RunConfig, ov: dict) -> RunConfig:
    sim = cfg.sim
    if sim is not None and ("seed" in ov or "paths" in ov):
        sim = SimConfig(dt=sim.dt, t_max=sim.t_max,
                        n_paths=int(ov.get("paths", sim.n_paths)),
                        seed=int(ov.get("seed", sim.seed)),
                        bridge_correction=sim.bridge_correction,
                        scheme=sim.scheme)
    grid = cfg.grid
    if grid is not None and ("grid_n" in ov or "umax" in ov):
        grid = Grid(u_max=float(ov.get("umax", grid.u_max)),
                    n=int(ov.get("grid_n", grid.n)))
    out_dir = Path(ov["out"]) if "out" in ov else cfg.out_dir
    return RunConfig(params=cfg.params, claim_law=cfg.claim_law,
                     return_law=cfg.return_law, penalty=cfg.penalty,
                     task_type=cfg.task_type, u_list=cfg.u_list, b=cfg.b,
                     mu=cfg.mu, k_max=cfg.k_max, y_grid=cfg.y_grid,
                     formula=cfg.formula, variant=cfg.variant,
                     scenario=cfg.scenario, sim=sim, grid=grid,
                     out_dir=out_dir, fmt=cfg.fmt, raw=cfg.raw)


def _check_task_requirements(cfg: RunConfig):
    t = cfg.task_type
    needs_sim = t in ("ruin", "gerber-shiu", "dividends-threshold",
                      "dividends-barrier")
    if needs_sim and cfg.sim is None:
        raise ConfigError(f"task {t!r} needs a numerics.sim block")
    if t in ("dividends-threshold", "dividends-barrier") and cfg.b is None:
        raise ConfigError(f"task {t!r} needs task.b")
    if t == "dividends-threshold" and cfg.mu is None:
        raise ConfigError("task 'dividends-threshold' needs task.mu")
    if t == "solve-ide" and cfg.grid is None:
        raise ConfigError("task 'solve-ide' needs a numerics.grid block")
    if t == "solve-ide" and cfg.variant in ("threshold-moments",) and \
            (cfg.b is None or cfg.mu is None):
        raise ConfigError("threshold-moments needs task.b and task.mu")
    if t == "solve-ide" and cfg.variant == "barrier-moments" and cfg.b is None:
        raise ConfigError("barrier-moments needs task.b")
    if t == "closed-form":
        if cfg.formula == "threshold-value" and (cfg.b is None or cfg.mu is None):
            raise ConfigError("threshold-value needs task.b and task.mu")
        if cfg.formula == "barrier-value" and cfg.b is None:
            raise ConfigError("barrier-value needs task.b")


# ---------------------------------------------------------------------------
# task execution
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _plain(obj):
    """Numpy scalars/arrays to built-in types for YAML serialization."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    return obj


def _run_task(cfg: RunConfig):
    """Execute the configured task; returns (rows, manifest_extras, passed)."""
    rows = []
    extras = {}
    passed = True
    p, cl, rl = cfg.params, cfg.claim_law, cfg.return_law

    if cfg.task_type == "ruin":
        for u in cfg.u_list:
            rb = estimate_ruin(p, cl, rl, u, cfg.sim)
            for name, est in (("psi", rb.psi), ("psi_s", rb.psi_s),
                              ("psi_d", rb.psi_d)):
                rows.append((u, est.mean, est.stderr, "mc", f"ruin:{name}",
                             cfg.sim.n_paths))
            extras.setdefault("censored_fraction", {})[u] = rb.censored_fraction

    elif cfg.task_type == "gerber-shiu":
        for u in cfg.u_list:
            est = estimate_gerber_shiu(p, cl, rl, u, cfg.penalty, cfg.sim)
            for name, e in (("phi", est.phi), ("phi_s", est.phi_s),
                            ("phi_d", est.phi_d)):
                rows.append((u, e.mean, e.stderr, "mc", f"gerber:{name}",
                             cfg.sim.n_paths))

    elif cfg.task_type == "dividends-threshold":
        for u in cfg.u_list:
            est = estimate_threshold_dividends(p, cl, rl, u, cfg.b, cfg.mu,
                                               cfg.sim, cfg.k_max, cfg.y_grid)
            for k, mk in enumerate(est.moments, start=1):
                rows.append((u, mk.mean, mk.stderr, "mc", f"threshold:V{k}",
                             cfg.sim.n_paths))
            for y, m in zip(est.y_grid, est.mgf):
                rows.append((u, m.mean, m.stderr, "mc", f"threshold:mgf@y={_fmt(y)}",
                             cfg.sim.n_paths))

    elif cfg.task_type == "dividends-barrier":
        for u in cfg.u_list:
            est = estimate_barrier_dividends(p, cl, rl, u, cfg.b, cfg.sim,
                                             cfg.k_max, cfg.y_grid)
            for k, mk in enumerate(est.moments, start=1):
                rows.append((u, mk.mean, mk.stderr, "mc", f"barrier:V{k}",
                             cfg.sim.n_paths))
            for y, m in zip(est.y_grid, est.mgf):
                rows.append((u, m.mean, m.stderr, "mc", f"barrier:mgf@y={_fmt(y)}",
                             cfg.sim.n_paths))

    elif cfg.task_type == "closed-form":
        for u in cfg.u_list:
            if cfg.formula == "ruin-corr1":
                val = closed_ruin_rho1(u, p)
                alt = closed_ruin_rho1(u, p, rule="composite", panels=128)
            elif cfg.formula == "discounted-penalty":
                val = closed_gerber_no_jumps(u, p)
                alt = closed_gerber_no_jumps(u, p, rule="composite")
            elif cfg.formula == "threshold-value":
                val = closed_threshold_value(u, cfg.b, cfg.mu, p)
                alt = val
            else:
                val = closed_barrier_value(u, cfg.b, p)
                alt = val
            rows.append((u, val, abs(val - alt), "closed",
                         f"closed:{cfg.formula}", 0))

    elif cfg.task_type == "solve-ide":
        if cfg.variant in ("phi", "phi_s", "phi_d"):
            sol = solve_gerber_ide(p, cl, rl, cfg.penalty, cfg.variant, cfg.grid)
            extras["residual"] = sol.residual
            extras["iterations"] = sol.iterations
            for u in cfg.u_list:
                rows.append((u, float(sol.solution(u)), sol.residual, "ide",
                             f"ide:{cfg.variant}", cfg.grid.n))
        elif cfg.variant == "threshold-moments":
            res = solve_threshold_moments(p, cl, rl, cfg.b, cfg.mu, cfg.k_max,
                                          cfg.grid)
            extras["residuals"] = list(res.residuals)
            extras["iterations"] = list(res.iterations)
            extras["b_snapped"] = res.b_snapped
            extras["snap_distance"] = res.snap_distance
            for k, fn in enumerate(res.functions, start=1):
                for u in cfg.u_list:
                    rows.append((u, float(fn(u)), res.residuals[k - 1], "ide",
                                 f"ide:threshold:V{k}", cfg.grid.n))
        else:
            res = solve_barrier_moments(p, cl, rl, cfg.b, cfg.k_max, cfg.grid)
            extras["residuals"] = list(res.residuals)
            extras["iterations"] = list(res.iterations)
            for k, fn in enumerate(res.functions, start=1):
                for u in cfg.u_list:
                    rows.append((u, float(fn(u)), res.residuals[k - 1], "ide",
                                 f"ide:barrier:V{k}", cfg.grid.n))

    else:  # crosscheck
        overrides = {}
        if cfg.sim is not None:
            overrides = dict(n_paths=cfg.sim.n_paths, seed=cfg.sim.seed)
        report = run_scenario(cfg.scenario, **overrides)
        for r in report.rows:
            rows.append((r.u, r.value, r.uncertainty, r.method,
                         f"{report.scenario}:{r.quantity}", r.n_or_grid))
        extras["comparisons"] = [asdict(c) for c in report.comparisons]
        passed = report.passed

    return rows, extras, passed


def run(cfg: RunConfig, quiet: bool = False) -> int:
    """Run one configured task, writing results.csv and manifest.yaml."""
    try:
        rows, extras, passed = _run_task(cfg)
    except ConfigError:
        raise
    except (SimulationError, QuadratureError, IDEConvergenceError,
            np.linalg.LinAlgError, ValueError) as exc:
        if not quiet:
            print(f"numeric failure: {exc}", file=sys.stderr)
        return 3

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    sep = "," if cfg.fmt == "csv" else "\t"
    table = cfg.out_dir / ("results.csv" if cfg.fmt == "csv" else "results.tsv")
    with open(table, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=sep)
        writer.writerow(TABLE_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])

    try:
        report = validate_model(cfg.params, cfg.claim_law, cfg.return_law)
    except ValueError:
        report = None
    manifest = {
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "seed": cfg.sim.seed if cfg.sim is not None else None,
        "task": cfg.task_type,
        "config": cfg.raw,
        "assumptions": None if report is None else {
            "net_profit": report.net_profit,
            "sigmaP_positive": report.sigmaP_positive,
            "FR_support_ok": report.FR_support_ok,
            "drift_dominance": report.drift_dominance,
            "messages": list(report.messages),
        },
        "extras": extras,
    }
    with open(cfg.out_dir / "manifest.yaml", "w") as fh:
        yaml.safe_dump(_plain(manifest), fh, sort_keys=True)

    if not quiet:
        print(f"wrote {table} ({len(rows)} rows)")
        if cfg.task_type == "crosscheck":
            for c in extras["comparisons"]:
                status = "PASS" if c["passed"] else "FAIL"
                print(f"  {status} {c['quantity']}: {c['method_a']}={c['value_a']:.6g} "
                      f"{c['method_b']}={c['value_b']:.6g} gap={c['gap']:.3g} "
                      f"tol={c['tol']:.3g}")
    if cfg.task_type == "crosscheck" and not passed:
        return 4
    return 0


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="jdrisk",
        description="Jump-diffusion insurance risk toolkit: simulate ruin and "
                    "dividends, evaluate closed forms, solve the governing "
                    "equations, and cross-check the routes against each other.")
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--seed", type=int, help="override the simulation seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--paths", type=int, help="override the replicate count")
    parser.add_argument("--grid", type=int, dest="grid_n",
                        help="override the grid node count")
    parser.add_argument("--umax", type=float, help="override the grid truncation")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    overrides = {k: v for k, v in vars(args).items()
                 if k in ("seed", "out", "paths", "grid_n", "umax") and v is not None}
    try:
        cfg = load_config(Path(args.config), overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(cfg, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
