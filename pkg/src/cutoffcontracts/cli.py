"""Command-line front end: config ingestion, dispatch, artifact emission.

Subcommands: analyze (elasticity profile), solve (optimal cutoff and model
variants), verify (brute-force certification plus the improvement pipeline),
refute (tangent-cost counterexample), sweep (expected-transfer surface), and
compare (cost comparative statics).

A run is configured by one JSON file plus a few overriding flags; paired
with the seed this makes every emitted artifact reproducible.  Exit status:
0 success, 1 configuration error, 2 no feasible contract.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import agent, densities, oracle, solver
from .elasticity import elasticity_profile, eta_inverse
from .numerics import make_rng
from .transfers import StepTransfer

FLOAT_FMT = "%.12g"


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config/usage errors exit 1, not argparse's 2
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Config assembly
# ---------------------------------------------------------------------------

_DENSITY_KEYS = {"family", "dimension", "eps", "csv", "xs", "phis"}
_COST_KEYS = {"kind", "a", "p", "c0", "csv", "lams", "costs", "d_ref", "lambda_ref", "kappa"}


def _load_two_column_csv(path):
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if rows.shape[1] != 2:
        raise ConfigError(f"{path}: expected two columns")
    return rows[:, 0], rows[:, 1]


def build_density(spec: dict) -> densities.SignalDensity:
    spec = dict(spec)
    unknown = set(spec) - _DENSITY_KEYS
    if unknown:
        raise ConfigError(f"unknown density keys: {sorted(unknown)}")
    family = spec.pop("family", None)
    if family is None:
        raise ConfigError("density.family is required")
    dim = int(spec.pop("dimension", 1))
    if family == "tabulated":
        if "csv" in spec:
            xs, phis = _load_two_column_csv(spec.pop("csv"))
        else:
            xs, phis = spec.pop("xs", None), spec.pop("phis", None)
            if xs is None or phis is None:
                raise ConfigError("tabulated density needs csv or xs/phis")
        return densities.TabulatedDensity(xs, phis, dimension=dim)
    try:
        return densities.make_density(family, dimension=dim, **spec)
    except densities.DensityValidationError as exc:
        raise ConfigError(str(exc)) from exc


def build_cost(spec: dict, density=None) -> agent.CostFunction:
    spec = dict(spec)
    unknown = set(spec) - _COST_KEYS
    if unknown:
        raise ConfigError(f"unknown cost keys: {sorted(unknown)}")
    kind = spec.pop("kind", None)
    if kind == "power":
        return agent.PowerCost(a=spec.pop("a", 1.0), p=spec.pop("p", 2.0))
    if kind == "affine_power":
        return agent.AffinePowerCost(
            c0=spec.pop("c0", 0.0), a=spec.pop("a", 1.0), p=spec.pop("p", 2.0)
        )
    if kind == "tabulated":
        if "csv" in spec:
            lams, costs = _load_two_column_csv(spec.pop("csv"))
        else:
            lams, costs = spec.pop("lams", None), spec.pop("costs", None)
            if lams is None or costs is None:
                raise ConfigError("tabulated cost needs csv or lams/costs")
        return agent.TabulatedCost(lams, costs)
    if kind == "tangent":
        if density is None:
            raise ConfigError("tangent cost needs a density in context")
        return oracle.TangentCost(
            density,
            d_ref=spec.pop("d_ref", 0.5),
            lambda_ref=spec.pop("lambda_ref", 1.0),
            kappa=spec.pop("kappa", 0.05),
        )
    raise ConfigError(f"unknown cost kind: {kind!r}")


def _parse_inline(text: str) -> dict:
    """Parse 'name:key=val,key=val' override strings."""
    head, _, rest = text.partition(":")
    out = {"__name__": head}
    if rest:
        for item in rest.split(","):
            k, _, v = item.partition("=")
            if not _ or not k:
                raise ConfigError(f"bad override segment {item!r} in {text!r}")
            try:
                out[k] = json.loads(v)
            except json.JSONDecodeError:
                out[k] = v
    return out


def load_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    cfg.setdefault("density", {"family": "gaussian", "dimension": 1})
    cfg.setdefault("cost", {"kind": "power", "a": 0.125, "p": 2.0})
    cfg.setdefault("variant", {"type": "base"})
    cfg.setdefault("numerics", {})
    cfg.setdefault("seed", 0)
    if args.density:
        parsed = _parse_inline(args.density)
        cfg["density"] = {"family": parsed.pop("__name__"), **parsed}
    if args.cost:
        parsed = _parse_inline(args.cost)
        cfg["cost"] = {"kind": parsed.pop("__name__"), **parsed}
    if args.dim is not None:
        cfg["density"]["dimension"] = args.dim
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out:
        cfg["out_dir"] = args.out
    cfg.setdefault("out_dir", "out")
    num = cfg["numerics"]
    for key, val in num.items():
        if key.startswith(("lambda", "d_", "product", "dbar")) and isinstance(val, (int, float)):
            if val <= 0:
                raise ConfigError(f"numerics.{key} must be positive")
    return cfg


def build_settings(cfg: dict) -> solver.SolverSettings:
    num = dict(cfg.get("numerics", {}))
    agent_kwargs = {}
    for key in ("lambda_min", "lambda_max", "lambda_grid", "tie_tol", "ir_tol"):
        if key in num:
            agent_kwargs[key] = num.pop(key)
    if "lambda_grid" in agent_kwargs:
        agent_kwargs["lambda_grid"] = int(agent_kwargs["lambda_grid"])
    solver_kwargs = {}
    for key in ("d_max", "d_scan", "refine_rounds", "refine_points", "product_tol", "dbar_tol"):
        if key in num:
            solver_kwargs[key] = num.pop(key)
    for key in ("d_scan", "refine_rounds", "refine_points"):
        if key in solver_kwargs:
            solver_kwargs[key] = int(solver_kwargs[key])
    if num:
        raise ConfigError(f"unknown numerics keys: {sorted(num)}")
    return solver.SolverSettings(agent=agent.AgentSettings(**agent_kwargs), **solver_kwargs)


# ---------------------------------------------------------------------------
# Artifact helpers
# ---------------------------------------------------------------------------


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([FLOAT_FMT % v if isinstance(v, float) else v for v in row])


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, StepTransfer):
        return {
            "kind": obj.kind,
            "edges": [float(e) for e in obj.edges],
            "values": [float(v) for v in obj.values],
        }
    if obj is None or isinstance(obj, str):
        return obj
    return repr(obj)


def _write_json(path: Path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2) + "\n")


def _transfer_dump_rows(stages: dict[str, StepTransfer]):
    edges = np.unique(np.concatenate([t.edges for t in stages.values()]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    rows = []
    for lo, hi, m in zip(edges[:-1], edges[1:], mids):
        rows.append([float(lo), float(hi)] + [float(t(m)) for t in stages.values()])
    return ["x_lo", "x_hi", *stages.keys()], rows


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_analyze(cfg, out, settings):
    den = build_density(cfg["density"])
    profile = elasticity_profile(den)
    _write_csv(
        out / "elasticity.csv",
        ["x", "phi", "eta"],
        zip(
            (float(x) for x in profile.scan_x),
            (float(p) for p in den.pdf(profile.scan_x)),
            (float(e) for e in profile.scan_eta),
        ),
    )
    _write_json(
        out / "analysis.json",
        {
            "family": den.family,
            "dimension": den.dimension,
            "eta_inverse_n": profile.eta_inverse_n,
            "crossing_point": profile.crossing_point,
            "iea_holds": profile.iea_holds,
            "global_mlrp": profile.global_mlrp,
            "strongly_unimodal": profile.strongly_unimodal,
            "overflow": profile.overflow,
            "witness": profile.witness,
        },
    )
    return 0


def _solve_dispatch(cfg, settings):
    den = build_density(cfg["density"])
    cost = build_cost(cfg["cost"], den)
    variant = dict(cfg.get("variant", {"type": "base"}))
    vtype = variant.pop("type", "base")
    if vtype == "base":
        if variant:
            raise ConfigError(f"unknown variant keys: {sorted(variant)}")
        return den, solver.optimal_cutoff(den, cost, settings=settings)
    if vtype == "gaussian_prior":
        lam0 = variant.pop("lambda0", None)
        if lam0 is None or variant:
            raise ConfigError("gaussian_prior variant needs exactly lambda0")
        return den, solver.solve_gaussian_prior(den, lam0, cost, settings=settings)
    if vtype == "unobserved":
        prior = variant.pop("prior", None)
        lam_p = variant.pop("lambda_p", None)
        lam0 = variant.pop("lambda0", None)
        if prior is None or lam_p is None or variant:
            raise ConfigError("unobserved variant needs prior, lambda_p (and lambda0 if gaussian)")
        return den, solver.solve_unobserved_state(
            den, prior, lam_p, cost, lambda0=lam0, settings=settings
        )
    raise ConfigError(f"unknown variant type: {vtype!r}")


def cmd_solve(cfg, out, settings, curve=False):
    variant = cfg.get("variant", {"type": "base"})
    if variant.get("type") == "classic_pa":
        model = build_output_model(variant.get("output_model", {}))
        cost = build_cost(cfg["cost"])
        res = solver.solve_classic_pa(model, cost, settings=settings)
        _write_json(out / "solve.json", res)
        return 0
    den, res = _solve_dispatch(cfg, settings)
    _write_json(out / "solve.json", res)
    if curve:
        cost = build_cost(cfg["cost"], den)
        d_hi = settings.d_ceiling(den)
        ds = np.linspace(0.0, d_hi, settings.d_scan)
        lams, payoffs, _ = agent.cutoff_response_curve(den, ds, cost, settings.agent)
        _write_csv(
            out / "cutoff_curve.csv",
            ["d", "lambda", "payoff", "product"],
            zip(
                map(float, ds),
                map(float, lams),
                map(float, payoffs),
                map(float, lams * ds),
            ),
        )
    return 0


def build_output_model(spec: dict) -> solver.OutputModel:
    spec = dict(spec)
    family = spec.pop("family", None)
    if family == "exponential_mean_e":
        return solver.ExponentialOutputModel(**spec)
    if family == "lognormal_scale_e":
        return solver.LognormalOutputModel(**spec)
    if family == "tabulated":
        try:
            return solver.TabulatedOutputModel(spec["y_grid"], spec["e_grid"], spec["g_values"])
        except KeyError as exc:
            raise ConfigError("tabulated output model needs y_grid, e_grid, g_values") from exc
    raise ConfigError(f"unknown output model family: {family!r}")


def cmd_verify(cfg, out, settings, dump_transfers=False):
    den = build_density(cfg["density"])
    cost = build_cost(cfg["cost"], den)
    vcfg = dict(cfg.get("verify", {}))
    cells = int(vcfg.pop("grid_cells", 8))
    levels = int(vcfg.pop("value_levels", 2))
    x_max = vcfg.pop("x_max", None)
    n_pipeline = int(vcfg.pop("pipeline_transfers", 20))
    pipeline_cells = int(vcfg.pop("pipeline_cells", 64))
    if vcfg:
        raise ConfigError(f"unknown verify keys: {sorted(vcfg)}")

    report = oracle.certify_cutoff_optimality(
        den, cost, cells, levels, x_max, settings=settings, seed=int(cfg.get("seed", 0))
    )
    rng = make_rng(int(cfg.get("seed", 0)))
    pipeline_rows = []
    worst = None
    for i in range(n_pipeline):
        t = StepTransfer.from_cells(rng.uniform(size=pipeline_cells), 3.0 * den.scale)
        pr = oracle.improve_to_cutoff(den, t, cost, settings.agent)
        pipeline_rows.append(
            {
                "index": i,
                "d": pr.d,
                "lambda_original": pr.original.lambda_star,
                "lambda_cutoff": pr.response.lambda_star,
                "guarantee_margin": pr.guarantee_margin,
                "symmetrization_gap": pr.symmetrization_gap,
            }
        )
        if worst is None or pr.guarantee_margin < worst.guarantee_margin:
            worst = pr
        if dump_transfers:
            header, rows = _transfer_dump_rows(
                {
                    "original": t,
                    "shifted": pr.shifted,
                    "symmetrized": pr.symmetrized,
                    "augmented": pr.augmented,
                }
            )
            _write_csv(out / f"pipeline_{i:03d}.csv", header, rows)
    payload = {
        "certification": report,
        "pipeline": {
            "n_transfers": n_pipeline,
            "min_guarantee_margin": min(r["guarantee_margin"] for r in pipeline_rows)
            if pipeline_rows
            else None,
            "max_symmetrization_gap": max(r["symmetrization_gap"] for r in pipeline_rows)
            if pipeline_rows
            else None,
            "runs": pipeline_rows,
        },
    }
    _write_json(out / "verify.json", payload)
    return 0


def cmd_refute(cfg, out, settings):
    den = build_density(cfg["density"])
    rcfg = dict(cfg.get("refute", {}))
    kwargs = {
        "lambda_ref": rcfg.pop("lambda_ref", 1.0),
        "d_ref": rcfg.pop("d_ref", 0.5),
        "x1": rcfg.pop("x1", 0.2),
        "x2": rcfg.pop("x2", 0.8),
        "kappa": rcfg.pop("kappa", 0.05),
        "grid_cells": int(rcfg.pop("grid_cells", 8)),
        "value_levels": int(rcfg.pop("value_levels", 2)),
        "x_max": rcfg.pop("x_max", None),
    }
    if rcfg:
        raise ConfigError(f"unknown refute keys: {sorted(rcfg)}")
    report = oracle.refute_cutoff_optimality(
        den, settings=settings, seed=int(cfg.get("seed", 0)), **kwargs
    )
    _write_json(out / "refute.json", report)
    return 0


def cmd_sweep(cfg, out, settings):
    den = build_density(cfg["density"])
    scfg = dict(cfg.get("sweep", {}))
    n_lam = int(scfg.pop("lambda_points", 64))
    n_d = int(scfg.pop("d_points", 64))
    lam_lo, lam_hi = scfg.pop("lambda_range", (0.1, 10.0))
    d_lo, d_hi = scfg.pop("d_range", (0.01, 3.0 * den.scale))
    if scfg:
        raise ConfigError(f"unknown sweep keys: {sorted(scfg)}")
    lams = np.geomspace(lam_lo, lam_hi, n_lam)
    ds = np.linspace(d_lo, d_hi, n_d)
    rows = []
    for lam in lams:
        masses = den.ball_mass(lam * ds)
        rows.extend([float(lam), float(d), float(m)] for d, m in zip(ds, masses))
    _write_csv(out / "sweep.csv", ["lambda", "d", "expected_transfer"], rows)
    inv, _ = eta_inverse(den, float(den.dimension))
    _write_csv(
        out / "boundary.csv",
        ["lambda", "d"],
        ([float(lam), float(inv / lam)] for lam in lams),
    )
    return 0


def cmd_compare(cfg, out, settings):
    den = build_density(cfg["density"])
    cost1 = build_cost(cfg["cost"], den)
    if "cost2" not in cfg:
        raise ConfigError("compare needs a cost2 entry in the config")
    cost2 = build_cost(cfg["cost2"], den)
    report = solver.comparative_statics(den, cost1, cost2, settings=settings)
    _write_json(out / "compare.json", report)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="cutoffcontracts",
        description="Optimal cutoff contracts for incentivizing information acquisition.",
        epilog=(
            "Defaults: gaussian density, cost 0.125 * lambda^2, precision window "
            "[1e-3, 1e3] with 1024 grid points, cutoff scan ceiling 50 * scale with "
            "512 points and 2 refinement rounds, product tolerance 1e-6. "
            "All numeric defaults can be overridden in the config under 'numerics'."
        ),
    )
    parser.add_argument("command", choices=["analyze", "solve", "verify", "refute", "sweep", "compare"])
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", help="output directory (default 'out')")
    parser.add_argument("--seed", type=int, help="RNG seed for seeded searches")
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="reserved worker count; computations are vectorized in-process",
    )
    parser.add_argument("--density", help="density override, e.g. 'truncated_exp_inverse:eps=0.1'")
    parser.add_argument("--cost", help="cost override, e.g. 'power:a=0.125,p=2'")
    parser.add_argument("--dim", type=int, help="state dimension override")
    parser.add_argument("--curve", action="store_true", help="solve: also emit the cutoff curve CSV")
    parser.add_argument(
        "--dump-transfers", action="store_true", help="verify: dump pipeline transfers as CSV"
    )
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        settings = build_settings(cfg)
        out = Path(cfg["out_dir"])
        if args.command == "analyze":
            return cmd_analyze(cfg, out, settings)
        if args.command == "solve":
            return cmd_solve(cfg, out, settings, curve=args.curve)
        if args.command == "verify":
            return cmd_verify(cfg, out, settings, dump_transfers=args.dump_transfers)
        if args.command == "refute":
            return cmd_refute(cfg, out, settings)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, settings)
        if args.command == "compare":
            return cmd_compare(cfg, out, settings)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, densities.DensityValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except solver.NoFeasibleContractError as exc:
        print(f"no feasible contract: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
