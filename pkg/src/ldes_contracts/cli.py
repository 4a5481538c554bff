"""Command-line entry point.

Exit status is 0 on success, 1 for usage or validation errors and 2 for
numerical failures (solver, equilibrium or calibration).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .calibration import CalibrationError, calibrate
from .config import ConfigError, SystemConfig, load_config, write_config
from .contracts import LABELS, contract_from_dict, contract_to_dict, family_key, template_contract
from .dispatch import build_expansion, solve_problem, write_results_csv
from .equilibrium import EquilibriumError, GridSpec, ProfitModel, find_equilibrium, sweep_risk_aversion
from .lp import SolverError
from .profiles import default_gb_config
from .report import INCIDENCE, StudyError, StudySpec, regenerate, run_study

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
TABLE1_FIELDS = ("delta", "implied_wacc_pct", "ldes_gw", "avg_price", "unmet_gwh", "gen_ccgt_twh",
                 "gen_vre_twh", "curtailment_twh")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def bundled_config_path() -> Path:
    return Path(str(resources.files("ldes_contracts") / "data" / "desk.toml"))


def _deltas(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad delta list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="system TOML (default: bundled desk config)")
    common.add_argument("--seed", type=int, default=None, help="seed recorded in outputs; gen-config uses it")
    common.add_argument("--grid", type=int, default=21, help="capacity grid points")
    common.add_argument("--delta", type=_deltas, default=None, help="risk-aversion weight(s), comma separated")
    common.add_argument("--mechanism", default=None, help="rcfd, scfd, cf or avc (comma list for report)")
    common.add_argument("--parameter", type=float, default=None, help="free contract parameter value")
    common.add_argument("--target-gw", type=float, default=None, help="target contracted capacity, GW")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--parallel", type=int, default=1, help="worker processes for grid evaluation")
    common.add_argument("--cost-incidence", choices=INCIDENCE, default="consumers")
    common.add_argument("--cap-rate", type=float, default=0.14, help="cap-and-floor cap rate")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="ldes-contracts", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)
    sub.add_parser("dispatch", parents=[common], help="risk-neutral expansion and scenario dispatch")
    sub.add_parser("equilibrium", parents=[common], help="contracted-capacity equilibrium")
    sub.add_parser("calibrate", parents=[common], help="calibrate a contract to a target capacity")
    sub.add_parser("sweep", parents=[common], help="equilibria across risk-aversion levels")
    rep = sub.add_parser("report", parents=[common], help="full study with tables and plot data")
    rep.add_argument("--from-result", type=Path, default=None, help="regenerate files from a result.json")
    gen = sub.add_parser("gen-config", parents=[common], help="write a synthetic GB-like config")
    gen.add_argument("--weather", type=int, default=2, help="weather draws (x3 gas levels)")
    gen.add_argument("--steps", type=int, default=48, help="hourly steps per scenario")
    return parser


def _load(args) -> SystemConfig:
    path = args.config or bundled_config_path()
    config = load_config(path)
    if args.seed is not None and args.command != "gen-config":
        config = replace(config, seed=args.seed)
    return config


def _profile(config: SystemConfig, args):
    base = config.investor()
    if args.delta:
        if len(args.delta) != 1:
            raise ConfigError("delta", "expected a single value for this command")
        if not 0 <= args.delta[0] <= 1:
            raise ConfigError("delta", "must lie in [0, 1]")
        return replace(base, delta=args.delta[0])
    return base


def _contract(config: SystemConfig, args):
    if args.mechanism is None:
        return None
    key = family_key(args.mechanism)
    if args.parameter is not None:
        c = template_contract(key, args.cap_rate, config.investor().risk_free_rate)
        return replace(c, **{c.parameter: args.parameter})
    for raw in config.contracts.values():
        if family_key(str(raw.get("type", ""))) == key:
            return contract_from_dict(raw)
    raise ConfigError("contract", f"no {key} contract in the config; pass --parameter")


def _emit(args, name: str, payload: dict, rows: Optional[list[dict]] = None) -> None:
    if args.out is None:
        return
    args.out.mkdir(parents=True, exist_ok=True)
    if args.format == "json" or rows is None:
        (args.out / f"{name}.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        with open(args.out / f"{name}.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)


def _model(config, args) -> ProfitModel:
    if args.grid < 2:
        raise ConfigError("grid", "needs at least two points")
    return ProfitModel(config, GridSpec(points=args.grid), parallel=args.parallel)


def cmd_dispatch(args) -> int:
    config = _load(args)
    fixed = {}
    if args.target_gw is not None:
        fixed[config.contract_technology] = 1e3 * args.target_gw
    solution = solve_problem(build_expansion(config, fixed))
    for name, c in solution.capacities.items():
        print(f"{name:>10s} {c:14.3f} MW")
    print(f"expected welfare {solution.expected_welfare:.6e}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        if args.format == "csv":
            write_results_csv(solution.results, args.out / "dispatch.csv")
        payload = {"capacities": solution.capacities, "expected_welfare": solution.expected_welfare,
                   "prices": {r.scenario_id: r.prices.tolist() for r in solution.results}}
        (args.out / "dispatch.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    config = _load(args)
    eq = find_equilibrium(config, _contract(config, args), _profile(config, args), model=_model(config, args))
    for name, c in eq.capacities.items():
        print(f"{name:>10s} {c:14.3f} MW")
    print(f"profit {eq.profit:.6f} $/MW-yr  flags: {','.join(eq.flags) or '-'}")
    payload = {
        "capacities": eq.capacities, "profits": eq.profits, "residuals": eq.residuals,
        "contract": contract_to_dict(eq.contract) if eq.contract else None,
        "delta": eq.profile.delta, "grid_trace": eq.grid_trace, "flags": eq.flags,
        "crossings": [c.__dict__ for c in eq.crossings], "metrics": eq.metrics(config), "seed": config.seed,
    }
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "equilibrium.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config = _load(args)
    if args.mechanism is None:
        raise ConfigError("mechanism", "required for calibrate")
    model = _model(config, args)
    profile = _profile(config, args)
    rn = find_equilibrium(config, None, replace(config.investor(), delta=1.0), model=model)
    model.pin(rn.state)
    target = rn.capacity if args.target_gw is None else 1e3 * args.target_gw
    result = calibrate(config, args.mechanism, target, profile, model=model, cap_rate=args.cap_rate)
    c = result.contract
    if c.key == "scfd":
        print(f"{LABELS[c.key]} {c.parameter} = {result.parameter:.4f} $/MWh")
    else:
        print(f"{LABELS[c.key]} {c.parameter} = {100 * result.parameter:.2f}% of F")
    print(f"target {target:.3f} MW, re-solved equilibrium {result.equilibrium_capacity:.3f} MW")
    _emit(args, "calibration", {"contract": contract_to_dict(c), **result.provenance(),
                                "equilibrium_mw": result.equilibrium_capacity, "delta": profile.delta,
                                "seed": config.seed})
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load(args)
    deltas = args.delta if args.delta is not None else [1.0, 0.9, 0.8, 0.7, 0.6]
    results = sweep_risk_aversion(config, _contract(config, args), deltas, model=_model(config, args))
    rows = [{"delta": r.profile.delta, **{k: v for k, v in r.metrics(config).items() if k in TABLE1_FIELDS}}
            for r in results]
    for row in rows:
        print(f"delta {row['delta']:.2f}: LDES {row['ldes_gw']:.3f} GW, implied WACC {row['implied_wacc_pct']:.2f}%")
    if rows:
        _emit(args, "table1", {"rows": rows, "seed": config.seed}, rows)
    return EXIT_OK


def cmd_report(args) -> int:
    out = args.out or Path("results")
    if args.from_result is not None:
        for p in regenerate(args.from_result, out):
            print(p)
        return EXIT_OK
    config = _load(args)
    mechs = tuple(m.strip() for m in args.mechanism.split(",") if m.strip()) if args.mechanism else \
        ("rcfd", "scfd", "cf", "avc")
    spec = StudySpec(
        mechanisms=mechs,
        deltas=tuple(args.delta) if args.delta is not None else StudySpec.deltas,
        target_mw=None if args.target_gw is None else 1e3 * args.target_gw,
        cap_rate=args.cap_rate, cost_incidence=args.cost_incidence, grid_points=args.grid,
        parallel=args.parallel,
    )
    report = run_study(config, spec, out_dir=out)
    for row in report.table3:
        print(f"{row['mechanism']:>6s} {row['parameter']} {row['value']:.2f}{row['unit']}  "
              f"cost {row['cost_installed_pct']:.2f}% of F")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_gen_config(args) -> int:
    if args.out is None:
        raise ConfigError("out", "gen-config needs --out PATH.toml")
    seed = 1 if args.seed is None else args.seed
    config = default_gb_config(n_weather=args.weather, steps=args.steps, seed=seed)
    path = args.out if args.out.suffix == ".toml" else args.out / "config.toml"
    path.parent.mkdir(parents=True, exist_ok=True)
    print(write_config(config, path))
    return EXIT_OK


COMMANDS = {"dispatch": cmd_dispatch, "equilibrium": cmd_equilibrium, "calibrate": cmd_calibrate,
            "sweep": cmd_sweep, "report": cmd_report, "gen-config": cmd_gen_config}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, EquilibriumError, CalibrationError, StudyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
