"""Study orchestration and report tables.

A study runs the two no-contract baselines (risk-neutral and the
risk-averse incomplete market), calibrates each requested mechanism to the
target capacity, and collects tables and plot data. Every CSV is written
from the :class:`StudyReport` alone, and the report round-trips through
``result.json``, so persisted results regenerate the same files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .calibration import CalibrationResult, calibrate
from .config import SystemConfig, config_to_dict, load_config
from .contracts import LABELS, contract_to_dict, expected_mechanism_cost, family_key
from .equilibrium import (PROFIT_RTOL, EquilibriumResult, GridSpec, ProfitModel, find_equilibrium, payoffs,
                          revenues)
from .risk import CashflowDistribution, cvar, revenue_stats, scenario_irr

logger = logging.getLogger(__name__)

INCIDENCE = ("consumers", "none")
DEFAULT_DELTAS = (1.0, 0.9, 0.8, 0.7, 0.6)
MECHANISMS = ("rcfd", "scfd", "cf", "avc")


class StudyError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def cs_index(mechanism_cs: float, incomplete_cs: float, risk_neutral_cs: float) -> float:
    """Consumer surplus on a scale where the incomplete-market baseline is 0
    and the risk-neutral baseline is 100."""
    span = risk_neutral_cs - incomplete_cs
    if span == 0:
        raise ValueError("degenerate baselines: incomplete and risk-neutral consumer surplus are equal")
    return 100.0 * (mechanism_cs - incomplete_cs) / span


@dataclass(frozen=True)
class StudySpec:
    mechanisms: tuple[str, ...] = MECHANISMS
    deltas: tuple[float, ...] = DEFAULT_DELTAS  # risk-aversion sweep
    delta: float = 0.6  # risk aversion used for calibration
    target_mw: Optional[float] = None  # defaults to the risk-neutral capacity
    cap_rate: float = 0.14
    cost_incidence: str = "consumers"
    mechanism_sweep: bool = True  # recalibrate each mechanism at every sweep delta
    grid_points: int = 21
    capacity_tol: float = 10.0  # MW
    parallel: int = 1

    def __post_init__(self):
        if self.cost_incidence not in INCIDENCE:
            raise ValueError(f"cost_incidence must be one of {INCIDENCE}")
        for d in (*self.deltas, self.delta):
            if not 0 <= d <= 1:
                raise ValueError(f"delta {d} outside [0, 1]")
        object.__setattr__(self, "mechanisms", tuple(family_key(m) for m in self.mechanisms))


@dataclass
class StudyReport:
    table1: list[dict]
    table2: list[dict]
    table3: list[dict]
    cs_index: list[dict]
    irr_cdf: dict[str, list[dict]]
    payouts: dict[str, list[dict]]
    sweeps: dict[str, list[dict]]
    provenance: dict
    incomplete: Optional[dict] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "StudyReport":
        return cls(**raw)


def config_hash(config: SystemConfig) -> str:
    doc = config_to_dict(config, "profiles.csv")
    doc["profiles"] = [[s.id, list(s.demand_profile), {k: list(v) for k, v in sorted(s.vre_profiles.items())}]
                       for s in config.scenarios]
    blob = json.dumps(doc, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _versions() -> dict:
    import scipy

    from . import __version__
    out = {"ldes_contracts": __version__, "numpy": np.__version__, "scipy": scipy.__version__}
    try:
        import highspy  # noqa: F401
        from importlib.metadata import version
        out["highspy"] = version("highspy")
    except Exception:  # pragma: no cover - optional backend
        out["highspy"] = None
    return out


def _weighted_median(values: Sequence[float], probs: Sequence[float]) -> float:
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(np.asarray(probs)[order])
    k = int(np.searchsorted(cum, 0.5 - 1e-12))
    return float(np.asarray(values)[order][k])


def _consumer_surplus(config: SystemConfig, eq: EquilibriumResult, incidence: str) -> CashflowDistribution:
    """Scenario consumer surplus, less contract payments when consumers fund them."""
    pays = payoffs(config, eq.state, eq.contract).values
    charge = 1.0 if incidence == "consumers" else 0.0
    vals = [s.consumer_surplus - charge * k * eq.capacity for s, k in zip(eq.per_scenario, pays)]
    return CashflowDistribution(tuple(vals), eq.state.probabilities)


def _irrs(config: SystemConfig, eq: EquilibriumResult) -> tuple[CashflowDistribution, list[float]]:
    tech = config.contract_tech
    rev = revenues(config, eq.state, eq.contract)
    return rev, [scenario_irr(r, tech, eq.profile.risk_free_rate).rate for r in rev.values]


def _table2_row(config: SystemConfig, label: str, eq: EquilibriumResult) -> dict:
    rev, irrs = _irrs(config, eq)
    st = revenue_stats(rev, irrs, eq.profile.psi)
    return {
        "mechanism": label,
        "cv": st.cv if st.cv_defined else None,
        "min_irr_pct": 100.0 * st.min_irr,
        "cvar_irr_pct": 100.0 * st.cvar_irr,
        "implied_wacc_pct": eq.metrics(config)["implied_wacc_pct"],
    }


def _irr_cdf(config: SystemConfig, eq: EquilibriumResult) -> list[dict]:
    rev, irrs = _irrs(config, eq)
    order = sorted(range(len(irrs)), key=lambda i: (irrs[i], eq.per_scenario[i].scenario_id))
    cum = 0.0
    rows = []
    for i in order:
        cum += rev.probabilities[i]
        rows.append({"scenario_id": eq.per_scenario[i].scenario_id, "irr_pct": 100.0 * irrs[i],
                     "cumulative_probability": min(cum, 1.0)})
    return rows


def _payout_rows(config: SystemConfig, eq: EquilibriumResult) -> list[dict]:
    F = config.contract_tech.annualized_fixed_cost
    dist = payoffs(config, eq.state, eq.contract)
    rows = [{"kind": "sample", "scenario_id": s.scenario_id, "probability": p, "payoff_per_mw": k,
             "payoff_pct_of_fixed_cost": 100.0 * k / F}
            for s, p, k in zip(eq.per_scenario, dist.probabilities, dist.values)]
    for kind, value in (("mean", dist.mean), ("median", _weighted_median(dist.values, dist.probabilities))):
        rows.append({"kind": kind, "scenario_id": "", "probability": None, "payoff_per_mw": value,
                     "payoff_pct_of_fixed_cost": 100.0 * value / F})
    return rows


def _parameter_display(result: CalibrationResult) -> tuple[str, float, str]:
    c = result.contract
    if c.key == "scfd":
        return c.parameter, result.parameter, "$/MWh"
    return c.parameter, 100.0 * result.parameter, "%"


def _table3_row(config: SystemConfig, cal: CalibrationResult, baseline: float) -> dict:
    eq = cal.equilibrium
    tech = config.contract_tech
    cost = expected_mechanism_cost(payoffs(config, eq.state, eq.contract), eq.capacity, baseline, tech)
    name, value, unit = _parameter_display(cal)
    return {
        "mechanism": LABELS[cal.contract.key],
        "parameter": name,
        "value": value,
        "unit": unit,
        "cost_installed_pct": 100.0 * cost.per_mw_installed,
        "cost_incentivized_pct": 100.0 * cost.per_mw_incentivized if cost.incentivized_defined else None,
        "equilibrium_gw": eq.capacity / 1e3,
        "target_gw": cal.target / 1e3,
        "iterations": cal.iterations,
        "residual": cal.residual,
    }


def run_study(config: SystemConfig | str | Path, spec: StudySpec = StudySpec(),
              out_dir: str | Path | None = None, model: Optional[ProfitModel] = None) -> StudyReport:
    """Run baselines, the risk-aversion sweep and mechanism calibrations.

    On failure the stages finished so far are written with an ``incomplete``
    record and :class:`StudyError` is raised naming the failed stage.
    """
    if not isinstance(config, SystemConfig):
        config = load_config(config)
    grid = GridSpec(points=spec.grid_points, capacity_tol=spec.capacity_tol)
    model = model or ProfitModel(config, grid, parallel=spec.parallel)
    base = config.investor()
    tech = config.contract_tech
    provenance = {
        "config_name": config.name,
        "config_hash": config_hash(config),
        "seed": config.seed,
        "versions": _versions(),
        "tolerances": {"profit_rtol": PROFIT_RTOL, "grid_points": grid.points,
                       "capacity_tol_mw": grid.capacity_tol, "probe_fraction": grid.probe_fraction},
        "study": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(spec).items()},
        "contract_technology": tech.name,
        "annualized_fixed_cost": tech.annualized_fixed_cost,
    }
    report = StudyReport([], [], [], [], {}, {}, {}, provenance)
    stage = "baseline"
    try:
        rn = find_equilibrium(config, None, replace(base, delta=1.0), model=model)
        model.pin(rn.state)
        profile = replace(base, delta=spec.delta)
        incomplete = find_equilibrium(config, None, profile, model=model)
        target = rn.capacity if spec.target_mw is None else float(spec.target_mw)
        provenance["risk_neutral_mw"] = rn.capacity
        provenance["incomplete_mw"] = incomplete.capacity
        provenance["target_mw"] = target

        stage = "sweep"
        for d in spec.deltas:
            eq = find_equilibrium(config, None, replace(base, delta=d), model=model)
            report.table1.append({"delta": d, **eq.metrics(config), "flags": ";".join(eq.flags)})

        stage = "baseline-metrics"
        report.table2.append(_table2_row(config, "None", incomplete))
        report.irr_cdf["none"] = _irr_cdf(config, incomplete)
        cs_rn = _consumer_surplus(config, rn, spec.cost_incidence)
        cs_inc = _consumer_surplus(config, incomplete, spec.cost_incidence)
        psi = profile.psi
        anchors = [(cs_inc.mean, cvar(cs_inc, psi)), (cs_rn.mean, cvar(cs_rn, psi))]
        degenerate = [name for name, (a, b) in zip(("mean", "cvar"), zip(*anchors)) if a == b]
        if degenerate:
            provenance["cs_index_degenerate"] = degenerate
        for label, dist in (("Incomplete", cs_inc), ("Risk-neutral", cs_rn)):
            report.cs_index.append(_cs_row(label, dist, anchors, psi))

        for key in spec.mechanisms:
            stage = f"calibrate:{key}"
            cal = calibrate(config, key, target, profile, model=model, cap_rate=spec.cap_rate)
            eq = cal.equilibrium
            label = LABELS[key]
            report.table2.append(_table2_row(config, label, eq))
            report.table3.append(_table3_row(config, cal, incomplete.capacity))
            report.irr_cdf[key] = _irr_cdf(config, eq)
            report.payouts[key] = _payout_rows(config, eq)
            report.cs_index.append(_cs_row(label, _consumer_surplus(config, eq, spec.cost_incidence), anchors, psi))
            provenance.setdefault("contracts", {})[key] = {**contract_to_dict(cal.contract), **cal.provenance(),
                                                           "flags": eq.flags}
            if spec.mechanism_sweep:
                stage = f"sweep:{key}"
                report.sweeps[key] = _mechanism_sweep(config, key, spec, target, model)
    except Exception as exc:
        report.incomplete = {"stage": stage, "error": f"{type(exc).__name__}: {exc}"}
        if out_dir is not None:
            write_report(report, out_dir)
        raise StudyError(stage, str(exc)) from exc
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def _index_or_none(value: float, incomplete: float, risk_neutral: float) -> Optional[float]:
    # equal baselines leave the index undefined; the study records them in provenance
    return None if incomplete == risk_neutral else cs_index(value, incomplete, risk_neutral)


def _cs_row(label: str, dist: CashflowDistribution, anchors, psi: float) -> dict:
    (mean_inc, cvar_inc), (mean_rn, cvar_rn) = anchors
    tail = cvar(dist, psi)
    return {
        "mechanism": label,
        "mean_cs": dist.mean,
        "cvar_cs": tail,
        "mean_index": _index_or_none(dist.mean, mean_inc, mean_rn),
        "cvar_index": _index_or_none(tail, cvar_inc, cvar_rn),
    }


def _mechanism_sweep(config: SystemConfig, key: str, spec: StudySpec, target: float,
                     model: ProfitModel) -> list[dict]:
    """Calibrated parameter, cost and implied WACC of one mechanism across risk aversion."""
    base = config.investor()
    rows = []
    for d in spec.deltas:
        profile = replace(base, delta=d)
        incomplete = find_equilibrium(config, None, profile, model=model)
        cal = calibrate(config, key, target, profile, model=model, cap_rate=spec.cap_rate)
        row = _table3_row(config, cal, incomplete.capacity)
        rows.append({"delta": d, "parameter": row["parameter"], "value": row["value"],
                     "cost_installed_pct": row["cost_installed_pct"],
                     "cost_incentivized_pct": row["cost_incentivized_pct"],
                     "implied_wacc_pct": cal.equilibrium.metrics(config)["implied_wacc_pct"],
                     "equilibrium_gw": row["equilibrium_gw"]})
    return rows


def _write_rows(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})


def write_report(report: StudyReport, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    """Write all tables and plot data for ``report`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "csv":
        files = {"table1.csv": report.table1, "table2.csv": report.table2, "table3.csv": report.table3,
                 "cs_index.csv": report.cs_index}
        files.update({f"irr_cdf_{k}.csv": v for k, v in report.irr_cdf.items()})
        files.update({f"payouts_{k}.csv": v for k, v in report.payouts.items()})
        files.update({f"sweep_{k}.csv": v for k, v in report.sweeps.items()})
        for name, rows in files.items():
            _write_rows(out / name, rows)
            written.append(out / name)
    path = out / "result.json"
    # insertion order is deterministic and keeps CSV columns stable on regeneration
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    written.append(path)
    marker = out / "INCOMPLETE"
    if report.incomplete is not None:
        marker.write_text(f"stage: {report.incomplete['stage']}\n{report.incomplete['error']}\n")
        written.append(marker)
    elif marker.exists():
        marker.unlink()
    return written


def load_report(path: str | Path) -> StudyReport:
    return StudyReport.from_dict(json.loads(Path(path).read_text()))


def regenerate(result_json: str | Path, out_dir: str | Path) -> list[Path]:
    """Rewrite every report file from a persisted ``result.json``."""
    return write_report(load_report(result_json), out_dir)
