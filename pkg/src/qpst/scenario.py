"""Scenario ingestion, execution and reporting.

A scenario file is TOML (schema = 1) describing one transfer sweep:

    schema = 1
    name = "fig1a"              # optional, defaults to the file stem
    chain_type = "tunneling"    # or "pst" (engineered sqrt(m(N-m)) bonds)
    n = 5
    omega = 10.0                # sender/receiver frequency
    Omega = 10010.0             # transmitter frequency (tunneling chains)
    lambda = 1.0                # end coupling; the unit everything is scaled by
    epsilon = 5000.0            # transmitter-bond multiplier (tunneling chains)
    Gamma = 1e-3                # transmitter decay rate
    alpha = 5.0                 # cat amplitude in the sender
    transmitter_beta = 0.0      # coherent amplitude of all other modes

    [grid]
    window = [15000.0, 65000.0] # tau scan window (units of 1/lambda)
    samples = 300
    mode = "envelope"           # or "raw"

    [outputs]
    csv = "fig1a.csv"           # relative to the output directory

    [expectations]              # optional pass/fail tolerances
    peak_p_ex_min = 0.95
    tau_ex_window = [15707.9, 62831.9]
    # late_window = [1900.0, 2100.0]; late_p_ex_max = 0.1
    # rec_tau_window = [...]; rec_p_ex_window = [0.4, 0.6]

All frequencies and rates are divided by `lambda` on ingestion, so the
stored network is in scaled units with end coupling 1 and tau = lambda*t.
Curve CSVs have columns exactly `tau,p_ex,p_rec,precision_flag` with
floats at 17 significant digits and a header comment block recording the
full parameter set, making every figure self-describing.
"""

from __future__ import annotations

import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .coherent import CoherentSuperposition, make_cat
from .propagator import decompose
from .topology import (
    ChainSpec,
    NetworkTopology,
    build_chain,
    build_general,
    build_pst_chain,
    scaled_params,
)
from .transfer import (
    ExtrapolationWarning,
    NoTransferInWindow,
    RegimeWarning,
    analytic_tau_ex,
    exchange_time_numeric,
    exchange_time_spectral,
    peak_probability,
    transfer_curve,
)

__all__ = [
    "Scenario",
    "ConfigError",
    "load_scenario",
    "run_scenario",
    "run_suite",
    "emit_plot_script",
]

SCHEMA_VERSION = 1

_EXPECTATION_KEYS = {
    "peak_p_ex_min",
    "peak_p_ex_max",
    "tau_ex_window",
    "late_window",
    "late_p_ex_max",
    "rec_tau_window",
    "rec_p_ex_window",
}


class ConfigError(ValueError):
    """Scenario file violates the schema; message names the field."""


@dataclass
class Scenario:
    """One transfer sweep: chain, initial cat, tau grid, outputs."""

    name: str
    chain_type: str
    n: int
    omega: float
    Omega: float | None
    lam: float
    epsilon: float | None
    Gamma: float
    alpha: float
    transmitter_beta: float
    window: tuple[float, float]
    samples: int
    grid_mode: str
    csv_name: str
    expectations: dict = field(default_factory=dict)

    def topology(self) -> NetworkTopology:
        if self.chain_type == "pst":
            top = build_pst_chain(self.n, 1.0, self.omega / self.lam)
            gamma = top.gamma.copy()
            for m in range(1, self.n - 1):
                gamma[m, m] = self.Gamma / self.lam
            return NetworkTopology(top.n, top.omega, top.coupling, gamma)
        spec = self.chain_spec()
        return build_chain(spec)

    def chain_spec(self) -> ChainSpec:
        return ChainSpec(
            n=self.n,
            omega_end=self.omega,
            omega_mid=self.Omega if self.Omega is not None else 0.0,
            lambda_end=self.lam,
            epsilon=self.epsilon if self.epsilon is not None else 1.0,
            gamma_mid=self.Gamma,
        )

    def initial_state(self) -> CoherentSuperposition:
        return make_cat(self.n, 1, self.alpha, self.transmitter_beta)

    def parameters(self) -> dict:
        return {
            "name": self.name,
            "chain_type": self.chain_type,
            "n": self.n,
            "omega": self.omega,
            "Omega": self.Omega,
            "lambda": self.lam,
            "epsilon": self.epsilon,
            "Gamma": self.Gamma,
            "alpha": self.alpha,
            "transmitter_beta": self.transmitter_beta,
            "window": list(self.window),
            "samples": self.samples,
            "grid_mode": self.grid_mode,
        }


def _require(table: dict, key: str, kinds, where: str):
    if key not in table:
        raise ConfigError(f"{where}: missing required field '{key}'")
    value = table[key]
    if not isinstance(value, kinds):
        raise ConfigError(
            f"{where}: field '{key}' has type {type(value).__name__}, "
            f"expected {kinds}"
        )
    return value


def load_scenario(path) -> Scenario:
    """Parse and validate one scenario file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML syntax error: {exc}") from exc

    where = str(path)
    schema = _require(raw, "schema", int, where)
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"{where}: unsupported schema {schema}, expected 1")

    chain_type = raw.get("chain_type", "tunneling")
    if chain_type not in ("tunneling", "pst"):
        raise ConfigError(f"{where}: chain_type must be 'tunneling' or 'pst'")
    n = _require(raw, "n", int, where)
    if n < 2:
        raise ConfigError(f"{where}: n must be >= 2")
    omega = float(_require(raw, "omega", (int, float), where))
    lam = float(raw.get("lambda", 1.0))
    if lam <= 0:
        raise ConfigError(f"{where}: lambda must be positive")
    Omega = None
    epsilon = None
    if chain_type == "tunneling" and n >= 3:
        Omega = float(_require(raw, "Omega", (int, float), where))
        epsilon = float(_require(raw, "epsilon", (int, float), where))
    Gamma = float(raw.get("Gamma", 0.0))
    if Gamma < 0:
        raise ConfigError(f"{where}: Gamma must be >= 0")
    alpha = float(_require(raw, "alpha", (int, float), where))
    transmitter_beta = float(raw.get("transmitter_beta", 0.0))

    grid = _require(raw, "grid", dict, where)
    window = _require(grid, "window", list, f"{where} [grid]")
    if len(window) != 2 or not all(isinstance(v, (int, float)) for v in window):
        raise ConfigError(f"{where} [grid]: window must be [lo, hi]")
    lo, hi = float(window[0]), float(window[1])
    if not (hi > lo >= 0):
        raise ConfigError(f"{where} [grid]: need hi > lo >= 0")
    samples = _require(grid, "samples", int, f"{where} [grid]")
    if samples < 2:
        raise ConfigError(f"{where} [grid]: samples must be >= 2")
    grid_mode = grid.get("mode", "envelope")
    if grid_mode not in ("envelope", "raw"):
        raise ConfigError(f"{where} [grid]: mode must be 'envelope' or 'raw'")

    outputs = raw.get("outputs", {})
    name = raw.get("name", path.stem)
    csv_name = outputs.get("csv", f"{name}.csv")

    expectations = raw.get("expectations", {})
    unknown = set(expectations) - _EXPECTATION_KEYS
    if unknown:
        raise ConfigError(
            f"{where} [expectations]: unknown keys {sorted(unknown)}"
        )
    return Scenario(
        name=name, chain_type=chain_type, n=n, omega=omega, Omega=Omega,
        lam=lam, epsilon=epsilon, Gamma=Gamma, alpha=alpha,
        transmitter_beta=transmitter_beta, window=(lo, hi), samples=samples,
        grid_mode=grid_mode, csv_name=csv_name, expectations=dict(expectations),
    )


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_csv(path: Path, scenario: Scenario, curve):
    lines = ["# qpst transfer curve", f"# version = {__version__}"]
    for key, value in scenario.parameters().items():
        lines.append(f"# {key} = {value}")
    lines.append("tau,p_ex,p_rec,precision_flag")
    for t, pe, pr, ok in zip(curve.taus, curve.p_ex, curve.p_rec, curve.precise):
        lines.append(f"{_fmt(float(t))},{_fmt(float(pe))},{_fmt(float(pr))},"
                     f"{0 if ok else 1}")
    path.write_text("\n".join(lines) + "\n")


def _evaluate_expectations(scenario: Scenario, summary: dict, curve) -> list:
    checks = []
    exp = scenario.expectations

    def record(key, passed, detail):
        checks.append({"key": key, "passed": bool(passed), "detail": detail})

    peak = summary.get("peak_p_ex")
    tau_ex = (summary.get("tau_ex") or {}).get("numeric")
    if "peak_p_ex_min" in exp:
        record("peak_p_ex_min", peak is not None and peak >= exp["peak_p_ex_min"],
               f"peak_p_ex = {peak}")
    if "peak_p_ex_max" in exp:
        record("peak_p_ex_max", peak is not None and peak <= exp["peak_p_ex_max"],
               f"peak_p_ex = {peak}")
    if "tau_ex_window" in exp:
        lo, hi = exp["tau_ex_window"]
        record("tau_ex_window", tau_ex is not None and lo <= tau_ex <= hi,
               f"tau_ex = {tau_ex}")
    if "late_p_ex_max" in exp:
        lo, hi = exp.get("late_window", scenario.window)
        mask = (curve.taus >= lo) & (curve.taus <= hi)
        late = float(curve.p_ex[mask].max()) if np.any(mask) else math.nan
        record("late_p_ex_max", late <= exp["late_p_ex_max"],
               f"max p_ex over [{lo:g}, {hi:g}] = {late}")
    if "rec_p_ex_window" in exp:
        rec = summary.get("recurrence") or {}
        sec = rec.get("p_ex_secondary", math.nan)
        p_lo, p_hi = exp["rec_p_ex_window"]
        record("rec_p_ex_window", p_lo <= sec <= p_hi,
               f"secondary p_ex at recurrence tau={rec.get('tau')} = {sec}")
    return checks


def run_scenario(source, out_dir, allow_imprecise: bool = False) -> dict:
    """Execute one scenario; writes the curve CSV and a summary JSON.

    Returns the summary dict (also written next to the CSV).  The
    summary's "status" is "pass" when every expectation holds and all
    samples are phase-precise (or imprecision was allowed).
    """
    scenario = source if isinstance(source, Scenario) else load_scenario(source)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()

    top = scenario.topology()
    gen = build_general(top)
    sd = decompose(gen)
    initial = scenario.initial_state()

    summary: dict = {
        "name": scenario.name,
        "parameters": scenario.parameters(),
        "tau_ex": {"numeric": None, "spectral": None, "analytic": None},
        "peak_p_ex": None,
        "peak_tau": None,
        "regime": None,
        "warnings": [],
    }

    try:
        report = exchange_time_numeric(sd, scenario.window)
        summary["tau_ex"]["numeric"] = report.tau_ex
        peak_tau, peak_p = peak_probability(sd, initial, report.tau_ex)
        summary["peak_p_ex"] = peak_p
        summary["peak_tau"] = peak_tau
    except NoTransferInWindow as exc:
        summary["warnings"].append(f"no transfer peak in window: {exc}")

    if top.ideal:
        try:
            spectral = exchange_time_spectral(top, scenario.window)
            summary["tau_ex"]["spectral"] = spectral.tau_ex
        except NoTransferInWindow as exc:
            summary["warnings"].append(f"spectral conditions unmet: {exc}")

    if "rec_tau_window" in scenario.expectations or \
            "rec_p_ex_window" in scenario.expectations:
        rec_window = scenario.expectations.get("rec_tau_window", scenario.window)
        try:
            rec_rep = exchange_time_numeric(sd, rec_window, row=0, col=0)
            t_rec, p_rec = peak_probability(sd, initial, rec_rep.tau_ex,
                                            probe_mode=1)
            _, p_sec = peak_probability(sd, initial, rec_rep.tau_ex,
                                        probe_mode=scenario.n)
            summary["recurrence"] = {"tau": t_rec, "p_rec": p_rec,
                                     "p_ex_secondary": p_sec}
        except NoTransferInWindow as exc:
            summary["warnings"].append(f"no recurrence peak in window: {exc}")

    if scenario.chain_type == "tunneling" and scenario.n >= 3:
        params = scaled_params(scenario.chain_spec())
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            summary["tau_ex"]["analytic"] = analytic_tau_ex(
                scenario.n, params, scenario.epsilon
            )
        for w in caught:
            if issubclass(w.category, (RegimeWarning, ExtrapolationWarning)):
                summary["warnings"].append(str(w.message))
        summary["regime"] = {
            "mu": params.mu,
            "eta": params.eta,
            "mu_small": params.mu_small,
            "eta_small": params.eta_small,
            "eps_mu_small": params.eps_mu_small,
        }

    taus = np.linspace(scenario.window[0], scenario.window[1], scenario.samples)
    curve = transfer_curve(sd, initial, taus, mode=scenario.grid_mode)

    csv_path = out_dir / scenario.csv_name
    _write_csv(csv_path, scenario, curve)
    summary["csv"] = str(csv_path)

    precise = bool(np.all(curve.precise))
    summary["precise"] = precise
    summary["expectations"] = _evaluate_expectations(scenario, summary, curve)
    summary["runtime_seconds"] = time.perf_counter() - t_start

    failed = [c for c in summary["expectations"] if not c["passed"]]
    if not precise and not allow_imprecise:
        summary["status"] = "imprecise"
    elif failed:
        summary["status"] = "fail"
    else:
        summary["status"] = "pass"

    summary_path = out_dir / (Path(scenario.csv_name).stem + "_summary.json")
    summary_path.write_text(json.dumps(summary, indent=2, default=str) + "\n")
    return summary


def run_suite(directory, out_dir, allow_imprecise: bool = False,
              threads: int = 2) -> dict:
    """Run every scenario in a directory; aggregate pass/fail.

    Scenarios run concurrently; a failing scenario never affects the
    others.  The aggregate report is written even when scenarios fail.
    """
    directory = Path(directory)
    configs = sorted(directory.glob("*.toml"))
    if not configs:
        raise ConfigError(f"no scenarios (*.toml) found in {directory}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(path):
        try:
            return run_scenario(path, out_dir, allow_imprecise)
        except Exception as exc:  # noqa: BLE001 - isolation per scenario
            return {"name": path.stem, "status": "error", "error": str(exc)}

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(one, configs))

    aggregate = {
        "suite": str(directory),
        "version": __version__,
        "scenarios": results,
        "passed": sum(1 for r in results if r["status"] == "pass"),
        "total": len(results),
    }
    (out_dir / "suite_report.json").write_text(
        json.dumps(aggregate, indent=2, default=str) + "\n"
    )
    lines = [f"suite {directory}: {aggregate['passed']}/{aggregate['total']} passed"]
    for r in results:
        lines.append(f"  {r['name']:24s} {r['status']}")
        for check in r.get("expectations", []) or []:
            mark = "ok " if check["passed"] else "FAIL"
            lines.append(f"    [{mark}] {check['key']}: {check['detail']}")
    (out_dir / "suite_report.txt").write_text("\n".join(lines) + "\n")
    return aggregate


_PLOT_TEMPLATE = '''\
#!/usr/bin/env python3
"""Plot a qpst transfer curve ({csv_name})."""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
taus, p_ex, p_rec = [], [], []
with open(here / {csv_rel!r}) as fh:
    for row in csv.reader(r for r in fh if not r.startswith("#")):
        if row[0] == "tau":
            continue
        taus.append(float(row[0]))
        p_ex.append(float(row[1]))
        p_rec.append(float(row[2]))

panels = 2 if {dual_panel} else 1
fig, axes = plt.subplots(panels, 1, sharex=True, figsize=(8, 3 * panels))
axes = axes if panels == 2 else [axes]
axes[0].plot(taus, p_ex, lw=0.9)
axes[0].set_ylabel(r"$P_{{ex}}$")
if panels == 2:
    axes[1].plot(taus, p_rec, lw=0.9, color="tab:orange")
    axes[1].set_ylabel(r"$P_{{rec}}$")
axes[-1].set_xlabel(r"$\\tau$")
{log_x_line}
fig.tight_layout()
fig.savefig(here / {png_rel!r}, dpi=200)
print("wrote", here / {png_rel!r})
'''


def emit_plot_script(csv_path, out_path=None, log_x: bool = False) -> Path:
    """Write a standalone matplotlib script for a curve CSV.

    The script references the CSV by relative path and adds a recurrence
    panel when the stored p_rec is non-negligible.
    """
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise FileNotFoundError(f"curve CSV not found: {csv_path}")
    p_rec_max = 0.0
    with open(csv_path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("tau"):
                continue
            parts = line.strip().split(",")
            if len(parts) >= 3:
                p_rec_max = max(p_rec_max, float(parts[2]))
    out_path = Path(out_path) if out_path else csv_path.with_suffix(".plot.py")
    rel = os.path.relpath(csv_path.resolve(), out_path.resolve().parent)
    script = _PLOT_TEMPLATE.format(
        csv_name=csv_path.name,
        csv_rel=rel,
        dual_panel=repr(p_rec_max >= 0.05),
        png_rel=csv_path.stem + ".png",
        log_x_line='for ax in axes:\n    ax.set_xscale("log")' if log_x else "",
    )
    out_path.write_text(script)
    return out_path
