"""Scenario files, the figure studies and CSV/SVG output.

Units at this boundary are dBm for powers, dBsm for the RCS, degrees for
angles and metres for lengths. They are converted to SI and radians once,
in :meth:`Scenario.config`.
"""

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field, fields

import numpy as np

from .channel import SystemConfig, dbm_to_watt
from .crb import BudgetSpec, Parity, budget_optimal_L, crb_fp, crb_ms_opt, reduction_ratio
from .estimation import Pipeline, angle_grid, beampattern, estimate_doa, monte_carlo_rmse
from .exceptions import DomainError, SearchSpaceError
from .geometry import (PlacementVariant, brute_force_optimal, closed_form_variance, fp_positions,
                       optimal_positions, variance)

__all__ = [
    "SCHEMES",
    "Scenario",
    "Table",
    "load_scenario",
    "run_crb_vs_power",
    "run_crb_vs_sensors",
    "run_beampattern",
    "run_placement_report",
    "run_budget_report",
    "write_csv",
    "read_csv",
    "emit_outputs",
]

log = logging.getLogger(__name__)

SCHEMES = ("FP", "MS", "MS-Interp")

# scenario key -> (kind, default); kinds drive validation of sweep values too
_SYSTEM_KEYS = {
    "M": ("even", 32),
    "N": ("even", 32),
    "L": ("int", 4),
    "Kb": ("int", 2),
    "wavelength": ("pos", 0.2),
    "d_min": ("pos", 0.1),
    "D": ("pos", 2.0),
    "theta_deg": ("angle", 60.0),
    "theta_A_deg": ("angle", 0.0),
    "theta_D_deg": ("angle", 0.0),
    "P0_dbm": ("real", 15.0),
    "T": ("int", 64),
    "sigma2_dbm": ("real", -90.0),
    "d_BI": ("pos", 60.0),
    "d_IT": ("pos", 20.0),
    "kappa_dbsm": ("real", 7.0),
    "d_B": ("pos_or_none", None),
    "d_I": ("pos_or_none", None),
}
# K is swept through L = K / Kb
_SWEEPABLE = set(_SYSTEM_KEYS) | {"K"}
_BUDGET_KEYS = {"Q", "W1", "W2", "parity"}
_SWEEP_KEYS = {"parameter", "values"}
_SETUP_KEYS = {"M", "N", "K"}

DEFAULT_POWER_SWEEP = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
DEFAULT_K_SWEEP = tuple(range(4, 21, 2))
DEFAULT_POWER_SETUPS = ({"M": 32, "N": 32, "K": 8}, {"M": 64, "N": 32, "K": 8},
                        {"M": 32, "N": 64, "K": 8}, {"M": 32, "N": 32, "K": 16})
DEFAULT_BUDGET = {"Q": 80.0, "W1": 1.0, "W2": 4.0, "parity": "both"}


def _check_value(key, kind, value):
    if kind == "pos_or_none" and value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise DomainError(f"{key} must be a finite number, got {value!r}")
    if kind in ("int", "even"):
        if value != int(value) or value < 1:
            raise DomainError(f"{key} must be a positive integer, got {value!r}")
        if kind == "even" and int(value) % 2:
            raise DomainError(f"{key} must be even, got {value!r}")
        return int(value)
    if kind in ("pos", "pos_or_none") and value <= 0:
        raise DomainError(f"{key} must be positive, got {value!r}")
    if kind == "angle" and not abs(value) < 90:
        raise DomainError(f"{key} must lie in (-90, 90) degrees, got {value!r}")
    return float(value)


def _reject_unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        raise DomainError(f"{where} must be a JSON object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise DomainError(f"unknown key(s) in {where}: {', '.join(extra)}")


@dataclass(frozen=True)
class Scenario:
    """A reproducible experiment description.

    ``system`` holds the boundary-unit parameters keyed as in scenario files.
    ``sweep`` is ``(parameter, values)`` or ``None`` for the per-study default.
    """

    name: str = "scenario"
    system: dict = field(default_factory=lambda: {k: v for k, (_, v) in _SYSTEM_KEYS.items()})
    sweep: tuple = None
    schemes: tuple = SCHEMES
    trials: int = 0
    seed: int = 0
    out: str = "out"
    grid_step: float = 0.01
    snr_db: float = 20.0
    setups: tuple = DEFAULT_POWER_SETUPS
    budget: dict = field(default_factory=lambda: dict(DEFAULT_BUDGET))
    n_jobs: int = 1

    def __post_init__(self):
        if not self.schemes:
            raise DomainError("scheme list is empty")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise DomainError(f"unknown scheme(s) {bad}; choose from {list(SCHEMES)}")
        object.__setattr__(self, "schemes", tuple(s for s in SCHEMES if s in self.schemes))
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 0:
            raise DomainError(f"trials must be a non-negative integer, got {self.trials!r}")
        if not (isinstance(self.grid_step, (int, float)) and 0 < self.grid_step <= 1):
            raise DomainError(f"grid_step must be in (0, 1] degrees, got {self.grid_step!r}")
        if self.sweep is not None:
            param, values = self.sweep
            if param not in _SWEEPABLE:
                raise DomainError(f"cannot sweep {param!r}; choose from {sorted(_SWEEPABLE)}")
            kind = "int" if param == "K" else _SYSTEM_KEYS[param][0]
            if not values:
                raise DomainError("sweep values are empty")
            object.__setattr__(self, "sweep", (param, tuple(_check_value(param, kind, v) for v in values)))
        # fail fast on the base configuration itself
        self.config()

    def with_(self, **changes):
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return Scenario(**kw)

    def config(self, **overrides):
        """``SystemConfig`` in SI units; ``overrides`` use scenario keys (``K`` allowed)."""
        s = dict(self.system)
        s.update(overrides)
        if "K" in s:
            K = s.pop("K")
            if K % s["Kb"]:
                raise DomainError(f"K={K} is not a multiple of Kb={s['Kb']}")
            s["L"] = K // s["Kb"]
        return SystemConfig(
            M=s["M"], N=s["N"], L=s["L"], Kb=s["Kb"], wavelength=s["wavelength"],
            d_min=s["d_min"], D=s["D"], theta=math.radians(s["theta_deg"]),
            theta_A=math.radians(s["theta_A_deg"]), theta_D=math.radians(s["theta_D_deg"]),
            P0=dbm_to_watt(s["P0_dbm"]), T=s["T"], sigma2=dbm_to_watt(s["sigma2_dbm"]),
            d_BI=s["d_BI"], d_IT=s["d_IT"], kappa=10 ** (s["kappa_dbsm"] / 10),
            d_B=s["d_B"], d_I=s["d_I"])

    def sweep_values(self, parameter, default):
        if self.sweep is None:
            return tuple(default)
        if self.sweep[0] != parameter:
            raise DomainError(f"this study sweeps {parameter!r}, scenario sweeps {self.sweep[0]!r}")
        return self.sweep[1]

    @classmethod
    def from_dict(cls, data):
        top = {"name", "sweep", "schemes", "trials", "seed", "out", "grid_step", "snr_db",
               "setups", "budget", "n_jobs"} | set(_SYSTEM_KEYS)
        _reject_unknown(data, top, "scenario")
        system = {k: _check_value(k, kind, data.get(k, default)) for k, (kind, default) in _SYSTEM_KEYS.items()}
        kw = {"system": system}
        for key in ("name", "trials", "seed", "out", "grid_step", "snr_db", "n_jobs"):
            if key in data:
                kw[key] = data[key]
        if "schemes" in data:
            kw["schemes"] = tuple(data["schemes"])
        if data.get("sweep") is not None:
            sw = data["sweep"]
            _reject_unknown(sw, _SWEEP_KEYS, "sweep")
            if set(sw) != _SWEEP_KEYS:
                raise DomainError("sweep needs both 'parameter' and 'values'")
            kw["sweep"] = (sw["parameter"], tuple(sw["values"]))
        if "setups" in data:
            setups = []
            for i, st in enumerate(data["setups"]):
                _reject_unknown(st, _SETUP_KEYS, f"setups[{i}]")
                setups.append({k: _check_value(k, "int", v) for k, v in st.items()})
            kw["setups"] = tuple(setups)
        if "budget" in data:
            _reject_unknown(data["budget"], _BUDGET_KEYS, "budget")
            kw["budget"] = {**DEFAULT_BUDGET, **data["budget"]}
        return cls(**kw)


def load_scenario(path):
    """Read a JSON scenario; unknown keys at any level are an error."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}: invalid JSON ({exc})") from exc
    return Scenario.from_dict(data)


@dataclass
class Table:
    """Rows in column order plus the optional line-plot recipe."""

    name: str
    columns: tuple
    rows: list = field(default_factory=list)
    plot: dict = None  # {"x": col, "y": col, "series": (cols...), "xlabel", "ylabel"}
    skipped: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table {self.name} has {len(self.columns)} columns")
        self.rows.append(tuple(values))

    def skip(self, what, reason):
        log.info("skipped %s: %s", what, reason)
        self.skipped.append((what, reason))

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def _db(report):
    return report.crb_db


def _ms_layout(cfg):
    return optimal_positions(cfg.D, cfg.Kb, cfg.L, cfg.d_min).array


def run_crb_vs_power(scenario):
    """CRB (dB of deg²) against transmit power for each (M, N, K) setup.

    With ``trials > 0`` each MS row also carries the Monte Carlo MUSIC RMSE²
    for the direct (``MS``) or interpolated (``MS-Interp``) pipeline.
    """
    powers = scenario.sweep_values("P0_dbm", DEFAULT_POWER_SWEEP)
    t = Table("crb_vs_power",
              ("P0_dBm", "M", "N", "K", "scheme", "crb_db", "rmse2_db", "failed_trials"),
              plot={"x": "P0_dBm", "y": "crb_db", "series": ("scheme", "M", "N", "K"),
                    "xlabel": "P0 (dBm)", "ylabel": "CRB (dB deg^2)"})
    for setup in scenario.setups:
        for p in powers:
            try:
                cfg = scenario.config(P0_dbm=p, **setup)
            except DomainError as exc:
                t.skip(f"setup {setup} at {p} dBm", str(exc))
                continue
            for scheme in scenario.schemes:
                if scheme == "FP":
                    t.add(p, cfg.M, cfg.N, cfg.K, scheme, _db(crb_fp(cfg)), None, None)
                    continue
                rmse2 = failed = None
                if scenario.trials:
                    pipe = Pipeline.DIRECT if scheme == "MS" else Pipeline.INTERPOLATED
                    mc = monte_carlo_rmse(cfg, _ms_layout(cfg), scenario.trials, seed=scenario.seed,
                                          pipeline=pipe, grid_step=scenario.grid_step,
                                          n_jobs=scenario.n_jobs)
                    rmse2, failed = 10 * math.log10(mc.rmse_deg**2), mc.n_failed
                t.add(p, cfg.M, cfg.N, cfg.K, scheme, _db(crb_ms_opt(cfg)), rmse2, failed)
    return t


def run_crb_vs_sensors(scenario, n_values=(32, 64)):
    """CRB against the sensor count for MS (grouped and ungrouped) and FP.

    ``gap_db`` is ``crb_FP - crb_MS`` for the row's ``(K, N)``;
    ``grouping_delta_db`` is grouped minus ungrouped MS and is only reported.
    """
    Ks = scenario.sweep_values("K", DEFAULT_K_SWEEP)
    t = Table("crb_vs_k",
              ("K", "N", "scheme", "crb_db", "gap_db", "grouping_delta_db"),
              plot={"x": "K", "y": "crb_db", "series": ("scheme", "N"),
                    "xlabel": "K", "ylabel": "CRB (dB deg^2)"})
    for N in n_values:
        for K in Ks:
            try:
                cfg = scenario.config(K=K, N=N)
            except DomainError as exc:
                t.skip(f"K={K}, N={N}", str(exc))
                continue
            ms, fp = _db(crb_ms_opt(cfg)), _db(crb_fp(cfg))
            try:
                flat = _db(crb_ms_opt(cfg.replace(L=cfg.K, Kb=1)))
            except DomainError as exc:
                flat = None
                t.skip(f"ungrouped K={K}", str(exc))
            delta = None if flat is None else ms - flat
            if "MS" in scenario.schemes:
                t.add(K, N, "MS", ms, fp - ms, delta)
                if flat is not None:
                    t.add(K, N, "MS-ungrouped", flat, fp - flat, None)
            if "FP" in scenario.schemes:
                t.add(K, N, "FP", fp, 0.0, None)
    if "MS-Interp" in scenario.schemes:
        t.skip("MS-Interp", "interpolation changes the estimator, not the CRB")
    return t


def run_beampattern(scenario):
    """Normalised MUSIC spectra for FP, MS and MS-Interp, plus a peak summary.

    Returns ``(spectra_table, summary_table)``.
    """
    cfg = scenario.config()
    grid = angle_grid(scenario.grid_step)
    spectra = Table("beampattern", ("scheme", "angle_deg", "value_db"),
                    plot={"x": "angle_deg", "y": "value_db", "series": ("scheme",),
                          "xlabel": "theta (deg)", "ylabel": "normalised spectrum (dB)"})
    summary = Table("beampattern_summary", ("scheme", "peak_deg", "doa_deg", "width_3db_deg"))
    layouts = {"FP": fp_positions(cfg.K, cfg.wavelength), "MS": _ms_layout(cfg), "MS-Interp": _ms_layout(cfg)}
    for scheme in scenario.schemes:
        sp = beampattern(layouts[scheme], cfg, grid=grid, interpolate=scheme == "MS-Interp",
                         seed=scenario.seed, snr_db=scenario.snr_db)
        for a, v in zip(sp.angles, sp.values):
            spectra.add(scheme, float(a), float(v))
        summary.add(scheme, sp.peak_angle, estimate_doa(sp), sp.width_3db())
    return spectra, summary


def run_placement_report(scenario, grid_step=None):
    """Closed-form optimal layouts against the brute-force oracle for each ``L``."""
    s = scenario.system
    Ls = scenario.sweep_values("L", (s["L"],))
    t = Table("placement",
              ("L", "Kb", "variant", "positions", "closed_form_var", "layout_var",
               "brute_force_var", "agrees", "ratio_vs_fp", "note"))
    for L in Ls:
        cfg_kw = dict(L=L)
        try:
            cfg = scenario.config(**cfg_kw)
        except DomainError as exc:
            t.skip(f"L={L}", str(exc))
            continue
        if L < 2:
            t.skip(f"L={L}", "grouped placement needs L >= 2")
            continue
        cf = closed_form_variance(cfg.D, cfg.Kb, L, cfg.d_min)
        bf, note = None, ""
        try:
            _, bf = brute_force_optimal(cfg.D, cfg.Kb, L, cfg.d_min, grid_step=grid_step)
        except (SearchSpaceError, DomainError) as exc:
            note = f"oracle refused: {exc}"
        ratio = reduction_ratio(cfg)
        variants = (PlacementVariant.LEFT_HEAVY, PlacementVariant.RIGHT_HEAVY) if L % 2 else (PlacementVariant.LEFT_HEAVY,)
        for v in variants:
            lay = optimal_positions(cfg.D, cfg.Kb, L, cfg.d_min, v)
            agrees = None if bf is None else abs(bf - cf) <= 1e-12 * max(1.0, cf)
            t.add(L, cfg.Kb, v.value, " ".join(repr(round(x, 12)) for x in lay.positions),
                  cf, variance(lay.positions), bf, agrees, ratio, note)
    return t


def run_budget_report(scenario):
    """Exhaustive ``(L, N)`` search under ``W1 N + W2 L <= Q``.

    Returns ``(rows_table, roots_table)``; an empty feasible set gives empty
    tables with the reason recorded in ``skipped``.
    """
    b = scenario.budget
    spec = BudgetSpec(float(b["Q"]), float(b["W1"]), float(b["W2"]), Parity(b["parity"]))
    cfg = scenario.config()
    rows = Table("budget", ("L", "N", "objective", "crb_db", "cost", "argmax"),
                 plot={"x": "L", "y": "objective", "series": (), "xlabel": "L", "ylabel": "N^2 g(L)"})
    roots = Table("budget_roots", ("parity", "root"))
    try:
        res = budget_optimal_L(spec, cfg.D, cfg.d_min, cfg.Kb, config=cfg)
    except DomainError as exc:
        rows.skip("budget", str(exc))
        return rows, roots
    for L, N, p in res.rows:
        c = cfg.replace(L=L, N=N)
        rows.add(L, N, p, _db(crb_ms_opt(c)), spec.W1 * N + spec.W2 * L, L == res.L)
    for parity in ("odd", "even"):
        for r in res.roots[parity]:
            roots.add(parity, r)
    return rows, roots


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        # shortest round-trip repr keeps CSVs byte-stable and lossless
        return repr(float(value))
    return str(value)


def write_csv(table, path):
    """RFC-4180 CSV (CRLF line ends, minimal quoting, UTF-8)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def read_csv(path):
    """Header and rows as strings."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return tuple(rows[0]), [tuple(r) for r in rows[1:]]


def write_svg(table, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    spec = table.plot
    xi, yi = table.columns.index(spec["x"]), table.columns.index(spec["y"])
    si = [table.columns.index(c) for c in spec["series"]]
    series = {}
    for r in table.rows:
        if r[yi] is None:
            continue
        key = tuple(r[i] for i in si)
        series.setdefault(key, ([], []))
        series[key][0].append(r[xi])
        series[key][1].append(r[yi])
    with matplotlib.rc_context({"svg.hashsalt": "irsense", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for key, (xs, ys) in series.items():
            label = ", ".join(f"{c}={v}" if c != "scheme" else str(v) for c, v in zip(spec["series"], key))
            ax.plot(xs, ys, marker="o" if len(xs) < 50 else None, label=label or None)
        ax.set_xlabel(spec["xlabel"])
        ax.set_ylabel(spec["ylabel"])
        ax.grid(True, alpha=0.3)
        if any(series) and len(series) > 1:
            ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path


def emit_outputs(tables, out_dir, name, plot=False):
    """Write ``<name>_<table>.csv`` for every table and an SVG for plottable ones when ``plot``."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create output directory: {exc.strerror}", out_dir) from exc
    written = []
    for t in tables:
        base = os.path.join(out_dir, f"{name}_{t.name}")
        written.append(write_csv(t, base + ".csv"))
        if plot and t.plot is not None:
            written.append(write_svg(t, base + ".svg"))
    return written
