"""Command-line front end.

Commands
--------
``price``          J0, std and V0 for one configured grid.
``optimize-grid``  best ``b``, best free date vector, or a ``b`` sweep.
``simulate``       Monte Carlo hedging errors next to the analytic J0.
``reproduce``      published tables and figure data with deviations.

Configs are JSON files validated against ``data/config_schema.json``.
Output is CSV with 10 significant digits and LF line endings.  Exit codes:
0 success, 2 configuration error, 3 violated model assumption, 4 numerical
failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass
from importlib import resources
from typing import Any, Callable, Iterable, Optional, Sequence

import jsonschema
import numpy as np

from .errors import (AssumptionError, ConfigError, DomainError, NumericsError,
                     ParameterError, SolverError)
from .grid_opt import (GridObjective, b_sweep, lambda_sigma_pairs, optimize_b,
                       optimize_nonparametric, parametric_grid)
from .hedging_error import (bs_delta_coeffs, deterministic_strategy_error, fs_pure_coeffs,
                            j0_total)
from .fs_core import compute_fs
from .mc_oracle import STRATEGIES, compare_strategies, simulate_paths
from .payoff_measures import (DiscretizedMeasure, call_measure, digital_measure, discretize,
                              exponential_measure, put_measure)
from .pii_models import (BinomialParams, ElectricityParams, GaussianParams, NigParams,
                         TradingGrid, discretize_model, nig_moments, rescale_nig)

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_NUMERICS = 0, 2, 3, 4
REPRODUCE_HEADER = ("quantity", "setting", "computed", "reference", "abs_dev", "rel_dev")

# Digital runs use the coarse, untapered quadrature with a truncated terminal
# moment, which is the setting the published digital figures were produced in.
DIGITAL_QUAD = {"U": 100.0, "panels": 32, "order": 16, "taper": 0.0}
# Call runs: a coarse measure drives the grid searches, the fine one scores them.
CALL_WORKING = {"U": 100.0, "panels": 24, "order": 16}
CALL_FULL = {"U": 200.0, "panels": 64, "order": 16}
# Iteration cap of the free-date search per number of dates (runtime budget).
NONPARAM_MAXITER = {25: 25, 50: 25}
FIG_B_VALUES = (0.2, 0.4, 0.6, 0.8, 1.0)
FIG3_B_GRID = tuple(np.round(np.arange(0.1, 1.0001, 0.05), 4))


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def load_schema() -> dict:
    return json.loads(resources.files("vohedge").joinpath("data/config_schema.json").read_text())


def load_reference() -> dict:
    return json.loads(resources.files("vohedge").joinpath("data/reference.json").read_text())


def load_config(path: str) -> dict:
    """Read and validate a JSON run configuration."""
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc
    grid = cfg["grid"]
    if "dates" in grid and ("N" in grid or "b" in grid):
        raise ConfigError("grid: give either explicit dates or N (with optional b)")
    if "dates" not in grid and "N" not in grid:
        raise ConfigError("grid: N or dates is required")


def _nig(section: dict) -> NigParams:
    try:
        p = NigParams(section["alpha"], section["beta"], section["delta"], section["mu"])
    except KeyError as exc:
        raise ConfigError(f"model: NIG parameter {exc.args[0]!r} missing") from exc
    scale = section.get("scale")
    return rescale_nig(p, scale) if scale is not None else p


def build_grid(cfg: dict) -> TradingGrid:
    g = cfg["grid"]
    if "dates" in g:
        grid = TradingGrid(np.asarray(g["dates"], dtype=float))
        if abs(grid.maturity - g["T"]) > 1e-12 * g["T"]:
            raise ConfigError("grid: last date must equal T")
        return grid
    return parametric_grid(g.get("b", 1.0), g["N"], g["T"])


def build_model(cfg: dict, maturity: float, n: int):
    m = cfg["model"]
    fam = m["family"]
    if fam == "nig":
        return _nig(m)
    if fam == "gaussian":
        if "sigma" not in m:
            raise ConfigError("model: gaussian needs sigma")
        return GaussianParams(m.get("mu", 0.0), m["sigma"])
    if fam == "electricity":
        if "driver" not in m or "sigma" not in m:
            raise ConfigError("model: electricity needs driver and sigma")
        return ElectricityParams(_nig(m["driver"]), m["sigma"], m.get("lambda", 0.0),
                                 m.get("maturity", maturity))
    if "up" not in m or "down" not in m or "probs" not in m:
        raise ConfigError("model: binomial needs up, down and probs")
    probs = m["probs"]
    if len(probs) == 1:
        probs = probs * n
    return BinomialParams(m["up"], m["down"], tuple(probs))


def build_measure(cfg: dict, *, working: bool = False) -> DiscretizedMeasure:
    p = cfg["payoff"]
    q = dict(cfg.get("quadrature", {}))
    if working:
        q.update(q.pop("working", {}))
    else:
        q.pop("working", None)
    kind = p["type"]
    if kind == "exponential":
        if "atoms" not in p:
            raise ConfigError("payoff: exponential needs atoms")
        atoms = [(complex(a["z_re"], a.get("z_im", 0.0)), complex(a["w_re"], a.get("w_im", 0.0)))
                 for a in p["atoms"]]
        return discretize(exponential_measure(atoms))
    if "strike" not in p:
        raise ConfigError(f"payoff: {kind} needs a strike")
    kw = {k: q[k] for k in ("U",) if k in q}
    if "R" in p:
        kw["R"] = p["R"]
    if kind == "call":
        src = call_measure(p["strike"], taper=q.get("taper", 0.0), **kw)
    elif kind == "put":
        src = put_measure(p["strike"], taper=q.get("taper", 0.0), **kw)
    else:
        src = digital_measure(p["strike"], taper=q.get("taper", 0.1), **kw)
    return discretize(src, q.get("panels", 64), q.get("order", 16), q.get("grading", 4.0))


@dataclass
class Run:
    """Everything a command needs, assembled from one config."""

    cfg: dict
    grid: TradingGrid
    model: Any
    measure: DiscretizedMeasure
    s0: float
    terminal: str

    @classmethod
    def from_config(cls, cfg: dict) -> Run:
        grid = build_grid(cfg)
        model = build_model(cfg, grid.maturity, grid.n)
        return cls(cfg, grid, model, build_measure(cfg), float(cfg.get("s0", 100.0)),
                   cfg.get("terminal", "auto"))


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def fmt(x) -> str:
    """10 significant digits, empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else f"{float(x):.10g}"
    return str(x)


def write_csv(header: Sequence[str], rows: Iterable[Sequence], out: Optional[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    text = buf.getvalue()
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def _dates_str(grid: TradingGrid) -> str:
    return " ".join(f"{t:.10g}" for t in grid.dates)


# ---------------------------------------------------------------------------
# config-driven commands
# ---------------------------------------------------------------------------

def cmd_price(cfg: dict, out: Optional[str] = None) -> str:
    run = Run.from_config(cfg)
    table = discretize_model(run.model, run.grid)
    rep = j0_total(table, run.measure, run.s0, terminal=run.terminal)
    b = cfg["grid"].get("b", 1.0) if "dates" not in cfg["grid"] else None
    return write_csv(("V0", "J0", "std", "b", "dates"),
                     [(rep.v0, rep.j0, rep.std, b, _dates_str(run.grid))], out)


def cmd_optimize_grid(cfg: dict, out: Optional[str] = None) -> str:
    run = Run.from_config(cfg)
    g = cfg["grid"]
    n, T = run.grid.n, run.grid.maturity
    work = build_measure(cfg, working=True) if "working" in cfg.get("quadrature", {}) else run.measure
    obj = GridObjective(run.model, work, run.s0, terminal=run.terminal)

    def score(grid: TradingGrid):
        if work is run.measure:
            return obj.report(grid)
        return j0_total(discretize_model(run.model, grid), run.measure, run.s0,
                        terminal=run.terminal)

    if "b_sweep" in g:
        reps = [(b, score(parametric_grid(b, n, T))) for b in g["b_sweep"]]
        return write_csv(("b", "std", "V0"), [(b, r.std, r.v0) for b, r in reps], out)
    mode = g.get("optimize", "b")
    rows = []
    init = None
    if mode in ("b", "both"):
        rb = optimize_b(run.model, work, n, T, run.s0, objective=obj)
        rep = score(rb.grid)
        rows.append(("parametric", rb.b_star, rep.j0, rep.std, rep.v0, rb.converged,
                     _dates_str(rb.grid)))
        init = rb.grid
    if mode in ("dates", "both"):
        rn = optimize_nonparametric(run.model, work, n, T, run.s0, init=init, objective=obj,
                                    maxiter=NONPARAM_MAXITER.get(n, 200))
        rep = score(rn.grid)
        rows.append(("nonparametric", None, rep.j0, rep.std, rep.v0, rn.converged,
                     _dates_str(rn.grid)))
    if mode == "none":
        rep = score(run.grid)
        rows.append(("given", g.get("b"), rep.j0, rep.std, rep.v0, True, _dates_str(run.grid)))
    return write_csv(("search", "b_star", "J0", "std", "V0", "converged", "dates"), rows, out)


def cmd_simulate(cfg: dict, out: Optional[str] = None, threads: int = 1) -> str:
    run = Run.from_config(cfg)
    mc = cfg.get("mc", {})
    strategies = tuple(mc.get("strategies", STRATEGIES))
    table = discretize_model(run.model, run.grid)
    batch = simulate_paths(run.model, run.grid, run.s0, mc.get("n_paths", 100_000),
                           mc.get("seed", 0), threads=threads)
    reps = compare_strategies(batch, run.measure, strategies, table=table,
                              payoff=mc.get("payoff_mode", "exact"))
    fs = compute_fs(table, run.measure)
    analytic = {}
    if "VO" in strategies:
        analytic["VO"] = j0_total(table, run.measure, run.s0, terminal=run.terminal, fs=fs).j0
    if "FS-pure" in strategies:
        analytic["FS-pure"] = deterministic_strategy_error(
            table, run.measure, fs_pure_coeffs(fs), reps["FS-pure"].capital, run.s0,
            terminal=run.terminal).variance
    if "BS-delta" in strategies:
        f, _ = bs_delta_coeffs(table, run.measure, run.s0)
        analytic["BS-delta"] = deterministic_strategy_error(
            table, run.measure, f, reps["BS-delta"].capital, run.s0,
            terminal=run.terminal).variance
    rows = [(st, r.n_paths, r.capital, r.mean, r.se_mean, r.variance, r.se_variance,
             analytic.get(st), r.z_variance(analytic[st]) if st in analytic else None)
            for st, r in reps.items()]
    return write_csv(("strategy", "n_paths", "capital", "mean", "se_mean", "variance",
                      "se_variance", "analytic_variance", "z_variance"), rows, out)


# ---------------------------------------------------------------------------
# reproduction of published tables and figure data
# ---------------------------------------------------------------------------

class Collector:
    """Rows of ``quantity, setting, computed, reference, abs_dev, rel_dev``."""

    def __init__(self) -> None:
        self.rows: list[tuple] = []

    def add(self, quantity: str, setting: str, computed: float,
            reference: Optional[float] = None) -> None:
        if reference is None:
            self.rows.append((quantity, setting, computed, None, None, None))
            return
        dev = computed - reference
        rel = dev / abs(reference) if reference != 0 else None
        self.rows.append((quantity, setting, computed, reference, dev, rel))


def digital_model(ref: dict, c: float) -> NigParams:
    b = ref["models"]["nig_base"]
    return rescale_nig(NigParams(b["alpha"], b["beta"], b["delta"], b["mu"]), c)


def electricity_model(ref: dict, sigma: Optional[float] = None,
                      lam: Optional[float] = None, beta_sign: float = 1.0) -> ElectricityParams:
    d = ref["models"]["electricity_driver"]
    e = ref["models"]["electricity"]
    driver = NigParams(d["alpha"], beta_sign * d["beta"], d["delta"], d["mu"])
    return ElectricityParams(driver, e["sigma"] if sigma is None else sigma,
                             e["lambda"] if lam is None else lam, e["maturity"])


def digital_search_measure(ref: dict) -> DiscretizedMeasure:
    q = DIGITAL_QUAD
    return discretize(digital_measure(ref["models"]["digital"]["strike"], U=q["U"],
                                      taper=q["taper"]), q["panels"], q["order"])


def call_measures(ref: dict) -> tuple[DiscretizedMeasure, DiscretizedMeasure]:
    k = ref["models"]["call"]["strike"]
    work = discretize(call_measure(k, U=CALL_WORKING["U"]), CALL_WORKING["panels"],
                      CALL_WORKING["order"])
    full = discretize(call_measure(k, U=CALL_FULL["U"]), CALL_FULL["panels"], CALL_FULL["order"])
    return work, full


def reproduce_table1(ref: dict, col: Collector) -> None:
    t = ref["table1"]
    for c, a_ref, k_ref in zip(t["C"], t["alpha"], t["excess_kurtosis"]):
        p = digital_model(ref, c)
        col.add("alpha", f"C={c:g}", p.alpha, a_ref)
        col.add("excess_kurtosis", f"C={c:g}", nig_moments(p)[3], k_ref)


def _digital_runs(ref: dict) -> list[dict]:
    """Uniform, parametric-optimal and free-optimal grids for every scale C."""
    t = ref["table2"]
    dg = ref["models"]["digital"]
    n, T, s0 = dg["N"], dg["maturity"], dg["s0"]
    d = digital_search_measure(ref)
    out = []
    for c in t["C"]:
        model = digital_model(ref, c)
        obj = GridObjective(model, d, s0, terminal="truncated")
        uni = obj.report(TradingGrid.uniform(n, T))
        rb = optimize_b(model, d, n, T, s0, objective=obj)
        rn = optimize_nonparametric(model, d, n, T, s0, init=rb.grid, objective=obj)
        out.append({"C": c, "model": model, "objective": obj, "uniform": uni, "param": rb,
                    "free": rn})
    return out


def reproduce_table2(ref: dict, col: Collector, runs: Optional[list] = None) -> list[dict]:
    t = ref["table2"]
    dg = ref["models"]["digital"]
    runs = runs if runs is not None else _digital_runs(ref)
    exact_measure = discretize(digital_measure(dg["strike"]))
    for i, r in enumerate(runs):
        s = f"C={r['C']:g}"
        col.add("std10_uniform", s, 10 * r["uniform"].std, t["std10_uniform"][i])
        col.add("v0_uniform", s, r["uniform"].v0, t["v0_uniform"][i])
        col.add("b_star", s, r["param"].b_star, t["b_star"][i])
        col.add("std10_parametric", s, 10 * r["param"].std, t["std10_parametric"][i])
        col.add("std10_optimal", s, 10 * r["free"].std, t["std10_optimal"][i])
        col.add("v0_optimal", s, r["free"].v0, t["v0_optimal"][i])
        # same quantity with the fine tapered quadrature and the exact terminal moment
        table = discretize_model(r["model"], TradingGrid.uniform(dg["N"], dg["maturity"]))
        ex = j0_total(table, exact_measure, dg["s0"], terminal="exact")
        col.add("std10_uniform_exact_limit", s, 10 * ex.std)
    return runs


def _call_runs(ref: dict, model: Optional[ElectricityParams] = None,
               ns: Optional[Sequence[int]] = None, free: bool = True) -> list[dict]:
    t = ref["table3"]
    s0 = ref["models"]["call"]["s0"]
    model = model if model is not None else electricity_model(ref)
    T = model.maturity
    work, full = call_measures(ref)
    out = []
    for n in (ns if ns is not None else t["N"]):
        obj = GridObjective(model, work, s0)
        rb = optimize_b(model, work, n, T, s0, objective=obj)
        grids = {"uniform": TradingGrid.uniform(n, T), "param": rb.grid}
        res = {"N": n, "b_star": rb.b_star}
        if free:
            rn = optimize_nonparametric(model, work, n, T, s0, init=rb.grid, objective=obj,
                                        maxiter=NONPARAM_MAXITER.get(n, 200))
            grids["free"] = rn.grid
            res["free_converged"] = rn.converged
        for name, grid in grids.items():
            table = discretize_model(model, grid)
            rep = j0_total(table, full, s0)
            f, v_bs = bs_delta_coeffs(table, full, s0)
            bs = deterministic_strategy_error(table, full, f, v_bs, s0)
            res[name] = {"vo": rep, "bs": bs, "bs_price": v_bs, "grid": grid}
        out.append(res)
    return out


def reproduce_table3(ref: dict, col: Collector, runs: Optional[list] = None) -> list[dict]:
    t = ref["table3"]
    runs = runs if runs is not None else _call_runs(ref)
    for i, r in enumerate(runs):
        s = f"N={r['N']}"
        col.add("std_vo_uniform", s, r["uniform"]["vo"].std, t["std_vo_uniform"][i])
        col.add("std_bs_uniform", s, r["uniform"]["bs"].std, t["std_bs_uniform"][i])
        col.add("v0_uniform", s, r["uniform"]["vo"].v0, t["v0_uniform"][i])
        col.add("b_star", s, r["b_star"], t["b_star"][i])
        col.add("std_vo_parametric", s, r["param"]["vo"].std, t["std_vo_parametric"][i])
        col.add("std_vo_optimal", s, r["free"]["vo"].std, t["std_vo_optimal"][i])
        col.add("std_bs_optimal", s, r["free"]["bs"].std, t["std_bs_optimal"][i])
        col.add("v0_optimal", s, r["free"]["vo"].v0, t["v0_optimal"][i])
    return runs


def _lambda_pairs(ref: dict) -> list[tuple[float, float]]:
    e = ref["models"]["electricity"]
    lam0, sig0, T = e["lambda"], e["sigma"], e["maturity"]
    target = sig0 ** 2 * -math.expm1(-2 * lam0 * T) / (2 * lam0)
    return lambda_sigma_pairs(ref["table4"]["lambda"], T, target)


def reproduce_table4(ref: dict, col: Collector) -> None:
    for (lam, sig), s_ref in zip(_lambda_pairs(ref), ref["table4"]["sigma"]):
        col.add("sigma", f"lambda={lam:g}", sig, s_ref)


def reproduce_figure1(ref: dict, col: Collector) -> None:
    dg = ref["models"]["digital"]
    for b in FIG_B_VALUES:
        for k, t in enumerate(parametric_grid(b, dg["N"], dg["maturity"]).dates):
            col.add("date", f"b={b:g};k={k}", t)


def reproduce_figure2(ref: dict, col: Collector, runs: Optional[list] = None) -> None:
    runs = runs if runs is not None else _digital_runs(ref)
    for r in runs:
        for name, res in (("parametric", r["param"]), ("nonparametric", r["free"])):
            for k, t in enumerate(res.dates):
                col.add(f"date_{name}", f"C={r['C']:g};k={k}", t)


def reproduce_figure3(ref: dict, col: Collector) -> None:
    dg = ref["models"]["digital"]
    d = digital_search_measure(ref)
    for c in ref["table2"]["C"]:
        sweep = b_sweep(digital_model(ref, c), d, dg["N"], dg["maturity"], dg["s0"],
                        FIG3_B_GRID, terminal="truncated")
        for b, std, _ in sweep:
            col.add("std10", f"C={c:g};b={b:g}", 10 * std)


def reproduce_figure4(ref: dict, col: Collector, runs: Optional[list] = None) -> None:
    runs = runs if runs is not None else _call_runs(ref)
    t = ref["table3"]
    for i, r in enumerate(runs):
        s = f"N={r['N']}"
        col.add("std_vo_uniform", s, r["uniform"]["vo"].std, t["std_vo_uniform"][i])
        col.add("std_vo_optimal", s, r["free"]["vo"].std, t["std_vo_optimal"][i])
        col.add("std_bs_uniform", s, r["uniform"]["bs"].std, t["std_bs_uniform"][i])
        col.add("std_bs_optimal", s, r["free"]["bs"].std, t["std_bs_optimal"][i])


def _lambda_runs(ref: dict) -> list[dict]:
    n = ref["table4"]["N"]
    out = []
    for lam, sig in _lambda_pairs(ref):
        r = _call_runs(ref, electricity_model(ref, sig, lam), ns=[n], free=False)[0]
        r["lambda"] = lam
        out.append(r)
    return out


def reproduce_figure5(ref: dict, col: Collector, runs: Optional[list] = None) -> list[dict]:
    runs = runs if runs is not None else _lambda_runs(ref)
    for r in runs:
        col.add("b_star", f"lambda={r['lambda']:g}", r["b_star"])
    return runs


def reproduce_figure6(ref: dict, col: Collector, runs: Optional[list] = None) -> list[dict]:
    runs = runs if runs is not None else _lambda_runs(ref)
    gains = ref["lambda_study"]["vo_gain_percent"]
    for r in runs:
        s = f"lambda={r['lambda']:g}"
        uni, par = r["uniform"]["vo"].std, r["param"]["vo"].std
        col.add("std_vo_uniform", s, uni)
        col.add("std_vo_parametric", s, par)
        col.add("gain_percent", s, 100 * (1 - par / uni), gains.get(f"{r['lambda']:g}"))
    return runs


def beta_flip_study(ref: dict) -> list[dict]:
    """BS-delta bias and std and VO std on two uniform dates for both signs
    of the driver skew parameter (other driver parameters unchanged)."""
    n = ref["beta_flip"]["N"]
    s0 = ref["models"]["call"]["s0"]
    _, full = call_measures(ref)
    out = []
    for sign in (1.0, -1.0):
        model = electricity_model(ref, beta_sign=sign)
        table = discretize_model(model, TradingGrid.uniform(n, model.maturity))
        vo = j0_total(table, full, s0)
        f, v_bs = bs_delta_coeffs(table, full, s0)
        bs = deterministic_strategy_error(table, full, f, v_bs, s0)
        out.append({"sign": sign, "vo_std": vo.std, "bs_bias": bs.bias, "bs_std": bs.std,
                    "bs_price": v_bs, "log_mean": float(np.sum(np.log(table.m_real(1.0))))})
    return out


def reproduce_beta_flip(ref: dict, col: Collector) -> None:
    bf = ref["beta_flip"]
    for i, r in enumerate(beta_flip_study(ref)):
        s = "beta" if r["sign"] > 0 else "minus_beta"
        col.add("bs_bias", s, r["bs_bias"], bf["bs_bias"][i])
        col.add("bs_std", s, r["bs_std"], bf["bs_std"][i])
        col.add("vo_std", s, r["vo_std"], bf["vo_std"][i])


TABLES: dict[str, Callable] = {"1": reproduce_table1, "2": reproduce_table2,
                               "3": reproduce_table3, "4": reproduce_table4,
                               "beta-flip": reproduce_beta_flip}
FIGURES: dict[str, Callable] = {"1": reproduce_figure1, "2": reproduce_figure2,
                                "3": reproduce_figure3, "4": reproduce_figure4,
                                "5": reproduce_figure5, "6": reproduce_figure6}


def cmd_reproduce(table: Optional[str] = None, figure: Optional[str] = None,
                  out: Optional[str] = None) -> str:
    if (table is None) == (figure is None):
        raise ConfigError("reproduce needs exactly one of --table or --figure")
    reg, key = (TABLES, table) if table is not None else (FIGURES, figure)
    if key not in reg:
        raise ConfigError(f"unknown id {key!r}; choose from {sorted(reg)}")
    col = Collector()
    reg[key](load_reference(), col)
    return write_csv(REPRODUCE_HEADER, col.rows, out)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vohedge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("price", "optimize-grid", "simulate"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="CSV destination (default stdout)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads")
        sp.add_argument("--seed", type=int, help="overrides mc.seed")
    rp = sub.add_parser("reproduce")
    rp.add_argument("--table", help=f"one of {sorted(TABLES)}")
    rp.add_argument("--figure", help=f"one of {sorted(FIGURES)}")
    rp.add_argument("--out", help="CSV destination (default stdout)")
    rp.add_argument("--threads", type=int, default=1, help="worker threads")
    return p


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (AssumptionError, DomainError)):
        return EXIT_ASSUMPTION
    if isinstance(exc, (ConfigError, ParameterError)):
        return EXIT_CONFIG
    if isinstance(exc, (NumericsError, SolverError, FloatingPointError)):
        return EXIT_NUMERICS
    raise exc


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    try:
        if args.command == "reproduce":
            cmd_reproduce(args.table, args.figure, args.out)
        else:
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.setdefault("mc", {})["seed"] = args.seed
            out = args.out or cfg.get("output")
            if args.command == "price":
                cmd_price(cfg, out)
            elif args.command == "optimize-grid":
                cmd_optimize_grid(cfg, out)
            else:
                cmd_simulate(cfg, out, args.threads)
    except Exception as exc:  # mapped to an exit code or re-raised
        code = exit_code(exc)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    sys.stdout.flush()
    print(f"done in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
