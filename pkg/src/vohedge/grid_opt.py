"""Rebalancing-date grids that minimize the variance-optimal hedging error.

Two searches are offered: over the one-parameter family
``t_k = T - T (1 - k/N)^(1/b)`` and over all date vectors with fixed
endpoints.  Both share one :class:`GridObjective`, which keeps the pair-sum
memo of the payoff measure alive across grids.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import optimize

from .errors import ParameterError
from .hedging_error import ErrorReport, PairEvaluator, j0_date_gradient, j0_total
from .payoff_measures import DiscretizedMeasure
from .pii_models import (ContinuousModel, TradingGrid, decay_integral, discretize_model,
                         increment_variances, nig_moments)

B_LOWER = 0.05  # floor of the b search
MIN_GAP = 1e-13  # smallest admissible last interval, relative to T


@dataclass
class GridOptResult:
    """Outcome of a grid search; ``b_star`` is ``None`` for free date vectors."""

    b_star: Optional[float]
    grid: TradingGrid
    j0: float
    v0: float
    iterations: int
    converged: bool
    evaluations: int
    runtime: float
    message: str = ""
    history: list = field(default_factory=list)

    @property
    def std(self) -> float:
        return float(np.sqrt(max(self.j0, 0.0)))

    @property
    def dates(self) -> np.ndarray:
        return self.grid.dates


def parametric_grid(b: float, n: int, maturity: float) -> TradingGrid:
    """Dates ``T - T (1 - k/N)^(1/b)``; ``b = 1`` is the uniform grid and
    small ``b`` pushes the dates towards maturity."""
    if not 0.0 < b <= 1.0:
        raise ParameterError(f"grid parameter b must lie in (0, 1], got {b}")
    if n < 1 or not maturity > 0:
        raise ParameterError("need N >= 1 and T > 0")
    k = np.arange(n + 1)
    dates = maturity - maturity * (1.0 - k / n) ** (1.0 / b)
    dates[0] = 0.0
    dates[-1] = maturity
    return TradingGrid(dates)


def min_admissible_b(n: int) -> float:
    """Smallest ``b`` whose last interval ``T N^(-1/b)`` stays above ``MIN_GAP * T``;
    below it the dates next to maturity round onto ``T``."""
    return float(np.log(max(n, 2)) / -np.log(MIN_GAP))


class GridObjective:
    """``grid -> J0`` for a fixed model, payoff measure and spot, cached per grid."""

    def __init__(self, model: ContinuousModel, measure: DiscretizedMeasure, s0: float, *,
                 terminal: str = "auto", method: str = "closed"):
        self.model = model
        self.measure = measure
        self.s0 = float(s0)
        self.terminal = terminal
        self.method = method
        self.pairs = PairEvaluator(measure)
        self.evaluations = 0
        self._cache: dict[TradingGrid, ErrorReport] = {}

    def report(self, grid: TradingGrid) -> ErrorReport:
        hit = self._cache.get(grid)
        if hit is not None:
            return hit
        table = discretize_model(self.model, grid, self.method)
        rep = j0_total(table, self.measure, self.s0, terminal=self.terminal, pairs=self.pairs)
        self.evaluations += 1
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[grid] = rep
        return rep

    def __call__(self, grid: TradingGrid) -> float:
        return self.report(grid).j0

    def value_and_gradient(self, grid: TradingGrid, step: float,
                           central: bool = True) -> tuple[float, np.ndarray]:
        """J0 and its finite-difference derivative in each interior date."""
        table = discretize_model(self.model, grid, self.method)
        if table.kappa is not None or table.primitive is not None:
            self.evaluations += 1
            return j0_date_gradient(table, self.measure, self.s0, step, central=central,
                                    terminal=self.terminal, pairs=self.pairs)
        dates = grid.dates
        n = grid.n
        gaps = np.diff(dates)
        j = self(grid)
        grad = np.zeros(n - 1)
        for i in range(1, n):
            h = min(step, 0.5 * gaps[i - 1], 0.5 * gaps[i])
            up = dates.copy()
            up[i] += h
            if central:
                dn = dates.copy()
                dn[i] -= h
                grad[i - 1] = (self(TradingGrid(up)) - self(TradingGrid(dn))) / (2 * h)
            else:
                grad[i - 1] = (self(TradingGrid(up)) - j) / h
        return j, grad


def _as_objective(model, measure, s0, terminal, objective) -> GridObjective:
    if objective is not None:
        return objective
    return GridObjective(model, measure, s0, terminal=terminal)


def optimize_b(model: ContinuousModel, measure: DiscretizedMeasure, n: int, maturity: float,
               s0: float, *, terminal: str = "auto", xtol: float = 1e-4,
               lower: float = B_LOWER, maxiter: int = 200,
               objective: Optional[GridObjective] = None) -> GridOptResult:
    """Minimize ``b -> J0(parametric_grid(b, N, T))`` over ``[lower, 1]``.

    Bounded Brent search (golden sections with parabolic steps).  The uniform
    endpoint ``b = 1`` is always evaluated, so the result never loses to it.
    The lower end is raised to :func:`min_admissible_b` when that is larger.
    """
    t0 = time.perf_counter()
    lower = max(lower, min_admissible_b(n))
    obj = _as_objective(model, measure, s0, terminal, objective)
    history: list[tuple[float, float]] = []

    def f(b: float) -> float:
        val = obj(parametric_grid(float(b), n, maturity))
        history.append((float(b), val))
        return val

    res = optimize.minimize_scalar(f, bounds=(lower, 1.0), method="bounded",
                                   options={"xatol": xtol, "maxiter": maxiter})
    b_best, j_best = float(res.x), float(res.fun)
    j_one = f(1.0)
    if j_one < j_best:
        b_best, j_best = 1.0, j_one
    grid = parametric_grid(b_best, n, maturity)
    rep = obj.report(grid)
    return GridOptResult(b_best, grid, rep.j0, rep.v0, int(res.nit), bool(res.success),
                         obj.evaluations, time.perf_counter() - t0, str(res.message), history)


def _dates_from_x(x: np.ndarray, maturity: float) -> np.ndarray:
    dt = x * x
    dates = np.concatenate([[0.0], np.cumsum(dt / dt.sum()) * maturity])
    dates[-1] = maturity
    return dates


def optimize_nonparametric(model: ContinuousModel, measure: DiscretizedMeasure, n: int,
                           maturity: float, s0: float, init: Optional[TradingGrid] = None, *,
                           terminal: str = "auto", fd_step: float = 1e-5,
                           gtol: float = 1e-6, maxiter: int = 200, central: bool = True,
                           objective: Optional[GridObjective] = None) -> GridOptResult:
    """Minimize J0 over all date vectors ``0 < t_1 < ... < t_{N-1} < T``.

    Increments are written as ``T x_k^2 / sum x^2`` so any real ``x`` gives a
    valid grid.  The gradient is a central difference in each interior date
    (step ``fd_step * T``, shrunk if a neighbour is closer) pushed through the
    chain rule to ``x``; BFGS stops once the date gradient, scaled by ``T``,
    is below ``gtol * J0`` or after ``maxiter`` iterations.
    """
    t0 = time.perf_counter()
    obj = _as_objective(model, measure, s0, terminal, objective)
    init = init if init is not None else TradingGrid.uniform(n, maturity)
    if init.n != n or abs(init.maturity - maturity) > 1e-12 * maturity:
        raise ParameterError("initial grid does not match N and T")
    if n == 1:
        rep = obj.report(init)
        return GridOptResult(None, init, rep.j0, rep.v0, 0, True, obj.evaluations,
                             time.perf_counter() - t0, "single interval: nothing to optimize")
    j_init = obj(init)
    scale = j_init if j_init > 0 else 1.0
    h_base = fd_step * maturity
    small_grad: dict[bytes, bool] = {}

    def fun_and_grad(x: np.ndarray) -> tuple[float, np.ndarray]:
        dates = _dates_from_x(x, maturity)
        grid = TradingGrid(dates)
        j, gd = obj.value_and_gradient(grid, h_base, central)
        small_grad[x.tobytes()] = bool(np.linalg.norm(gd) * maturity < gtol * j)
        # dJ/d(dt_k) = sum of date gradients over the dates that move with dt_k
        gdt = np.concatenate([np.cumsum(gd[::-1])[::-1], [0.0]])
        s = np.sum(x * x)
        gx = (2.0 * maturity / s) * x * (gdt - np.sum(gdt * x * x) / s)
        return j / scale, gx / scale

    class _Done(Exception):
        pass

    track = {"x": None, "iters": 0}

    def callback(xk: np.ndarray) -> None:
        track["iters"] += 1
        track["x"] = np.array(xk, copy=True)
        if small_grad.get(xk.tobytes(), False):
            raise _Done

    x0 = np.sqrt(init.dt / maturity)
    converged, message = False, ""
    try:
        res = optimize.minimize(fun_and_grad, x0, jac=True, method="BFGS", callback=callback,
                                options={"maxiter": maxiter, "gtol": 0.0})
        x_best = res.x
        message = str(res.message)
        converged = small_grad.get(res.x.tobytes(), False)
    except _Done:
        x_best = track["x"]
        converged, message = True, "date gradient below tolerance"
    grid = TradingGrid(_dates_from_x(x_best, maturity))
    rep = obj.report(grid)
    if rep.j0 > j_init:
        grid, rep = init, obj.report(init)
        message += " (kept the initial grid)"
    return GridOptResult(None, grid, rep.j0, rep.v0, track["iters"], converged,
                         obj.evaluations, time.perf_counter() - t0, message)


def b_sweep(model: ContinuousModel, measure: DiscretizedMeasure, n: int, maturity: float,
            s0: float, bs: Sequence[float], *, terminal: str = "auto",
            objective: Optional[GridObjective] = None) -> list[tuple[float, float, float]]:
    """``(b, std, V0)`` along a list of grid parameters."""
    obj = _as_objective(model, measure, s0, terminal, objective)
    out = []
    for b in bs:
        rep = obj.report(parametric_grid(float(b), n, maturity))
        out.append((float(b), rep.std, rep.v0))
    return out


def lambda_sigma_pairs(lambdas: Union[Sequence[float], np.ndarray], maturity: float,
                       target_var: float, driver_variance: float = 1.0) -> list[tuple[float, float]]:
    """Volatility level that keeps ``Var(X_T)`` fixed for each mean-reversion speed.

    ``Var(X_T) = sigma^2 v (1 - exp(-2 lam T)) / (2 lam)`` with ``v`` the
    driver variance per unit time; ``lam = 0`` gives ``sigma^2 v T``.
    """
    if not target_var > 0 or not maturity > 0 or not driver_variance > 0:
        raise ParameterError("target variance, horizon and driver variance must be > 0")
    out = []
    for lam in lambdas:
        lam = float(lam)
        if lam < 0:
            raise ParameterError("mean-reversion speed must be >= 0")
        eff = float(decay_integral(lam, maturity))
        out.append((lam, float(np.sqrt(target_var / (driver_variance * eff)))))
    return out


def terminal_variance(model: ContinuousModel, grid: TradingGrid) -> float:
    """``Var(X_T)`` as the sum of the per-interval variances."""
    return float(np.sum(increment_variances(model, grid)))


def driver_unit_variance(model) -> float:
    """Variance per unit time of an NIG driver."""
    return nig_moments(model)[1]
