"""Monte Carlo check of the analytic hedging-error formulas.

Paths are generated block by block, each block from its own counter-based
stream spawned from one seed, so results do not depend on thread count.
The same blocks double as jackknife groups for the standard errors.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ParameterError
from .fs_core import (FsCoefficients, compute_fs, fs_tables, lambda_coeffs,
                      mean_value_process)
from .hedging_error import bs_delta_coeffs
from .payoff_measures import DiscretizedMeasure
from .pii_models import (BinomialParams, ContinuousModel, CumulantTable, DiscreteParams,
                         ElectricityParams, GaussianParams, NigParams, TradingGrid,
                         discretize_model)

N_BLOCKS = 20
EULER_SUBSTEPS = 64
SPLINE_POINTS = 8192
STRATEGIES = ("VO", "FS-pure", "BS-delta", "none")


def _rngs(seed: int, blocks: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.Philox(s))
            for s in np.random.SeedSequence(seed).spawn(blocks)]


def _nig_draw(rng: np.random.Generator, p: NigParams, dt: float, size) -> np.ndarray:
    # normal mean-variance mixture over an inverse-Gaussian clock
    dd = p.delta * dt
    v = rng.wald(dd / p.gamma, dd * dd, size)
    return p.mu * dt + p.beta * v + np.sqrt(v) * rng.standard_normal(size)


def sample_nig(p: NigParams, dt: float, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. draws of the increment law ``NIG(alpha, beta, delta dt, mu dt)``."""
    if not dt > 0:
        raise ParameterError("sampling horizon dt must be > 0")
    if n < 0:
        raise ParameterError("sample size must be >= 0")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    return _nig_draw(rng, p, float(dt), int(n))


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Simulated log increments ``(n_paths, N)`` and prices ``(n_paths, N+1)``."""

    model: ContinuousModel
    grid: TradingGrid
    s0: float
    seed: int
    increments: np.ndarray
    prices: np.ndarray
    blocks: np.ndarray  # block label of every path

    @property
    def n_paths(self) -> int:
        return self.prices.shape[0]


def _block_increments(model, grid: TradingGrid, rng: np.random.Generator, n: int,
                      substeps: int) -> np.ndarray:
    dt = grid.dt
    out = np.empty((n, grid.n))
    if isinstance(model, NigParams):
        for k, h in enumerate(dt):
            out[:, k] = _nig_draw(rng, model, h, n)
    elif isinstance(model, GaussianParams):
        out[:] = model.mu * dt + model.sigma * np.sqrt(dt) * rng.standard_normal((n, grid.n))
    elif isinstance(model, ElectricityParams):
        lam, T = model.lambda_mr, model.maturity
        for k in range(grid.n):
            a, b = grid.dates[k], grid.dates[k + 1]
            h = (b - a) / substeps
            mids = a + h * (np.arange(substeps) + 0.5)
            load = model.sigma * np.exp(-lam * (T - mids))
            draws = _nig_draw(rng, model.driver, h, (n, substeps))
            out[:, k] = draws @ load
    elif isinstance(model, (BinomialParams, DiscreteParams)):
        dp = DiscreteParams.from_binomial(model) if isinstance(model, BinomialParams) else model
        for k in range(grid.n):
            vals = np.asarray(dp.values[k], dtype=float)
            out[:, k] = vals[rng.choice(vals.size, size=n, p=np.asarray(dp.probs[k]))]
    else:
        raise ParameterError(f"unsupported model type {type(model).__name__}")
    return out


def simulate_paths(model: ContinuousModel, grid: TradingGrid, s0: float, n_paths: int,
                   seed: int, *, blocks: int = N_BLOCKS, substeps: int = EULER_SUBSTEPS,
                   threads: int = 1) -> PathBatch:
    """Draw ``n_paths`` price paths on ``grid``; NIG and Gaussian increments
    are exact in law, electricity increments use midpoint sub-stepping."""
    if n_paths < blocks or blocks < 2:
        raise ParameterError("need at least two blocks and one path per block")
    if not s0 > 0:
        raise ParameterError("s0 must be > 0")
    if isinstance(model, ElectricityParams) and abs(grid.maturity - model.maturity) > 1e-12:
        raise ParameterError("grid horizon must equal the delivery date")
    sizes = np.full(blocks, n_paths // blocks)
    sizes[: n_paths % blocks] += 1
    rngs = _rngs(seed, blocks)

    def run(i: int) -> np.ndarray:
        return _block_increments(model, grid, rngs[i], int(sizes[i]), substeps)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, range(blocks)))
    else:
        parts = [run(i) for i in range(blocks)]
    inc = np.concatenate(parts)
    logp = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(inc, axis=1)], axis=1)
    prices = s0 * np.exp(logp)
    labels = np.repeat(np.arange(blocks), sizes)
    return PathBatch(model, grid, float(s0), int(seed), inc, prices, labels)


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

def _jackknife(x: np.ndarray, labels: np.ndarray, stat) -> tuple[float, float]:
    """Full-sample statistic and its delete-one-block jackknife standard error."""
    full = stat(x)
    ids = np.unique(labels)
    loo = np.array([stat(x[labels != b]) for b in ids])
    nb = ids.size
    se = np.sqrt((nb - 1) / nb * np.sum((loo - loo.mean()) ** 2))
    return float(full), float(se)


def _mean(x: np.ndarray) -> float:
    return float(np.mean(x))


def _var(x: np.ndarray) -> float:
    return float(np.var(x, ddof=1))


@dataclass
class EmpiricalReport:
    """Sample moments of the hedging error ``payoff - c - gains``."""

    strategy: str
    mean: float
    variance: float
    se_mean: float
    se_variance: float
    n_paths: int
    capital: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def std(self) -> float:
        return float(np.sqrt(max(self.variance, 0.0)))

    def z_mean(self, target: float = 0.0) -> float:
        return abs(self.mean - target) / self.se_mean if self.se_mean > 0 else np.inf

    def z_variance(self, target: float) -> float:
        return abs(self.variance - target) / self.se_variance if self.se_variance > 0 else np.inf


def _spline_values(x: np.ndarray, z: np.ndarray, coefs: list[np.ndarray],
                   chunk: int = 1024) -> list[np.ndarray]:
    """``Re sum_j c_j e^{x z_j}`` for several coefficient vectors sharing the powers."""
    out = [np.empty(x.size) for _ in coefs]
    stacked = np.stack(coefs, axis=1)
    for i in range(0, x.size, chunk):
        p = np.exp(np.multiply.outer(x[i:i + chunk], z))
        vals = (p @ stacked).real
        for j in range(len(coefs)):
            out[j][i:i + chunk] = vals[:, j]
    return out


def _fit(s: np.ndarray, z: np.ndarray, coefs: list[np.ndarray], points: int) -> list:
    """Cubic splines in ``log s`` of ``Re sum_j c_j s^{z_j}`` over the range of ``s``."""
    lo, hi = np.log(np.min(s)), np.log(np.max(s))
    if hi - lo < 1e-12:
        vals = _spline_values(np.array([lo]), z, coefs)
        return [lambda q, v=float(v[0]): np.full(np.shape(q), v) for v in vals]
    x = np.linspace(lo, hi, points)
    return [lambda q, sp=CubicSpline(x, v): sp(np.log(q))
            for v in _spline_values(x, z, coefs)]


def _payoff_values(measure: DiscretizedMeasure, s: np.ndarray, payoff: str) -> np.ndarray:
    if payoff == "exact":
        return measure.source.payoff(s)
    if payoff == "measure":
        # the finite node sum is smooth in log s, so a fine spline reproduces it
        half = measure.half
        coef = measure.w[half] * measure.half_factor
        return _fit(s, measure.z[half], [coef], 4 * SPLINE_POINTS)[0](s)
    raise ParameterError(f"unknown payoff mode {payoff!r}")


def _positions(batch: PathBatch, measure: DiscretizedMeasure, table: CumulantTable,
               fs: Optional[FsCoefficients], strategies: Sequence[str],
               capital: dict[str, float], points: int) -> dict[str, np.ndarray]:
    """Holdings ``phi[path, k-1]`` of every requested strategy, date by date.

    All price-dependent quantities are node sums, evaluated once per date on a
    shared log-price grid and splined; only the half node set is needed
    because the sums are real.
    """
    s = batch.prices
    n = batch.grid.n
    half = measure.half
    zh = measure.z[half]
    wh = measure.w[half] * measure.half_factor
    need_fs = any(st in ("VO", "FS-pure") for st in strategies)
    lam = lambda_coeffs(table).coeff if "VO" in strategies else None
    fbs = bs_delta_coeffs(table, measure, batch.s0)[0] if "BS-delta" in strategies else None
    phi = {st: np.zeros((batch.n_paths, n)) for st in strategies}
    gains = np.zeros(batch.n_paths)
    for k in range(1, n + 1):
        sp = s[:, k - 1]
        coefs, names = [], []
        if need_fs:
            coefs += [wh * (fs.g[k - 1] * fs.h[k])[half], wh * fs.h[k - 1][half]]
            names += ["xi", "H"]
        if fbs is not None:
            coefs.append(wh * fbs[k - 1][half])
            names.append("bs")
        if not coefs:
            break
        ev = dict(zip(names, (f(sp) for f in _fit(sp, zh, coefs, points))))
        if "FS-pure" in phi:
            phi["FS-pure"][:, k - 1] = ev["xi"] / sp
        if "BS-delta" in phi:
            phi["BS-delta"][:, k - 1] = ev["bs"] / sp
        if "VO" in phi:
            pos = ev["xi"] / sp + lam[k - 1] / sp * (ev["H"] - capital["VO"] - gains)
            phi["VO"][:, k - 1] = pos
            gains += pos * (s[:, k] - sp)
    return phi


def expected_payoff(table: CumulantTable, measure: DiscretizedMeasure, s0: float) -> float:
    """``E[f(S_N)] = sum_j w_j s0^{z_j} prod_k m(z_j, k)``."""
    terms = measure.w * np.exp(measure.z * np.log(s0)) * np.prod(table.m(measure.z), axis=0)
    return float(np.sum(terms).real)


def default_capital(strategy: str, table: CumulantTable, measure: DiscretizedMeasure,
                    s0: float, fs: Optional[FsCoefficients] = None) -> float:
    """Initial capital each strategy is run with unless told otherwise."""
    if strategy == "BS-delta":
        return bs_delta_coeffs(table, measure, s0)[1]
    if strategy == "none":
        return expected_payoff(table, measure, s0)
    fs = fs if fs is not None else compute_fs(table, measure)
    return float(mean_value_process(fs, s0, 0))


def _summarize(batch: PathBatch, strategy: str, err: np.ndarray, c: float,
               diag: dict) -> EmpiricalReport:
    mean, se_m = _jackknife(err, batch.blocks, _mean)
    var, se_v = _jackknife(err, batch.blocks, _var)
    return EmpiricalReport(strategy, mean, var, se_m, se_v, batch.n_paths, float(c), diag)


def compare_strategies(batch: PathBatch, measure: DiscretizedMeasure,
                       strategies: Sequence[str] = STRATEGIES, *,
                       table: Optional[CumulantTable] = None,
                       capital: Optional[dict[str, float]] = None, payoff: str = "exact",
                       points: int = SPLINE_POINTS) -> dict[str, EmpiricalReport]:
    """Run several strategies on the same paths (common random numbers).

    Each strategy's hedging error is ``payoff - c - sum_k phi_k dS_k``.  The
    default capital is the optimal one for the decomposition-based strategies
    and the Black-Scholes price for ``BS-delta``.  Positions that depend on
    the price come from a log-price spline through ``points`` exact values.
    ``payoff="measure"`` settles against the finite node sum of ``measure``
    instead of the vanilla payoff.
    """
    for st in strategies:
        if st not in STRATEGIES:
            raise ParameterError(f"strategy must be one of {STRATEGIES}, got {st!r}")
    table = table if table is not None else discretize_model(batch.model, batch.grid)
    fs = compute_fs(table, measure)
    cap = {st: default_capital(st, table, measure, batch.s0, fs) for st in strategies}
    cap.update(capital or {})
    phi = _positions(batch, measure, table, fs, strategies, cap, points)
    s = batch.prices
    pay = _payoff_values(measure, s[:, -1], payoff)
    ds = np.diff(s, axis=1)
    return {st: _summarize(batch, st, pay - cap[st] - np.sum(phi[st] * ds, axis=1), cap[st], {})
            for st in strategies}


def simulate_hedge(batch: PathBatch, strategy: str, measure: DiscretizedMeasure,
                   c: Optional[float] = None, *, table: Optional[CumulantTable] = None,
                   payoff: str = "exact", diagnostic_atom: Optional[complex] = None,
                   points: int = SPLINE_POINTS) -> EmpiricalReport:
    """One strategy along every path; see :func:`compare_strategies`.

    With ``diagnostic_atom`` the report also carries the orthogonality
    diagnostics of :func:`martingale_diagnostics` for that node.
    """
    table = table if table is not None else discretize_model(batch.model, batch.grid)
    rep = compare_strategies(batch, measure, (strategy,), table=table,
                             capital=None if c is None else {strategy: c},
                             payoff=payoff, points=points)[strategy]
    if diagnostic_atom is not None:
        rep.diagnostics = martingale_diagnostics(batch, table, diagnostic_atom)
    return rep


def martingale_diagnostics(batch: PathBatch, table: CumulantTable, z: complex) -> dict:
    """Sample means of ``dL_k`` and ``dL_k dM_k`` for the claim ``S_N^z``.

    ``L`` is the orthogonal martingale of the decomposition of ``S_N^z`` and
    ``dM_k = S_{k-1}(e^{dX_k} - m(1,k))`` the martingale part of ``dS_k``.
    Both means vanish in theory.  Returns complex means, the jackknife SEs of
    their real and imaginary parts, and the largest z-score over dates.
    """
    zz = np.array([complex(z)])
    g, h, _, m1, _ = fs_tables(table, zz)
    s = batch.prices
    n = batch.grid.n
    means_l = np.empty(n, dtype=complex)
    means_lm = np.empty(n, dtype=complex)
    se_l = np.empty((n, 2))
    se_lm = np.empty((n, 2))
    for k in range(1, n + 1):
        sp, sn = s[:, k - 1], s[:, k]
        spz = np.exp(complex(z) * np.log(sp))
        dl = (h[k, 0] * np.exp(complex(z) * np.log(sn)) - h[k - 1, 0] * spz
              - g[k - 1, 0] * h[k, 0] * spz / sp * (sn - sp))
        dm = sp * (np.exp(batch.increments[:, k - 1]) - m1[k - 1])
        for arr, out_m, out_se in ((dl, means_l, se_l), (dl * dm, means_lm, se_lm)):
            re, se_re = _jackknife(arr.real, batch.blocks, _mean)
            im, se_im = _jackknife(arr.imag, batch.blocks, _mean)
            out_m[k - 1] = re + 1j * im
            out_se[k - 1] = (se_re, se_im)

    def zmax(m, se):
        parts = np.stack([np.abs(m.real), np.abs(m.imag)], axis=1)
        return float(np.max(np.where(se > 0, parts / np.where(se > 0, se, 1.0), 0.0)))

    return {"z": complex(z), "mean_dL": means_l, "se_dL": se_l,
            "mean_dLdM": means_lm, "se_dLdM": se_lm,
            "zmax_dL": zmax(means_l, se_l), "zmax_dLdM": zmax(means_lm, se_lm)}
