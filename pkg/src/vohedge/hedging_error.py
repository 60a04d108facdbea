"""Variance of the optimal hedging error and of deterministic-coefficient
strategies (Black-Scholes delta, pure hedge ratio).

All double integrals ``int int F(y, z) Pi(dy) Pi(dz)`` are evaluated over row
nodes ``y`` taken from one half of the conjugate-closed node set (real nodes
plus ``Im y > 0``) and all column nodes ``z``; rows of a conjugate pair get a
factor 2 and only the real part is kept.  Cumulant values at the pair sums
``y + z`` are computed once per distinct sum (keyed on ``(Re, |Im|)``) and
shared through conjugation.

Terminal term
-------------
At the last date the kernel contains ``E[f_l(S_N)^2]`` for the truncated
payoff ``f_l``.  For a digital that quantity converges only like ``1/U``
while every other piece converges fast, so by default it is replaced by the
exact ``E[f(S_N)^2]`` computed from the measure of ``f^2``
(``terminal="exact"``).  ``terminal="truncated"`` keeps the plain truncated
value, i.e. the hedging error of the truncated payoff itself.
"""
from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import AssumptionError, NumericsError, ParameterError
from .fs_core import FsCoefficients, compute_fs, fs_tables
from .payoff_measures import DiscretizedMeasure
from .pii_models import CumulantTable, increment_variances


# ---------------------------------------------------------------------------
# pointwise kernels
# ---------------------------------------------------------------------------

def rho(y, z, k: int, table: CumulantTable):
    """``m(y+z,k) - m(y,k) m(z,k)``."""
    y = np.asarray(y, dtype=complex)
    z = np.asarray(z, dtype=complex)
    if not 1 <= k <= table.n:
        raise ParameterError(f"k must lie in 1..{table.n}")
    try:
        v = table.m(y + z)[k - 1] - table.m(y)[k - 1] * table.m(z)[k - 1]
    except Exception as exc:
        raise AssumptionError(f"rho({y}, {z}) outside the model domain: {exc}") from exc
    return v if v.ndim else complex(v)


def b_coeff(y, z, k: int, table: CumulantTable):
    """``rho(y,z) - rho(y,1) rho(z,1) / rho(1,1)`` on interval ``k``."""
    r11 = rho(1.0, 1.0, k, table).real
    if r11 <= 0:
        raise AssumptionError("rho(1,1;k) <= 0: degenerate increment")
    y = np.asarray(y, dtype=complex)
    z = np.asarray(z, dtype=complex)
    num = rho(y, z, k, table) * r11 - rho(y, 1.0, k, table) * rho(z, 1.0, k, table)
    return num / r11


@dataclass(frozen=True)
class ErrorKernelCache:
    """Date-only quantities: ``rho(1,1;k)``, ``a(k)`` and ``A_k = prod_{j>k} a(j)``."""

    rho11: np.ndarray
    a: np.ndarray
    suffix: np.ndarray

    @classmethod
    def from_table(cls, table: CumulantTable) -> ErrorKernelCache:
        m1 = table.m_real(1.0)
        m2 = table.m_real(2.0)
        rho11 = m2 - m1 ** 2
        den = m2 - 2 * m1 + 1
        if np.any(rho11 <= 0) or np.any(den <= 0):
            raise AssumptionError("degenerate increment: m(2,k) - m(1,k)^2 <= 0")
        a = rho11 / den
        suffix = np.append(np.cumprod(a[::-1])[::-1][1:], 1.0)
        return cls(rho11, a, suffix)


def j0_kernel(table: CumulantTable, y, z, s0: float):
    """``J0(y, z)`` for exponential payoffs, evaluated term by term.

    ``y`` and ``z`` broadcast against each other.  Mostly a reference route
    for tests; :func:`j0_total` is the production path.
    """
    y, z = np.broadcast_arrays(np.asarray(y, dtype=complex), np.asarray(z, dtype=complex))
    cache = ErrorKernelCache.from_table(table)
    _, hy, my, m1, _ = fs_tables(table, y)
    _, hz, mz, _, _ = fs_tables(table, z)
    my1 = table.m(y + 1)
    mz1 = table.m(z + 1)
    myz = table.m(y + z)
    ex = (slice(None),) + (None,) * y.ndim
    rho_yz = myz - my * mz
    rho_y1 = my1 - m1[ex] * my
    rho_z1 = mz1 - m1[ex] * mz
    b = rho_yz - rho_y1 * rho_z1 / cache.rho11[ex]
    prefix = np.cumprod(np.concatenate([np.ones((1,) + y.shape), myz[:-1]]), axis=0)
    tot = np.sum(b * hy[1:] * hz[1:] * prefix * cache.suffix[ex], axis=0)
    return np.exp((y + z) * np.log(s0)) * tot


def _stationary_parts(m1: float, m2: float, my, mz, my1, mz1, myz):
    rho11 = m2 - m1 * m1
    a = rho11 / (m2 - 2 * m1 + 1)
    c = (m1 - 1) / rho11
    rho_y1 = my1 - m1 * my
    rho_z1 = mz1 - m1 * mz
    hy = my - c * rho_y1
    hz = mz - c * rho_z1
    # centered form: the expanded numerator cancels badly when rho11 is small
    beta = (myz - my * mz) - rho_y1 * rho_z1 / rho11
    return a * hy * hz, beta


def _geometric(ratio_base: np.ndarray, m: np.ndarray, n: int) -> np.ndarray:
    """``(A^n - m^n) / (A - m)`` without cancellation when ``A`` is close to ``m``."""
    rel = (ratio_base - m) / m
    out = np.empty(np.shape(m), dtype=complex)
    same = np.abs(rel) < 1e-10
    # limit branch A = m
    out[same] = n * m[same] ** (n - 1)
    lg = np.log1p(rel[~same])
    out[~same] = m[~same] ** (n - 1) * np.expm1(n * lg) / np.expm1(lg)
    # close to the branch point the series is more accurate than the limit alone
    near = same & (rel != 0)
    if np.any(near):
        r = rel[near]
        out[near] = n * m[near] ** (n - 1) * (1 + (n - 1) * r / 2 + (n - 1) * (n - 2) * r * r / 6)
    return out


def j0_kernel_stationary(table: CumulantTable, y, z, s0: float):
    """Closed-form ``J0(y, z)`` for stationary increments on a uniform grid."""
    if not table.stationary:
        raise AssumptionError("closed form requires stationary increments on a uniform grid")
    y, z = np.broadcast_arrays(np.asarray(y, dtype=complex), np.asarray(z, dtype=complex))
    m1 = table.m_real(1.0)[0]
    m2 = table.m_real(2.0)[0]
    my, mz = table.m(y)[0], table.m(z)[0]
    my1, mz1 = table.m(y + 1)[0], table.m(z + 1)[0]
    myz = table.m(y + z)[0]
    ayz, beta = _stationary_parts(m1, m2, my, mz, my1, mz1, myz)
    geo = _geometric(np.atleast_1d(ayz), np.atleast_1d(myz), table.n).reshape(ayz.shape)
    return np.exp((y + z) * np.log(s0)) * beta * geo


# ---------------------------------------------------------------------------
# pair-sum cache
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Chunk:
    rows: np.ndarray
    factor: np.ndarray
    uniq: np.ndarray
    inv: np.ndarray
    neg: np.ndarray


class PairEvaluator:
    """Distinct node-pair sums of a measure, with cumulant values memoized.

    With ``halve=False`` every node is a row, which makes the imaginary part of
    the double sum observable (a check on conjugate symmetry) at twice the cost.

    One instance can be reused across many grids (the optimizers do this):
    for time-homogeneous drivers the per-unit-time log-mgf of every distinct
    sum is kept, for the electricity model the per-date primitive.
    """

    def __init__(self, d: DiscretizedMeasure, max_pairs: int = 1 << 20,
                 memo_bytes: int = 256 << 20, halve: bool = True):
        self.measure = d
        self.halve = halve
        z = d.z
        if halve:
            rows, factor = d.half, d.half_factor
        else:
            rows, factor = np.arange(d.size), np.ones(d.size)
        step = max(1, max_pairs // max(z.size, 1))
        self.chunks: list[_Chunk] = []
        for start in range(0, rows.size, step):
            ri = rows[start:start + step]
            s = z[ri][:, None] + z[None, :]
            key = s.real + 1j * np.abs(s.imag)
            uniq, inv = np.unique(key.ravel(), return_inverse=True)
            self.chunks.append(_Chunk(ri, factor[start:start + step], uniq,
                                      inv.reshape(s.shape), s.imag < 0))
        self._memo: OrderedDict = OrderedDict()
        self._memo_used = 0
        self.memo_bytes = memo_bytes

    def _remember(self, key, value: np.ndarray) -> np.ndarray:
        if value.nbytes <= self.memo_bytes:
            self._memo[key] = value
            self._memo_used += value.nbytes
            while self._memo_used > self.memo_bytes:
                _, old = self._memo.popitem(last=False)
                self._memo_used -= old.nbytes
        return value

    def _lookup(self, key, compute):
        if key in self._memo:
            self._memo.move_to_end(key)
            return self._memo[key]
        return self._remember(key, compute())

    def m_unique(self, table: CumulantTable, ci: int) -> np.ndarray:
        """``m(s, k)`` at the distinct sums of chunk ``ci``; shape ``(N, n_unique)``."""
        c = self.chunks[ci]
        table.check(c.uniq)
        model = table.model
        if table.kappa is not None:
            kap = self._lookup(("kappa", ci, model), lambda: table.kappa(c.uniq))
            rows = [self._lookup(("exp", ci, model, float(h)), lambda h=h: np.exp(h * kap))
                    for h in table.grid.dt]
            return np.stack(rows)
        if table.primitive is not None:
            prims = [self._lookup(("prim", ci, model, float(t)),
                                  lambda t=t: table.primitive(c.uniq, t))
                     for t in table.grid.dates]
            return np.exp(np.diff(np.stack(prims), axis=0))
        return table.m(c.uniq)

    def m_interval(self, table: CumulantTable, ci: int, ta: float, tb: float) -> np.ndarray:
        """``E[exp(s (X_tb - X_ta))]`` at the distinct sums of chunk ``ci``.

        Only available through the ``kappa`` or ``primitive`` hooks; used to
        move one trading date without rebuilding the whole table.
        """
        c = self.chunks[ci]
        model = table.model
        if table.kappa is not None:
            kap = self._lookup(("kappa", ci, model), lambda: table.kappa(c.uniq))
            h = float(tb - ta)
            return self._lookup(("exp", ci, model, h), lambda: np.exp(h * kap))
        if table.primitive is not None:
            pa, pb = (self._lookup(("prim", ci, model, float(t)),
                                   lambda t=t: table.primitive(c.uniq, t)) for t in (ta, tb))
            return np.exp(pb - pa)
        raise ParameterError("interval evaluation needs a kappa or primitive hook")

    def gather(self, mu: np.ndarray, ci: int, k: int) -> np.ndarray:
        """Row ``k`` (0-based interval) of the unique table spread to ``rows x cols``."""
        return self.spread(mu[k], ci)

    def spread(self, values: np.ndarray, ci: int) -> np.ndarray:
        """Values at the distinct sums of chunk ``ci`` laid out as ``rows x cols``."""
        c = self.chunks[ci]
        v = values[c.inv]
        return np.where(c.neg, np.conj(v), v)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class ErrorReport:
    """Outcome of a hedging-error evaluation (currency units)."""

    j0: float
    std: float
    v0: float
    per_date: np.ndarray
    imag_residue: float
    runtime: float
    terminal: str
    second_moment: Optional[float] = None
    info: dict = field(default_factory=dict)


class StrategyError(NamedTuple):
    """Bias and variance of a deterministic-coefficient strategy."""

    bias: float
    variance: float

    @property
    def std(self) -> float:
        return float(np.sqrt(max(self.variance, 0.0)))


def _resolve_terminal(d: DiscretizedMeasure, terminal: str) -> bool:
    if terminal not in ("auto", "exact", "truncated"):
        raise ParameterError(f"unknown terminal mode {terminal!r}")
    if terminal == "exact" and d.square is None and d.source.contours:
        raise ParameterError("exact terminal moment needs the measure of the squared payoff")
    return terminal != "truncated" and d.square is not None


def _weighted(d: DiscretizedMeasure, s0: float) -> np.ndarray:
    return d.w * np.exp(d.z * np.log(s0))


def exact_second_moment(table: CumulantTable, d: DiscretizedMeasure, s0: float) -> float:
    """``E[f(S_N)^2]`` from the measure of the squared payoff."""
    if d.square is None:
        raise ParameterError("measure carries no squared-payoff representation")
    sq = d.square
    table.check(sq.z)
    terms = _weighted(sq, s0) * np.prod(table.m(sq.z), axis=0)
    tot = terms.sum()
    if abs(tot.imag) > 1e-8 * abs(tot.real) + 1e-12 * np.abs(terms).sum():
        raise NumericsError("second moment has a non-negligible imaginary part")
    return float(tot.real)


def _check_pair_domain(table: CumulantTable, d: DiscretizedMeasure) -> None:
    lo, hi = table.strip
    re = d.z.real
    s_lo, s_hi = 2 * re.min(), 2 * re.max()
    if s_lo < lo - 1e-12 * (1 + abs(lo)) or s_hi > hi + 1e-12 * (1 + abs(hi)):
        raise AssumptionError(
            f"pair sums Re(y+z) span [{s_lo:.6g}, {s_hi:.6g}], outside the strip [{lo:.6g}, {hi:.6g}]")


def _finish(total: complex, l1: float, what: str, check: bool = True) -> tuple[float, float]:
    if not check:
        # half-row sums: only the real part carries meaning
        return float(total.real), float("nan")
    resid = abs(total.imag)
    if resid > 1e-6 * abs(total.real) + 1e-12 * l1:
        raise NumericsError(f"{what}: imaginary residue {resid:.3g} too large")
    return float(total.real), resid


# ---------------------------------------------------------------------------
# optimal hedging error
# ---------------------------------------------------------------------------

def j0_total(table: CumulantTable, d: DiscretizedMeasure, s0: float, *,
             terminal: str = "auto", fs: Optional[FsCoefficients] = None,
             pairs: Optional[PairEvaluator] = None) -> ErrorReport:
    """Variance of the variance-optimal hedging error for the general
    (non-stationary) model, together with the initial capital."""
    t_start = time.perf_counter()
    if s0 <= 0:
        raise ParameterError("s0 must be > 0")
    exact = _resolve_terminal(d, terminal)
    _check_pair_domain(table, d)
    fs = fs if fs is not None else compute_fs(table, d)
    pairs = pairs if pairs is not None else PairEvaluator(d)
    cache = ErrorKernelCache.from_table(table)
    n = table.n
    ws = _weighted(d, s0)
    rho1 = fs.g * cache.rho11[:, None]  # rho(z,1;k)
    contrib = np.zeros(n, dtype=complex)
    l1 = 0.0
    trunc_sm = 0.0 + 0.0j
    for ci, c in enumerate(pairs.chunks):
        mu = pairs.m_unique(table, ci)
        pprev = np.ones((c.rows.size, d.size), dtype=complex)
        for k in range(n):
            u = ws * fs.h[k + 1]
            ur = u[c.rows] * c.factor
            pk = pprev * pairs.gather(mu, ci, k)
            # the rank-two cross kernel is applied as matrix-vector products
            side = pprev @ np.stack([u * fs.mz[k], u * rho1[k]], axis=1)
            cross_term = ((ur * fs.mz[k, c.rows]) @ side[:, 0]
                          + (ur * rho1[k, c.rows]) @ side[:, 1] / cache.rho11[k])
            main = ur @ (pk @ u)
            if k == n - 1:
                trunc_sm += main
            term = -cross_term if (exact and k == n - 1) else main - cross_term
            contrib[k] += cache.suffix[k] * term
            if not pairs.halve:
                cross = (np.outer(fs.mz[k, c.rows], fs.mz[k])
                         + np.outer(rho1[k, c.rows], rho1[k]) / cache.rho11[k]) * pprev
                l1 += cache.suffix[k] * float(np.abs(ur) @ (np.abs(pk) + np.abs(cross)) @ np.abs(u))
            pprev = pk
    second = None
    if exact:
        second = exact_second_moment(table, d, s0)
        contrib[n - 1] += second
    if pairs.halve:
        contrib = contrib.real.astype(complex)
    j0, resid = _finish(contrib.sum(), l1, "J0", not pairs.halve)
    v0 = float(np.real(np.sum(ws * fs.h[0])))
    return ErrorReport(
        j0=j0, std=float(np.sqrt(max(j0, 0.0))), v0=v0, per_date=contrib.real.copy(),
        imag_residue=resid, runtime=time.perf_counter() - t_start,
        terminal="exact" if exact else "truncated", second_moment=second,
        info={"truncated_second_moment": float(trunc_sm.real), "nodes": d.size})


def j0_stationary(table: CumulantTable, d: DiscretizedMeasure, s0: float, *,
                  terminal: str = "auto", pairs: Optional[PairEvaluator] = None) -> ErrorReport:
    """Closed-form evaluation of :func:`j0_total` for stationary increments on
    a uniform grid (geometric sum over dates summed in closed form)."""
    t_start = time.perf_counter()
    if not table.stationary:
        raise AssumptionError("closed form requires stationary increments on a uniform grid")
    exact = _resolve_terminal(d, terminal)
    _check_pair_domain(table, d)
    pairs = pairs if pairs is not None else PairEvaluator(d)
    n = table.n
    m1 = table.m_real(1.0)[0]
    m2 = table.m_real(2.0)[0]
    mz = table.m(d.z)[0]
    mz1 = table.m(d.z + 1)[0]
    ws = _weighted(d, s0)
    total = 0.0 + 0.0j
    l1 = 0.0
    for ci, c in enumerate(pairs.chunks):
        mu = pairs.m_unique(table, ci)
        myz = pairs.gather(mu, ci, 0)
        my, my1 = mz[c.rows][:, None], mz1[c.rows][:, None]
        ayz, beta = _stationary_parts(m1, m2, my, mz[None, :], my1, mz1[None, :], myz)
        kern = beta * _geometric(ayz, myz, n)
        if exact:
            kern = kern - myz ** n
        ur = ws[c.rows] * c.factor
        total += ur @ (kern @ ws)
        if not pairs.halve:
            l1 += float(np.abs(ur) @ np.abs(kern) @ np.abs(ws))
    second = None
    if exact:
        second = exact_second_moment(table, d, s0)
        total += second
    j0, resid = _finish(total, l1, "J0 (closed form)", not pairs.halve)
    _, h, _, _, _ = fs_tables(table, d.z)
    v0 = float(np.real(np.sum(ws * h[0])))
    return ErrorReport(
        j0=j0, std=float(np.sqrt(max(j0, 0.0))), v0=v0, per_date=np.array([]),
        imag_residue=resid, runtime=time.perf_counter() - t_start,
        terminal="exact" if exact else "truncated", second_moment=second)


# ---------------------------------------------------------------------------
# sensitivity to single trading dates
# ---------------------------------------------------------------------------

def _interval_m(table: CumulantTable, z: np.ndarray, ta: float, tb: float) -> np.ndarray:
    if table.kappa is not None:
        return np.exp((tb - ta) * table.kappa(z))
    if table.primitive is not None:
        return np.exp(table.primitive(z, tb) - table.primitive(z, ta))
    raise ParameterError("interval evaluation needs a kappa or primitive hook")


class _NodeIntervals:
    """Node-level mgf values on arbitrary intervals, sharing work across intervals.

    The arguments ``z``, ``z + 1``, 1 and 2 are stacked into one vector so
    each new date costs a single primitive evaluation.
    """

    def __init__(self, table: CumulantTable, z: np.ndarray):
        self.table = table
        self.size = z.size
        self.args = np.concatenate([z, z + 1, [1.0, 2.0]]).astype(complex)
        self._kappa = table.kappa(self.args) if table.kappa is not None else None
        self._prims: dict[float, np.ndarray] = {}

    def _prim(self, t: float) -> np.ndarray:
        if t not in self._prims:
            self._prims[t] = self.table.primitive(self.args, t)
        return self._prims[t]

    def interval(self, ta: float, tb: float) -> _Interval:
        if self._kappa is not None:
            m = np.exp((tb - ta) * self._kappa)
        else:
            m = np.exp(self._prim(tb) - self._prim(ta))
        n = self.size
        return _Interval.build(m[:n], m[n:2 * n], m[-2].real, m[-1].real)


@dataclass(frozen=True)
class _Interval:
    """Node-level quantities of one trading interval."""

    mz: np.ndarray
    f: np.ndarray  # h(z, k-1) / h(z, k)
    rho1: np.ndarray
    rho11: float
    a: float

    @classmethod
    def build(cls, mz: np.ndarray, mz1: np.ndarray, m1: float, m2: float) -> _Interval:
        rho11 = m2 - m1 * m1
        den = m2 - 2 * m1 + 1
        if rho11 <= 0 or den <= 0:
            raise AssumptionError("degenerate increment: m(2,k) - m(1,k)^2 <= 0")
        g = (mz1 - m1 * mz) / rho11
        return cls(mz, mz - g * (m1 - 1), g * rho11, rho11, rho11 / den)


def j0_date_gradient(table: CumulantTable, d: DiscretizedMeasure, s0: float, step: float, *,
                     central: bool = True, terminal: str = "auto",
                     pairs: Optional[PairEvaluator] = None) -> tuple[float, np.ndarray]:
    """``J0`` on ``table.grid`` and its finite-difference derivative in every
    interior trading date.

    Moving date ``i`` only changes the two intervals that meet there.  Terms
    of the double sum before them change by a node-wise factor and terms
    after them by a pair-wise factor, so one backward and one forward sweep
    that keep the partial sums as matrices let every shifted grid be
    evaluated with a handful of matrix-vector products.  Date ``i`` moves by
    ``min(step, gap/2)`` with ``gap`` the shorter adjacent interval.
    """
    if table.kappa is None and table.primitive is None:
        raise ParameterError("date gradient needs a table with a kappa or primitive hook")
    if not step > 0:
        raise ParameterError("finite-difference step must be > 0")
    exact = _resolve_terminal(d, terminal)
    _check_pair_domain(table, d)
    pairs = pairs if pairs is not None else PairEvaluator(d)
    n = table.n
    dates = table.grid.dates
    fs = compute_fs(table, d)
    cache = ErrorKernelCache.from_table(table)
    z = d.z
    ws = _weighted(d, s0)
    rho1 = fs.g * cache.rho11[:, None]
    fk = fs.mz - fs.g * (fs.m1 - 1)[:, None]
    live = np.ones(n)  # weight of P_k in term k
    if exact:
        live[-1] = 0.0

    gaps = np.diff(dates)
    shifts = []
    for i in range(1, n):
        h = min(step, 0.5 * gaps[i - 1], 0.5 * gaps[i])
        shifts += [(i, h), (i, -h)] if central else [(i, h)]
    moved = [(dates[i - 1], dates[i] + h, dates[i + 1]) for i, h in shifts]
    nodes = _NodeIntervals(table, z)
    new = [(nodes.interval(ta, tm), nodes.interval(tm, tb)) for ta, tm, tb in moved]

    vals = np.zeros(len(shifts), dtype=complex)
    base = 0.0 + 0.0j
    for ci, c in enumerate(pairs.chunks):
        r = c.rows

        def quad(x, mat, y):
            return (x[r] * c.factor) @ (mat @ y)

        def cross_sum(u, iv_mz, iv_rho1, rho11, mat):
            return (quad(u * iv_mz, mat, u * iv_mz)
                    + quad(u * iv_rho1, mat, u * iv_rho1) / rho11)

        mu = pairs.m_unique(table, ci)
        mp = [pairs.gather(mu, ci, k) for k in range(n)]
        # backward: tails[i] = terms k >= i+1 of the double sum divided by P_i
        tails = [None] * n
        acc = np.zeros((r.size, d.size), dtype=complex)
        for k in range(n - 1, -1, -1):
            tails[k] = acc
            u = ws * fs.h[k + 1]
            cross = (np.outer(fs.mz[k, r], fs.mz[k])
                     + np.outer(rho1[k, r], rho1[k]) / cache.rho11[k])
            acc = mp[k] * acc + (cache.suffix[k] * np.outer(u[r] * c.factor, u)
                                 * (live[k] * mp[k] - cross))
        base += acc.sum()

        # forward: head holds terms k <= i-2 with h(., i-1) and A_{i-2} a_{i-1} a_i A_i ... factored out
        head = np.zeros((r.size, d.size), dtype=complex)
        pprev = np.ones((r.size, d.size), dtype=complex)  # P_{i-2}
        wsr = ws[r] * c.factor
        for j, (i, _) in enumerate(shifts):
            if j > 0 and shifts[j - 1][0] != i:
                k = i - 2
                cross = (np.outer(fs.mz[k, r], fs.mz[k])
                         + np.outer(rho1[k, r], rho1[k]) / cache.rho11[k])
                head = (cache.a[k] * np.outer(fk[k, r], fk[k]) * head
                        + np.outer(wsr, ws) * pprev * (mp[k] - cross))
                pprev = pprev * mp[k]
            left, right = new[j]
            ta, tm, tb = moved[j]
            y1 = pprev * pairs.spread(pairs.m_interval(table, ci, ta, tm), ci)
            y2 = y1 * pairs.spread(pairs.m_interval(table, ci, tm, tb), ci)
            a_i = cache.suffix[i]
            u_i = ws * fs.h[i + 1]
            h_i = fs.h[i + 1] * right.f
            u_l = ws * h_i
            h_l = h_i * left.f
            v = np.sum(y2 * tails[i])
            v += a_i * (live[i] * quad(u_i, y2, u_i)
                        - cross_sum(u_i, right.mz, right.rho1, right.rho11, y1))
            v += right.a * a_i * (live[i - 1] * quad(u_l, y1, u_l)
                                  - cross_sum(u_l, left.mz, left.rho1, left.rho11, pprev))
            v += left.a * right.a * a_i * (h_l[r] @ (head @ h_l))
            vals[j] += v

    j_base = base.real
    j_shift = vals.real
    if exact:
        sq = d.square
        msq = table.m(sq.z)
        wsq = _weighted(sq, s0)
        pre = np.vstack([np.ones(sq.size), np.cumprod(msq, axis=0)])  # pre[k] = prod_{l<k}
        suf = np.vstack([np.cumprod(msq[::-1], axis=0)[::-1], np.ones(sq.size)])  # prod_{l>=k}
        j_base += float(np.real(wsq @ pre[n]))
        for j, (i, _) in enumerate(shifts):
            ta, tm, tb = moved[j]
            prod = (pre[i - 1] * suf[i + 1] * _interval_m(table, sq.z, ta, tm)
                    * _interval_m(table, sq.z, tm, tb))
            j_shift[j] += float(np.real(wsq @ prod))

    grad = np.empty(n - 1)
    for j, (i, h) in enumerate(shifts):
        if central:
            if h > 0:
                grad[i - 1] = (j_shift[j] - j_shift[j + 1]) / (2 * h)
        else:
            grad[i - 1] = (j_shift[j] - j_base) / h
    return float(j_base), grad


# ---------------------------------------------------------------------------
# deterministic-coefficient strategies
# ---------------------------------------------------------------------------

def bs_delta_coeffs(table: CumulantTable, d: DiscretizedMeasure,
                    s0: float) -> tuple[np.ndarray, float]:
    """Black-Scholes delta written as ``sum_j w_j f(z_j)_n S_{n-1}^{z_j - 1}``.

    The Gaussian proxy has the same increment variances as the model and
    martingale drift, i.e. ``m_bs(z,k) = exp(v_k (z^2 - z) / 2)``.  Returns the
    coefficient table (row ``n-1`` for date ``n``) and the proxy price at ``s0``.
    """
    var = increment_variances(table.model, table.grid)
    z = d.z
    logm = np.multiply.outer(var, 0.5 * (z * z - z))
    tail = np.cumsum(logm[::-1], axis=0)[::-1]  # row n-1: sum over k >= n
    f = z * np.exp(tail)
    v0, _ = _finish(complex(np.sum(_weighted(d, s0) * np.exp(tail[0]))),
                    float(np.abs(_weighted(d, s0) * np.exp(tail[0])).sum()), "BS price")
    return f, v0


def fs_pure_coeffs(fs: FsCoefficients) -> np.ndarray:
    """Coefficients of the pure hedge ratio ``xi``: ``g(z,n) h(z,n)``."""
    return fs.g * fs.h[1:]


def deterministic_strategy_error(table: CumulantTable, d: DiscretizedMeasure,
                                 f_coeffs: np.ndarray, c: float, s0: float, *,
                                 terminal: str = "auto",
                                 pairs: Optional[PairEvaluator] = None) -> StrategyError:
    """Bias and variance of ``f(S_N) - c - sum_n v_n dS_n`` where
    ``v_n = sum_j w_j f(z_j)_n S_{n-1}^{z_j - 1}``.

    The second moment of the uncapitalized error expands into four double
    sums (payoff square, two payoff/gain cross terms, gain square); variance is
    second moment minus squared mean.
    """
    exact = _resolve_terminal(d, terminal)
    _check_pair_domain(table, d)
    f = np.asarray(f_coeffs, dtype=complex)
    n = table.n
    if f.shape != (n, d.size):
        raise ParameterError(f"coefficients must have shape {(n, d.size)}")
    pairs = pairs if pairs is not None else PairEvaluator(d)
    m1 = table.m_real(1.0)
    m2 = table.m_real(2.0)
    z = d.z
    mz = table.m(z)
    dz = table.m(z + 1) - mz  # E[e^{z dX}(e^{dX} - 1)]
    suf = np.vstack([np.cumprod(mz[::-1], axis=0)[::-1][1:], np.ones(d.size)])  # prod_{l>k}
    pz = np.vstack([np.ones(d.size), np.cumprod(mz, axis=0)])  # prod_{l<=k}
    ws = _weighted(d, s0)

    gain_mean = sum(f[k] * (m1[k] - 1) * pz[k] for k in range(n))
    mean0 = np.sum(ws * (pz[n] - gain_mean))
    mean0, _ = _finish(complex(mean0), float(np.abs(ws).sum()), "bias")

    total = 0.0 + 0.0j
    l1 = 0.0
    for ci, ch in enumerate(pairs.chunks):
        mu = pairs.m_unique(table, ci)
        r = ch.rows
        wr = ws[r] * ch.factor
        acc = np.zeros((r.size, d.size), dtype=complex)
        pprev = np.ones((r.size, d.size), dtype=complex)
        c_row = np.zeros_like(acc)  # rows carry the later coefficient
        c_col = np.zeros_like(acc)
        for k in range(n):
            # payoff x gain
            acc -= pprev * np.outer(f[k, r], dz[k] * suf[k])
            acc -= pprev * np.outer(dz[k, r] * suf[k, r], f[k])
            # gain x gain, same date
            acc += pprev * np.outer(f[k, r], f[k]) * (m2[k] - 2 * m1[k] + 1)
            # gain x gain, earlier date on the other index
            acc += (c_row * f[k, r][:, None] + c_col * f[k][None, :]) * (m1[k] - 1)
            c_row = c_row * mz[k, r][:, None] + pprev * np.outer(dz[k, r], f[k])
            c_col = c_col * mz[k][None, :] + pprev * np.outer(f[k, r], dz[k])
            pprev = pprev * pairs.gather(mu, ci, k)
        if not exact:
            acc += pprev
        total += wr @ (acc @ ws)
        if not pairs.halve:
            l1 += float(np.abs(wr) @ np.abs(acc) @ np.abs(ws))
    if exact:
        total += exact_second_moment(table, d, s0)
    second, _ = _finish(total, l1, "strategy second moment", not pairs.halve)
    return StrategyError(bias=mean0 - c, variance=second - mean0 ** 2)
