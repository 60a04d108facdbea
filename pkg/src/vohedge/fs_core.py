"""Discrete Föllmer-Schweizer decomposition for exponential payoffs ``s^z``
integrated against a discretized measure.

For every node ``z`` and interval ``k``

    g(z,k) = (m(z+1,k) - m(1,k) m(z,k)) / (m(2,k) - m(1,k)^2)
    h(z,k-1) = h(z,k) (m(z,k) - g(z,k)(m(1,k) - 1)),   h(z,N) = 1

give the mean-value process ``H_n = int h(z,n) S_n^z Pi(dz)`` and the pure
hedge ratio ``xi_n = int g(z,n) h(z,n) S_{n-1}^{z-1} Pi(dz)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError, NumericsError, ParameterError
from .payoff_measures import DiscretizedMeasure
from .pii_models import CumulantTable


@dataclass(frozen=True, eq=False)
class FsCoefficients:
    """Node-by-date tables; ``g[k-1]`` and ``mz[k-1]`` belong to interval ``k``,
    ``h[n]`` to date ``n`` (so ``h[N]`` is all ones)."""

    table: CumulantTable
    measure: DiscretizedMeasure
    g: np.ndarray
    h: np.ndarray
    mz: np.ndarray
    m1: np.ndarray
    m2: np.ndarray

    @property
    def n(self) -> int:
        return self.table.n


@dataclass(frozen=True)
class LambdaProcess:
    """``lambda_k = coeff[k-1] / S_{k-1}``."""

    coeff: np.ndarray


@dataclass
class StrategyState:
    """Running gain of a self-financing strategy along one path."""

    gain: float = 0.0
    n: int = 1
    history: list = field(default_factory=list)

    def record(self, phi: float, ds: float) -> None:
        self.gain += phi * ds
        self.history.append(phi)
        self.n += 1


def node_domain_violations(table: CumulantTable, z: np.ndarray) -> np.ndarray:
    """Indices of nodes with ``Re z``, ``2 Re z`` or ``Re z + 1`` outside the strip."""
    lo, hi = table.strip
    tol = 1e-12 * (1.0 + max(abs(lo) if np.isfinite(lo) else 0.0, abs(hi) if np.isfinite(hi) else 0.0))
    re = z.real
    bad = np.zeros(z.shape, dtype=bool)
    for x in (re, 2 * re, re + 1):
        bad |= (x < lo - tol) | (x > hi + tol)
    return np.flatnonzero(bad)


def _moments_12(table: CumulantTable) -> tuple[np.ndarray, np.ndarray]:
    m1 = table.m_real(1.0)
    m2 = table.m_real(2.0)
    if np.any(m2 - m1 ** 2 <= 0):
        raise AssumptionError("some increment is deterministic: m(2,k) - m(1,k)^2 <= 0")
    return m1, m2


def compute_fs(table: CumulantTable, d: DiscretizedMeasure) -> FsCoefficients:
    """Fill ``g`` forward and ``h`` backward for every node of ``d``."""
    bad = node_domain_violations(table, d.z)
    if bad.size:
        raise AssumptionError(
            f"{bad.size} node(s) violate the domain requirements, e.g. z={d.z[bad[0]]:.6g}; "
            f"Re z, 2 Re z and Re z + 1 must lie in {table.strip}")
    g, h, mz, m1, m2 = fs_tables(table, d.z)
    return FsCoefficients(table, d, g, h, mz, m1, m2)


def fs_tables(table: CumulantTable, z) -> tuple[np.ndarray, ...]:
    """``(g, h, m(z,.), m(1,.), m(2,.))`` for arbitrary nodes ``z`` of any shape.

    ``g`` and ``m(z,.)`` have shape ``(N,) + z.shape``; ``h`` has ``N + 1`` rows.
    """
    z = np.asarray(z, dtype=complex)
    m1, m2 = _moments_12(table)
    mz = table.m(z)
    mz1 = table.m(z + 1)
    ex = (slice(None),) + (None,) * z.ndim
    g = (mz1 - m1[ex] * mz) / (m2 - m1 ** 2)[ex]
    n = table.n
    h = np.empty((n + 1,) + z.shape, dtype=complex)
    h[n] = 1.0
    for k in range(n, 0, -1):
        h[k - 1] = h[k] * (mz[k - 1] - g[k - 1] * (m1[k - 1] - 1.0))
    return g, h, mz, m1, m2


def _real_integral(terms: np.ndarray, what: str) -> np.ndarray:
    """Sum node contributions along the last axis and drop a negligible imaginary part."""
    tot = terms.sum(axis=-1)
    l1 = np.abs(terms).sum(axis=-1)
    re = tot.real
    if np.any(np.abs(tot.imag) > 1e-8 * np.abs(re) + 1e-12 * l1):
        raise NumericsError(f"{what}: imaginary residue {np.max(np.abs(tot.imag)):.3g} "
                            "(broken conjugate symmetry?)")
    return re


def _powers(s, z: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ParameterError("prices must be > 0")
    return np.exp(np.multiply.outer(np.log(s), z))


def initial_capital(fs: FsCoefficients, s0: float) -> float:
    """Variance-optimal initial capital ``H_0``."""
    return float(mean_value_process(fs, s0, 0))


def mean_value_process(fs: FsCoefficients, s, n: int):
    """``H_n`` as a function of the date-``n`` price (vectorized in ``s``)."""
    if not 0 <= n <= fs.n:
        raise ParameterError(f"date must lie in 0..{fs.n}")
    d = fs.measure
    res = _real_integral(_powers(s, d.z) * (d.w * fs.h[n]), "mean value process")
    return res if np.ndim(res) else float(res)


def pure_hedge_ratio(fs: FsCoefficients, s_prev, n: int):
    """``xi_n`` as a function of the date-``n-1`` price (vectorized)."""
    if not 1 <= n <= fs.n:
        raise ParameterError(f"interval must lie in 1..{fs.n}")
    d = fs.measure
    coef = d.w * fs.g[n - 1] * fs.h[n]
    res = _real_integral(_powers(s_prev, d.z - 1) * coef, "hedge ratio")
    return res if np.ndim(res) else float(res)


def lambda_coeffs(table: CumulantTable) -> LambdaProcess:
    """``(m(1,k) - 1) / (m(2,k) - 2 m(1,k) + 1)`` for every interval."""
    m1 = table.m_real(1.0)
    m2 = table.m_real(2.0)
    den = m2 - 2 * m1 + 1
    if np.any(den <= 0):
        raise AssumptionError("E[(exp(dX_k) - 1)^2] vanishes: deterministic increment")
    return LambdaProcess((m1 - 1) / den)


def vo_strategy_step(state: StrategyState, fs: FsCoefficients, lam: LambdaProcess,
                     s_prev: float, h0: float) -> float:
    """Variance-optimal position for interval ``state.n``.

    The caller applies ``state.record(phi, dS)`` once the price move is known.
    """
    n = state.n
    xi = pure_hedge_ratio(fs, s_prev, n)
    h_prev = mean_value_process(fs, s_prev, n - 1)
    return xi + lam.coeff[n - 1] / s_prev * (h_prev - h0 - state.gain)


def mvt_process(table: CumulantTable) -> np.ndarray:
    """Cumulative mean-variance tradeoff ``K_j = sum_{l<=j} (m1-1)^2 / (m2-m1^2)``."""
    m1, m2 = _moments_12(table)
    return np.cumsum((m1 - 1) ** 2 / (m2 - m1 ** 2))
