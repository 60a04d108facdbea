"""Log-price drivers with independent increments and their per-interval
moment generating functions.

Every model is reduced to a :class:`CumulantTable`, i.e. the map
``z -> E[exp(z * dX_k)]`` for each trading interval ``k`` together with the
real interval of admissible ``Re z``.  All downstream modules only talk to the
table, never to the model parameters.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import (AssumptionError, DomainError, NumericsError, ParameterError,
                     SolverError)

_STRIP_TOL = 1e-12


# ---------------------------------------------------------------------------
# parameter sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NigParams:
    """Normal inverse Gaussian law per unit time."""

    alpha: float
    beta: float
    delta: float
    mu: float

    def __post_init__(self) -> None:
        vals = (self.alpha, self.beta, self.delta, self.mu)
        if not all(np.isfinite(v) for v in vals):
            raise ParameterError(f"NIG parameters must be finite, got {vals}")
        if self.alpha <= 0 or self.delta <= 0:
            raise ParameterError("NIG requires alpha > 0 and delta > 0")
        if abs(self.beta) >= self.alpha:
            raise ParameterError(
                f"NIG requires |beta| < alpha, got beta={self.beta}, alpha={self.alpha}")

    @property
    def gamma(self) -> float:
        return float(np.sqrt(self.alpha ** 2 - self.beta ** 2))

    @property
    def strip(self) -> tuple[float, float]:
        return (-self.alpha - self.beta, self.alpha - self.beta)


@dataclass(frozen=True)
class GaussianParams:
    """Brownian motion with drift: increments over ``dt`` are N(mu dt, sigma^2 dt)."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma)) or self.sigma <= 0:
            raise ParameterError("Gaussian model requires finite mu and sigma > 0")


@dataclass(frozen=True)
class ElectricityParams:
    """One-factor forward model ``X_t = int_0^t sigma exp(-lam (T-u)) dL_u``.

    ``driver`` is the NIG law of ``L_1``; ``maturity`` is the delivery date.
    """

    driver: NigParams
    sigma: float
    lambda_mr: float
    maturity: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ParameterError("electricity sigma must be > 0")
        if not self.lambda_mr >= 0:
            raise ParameterError("mean-reversion rate must be >= 0")
        if not self.maturity > 0:
            raise ParameterError("maturity must be > 0")

    @property
    def strip(self) -> tuple[float, float]:
        lo, hi = self.driver.strip
        return (lo / self.sigma, hi / self.sigma)


@dataclass(frozen=True)
class BinomialParams:
    """Two-point log increments: ``a`` with probability ``probs[k]``, else ``b``."""

    a: float
    b: float
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if self.a == self.b:
            raise ParameterError("binomial outcomes must differ")
        if not self.probs or any(not 0.0 < p < 1.0 for p in self.probs):
            raise ParameterError("binomial probabilities must lie in (0, 1)")


@dataclass(frozen=True)
class DiscreteParams:
    """Finite-support log increments, one distribution per trading interval.

    ``values[k]`` and ``probs[k]`` describe interval ``k + 1``.  Mostly used
    as a small exactly-enumerable test model (three-point laws etc.).
    """

    values: tuple[tuple[float, ...], ...]
    probs: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        vals = tuple(tuple(float(v) for v in row) for row in self.values)
        prbs = tuple(tuple(float(p) for p in row) for row in self.probs)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "probs", prbs)
        if len(vals) != len(prbs) or not vals:
            raise ParameterError("values and probs must have the same non-zero length")
        for v, p in zip(vals, prbs):
            if len(v) != len(p) or len(v) < 2:
                raise ParameterError("each interval needs at least two outcomes")
            if any(q <= 0 for q in p) or abs(sum(p) - 1.0) > 1e-12:
                raise ParameterError("probabilities must be positive and sum to one")

    @classmethod
    def from_binomial(cls, bp: BinomialParams) -> DiscreteParams:
        return cls(values=tuple((bp.a, bp.b) for _ in bp.probs),
                   probs=tuple((p, 1.0 - p) for p in bp.probs))


ContinuousModel = Union[NigParams, GaussianParams, ElectricityParams,
                        BinomialParams, DiscreteParams]


# ---------------------------------------------------------------------------
# trading grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TradingGrid:
    """Rebalancing dates ``0 = t_0 < t_1 < ... < t_N = T``."""

    dates: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.dates, dtype=float).copy()
        if d.ndim != 1 or d.size < 2:
            raise ParameterError("a grid needs at least two dates")
        if d[0] != 0.0:
            raise ParameterError("first trading date must be 0")
        if not np.all(np.diff(d) > 0):
            raise ParameterError("trading dates must be strictly increasing")
        d.setflags(write=False)
        object.__setattr__(self, "dates", d)

    @classmethod
    def uniform(cls, n: int, maturity: float) -> TradingGrid:
        if n < 1 or maturity <= 0:
            raise ParameterError("uniform grid needs n >= 1 and maturity > 0")
        d = maturity * np.arange(n + 1) / n
        d[-1] = maturity
        return cls(d)

    @property
    def n(self) -> int:
        return self.dates.size - 1

    @property
    def maturity(self) -> float:
        return float(self.dates[-1])

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.dates)

    def is_uniform(self, rtol: float = 1e-12) -> bool:
        dt = self.dt
        return bool(np.all(np.abs(dt - dt[0]) <= rtol * dt[0]))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TradingGrid) and np.array_equal(self.dates, other.dates)

    def __hash__(self) -> int:
        return hash(self.dates.tobytes())


# ---------------------------------------------------------------------------
# NIG utilities
# ---------------------------------------------------------------------------

def _check_strip(z: np.ndarray, lo: float, hi: float, what: str) -> None:
    re = np.real(z)
    scale = 1.0 + max(abs(lo), abs(hi))
    bad = (re < lo - _STRIP_TOL * scale) | (re > hi + _STRIP_TOL * scale)
    if np.any(bad):
        worst = re[bad].flat[0]
        raise DomainError(f"Re(z)={worst:.6g} outside the {what} strip [{lo:.6g}, {hi:.6g}]")


def nig_cgf(z, p: NigParams):
    """Log moment generating function of NIG(p) at complex ``z``."""
    z = np.asarray(z, dtype=complex)
    _check_strip(z, *p.strip, what="NIG")
    inner = p.alpha ** 2 - (p.beta + z) ** 2
    val = p.mu * z + p.delta * (p.gamma - np.sqrt(inner))
    return val if val.ndim else complex(val)


def nig_moments(p: NigParams) -> tuple[float, float, float, float]:
    """Mean, variance, skewness and excess kurtosis of NIG(p)."""
    a, b, d, g = p.alpha, p.beta, p.delta, p.gamma
    mean = p.mu + d * b / g
    var = d * a ** 2 / g ** 3
    skew = 3.0 * b / (a * np.sqrt(d * g))
    exkurt = 3.0 * (1.0 + 4.0 * b ** 2 / a ** 2) / (d * g)
    return float(mean), float(var), float(skew), float(exkurt)


def rescale_nig(p: NigParams, c: float) -> NigParams:
    """Multiply ``alpha`` by ``c`` and adjust the rest so that mean, variance
    and skewness stay put.

    With ``r = beta/alpha`` the variance and skewness read
    ``var = delta / (alpha (1-r^2)^{3/2})`` and
    ``skew = 3 r / (alpha sqrt(var) (1-r^2))``, so ``r`` is the root in
    (-1, 1) of ``q r^2 + r - q = 0`` with ``q = skew alpha sqrt(var) / 3``;
    ``delta`` and ``mu`` follow directly.
    """
    if not c > 0:
        raise ParameterError("scaling coefficient must be > 0")
    mean, var, skew, _ = nig_moments(p)
    alpha = c * p.alpha
    q = skew * alpha * np.sqrt(var) / 3.0
    # stable root of q r^2 + r - q = 0 lying in (-1, 1)
    r = 2.0 * q / (1.0 + np.sqrt(1.0 + 4.0 * q * q))
    beta = r * alpha
    delta = var * alpha * (1.0 - r * r) ** 1.5
    gamma = alpha * np.sqrt(1.0 - r * r)
    mu = mean - delta * beta / gamma
    try:
        out = NigParams(float(alpha), float(beta), float(delta), float(mu))
    except ParameterError as exc:  # pragma: no cover - r is always in (-1, 1)
        raise SolverError(f"moment matching failed for C={c}: {exc}") from exc
    got = np.array(nig_moments(out)[:3])
    want = np.array([mean, var, skew])
    resid = np.abs(got - want) / np.maximum(np.abs(want), 1.0)
    if np.max(resid) > 1e-9:
        raise SolverError(f"moment matching residuals too large: {resid}")
    return out


# ---------------------------------------------------------------------------
# electricity integral
# ---------------------------------------------------------------------------

def _nig_log_integral(x: np.ndarray, p: NigParams) -> np.ndarray:
    """``int_0^x kappa(w)/w dw`` for the NIG log-mgf ``kappa`` (closed form)."""
    a, b, g = p.alpha, p.beta, p.gamma
    t = b + x
    r = np.sqrt(a * a - t * t)
    return p.mu * x + p.delta * (
        g * np.log((a * a - b * t + g * r) / (2.0 * g * g)) - r + g
        + b * (np.arcsin(t / a) - np.arcsin(b / a)))


def _electricity_primitive(z: np.ndarray, ep: ElectricityParams, t) -> np.ndarray:
    """``P(z, t)`` with ``int_s^t kappa(z sigma e^{-lam(T-u)}) du = P(z,t) - P(z,s)``.

    The substitution ``v = exp(-lam (T-u))`` gives ``du = dv / (lam v)``.
    """
    lam, T = ep.lambda_mr, ep.maturity
    v = np.exp(-lam * (T - np.asarray(t, dtype=float)))
    x = ep.sigma * np.multiply.outer(v, z)
    return _nig_log_integral(x, ep.driver) / lam


def _electricity_logm_closed(z: np.ndarray, ep: ElectricityParams,
                             dates: np.ndarray) -> np.ndarray:
    prim = _electricity_primitive(z, ep, dates)
    return prim[1:] - prim[:-1]


def _electricity_logm_gl(z: np.ndarray, ep: ElectricityParams, dates: np.ndarray,
                         order: int = 16, rtol: float = 1e-12,
                         max_order: int = 1024) -> np.ndarray:
    lam, T, sig = ep.lambda_mr, ep.maturity, ep.sigma
    a, b = dates[:-1], dates[1:]
    prev = None
    while order <= max_order:
        x, w = np.polynomial.legendre.leggauss(order)
        u = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * x  # (N, order)
        scale = sig * np.exp(-lam * (T - u))
        kap = nig_cgf(np.multiply.outer(scale, z), ep.driver)  # (N, order, *z)
        wts = (0.5 * (b - a)[:, None] * w).reshape(u.shape + (1,) * z.ndim)
        cur = np.sum(wts * kap, axis=1)
        # a change of eps in log m is a relative change of eps in m
        if prev is not None and np.max(np.abs(cur - prev)) < rtol * max(1.0, np.max(np.abs(cur))):
            return cur
        prev = cur
        order *= 2
    raise NumericsError("Gauss-Legendre order doubling did not reach 1e-12")


# ---------------------------------------------------------------------------
# cumulant table
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CumulantTable:
    """Per-interval moment generating function ``m(z, k) = E[exp(z dX_k)]``.

    ``m(z)`` returns an array of shape ``(N,) + z.shape`` whose row ``k-1``
    holds interval ``k``.  ``strip`` is the closed real interval of admissible
    ``Re z``.

    Two optional hooks let callers cache work across grids:
    ``kappa(z)`` is the log-mgf per unit time of a time-homogeneous driver
    (``log m(z,k) = dt_k kappa(z)``), and ``primitive(z, t)`` is a function
    with ``log m(z,k) = primitive(z, t_k) - primitive(z, t_{k-1})``.
    """

    grid: TradingGrid
    strip: tuple[float, float]
    model: ContinuousModel
    _evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    stationary: bool = False
    kappa: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    primitive: Optional[Callable[[np.ndarray, float], np.ndarray]] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.grid.n

    def check(self, z) -> None:
        _check_strip(np.asarray(z, dtype=complex), *self.strip, what="model")

    def m(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        self.check(z)
        return self._evaluate(z)

    def m_real(self, x: float) -> np.ndarray:
        """``m(x, k)`` for real ``x`` as a length-N float array."""
        return self.m(np.asarray(x, dtype=complex)).real


def _binomial_like(dp: DiscreteParams) -> Callable[[np.ndarray], np.ndarray]:
    vals = [np.asarray(v) for v in dp.values]
    prbs = [np.asarray(p) for p in dp.probs]

    def ev(z: np.ndarray) -> np.ndarray:
        out = np.empty((len(vals),) + z.shape, dtype=complex)
        for k, (v, p) in enumerate(zip(vals, prbs)):
            out[k] = np.tensordot(p, np.exp(np.multiply.outer(v, z)), axes=1)
        return out

    return ev


def discretize_model(model: ContinuousModel, grid: TradingGrid,
                     method: str = "closed") -> CumulantTable:
    """Build the cumulant table of ``model`` on ``grid``.

    ``method`` only matters for the electricity model: ``"closed"`` uses the
    antiderivative of ``kappa(w)/w``; ``"quadrature"`` integrates the driver
    cumulant by Gauss-Legendre with order doubling to 1e-12.
    """
    dt = grid.dt
    if isinstance(model, NigParams):
        p = model

        def ev(z):
            return np.exp(np.multiply.outer(dt, nig_cgf(z, p)))

        table = CumulantTable(grid, p.strip, model, ev, grid.is_uniform(),
                              kappa=lambda z: nig_cgf(z, p))
    elif isinstance(model, GaussianParams):
        g = model

        def kap(z):
            return g.mu * z + 0.5 * g.sigma ** 2 * z * z

        def ev(z):
            return np.exp(np.multiply.outer(dt, kap(z)))

        table = CumulantTable(grid, (-np.inf, np.inf), model, ev, grid.is_uniform(),
                              kappa=kap)
    elif isinstance(model, ElectricityParams):
        ep = model
        if abs(grid.maturity - ep.maturity) > 1e-12 * ep.maturity:
            raise ParameterError("grid horizon must equal the delivery date")
        if method not in ("closed", "quadrature"):
            raise ParameterError(f"unknown integration method {method!r}")
        use_closed = method == "closed" and ep.lambda_mr * ep.maturity > 1e-3
        dates = grid.dates

        def ev(z):
            if ep.lambda_mr == 0.0 and method == "closed":
                logm = np.multiply.outer(dt, nig_cgf(ep.sigma * z, ep.driver))
            elif use_closed:
                logm = _electricity_logm_closed(z, ep, dates)
            else:
                logm = _electricity_logm_gl(z, ep, dates)
            return np.exp(logm)

        stationary = ep.lambda_mr == 0.0 and grid.is_uniform()
        if use_closed:
            table = CumulantTable(grid, ep.strip, model, ev, stationary,
                                  primitive=lambda z, t: _electricity_primitive(z, ep, t))
        elif ep.lambda_mr == 0.0 and method == "closed":
            table = CumulantTable(grid, ep.strip, model, ev, stationary,
                                  kappa=lambda z: nig_cgf(ep.sigma * z, ep.driver))
        else:
            table = CumulantTable(grid, ep.strip, model, ev, stationary)
    elif isinstance(model, (BinomialParams, DiscreteParams)):
        dp = DiscreteParams.from_binomial(model) if isinstance(model, BinomialParams) else model
        if len(dp.values) != grid.n:
            raise ParameterError(
                f"model has {len(dp.values)} intervals but grid has {grid.n}")
        stationary = all(dp.values[k] == dp.values[0] and dp.probs[k] == dp.probs[0]
                         for k in range(grid.n))
        table = CumulantTable(grid, (-np.inf, np.inf), model, _binomial_like(dp), stationary)
    else:
        raise ParameterError(f"unsupported model type {type(model).__name__}")

    lo, hi = table.strip
    if not lo <= 2.0 <= hi:
        raise AssumptionError(
            f"2 is not in the domain of m: admissible Re z is [{lo:.6g}, {hi:.6g}]")
    return table


def decay_integral(lam: float, h):
    """``(1 - exp(-2 lam h)) / (2 lam)``, continuous down to ``lam = 0``."""
    h = np.asarray(h, dtype=float)
    x = lam * h
    # the series also covers subnormal lam, where 2 lam h has few significant bits
    series = h * (1.0 - x + (2.0 / 3.0) * x * x - x ** 3 / 3.0)
    if lam == 0.0:
        return h
    return np.where(np.abs(x) < 1e-4, series, -np.expm1(-2.0 * lam * h) / (2.0 * lam))


def increment_variances(model: ContinuousModel, grid: TradingGrid) -> np.ndarray:
    """Variance of every log increment ``dX_k`` in closed form."""
    dt = grid.dt
    if isinstance(model, NigParams):
        return dt * nig_moments(model)[1]
    if isinstance(model, GaussianParams):
        return dt * model.sigma ** 2
    if isinstance(model, ElectricityParams):
        lam, T = model.lambda_mr, model.maturity
        base = nig_moments(model.driver)[1] * model.sigma ** 2
        t1 = grid.dates[1:]
        # e^{-2 lam (T-t_k)} - e^{-2 lam (T-t_{k-1})}, written without cancellation
        return base * np.exp(-2 * lam * (T - t1)) * decay_integral(lam, dt)
    if isinstance(model, (BinomialParams, DiscreteParams)):
        dp = DiscreteParams.from_binomial(model) if isinstance(model, BinomialParams) else model
        out = []
        for v, p in zip(dp.values, dp.probs):
            v, p = np.asarray(v), np.asarray(p)
            mean = p @ v
            out.append(p @ (v - mean) ** 2)
        return np.asarray(out)
    raise ParameterError(f"unsupported model type {type(model).__name__}")


def variance_of_increment(model: ContinuousModel, grid: TradingGrid, k: int) -> float:
    """Variance of ``dX_k`` for ``k`` in ``1..N``."""
    if not 1 <= k <= grid.n:
        raise ParameterError(f"k must lie in 1..{grid.n}")
    return float(increment_variances(model, grid)[k - 1])
