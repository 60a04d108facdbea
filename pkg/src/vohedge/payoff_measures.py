"""European payoffs written as ``f(s) = int s^z Pi(dz)``.

A :class:`ComplexMeasure` holds point masses plus vertical lines
``Re z = R`` carrying a Mellin-type kernel.  :func:`discretize` turns the
lines into Gauss-Legendre nodes so every later integral becomes a finite sum
over ``(z_j, w_j)``.

With ``z = R + iu`` we have ``dz = i du``, so a line integral
``(2 pi i)^{-1} int F(z) s^z dz`` becomes ``(2 pi)^{-1} int F(R+iu) s^{R+iu} du``.
The kernels ``F`` below are the plain Mellin transforms
``int_0^inf f(s) s^{-z-1} ds`` on the relevant half-planes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NumericsError, ParameterError

KERNELS = ("call_put", "digital", "call_put_sq", "put_sq")


@dataclass(frozen=True)
class Contour:
    """Vertical line ``Re z = R`` truncated to ``|Im z| <= U``.

    ``taper`` is the fraction of ``[0, U]`` over which a raised-cosine window
    brings the kernel smoothly to zero; 0 means a sharp cut.
    """

    R: float
    kernel: str
    strike: float
    U: float
    taper: float = 0.0

    def __post_init__(self) -> None:
        if self.kernel not in KERNELS:
            raise ParameterError(f"unknown kernel {self.kernel!r}")
        if not self.strike > 0 or not self.U > 0:
            raise ParameterError("strike and truncation must be > 0")
        if not 0.0 <= self.taper < 1.0:
            raise ParameterError("taper fraction must lie in [0, 1)")
        poles = {"call_put": (0, 1), "digital": (0,), "call_put_sq": (0, 1, 2),
                 "put_sq": (0, 1, 2)}[self.kernel]
        if self.R in poles:
            raise ParameterError(f"contour R={self.R} sits on a kernel pole")

    def density(self, z: np.ndarray) -> np.ndarray:
        """Mellin kernel ``F(z)`` (the ``1/(2 pi i)`` is applied in :func:`discretize`)."""
        K = self.strike
        if self.kernel == "call_put":
            return K ** (1 - z) / (z * (z - 1))
        if self.kernel == "digital":
            return K ** (-z) / z
        if self.kernel == "call_put_sq":
            return 2 * K ** (2 - z) / (z * (z - 1) * (z - 2))
        return -2 * K ** (2 - z) / (z * (z - 1) * (z - 2))


@dataclass(frozen=True)
class ComplexMeasure:
    """Point masses plus contour lines; ``kind`` names the payoff it encodes."""

    atoms: tuple[tuple[complex, complex], ...] = ()
    contours: tuple[Contour, ...] = ()
    kind: str = "custom"
    strike: Optional[float] = None

    @property
    def real_support(self) -> set[float]:
        return {float(np.real(z)) for z, _ in self.atoms} | {c.R for c in self.contours}

    def payoff(self, s) -> np.ndarray:
        """Exact payoff values (no quadrature) for the named vanilla kinds."""
        s = np.asarray(s, dtype=float)
        K = self.strike
        if self.kind == "call":
            return np.maximum(s - K, 0.0)
        if self.kind == "put":
            return np.maximum(K - s, 0.0)
        if self.kind == "digital":
            return np.where(s > K, 1.0, np.where(s == K, 0.5, 0.0))
        if self.kind == "exponential":
            zs = np.array([z for z, _ in self.atoms], dtype=complex)
            ws = np.array([w for _, w in self.atoms], dtype=complex)
            return np.real(np.exp(np.multiply.outer(np.log(s), zs)) @ ws)
        raise ParameterError(f"no closed-form payoff for measure kind {self.kind!r}")

    def square(self) -> Optional[ComplexMeasure]:
        """Measure representing ``f(s)^2``, when one is available in closed form."""
        if self.kind == "digital":
            return self
        if self.kind == "call":
            c = self.contours[0]
            # moving the R > 2 line left across the pole at z = 2 leaves s^2 behind
            line = Contour(1.5, "call_put_sq", c.strike, c.U, c.taper)
            return ComplexMeasure(((2.0 + 0j, 1.0 + 0j),), (line,), "call_sq", c.strike)
        if self.kind == "put":
            c = self.contours[0]
            line = Contour(c.R, "put_sq", c.strike, c.U, c.taper)
            return ComplexMeasure((), (line,), "put_sq", c.strike)
        return None


def call_measure(K: float, R: float = 0.5, U: float = 200.0, taper: float = 0.0) -> ComplexMeasure:
    """``(s-K)_+ = s + (2 pi i)^{-1} int s^z K^{1-z} / (z(z-1)) dz`` on ``Re z = R``."""
    if not K > 0:
        raise ParameterError("strike must be > 0")
    if not 0.0 < R < 1.0:
        raise ParameterError(f"call contour needs 0 < R < 1, got {R}")
    return ComplexMeasure(((1.0 + 0j, 1.0 + 0j),), (Contour(R, "call_put", K, U, taper),),
                          "call", float(K))


def put_measure(K: float, R: float = -0.5, U: float = 200.0, taper: float = 0.0) -> ComplexMeasure:
    """``(K-s)_+`` as a single line at ``R < 0`` with the call kernel."""
    if not K > 0:
        raise ParameterError("strike must be > 0")
    if not R < 0.0:
        raise ParameterError(f"put contour needs R < 0, got {R}")
    return ComplexMeasure((), (Contour(R, "call_put", K, U, taper),), "put", float(K))


def digital_measure(K: float, R: float = 0.5, U: float = 400.0,
                    taper: float = 0.1) -> ComplexMeasure:
    """Indicator of ``s >= K`` as a principal-value line integral at ``R > 0``.

    The kernel only decays like ``1/|u|``; the default raised-cosine taper on
    the last 10% of ``[0, U]`` damps the truncation ripple.
    """
    if not K > 0:
        raise ParameterError("strike must be > 0")
    if not R > 0.0:
        raise ParameterError(f"digital contour needs R > 0, got {R}")
    return ComplexMeasure((), (Contour(R, "digital", K, U, taper),), "digital", float(K))


def exponential_measure(atoms) -> ComplexMeasure:
    """Finite sum of power payoffs ``sum_j w_j s^{z_j}`` (closed under conjugation)."""
    atoms = tuple((complex(z), complex(w)) for z, w in atoms)
    if not atoms:
        raise ParameterError("need at least one atom")
    return ComplexMeasure(atoms, (), "exponential", None)


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscretizedMeasure:
    """Weighted complex nodes ``(z_j, w_j)`` standing in for a measure.

    ``half`` and ``half_factor`` select one node of every conjugate pair plus
    all real nodes, so that ``sum_j w_j F(z_j) = Re sum_half factor w F`` for
    any ``F`` with ``F(conj z) = conj F(z)``.
    """

    z: np.ndarray
    w: np.ndarray
    source: ComplexMeasure
    info: dict = field(default_factory=dict)
    square: Optional[DiscretizedMeasure] = None

    def __post_init__(self) -> None:
        z = np.asarray(self.z, dtype=complex)
        w = np.asarray(self.w, dtype=complex)
        if z.shape != w.shape or z.ndim != 1:
            raise ParameterError("nodes and weights must be 1-d arrays of equal length")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "w", w)
        _check_conjugate_closed(z, w)

    @property
    def size(self) -> int:
        return self.z.size

    @property
    def half(self) -> np.ndarray:
        return np.flatnonzero(self.z.imag >= 0)

    @property
    def half_factor(self) -> np.ndarray:
        return np.where(self.z[self.half].imag > 0, 2.0, 1.0)

    @property
    def real_support(self) -> np.ndarray:
        return np.unique(self.z.real)


def _check_conjugate_closed(z: np.ndarray, w: np.ndarray) -> None:
    scale = 1.0 + np.max(np.abs(z)) if z.size else 1.0
    wscale = np.max(np.abs(w)) if w.size else 1.0
    order = np.lexsort((z.imag, z.real))
    corder = np.lexsort((-z.imag, z.real))
    ok = (np.allclose(z[order], np.conj(z[corder]), rtol=0, atol=1e-12 * scale)
          and np.allclose(w[order], np.conj(w[corder]), rtol=0, atol=1e-12 * wscale))
    if not ok:
        raise NumericsError("node set is not closed under complex conjugation")


def _panel_edges(U: float, panels: int, grading: float) -> np.ndarray:
    xi = np.linspace(-1.0, 1.0, panels + 1)
    if grading <= 0:
        return U * xi
    # sinh map: small panels near the real axis, where the kernel poles sit
    return U * np.sinh(grading * xi) / np.sinh(grading)


def _line_nodes(c: Contour, panels: int, order: int,
                grading: float) -> tuple[np.ndarray, np.ndarray]:
    x, wq = np.polynomial.legendre.leggauss(order)
    edges = _panel_edges(c.U, panels, grading)
    mid = 0.5 * (edges[1:] + edges[:-1])
    hw = 0.5 * (edges[1:] - edges[:-1])
    u = (mid[:, None] + hw[:, None] * x).ravel()
    wu = (hw[:, None] * wq).ravel()
    # enforce exact mirror symmetry of the node set
    u = 0.5 * (u - u[::-1])
    wu = 0.5 * (wu + wu[::-1])
    if c.taper > 0:
        t0 = (1.0 - c.taper) * c.U
        au = np.abs(u)
        win = np.where(au > t0, 0.5 * (1 + np.cos(np.pi * (au - t0) / (c.U - t0))), 1.0)
        wu = wu * win
    z = c.R + 1j * u
    w = wu * c.density(z) / (2 * np.pi)
    return z, w


def discretize(m: ComplexMeasure, panels: int = 64, order: int = 16,
               grading: float = 4.0, with_square: bool = True) -> DiscretizedMeasure:
    """Gauss-Legendre image of ``m``: ``panels`` panels of ``order`` points on
    each line, atoms passed through unchanged.

    Panel edges follow ``U sinh(a x) / sinh(a)`` for ``x`` uniform in [-1, 1]
    with ``a = grading``; ``grading = 0`` gives equal panels.  The kernels have
    poles at distance ``|R - pole|`` from the line, so equal panels much wider
    than that distance converge slowly near ``u = 0``.
    """
    if panels < 1 or order < 2:
        raise ParameterError("need panels >= 1 and order >= 2")
    if grading < 0:
        raise ParameterError("grading must be >= 0")
    zs = [np.array([a[0] for a in m.atoms], dtype=complex)]
    ws = [np.array([a[1] for a in m.atoms], dtype=complex)]
    for c in m.contours:
        z, w = _line_nodes(c, panels, order, grading)
        zs.append(z)
        ws.append(w)
    info = {"panels": panels, "order": order, "grading": grading,
            "U": max((c.U for c in m.contours), default=0.0),
            "taper": max((c.taper for c in m.contours), default=0.0)}
    sq = None
    if with_square:
        msq = m.square()
        if msq is not None:
            sq = discretize(msq, panels, order, grading, with_square=False)
    return DiscretizedMeasure(np.concatenate(zs), np.concatenate(ws), m, info, sq)


def reconstruct_payoff(d: DiscretizedMeasure, s):
    """Finite-sum image ``sum_j w_j s^{z_j}`` of the payoff at ``s > 0``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise ParameterError("reconstruction needs s > 0")
    vals = np.exp(np.multiply.outer(np.log(s_arr), d.z)) @ d.w
    res = np.real(vals)
    if np.any(np.abs(np.imag(vals)) > 1e-8 * (1 + np.abs(res))):
        raise NumericsError("payoff reconstruction has a non-negligible imaginary part")
    return res if res.ndim else float(res)
