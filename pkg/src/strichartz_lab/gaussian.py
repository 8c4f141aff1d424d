"""Closed-form Gaussian waves on the whole space.

An isotropic Gaussian ``amp * exp(-a |y - c|^2 + i k.y)`` stays Gaussian under
every generator of the symmetry group and under free evolution:

    exp(i s Laplacian) exp(-a |y|^2 + b.y)
        = z^(-d/2) exp(b.b / (4a) - a |y - b/(2a)|^2 / z),   z = 1 + 4 i a s.

At any time the logarithm of the wave is a complex quadratic
``-P |x|^2 + Q.x + R``, so spatial integrals of products of waves and their
conjugates are Gaussian integrals with closed forms.  This gives whole-line
reference values free of periodic wrap-around, used as oracles and as the
exact backend for Gaussian profile families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product
from typing import Sequence

import numpy as np

from .spectral import Field, Grid


def _vec(value, d: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1 and d > 1:
        arr = np.full(d, arr[0])
    if arr.size != d:
        raise ValueError(f"expected a {d}-vector, got {value!r}")
    return arr


@dataclass(frozen=True)
class GaussianProfile:
    """``amplitude * exp(-|x - center|^2 / width^2 + i x.modulation)``.

    Parameters
    ----------
    width : float
    center, modulation : float or tuple
        Scalars are broadcast to ``d`` components.
    amplitude : complex
    d : int
    """

    width: float = 1.0
    center: tuple[float, ...] | float = 0.0
    modulation: tuple[float, ...] | float = 0.0
    amplitude: complex = 1.0
    d: int = 1

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"width must be positive, got {self.width}")
        object.__setattr__(self, "center", tuple(_vec(self.center, self.d)))
        object.__setattr__(self, "modulation", tuple(_vec(self.modulation, self.d)))

    @property
    def radius(self) -> float:
        """Distance from the origin beyond which ``|phi| < 1e-15 |amplitude|``."""
        return float(np.linalg.norm(self.center)) + 5.9 * self.width

    @property
    def band(self) -> float:
        """Frequency beyond which the spectrum is below ``1e-15`` of its peak."""
        return float(np.linalg.norm(self.modulation)) + 11.8 / self.width

    def wave(self) -> "GaussianWave":
        return GaussianWave(complex(self.amplitude), 1.0 / self.width**2,
                            tuple(self.center), tuple(self.modulation), 0.0)

    def sample(self, grid: Grid, h: float = 1.0, shift=0.0, exponent: float | None = None) -> Field:
        """Render ``h^-exponent * phi((x - shift)/h)`` exactly on ``grid``.

        ``exponent`` defaults to ``d/2``, the L²-preserving dilation.
        """
        if exponent is None:
            exponent = grid.d / 2
        shift = _vec(shift, grid.d)
        c, w = np.array(self.center), self.width
        coords = [(x - s) / h for x, s in zip(grid.coords(), shift)]
        rsq = sum((y - ci) ** 2 for y, ci in zip(coords, c))
        phase = sum(y * k for y, k in zip(coords, self.modulation))
        vals = self.amplitude * h ** (-exponent) * np.exp(-rsq / w**2 + 1j * phase)
        return Field(grid, np.broadcast_to(vals, grid.shape))

    def to_json(self) -> dict:
        return {"kind": "gaussian", "width": self.width, "center": list(self.center),
                "modulation": list(self.modulation),
                "amplitude": [complex(self.amplitude).real, complex(self.amplitude).imag]}

    @classmethod
    def from_json(cls, data: dict, d: int = 1) -> "GaussianProfile":
        if data.get("kind", "gaussian") != "gaussian":
            raise ValueError(f"unsupported profile kind {data.get('kind')!r}")
        amp = data.get("amplitude", 1.0)
        if isinstance(amp, (list, tuple)):
            amp = complex(amp[0], amp[1])
        return cls(float(data.get("width", 1.0)), data.get("center", 0.0),
                   data.get("modulation", 0.0), amp, d)


@dataclass(frozen=True)
class Quadratic:
    """Coefficients of ``-P |x|^2 + Q.x + R`` sampled over a time axis.

    ``P`` and ``R`` have shape ``(n_t,)``, ``Q`` has shape ``(n_t, d)``.
    """

    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def conj(self) -> "Quadratic":
        return Quadratic(np.conj(self.P), np.conj(self.Q), np.conj(self.R))

    def real(self) -> "Quadratic":
        return Quadratic(self.P.real, self.Q.real, self.R.real)

    def __add__(self, other: "Quadratic") -> "Quadratic":
        return Quadratic(self.P + other.P, self.Q + other.Q, self.R + other.R)

    def __mul__(self, c: float) -> "Quadratic":
        return Quadratic(self.P * c, self.Q * c, self.R * c)

    __rmul__ = __mul__

    def integral(self) -> np.ndarray:
        """``integral exp(-P|x|^2 + Q.x + R) dx`` for ``Re P > 0``."""
        d = self.Q.shape[-1]
        qq = np.sum(self.Q * self.Q, axis=-1)
        return (np.pi / self.P) ** (d / 2) * np.exp(self.R + qq / (4 * self.P))


@dataclass(frozen=True)
class GaussianWave:
    """The free wave ``exp(i (t - t_f) Laplacian) G`` with focal Gaussian
    ``G(y) = amp * exp(-a |y - c|^2 + i k.y)``.

    Group actions update ``(amp, a, c, k, t_f)`` exactly.
    """

    amp: complex
    a: float
    c: tuple[float, ...]
    k: tuple[float, ...]
    t_f: float = 0.0

    @property
    def d(self) -> int:
        return len(self.c)

    # group actions on the t = 0 state

    def phase(self, theta: float) -> "GaussianWave":
        return replace(self, amp=self.amp * np.exp(1j * theta))

    def dilate(self, h: float, exponent: float | None = None) -> "GaussianWave":
        """``h^-exponent * u(., /h)`` at every time; ``exponent`` defaults to ``d/2``."""
        if exponent is None:
            exponent = self.d / 2
        return GaussianWave(self.amp * h ** (-exponent), self.a / h**2,
                            tuple(h * np.array(self.c)), tuple(np.array(self.k) / h),
                            h**2 * self.t_f)

    def translate(self, y) -> "GaussianWave":
        y = _vec(y, self.d)
        k = np.array(self.k)
        return replace(self, amp=self.amp * np.exp(-1j * float(k @ y)),
                       c=tuple(np.array(self.c) + y))

    def propagate(self, s: float) -> "GaussianWave":
        """State at time 0 becomes ``exp(i s Laplacian)`` of the old one."""
        return replace(self, t_f=self.t_f - s)

    def modulate(self, xi) -> "GaussianWave":
        xi = _vec(xi, self.d)
        moved = self.translate(2.0 * self.t_f * xi)
        return replace(moved, amp=moved.amp * np.exp(-1j * self.t_f * float(xi @ xi)),
                       k=tuple(np.array(moved.k) + xi))

    def act(self, theta: float = 0.0, h: float = 1.0, xi=0.0, x=0.0, t: float = 0.0,
            exponent: float | None = None) -> "GaussianWave":
        """``exp(i theta) M_xi U_{-t} T_x D_h`` applied to this wave."""
        out = self.dilate(h, exponent) if h != 1.0 or exponent is not None else self
        return out.translate(x).propagate(-t).modulate(xi).phase(theta)

    # evaluation

    def quadratic(self, t) -> Quadratic:
        """Exponent coefficients of the wave at times ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        a, d = self.a, self.d
        c, k = np.array(self.c), np.array(self.k)
        beta = c + 1j * k / (2 * a)
        bb = complex(beta @ beta)
        z = 1.0 + 4j * a * (t - self.t_f)
        P = a / z
        Q = 2.0 * P[:, None] * beta[None, :]
        R = (np.log(complex(self.amp)) - a * float(c @ c) + a * bb) - 0.5 * d * np.log(z) - P * bb
        return Quadratic(P, Q, R)

    def evaluate(self, t: float, coords: Sequence[np.ndarray]) -> np.ndarray:
        """Wave values at time ``t`` on broadcastable coordinate arrays."""
        quad = self.quadratic(t)
        P, Q, R = quad.P[0], quad.Q[0], quad.R[0]
        rsq = sum(x**2 for x in coords)
        lin = sum(qi * x for qi, x in zip(Q, coords))
        return np.exp(-P * rsq + lin + R)

    def sample(self, grid: Grid, t: float = 0.0) -> Field:
        return Field(grid, np.broadcast_to(self.evaluate(t, grid.coords()), grid.shape))

    def centroid(self, t: float) -> np.ndarray:
        """Centre of ``|u(t)|``."""
        quad = self.quadratic(t).real()
        return quad.Q[0] / (2 * quad.P[0])

    def spread(self, t: float) -> float:
        """Standard width ``w(t)`` with ``|u| ~ exp(-|x - centroid|^2 / w^2)``."""
        return float(1.0 / math.sqrt(self.quadratic(t).P.real[0]))

    @property
    def frequency(self) -> np.ndarray:
        """Centre of the (time-invariant) spectrum."""
        return np.array(self.k)

    @property
    def spectral_width(self) -> float:
        """Width ``2 sqrt(a)`` of the spectrum ``exp(-|xi - k|^2 / (4a))``."""
        return 2.0 * math.sqrt(self.a)

    @property
    def time_scale(self) -> float:
        """Dispersion time ``1/(4a)``."""
        return 0.25 / self.a

    @property
    def mass(self) -> float:
        """Squared L² norm."""
        return abs(self.amp) ** 2 * (math.pi / (2 * self.a)) ** (self.d / 2)


def lebesgue_power(wave: GaussianWave, t, r: float) -> np.ndarray:
    """``integral |u(t, x)|^r dx`` for each time."""
    if wave.amp == 0:
        return np.zeros(np.atleast_1d(np.asarray(t, dtype=float)).shape)
    return (wave.quadratic(t).real() * r).integral().real


def product_power(waves: Sequence[GaussianWave], t, rho: float) -> np.ndarray:
    """``integral |u_1 ... u_m|^rho dx`` for each time."""
    if any(w.amp == 0 for w in waves):
        return np.zeros(np.atleast_1d(np.asarray(t, dtype=float)).shape)
    total = None
    for w in waves:
        q = w.quadratic(t).real()
        total = q if total is None else total + q
    return (total * rho).integral().real


def inner_product(u: GaussianWave, v: GaussianWave, t: float = 0.0) -> complex:
    """``integral u conj(v) dx`` (independent of ``t``)."""
    return complex((u.quadratic(t) + v.quadratic(t).conj()).integral()[0])


@lru_cache(maxsize=None)
def _compositions(m: int, parts: int) -> tuple[tuple[tuple[int, ...], float], ...]:
    """All ``alpha`` with ``|alpha| = m`` and their multinomial coefficients."""
    out = []
    for alpha in product(range(m + 1), repeat=parts):
        if sum(alpha) == m:
            coef = math.factorial(m)
            for a in alpha:
                coef //= math.factorial(a)
            out.append((alpha, float(coef)))
    return tuple(out)


def sum_power(waves: Sequence[GaussianWave], t, r: float) -> np.ndarray:
    """``integral |sum_j u_j(t, x)|^r dx`` for an even integer ``r``.

    Expands ``(sum u)^m (sum conj u)^m`` with ``m = r/2`` into Gaussian
    integrals.  Waves with zero amplitude are dropped.

    Raises
    ------
    ValueError
        If ``r`` is not an even integer.
    """
    if r != int(r) or int(r) % 2:
        raise ValueError(f"closed-form sum norms need an even integer exponent, got {r}")
    live = [w for w in waves if w.amp != 0]
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if not live:
        return np.zeros(t.shape)
    if len(live) == 1:
        return lebesgue_power(live[0], t, r)
    m = int(r) // 2
    quads = [w.quadratic(t) for w in live]
    conjs = [q.conj() for q in quads]
    total = np.zeros(t.shape, dtype=complex)
    combos = _compositions(m, len(live))
    for alpha, ca in combos:
        left = None
        for q, n in zip(quads, alpha):
            if n:
                left = q * n if left is None else left + q * n
        for beta, cb in combos:
            acc = left
            for q, n in zip(conjs, beta):
                if n:
                    acc = acc + q * n
            total += ca * cb * acc.integral()
    return total.real
