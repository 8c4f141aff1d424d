"""The mass-preserving symmetry group and orthogonality of parameter sequences.

A group element ``(theta, h0, xi0, x0, t0)`` acts by

    g phi = exp(i theta) M_xi0 U_{-t0} T_x0 D_h0 phi

with ``M`` modulation by ``exp(i x.xi0)``, ``U_s = exp(i s Laplacian)``,
``T`` translation and ``D_h phi = h^{-d/2} phi(./h)``.  Dilation,
translation and propagation are carried out on the spectral side so the
action stays unitary up to the aliasing guard.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.fft as sfft
from scipy.signal import czt

from .errors import AliasingError, GridMismatchError, SupportWarning
from .propagator import propagate
from .spectral import Field, Grid

ALIAS_TOL = 1e-8
SUPPORT_TOL = 1e-8
TWO_PI = 2.0 * math.pi


def _vec(value, d: int | None = None) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if d is not None and arr.size == 1 and d > 1:
        arr = np.full(d, arr[0])
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class GroupElement:
    """Element ``(theta, h0, xi0, x0, t0)`` of the symmetry group.

    Scalars given for ``xi0`` or ``x0`` are broadcast to the dimension implied
    by the other vector (one if both are scalar).
    """

    theta: float = 0.0
    h0: float = 1.0
    xi0: tuple[float, ...] = (0.0,)
    x0: tuple[float, ...] = (0.0,)
    t0: float = 0.0

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi0, dtype=float))
        x = np.atleast_1d(np.asarray(self.x0, dtype=float))
        d = max(xi.size, x.size)
        xi, x = _vec(xi, d), _vec(x, d)
        if len(xi) != len(x):
            raise ValueError("xi0 and x0 must have the same dimension")
        if not self.h0 > 0:
            raise ValueError(f"scale must be positive, got {self.h0}")
        object.__setattr__(self, "xi0", xi)
        object.__setattr__(self, "x0", x)
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)
        object.__setattr__(self, "h0", float(self.h0))
        object.__setattr__(self, "t0", float(self.t0))

    @classmethod
    def identity(cls, d: int = 1) -> "GroupElement":
        return cls(0.0, 1.0, (0.0,) * d, (0.0,) * d, 0.0)

    @property
    def d(self) -> int:
        return len(self.xi0)

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.h0, *self.xi0, *self.x0, self.t0])

    def inverse(self) -> "GroupElement":
        xi, x = np.array(self.xi0), np.array(self.x0)
        h, t = self.h0, self.t0
        return GroupElement(
            theta=-self.theta - float(x @ xi) - t * float(xi @ xi),
            h0=1.0 / h,
            xi0=-h * xi,
            x0=-(x + 2.0 * t * xi) / h,
            t0=-t / h**2,
        )

    def to_json(self) -> list:
        return [self.theta, self.h0, list(self.xi0), list(self.x0), self.t0]

    @classmethod
    def from_json(cls, data: Sequence) -> "GroupElement":
        theta, h0, xi0, x0, t0 = data
        return cls(theta, h0, tuple(xi0), tuple(x0), t0)


def compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    """Parameters of the product ``g1 g2`` (``g2`` acts first).

    Notes
    -----
    Writing ``eta = xi2 / h1`` and moving every operator of ``g2`` to the
    right of those of ``g1`` with the commutation rules of the generators
    gives ``h = h1 h2``, ``xi = xi1 + eta``, ``t = t1 + h1^2 t2``,
    ``x = x1 + h1 x2 - 2 t1 eta`` and
    ``theta = theta1 + theta2 - x1.eta + t1 |eta|^2``.
    """
    if g1.d != g2.d:
        raise ValueError("group elements of different dimension")
    xi1, x1 = np.array(g1.xi0), np.array(g1.x0)
    xi2, x2 = np.array(g2.xi0), np.array(g2.x0)
    h1, t1 = g1.h0, g1.t0
    eta = xi2 / h1
    return GroupElement(
        theta=g1.theta + g2.theta - float(x1 @ eta) + t1 * float(eta @ eta),
        h0=h1 * g2.h0,
        xi0=xi1 + eta,
        x0=x1 + h1 * x2 - 2.0 * t1 * eta,
        t0=t1 + h1**2 * g2.t0,
    )


def modulate(f: Field, xi0) -> Field:
    """Pointwise multiplication by ``exp(i x.xi0)``."""
    xi = _vec(xi0, f.grid.d)
    phase = sum(c * k for c, k in zip(f.grid.coords(), xi))
    return Field(f.grid, f.values * np.exp(1j * phase))


def translate(f: Field, x0) -> Field:
    """Periodic translation ``f(. - x0)`` as a spectral phase ramp."""
    y = _vec(x0, f.grid.d)
    ramp = sum(k * c for k, c in zip(f.grid.freqs(), y))
    return Field(f.grid, sfft.ifftn(sfft.fftn(f.values) * np.exp(-1j * ramp)))


def _energy_fraction(power: np.ndarray, mask: np.ndarray) -> float:
    total = float(power.sum())
    return float(power[mask].sum()) / total if total > 0 else 0.0


def check_support(f: Field, h: float, x0: Sequence[float]) -> float:
    """Fraction of the energy of ``T_x0 D_h f`` that falls outside the box.

    Emits a :class:`~strichartz_lab.errors.SupportWarning` above tolerance.
    """
    grid = f.grid
    half = 0.5 * grid.extent
    outside = np.zeros(grid.shape, dtype=bool)
    for c, shift in zip(grid.coords(), x0):
        pos = h * c + shift
        outside = outside | (pos < -half) | (pos >= half)
    frac = _energy_fraction(np.abs(f.values) ** 2, outside)
    if frac > SUPPORT_TOL:
        warnings.warn(f"{frac:.2e} of the energy leaves the box under dilation/translation",
                      SupportWarning, stacklevel=3)
    return frac


def _dilated_spectrum(values: np.ndarray, grid: Grid, h: float) -> np.ndarray:
    """Coefficients of ``D_h f`` in FFT order, ``h^(d/2) f_hat(h xi_m)``.

    Each axis is a chirp-z transform evaluating the Riemann sum of ``f_hat``
    at the stretched frequencies; bands that fall outside the sampled
    spectrum are zeroed.
    """
    n = grid.n_per_axis
    m = np.arange(n) - n // 2
    w = np.exp(-2j * math.pi * h / n)
    a = np.exp(-1j * math.pi * h)
    factor = grid.dx * math.sqrt(h) * np.exp(1j * math.pi * h * m)
    factor[(np.abs(h * m) > n / 2) | (m == -(n // 2))] = 0.0
    out = np.asarray(values, dtype=np.complex128)
    for axis in range(grid.d):
        out = czt(out, m=n, w=w, a=a, axis=axis)
        shape = [1] * grid.d
        shape[axis] = n
        out = out * factor.reshape(shape)
        out = sfft.ifftshift(out, axes=axis)
    return out


def dilation_alias_fraction(f: Field, h: float) -> float:
    """Spectral energy of ``f`` that ``D_h`` would push beyond the Nyquist band."""
    if h >= 1:
        return 0.0
    grid = f.grid
    power = np.abs(sfft.fftn(f.values)) ** 2
    lost = np.zeros(grid.shape, dtype=bool)
    for k in grid.freqs():
        lost = lost | (np.abs(k) > h * grid.nyquist * (1 - 1e-12))
    return _energy_fraction(power, lost)


def apply(g: GroupElement, phi: Field) -> Field:
    """Act on ``phi`` by ``g``.

    Raises
    ------
    AliasingError
        If dilation or modulation would move more than ``1e-8`` of the
        spectral energy beyond the grid's band.
    GridMismatchError
        If the element and the field have different dimensions.

    Warns
    -----
    SupportWarning
        If dilation and translation move energy outside the box.
    """
    grid = phi.grid
    if g.d != grid.d:
        raise GridMismatchError(f"element is {g.d}-dimensional, field is {grid.d}-dimensional")
    if g.h0 != 1.0:
        frac = dilation_alias_fraction(phi, g.h0)
        if frac > ALIAS_TOL:
            raise AliasingError(f"dilation by {g.h0} aliases {frac:.2e} of the spectral energy")
    if g.h0 != 1.0 or any(g.x0):
        check_support(phi, g.h0, g.x0)
    if g.h0 == 1.0:
        spec = sfft.fftn(phi.values)
    else:
        # to FFT-normalised coefficients of the dilated field
        spec = _dilated_spectrum(phi.values, grid, g.h0) * grid.parity / grid.cell
    phase = g.t0 * grid.xi_sq - sum(k * c for k, c in zip(grid.freqs(), g.x0))
    out = sfft.ifftn(spec * np.exp(1j * phase))
    if any(g.xi0):
        power = np.abs(spec) ** 2
        beyond = np.zeros(grid.shape, dtype=bool)
        for k, shift in zip(grid.freqs(), g.xi0):
            beyond = beyond | (np.abs(k + shift) > grid.nyquist)
        frac = _energy_fraction(power, beyond)
        if frac > ALIAS_TOL:
            raise AliasingError(f"modulation by {g.xi0} aliases {frac:.2e} of the spectral energy")
        out = out * np.exp(1j * sum(c * k for c, k in zip(grid.coords(), g.xi0)))
    if g.theta:
        out = out * np.exp(1j * g.theta)
    return Field(grid, out)


@dataclass(frozen=True)
class GalileanCheck:
    lhs: Field
    rhs: Field
    defect: float


def galilean_conjugate(phi: Field, xi0, t0: float) -> GalileanCheck:
    """Both sides of the Galilean identity and their relative L² defect.

    The left side modulates then propagates; the right side propagates,
    translates by ``2 t0 xi0``, modulates and applies the phase
    ``exp(-i t0 |xi0|^2)``.
    """
    xi = np.array(_vec(xi0, phi.grid.d))
    lhs = propagate(modulate(phi, xi), t0)
    moved = translate(propagate(phi, t0), 2.0 * t0 * xi)
    rhs = modulate(moved, xi) * np.exp(-1j * t0 * float(xi @ xi))
    defect = (lhs - rhs).norm() / phi.norm()
    return GalileanCheck(lhs, rhs, defect)


@dataclass(frozen=True)
class ParamEntry:
    """One term ``(h_n, xi_n, x_n, t_n)`` of a parameter sequence."""

    h: float
    xi: tuple[float, ...]
    x: tuple[float, ...]
    t: float

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"scale must be positive, got {self.h}")
        object.__setattr__(self, "xi", _vec(self.xi))
        object.__setattr__(self, "x", _vec(self.x))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "t", float(self.t))

    def element(self, theta: float = 0.0) -> GroupElement:
        return GroupElement(theta, self.h, self.xi, self.x, self.t)


@dataclass(frozen=True)
class ParameterSequence:
    """Finite parameter sequence ``Gamma_n = (h_n, xi_n, x_n, t_n)`` with a label."""

    label: str
    entries: tuple[ParamEntry, ...]

    MIN_LENGTH = 4

    def __post_init__(self):
        entries = tuple(self.entries)
        if len(entries) < self.MIN_LENGTH:
            raise ValueError(f"parameter sequences need at least {self.MIN_LENGTH} entries")
        if len({len(e.xi) for e in entries} | {len(e.x) for e in entries}) != 1:
            raise ValueError("inconsistent dimensions across entries")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_arrays(cls, label: str, h, xi=0.0, x=0.0, t=0.0, d: int = 1) -> "ParameterSequence":
        """Build from per-n arrays; scalars are broadcast over the sequence length."""
        n = max((np.shape(v)[0] for v in (h, xi, x, t) if np.ndim(v) > 0), default=cls.MIN_LENGTH)

        def per_n(v, width):
            arr = np.asarray(v, dtype=float)
            if arr.ndim == 0:
                return np.broadcast_to(arr, (n, width) if width else (n,))
            return arr.reshape((n, width) if width else (n,))

        hs, ts = per_n(h, 0), per_n(t, 0)
        xis, xs = per_n(xi, d), per_n(x, d)
        return cls(label, tuple(ParamEntry(hs[i], tuple(xis[i]), tuple(xs[i]), ts[i])
                                for i in range(n)))

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, n: int) -> ParamEntry:
        return self.entries[n]

    @property
    def d(self) -> int:
        return len(self.entries[0].xi)

    @property
    def h(self) -> np.ndarray:
        return np.array([e.h for e in self.entries])

    @property
    def xi(self) -> np.ndarray:
        return np.array([e.xi for e in self.entries])

    @property
    def x(self) -> np.ndarray:
        return np.array([e.x for e in self.entries])

    @property
    def t(self) -> np.ndarray:
        return np.array([e.t for e in self.entries])

    def to_json(self) -> dict:
        return {"label": self.label,
                "entries": [{"h": e.h, "xi": list(e.xi), "x": list(e.x), "t": e.t}
                            for e in self.entries]}

    @classmethod
    def from_json(cls, data: dict) -> "ParameterSequence":
        return cls(str(data["label"]),
                   tuple(ParamEntry(e["h"], tuple(e["xi"]), tuple(e["x"]), e["t"])
                         for e in data["entries"]))


def scale_statistic(a: ParameterSequence, b: ParameterSequence) -> np.ndarray:
    """First orthogonality expression ``h^k/h^j + h^j/h^k + h^j |xi^j - xi^k|``, ``j = a``."""
    hj, hk = a.h, b.h
    return hk / hj + hj / hk + hj * np.linalg.norm(a.xi - b.xi, axis=1)


def spacetime_statistic(a: ParameterSequence, b: ParameterSequence) -> np.ndarray:
    """Second orthogonality expression with ``j = a`` and ``k = b``, evaluated as written."""
    hj = a.h
    drift = (a.x - b.x) / hj[:, None] + b.t[:, None] * (b.xi - a.xi) / hj[:, None]
    return np.abs(a.t - b.t) / hj**2 + np.linalg.norm(drift, axis=1)


def diverges(series: np.ndarray, threshold: float) -> bool:
    """Strictly increasing over the last three entries and above ``threshold`` at the end."""
    tail = np.asarray(series)[-3:]
    return bool(np.all(np.diff(tail) > 0) and tail[-1] > threshold)


@dataclass(frozen=True)
class OrthogonalityResult:
    stat_scale: np.ndarray
    stat_spacetime: np.ndarray
    stat_spacetime_reversed: np.ndarray
    verdict: str

    @property
    def orthogonal(self) -> bool:
        return self.verdict == "orthogonal"


def orthogonality_statistic(
    a: ParameterSequence, b: ParameterSequence, threshold: float = 1e3
) -> OrthogonalityResult:
    """Evaluate both orthogonality expressions and a finite-depth verdict.

    The verdict is ``"orthogonal"`` when the scale series or the space-time
    series (in either index order) diverges by :func:`diverges`, otherwise
    ``"undetermined at this depth"``.

    Raises
    ------
    ValueError
        If the sequences have different lengths.
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    first = scale_statistic(a, b)
    second = spacetime_statistic(a, b)
    second_rev = spacetime_statistic(b, a)
    hit = any(diverges(s, threshold) for s in (first, second, second_rev))
    return OrthogonalityResult(first, second, second_rev,
                               "orthogonal" if hit else "undetermined at this depth")
