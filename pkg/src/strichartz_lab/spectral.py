"""Periodic grids, sampled fields and their spectral calculus.

A :class:`Grid` discretises the box ``[-L/2, L/2)^d`` with ``N`` points per
axis.  Fourier coefficients approximate the whole-space transform

    f_hat(xi) = integral of exp(-i x.xi) f(x) dx

by a Riemann sum with cell weight ``(L/N)^d`` and are stored in FFT order on
the lattice ``xi_m = 2 pi m / L``.  The inverse carries the ``(2 pi)^-d``
factor so that the pair round-trips exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Literal

import numpy as np
import scipy.fft as sfft

from .errors import (
    GridMismatchError,
    InvalidExponentError,
    InvalidFieldError,
    ResolutionWarning,
    SingularZeroModeError,
)

Cutoff = Literal["sharp", "smooth"]

#: Default grids per dimension, ``d -> (N, L)``.  The box is wide enough that
#: a unit Gaussian evolved over the default time window stays clear of the
#: periodic boundary.
DEFAULT_GRIDS = {1: (2048, 320.0), 2: (512, 140.0), 3: (64, 20.0)}


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L/2, L/2)^d``.

    Parameters
    ----------
    d : int
        Spatial dimension, 1 to 3.
    n_per_axis : int
        Points per axis, a power of two and at least 8.
    extent : float
        Box side length ``L``.
    """

    d: int
    n_per_axis: int
    extent: float

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.n_per_axis < 8 or not _is_power_of_two(self.n_per_axis):
            raise ValueError(f"n_per_axis must be a power of two >= 8, got {self.n_per_axis}")
        if not (self.extent > 0 and math.isfinite(self.extent)):
            raise ValueError(f"extent must be positive and finite, got {self.extent}")
        object.__setattr__(self, "extent", float(self.extent))

    @classmethod
    def default(cls, d: int) -> "Grid":
        """Return the default grid for dimension ``d``."""
        n, length = DEFAULT_GRIDS[d]
        return cls(d, n, length)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_axis,) * self.d

    @property
    def size(self) -> int:
        return self.n_per_axis**self.d

    @property
    def dx(self) -> float:
        return self.extent / self.n_per_axis

    @property
    def cell(self) -> float:
        """Volume of one grid cell, ``(L/N)^d``."""
        return self.dx**self.d

    @property
    def volume(self) -> float:
        return self.extent**self.d

    @property
    def dxi(self) -> float:
        """Lattice spacing in frequency, ``2 pi / L``."""
        return 2.0 * math.pi / self.extent

    @property
    def nyquist(self) -> float:
        """Largest resolved frequency per axis, ``pi N / L``."""
        return math.pi / self.dx

    @cached_property
    def axis(self) -> np.ndarray:
        """Sample positions along one axis."""
        return -0.5 * self.extent + self.dx * np.arange(self.n_per_axis)

    @cached_property
    def freq_axis(self) -> np.ndarray:
        """Lattice frequencies along one axis in FFT order."""
        return 2.0 * math.pi * sfft.fftfreq(self.n_per_axis, d=self.dx)

    @cached_property
    def mode_axis(self) -> np.ndarray:
        """Integer mode numbers along one axis in FFT order."""
        return np.rint(sfft.fftfreq(self.n_per_axis) * self.n_per_axis).astype(np.int64)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis."""
        return tuple(self._along(self.axis, a) for a in range(self.d))

    def freqs(self) -> tuple[np.ndarray, ...]:
        """Broadcastable frequency arrays, one per axis, FFT order."""
        return tuple(self._along(self.freq_axis, a) for a in range(self.d))

    def _along(self, vec: np.ndarray, axis: int) -> np.ndarray:
        shape = [1] * self.d
        shape[axis] = self.n_per_axis
        return vec.reshape(shape)

    @cached_property
    def r_sq(self) -> np.ndarray:
        """``|x|^2`` on the grid."""
        return sum(c**2 for c in self.coords()) + np.zeros(self.shape)

    @cached_property
    def xi_sq(self) -> np.ndarray:
        """``|xi|^2`` on the frequency lattice."""
        return sum(k**2 for k in self.freqs()) + np.zeros(self.shape)

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(self.xi_sq)

    @cached_property
    def parity(self) -> np.ndarray:
        """``(-1)^(m_1 + ... + m_d)``; converts FFT phases to box-centred phases."""
        sign = 1 - 2 * (self.mode_axis % 2)
        out = np.ones(self.shape)
        for a in range(self.d):
            out = out * self._along(sign, a)
        return out

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on modes with some index equal to ``-N/2``."""
        edge = self.mode_axis == -(self.n_per_axis // 2)
        out = np.zeros(self.shape, dtype=bool)
        for a in range(self.d):
            out = out | self._along(edge, a)
        return out

    def dyadic_range(self, cutoff: Cutoff = "sharp") -> tuple[int, int]:
        """Inclusive range of resolvable Littlewood-Paley indices.

        For sharp cutoffs every lattice point ``xi != 0`` lies in exactly one
        annulus ``[2^k, 2^(k+1))`` with ``k`` in the range.  For smooth cutoffs
        the bumps indexed by the range sum to one on every nonzero lattice point.
        """
        lo = math.floor(math.log2(self.dxi))
        top = float(self.xi_abs.max())
        hi = math.floor(math.log2(top)) if cutoff == "sharp" else math.ceil(math.log2(top))
        return lo, hi

    def to_json(self) -> dict:
        return {"d": self.d, "n_per_axis": self.n_per_axis, "extent": self.extent}

    @classmethod
    def from_json(cls, data: dict) -> "Grid":
        return cls(int(data["d"]), int(data["n_per_axis"]), float(data["extent"]))


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples of a function on a :class:`Grid`.

    Parameters
    ----------
    grid : Grid
    values : ndarray
        Array of shape ``grid.shape``.  Stored as a read-only complex copy.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape:
            if vals.size == self.grid.size:
                vals = vals.reshape(self.grid.shape)
            else:
                raise InvalidFieldError(
                    f"expected {self.grid.size} samples for grid {self.grid.shape}, got {vals.size}"
                )
        if not np.all(np.isfinite(vals)):
            raise InvalidFieldError("field contains non-finite samples")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[..., np.ndarray]) -> "Field":
        """Sample ``func(*coords)`` on the grid."""
        return cls(grid, np.broadcast_to(func(*grid.coords()), grid.shape))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    def _check(self, other: "Field") -> None:
        if other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c: complex) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def conj(self) -> "Field":
        return Field(self.grid, np.conj(self.values))

    def mean(self) -> complex:
        return complex(self.values.mean())

    def norm(self) -> float:
        """L² norm."""
        return lebesgue_norm(self, 2)

    def allclose(self, other: "Field", atol: float = 0.0, rtol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.values, other.values, atol=atol, rtol=rtol))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients on the lattice of a :class:`Grid`, in FFT order."""

    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=np.complex128)
        if coeffs.shape != self.grid.shape:
            raise InvalidFieldError(f"expected coefficient array of shape {self.grid.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise InvalidFieldError("coefficients contain non-finite values")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)

    def l2_norm(self) -> float:
        """L² norm of the underlying field via Plancherel, ``(L^-d sum |F|^2)^(1/2)``."""
        return math.sqrt(float(np.sum(np.abs(self.coefficients) ** 2)) / self.grid.volume)

    def at(self, *modes: int) -> complex:
        """Coefficient at integer mode numbers ``(m_1, ..., m_d)``."""
        n = self.grid.n_per_axis
        return complex(self.coefficients[tuple(m % n for m in modes)])


def _fftn(values: np.ndarray, axes=None) -> np.ndarray:
    return sfft.fftn(values, axes=axes)


def _ifftn(values: np.ndarray, axes=None) -> np.ndarray:
    return sfft.ifftn(values, axes=axes)


def fourier_forward(f: Field) -> SpectralField:
    """Forward transform, a Riemann sum for ``integral exp(-i x.xi) f(x) dx``.

    Examples
    --------
    >>> g = Grid(1, 16, 2 * np.pi)
    >>> F = fourier_forward(Field.from_function(g, lambda x: np.exp(3j * x)))
    >>> round(abs(F.at(3)), 12) == round(2 * np.pi, 12)
    True
    """
    grid = f.grid
    return SpectralField(grid, grid.cell * grid.parity * _fftn(f.values))


def fourier_inverse(F: SpectralField, grid: Grid | None = None) -> Field:
    """Inverse transform with the ``(2 pi)^-d`` normalisation.

    Raises
    ------
    GridMismatchError
        If ``grid`` is given and differs from ``F.grid``.
    """
    if grid is not None and grid != F.grid:
        raise GridMismatchError("coefficients belong to a different grid")
    g = F.grid
    return Field(g, _ifftn(F.coefficients * g.parity) / g.cell)


def apply_multiplier(f: Field, symbol: np.ndarray) -> Field:
    """Multiply the spectrum of ``f`` by ``symbol`` (FFT order)."""
    return Field(f.grid, _ifftn(_fftn(f.values) * symbol))


def fractional_derivative(
    f: Field, s: float, zero_mode: Literal["raise", "drop"] = "raise"
) -> Field:
    """Apply ``D^s``, the multiplier ``|xi|^s``.

    Parameters
    ----------
    f : Field
    s : float
        Order; negative values integrate.
    zero_mode : {"raise", "drop"}
        For ``s < 0`` the symbol is singular at the origin.  With ``"raise"``
        a field whose mean exceeds ``1e-12`` of its L² norm is rejected; with
        ``"drop"`` the zero mode is discarded unconditionally.

    Raises
    ------
    SingularZeroModeError
        If ``s < 0``, ``zero_mode="raise"`` and ``f`` has nonzero mean.
    """
    if s == 0:
        return f
    grid = f.grid
    coeffs = _fftn(f.values)
    if s < 0 and zero_mode == "raise":
        # L² norm of the mean component against the full L² norm
        mean_norm = abs(coeffs.flat[0]) / grid.size * math.sqrt(grid.volume)
        total = f.norm()
        if mean_norm > 1e-12 * total:
            raise SingularZeroModeError(
                f"D^{s} needs a zero-mean field; mean component is {mean_norm / total:.2e} of the L2 norm"
            )
    symbol = np.zeros(grid.shape)
    nz = grid.xi_abs > 0
    symbol[nz] = grid.xi_abs[nz] ** s
    return Field(grid, _ifftn(coeffs * symbol))


def _smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity transition equal to 0 for ``x <= 0`` and 1 for ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def smooth_cutoff(rho: np.ndarray) -> np.ndarray:
    """Radial cutoff equal to 1 on ``[0, 1]`` and 0 on ``[2, inf)``."""
    return 1.0 - _smooth_step(np.asarray(rho) - 1.0)


def lp_symbol(grid: Grid, k: int, cutoff: Cutoff = "sharp") -> np.ndarray:
    """Fourier symbol of the ``k``-th Littlewood-Paley projection.

    Sharp pieces use the half-open annulus ``2^k <= |xi| < 2^(k+1)``.  Smooth
    pieces use ``chi(|xi|/2^k) - chi(|xi|/2^(k-1))``, which is supported in
    ``[2^(k-1), 2^(k+1)]`` and telescopes to one.
    """
    rho = grid.xi_abs
    if cutoff == "sharp":
        return ((rho >= 2.0**k) & (rho < 2.0 ** (k + 1))).astype(float)
    if cutoff == "smooth":
        return smooth_cutoff(rho / 2.0**k) - smooth_cutoff(rho / 2.0 ** (k - 1))
    raise ValueError(f"unknown cutoff {cutoff!r}")


def low_symbol(grid: Grid, cutoff: Cutoff = "sharp") -> np.ndarray:
    """Symbol of the low-frequency remainder below the resolvable pieces."""
    k_min, _ = grid.dyadic_range(cutoff)
    rho = grid.xi_abs
    if cutoff == "sharp":
        return (rho < 2.0**k_min).astype(float)
    return smooth_cutoff(rho / 2.0 ** (k_min - 1))


def lp_project(f: Field, k: int, cutoff: Cutoff = "sharp") -> Field:
    """Littlewood-Paley piece ``f_k``.

    Outside the resolvable range the piece is empty; a
    :class:`~strichartz_lab.errors.ResolutionWarning` is emitted and a zero
    field returned.
    """
    k_min, k_max = f.grid.dyadic_range(cutoff)
    if not k_min <= k <= k_max:
        warnings.warn(
            f"dyadic index {k} outside resolvable range [{k_min}, {k_max}]",
            ResolutionWarning,
            stacklevel=2,
        )
        return Field.zeros(f.grid)
    return apply_multiplier(f, lp_symbol(f.grid, k, cutoff))


def lp_pieces(f: Field, cutoff: Cutoff = "sharp") -> tuple[dict[int, Field], Field]:
    """All resolvable pieces plus the low remainder; they sum to ``f``."""
    grid = f.grid
    coeffs = _fftn(f.values)
    k_min, k_max = grid.dyadic_range(cutoff)
    pieces = {
        k: Field(grid, _ifftn(coeffs * lp_symbol(grid, k, cutoff))) for k in range(k_min, k_max + 1)
    }
    low = Field(grid, _ifftn(coeffs * low_symbol(grid, cutoff)))
    return pieces, low


def lp_piece_norms(f: Field, cutoff: Cutoff = "sharp") -> dict[int, float]:
    """L² norms of the pieces, computed on the spectral side."""
    grid = f.grid
    power = np.abs(_fftn(f.values)) ** 2 * grid.cell / grid.size
    k_min, k_max = grid.dyadic_range(cutoff)
    return {
        k: math.sqrt(float(np.sum(power * lp_symbol(grid, k, cutoff) ** 2)))
        for k in range(k_min, k_max + 1)
    }


def besov_sup_norm(f: Field, cutoff: Cutoff = "sharp") -> float:
    """``sup_k ||f_k||_{L^2}`` over the resolvable dyadic range."""
    return max(lp_piece_norms(f, cutoff).values())


def lebesgue_norm(f: Field | np.ndarray, r: float, cell: float | None = None) -> float:
    """Discrete ``L^r`` norm ``(cell * sum |f|^r)^(1/r)``; ``r = inf`` gives the peak.

    Parameters
    ----------
    f : Field or ndarray
        A bare array requires ``cell``.
    r : float
        Exponent, at least 1.

    Raises
    ------
    InvalidExponentError
        If ``r < 1``.
    """
    if not r >= 1:
        raise InvalidExponentError(f"Lebesgue exponent must be >= 1, got {r}")
    if isinstance(f, Field):
        values, cell = f.values, f.grid.cell
    else:
        values = np.asarray(f)
    mag = np.abs(values)
    if math.isinf(r):
        return float(mag.max()) if mag.size else 0.0
    return float((cell * np.sum(mag**r)) ** (1.0 / r))


def sobolev_norm(f: Field, s: float) -> float:
    """Homogeneous Sobolev norm ``||D^s f||_{L^2}``."""
    if s < 0:
        raise InvalidExponentError(f"sobolev_norm needs s >= 0, got {s}")
    return lebesgue_norm(fractional_derivative(f, s), 2)


def inner(f: Field, g: Field) -> complex:
    """L² inner product ``integral f conj(g) dx``."""
    f._check(g)
    return complex(f.grid.cell * np.vdot(g.values, f.values))
