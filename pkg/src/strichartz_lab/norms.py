"""Admissibility, mixed space-time norms and Strichartz quotients."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateInputError,
    EndpointRefusedError,
    GridMismatchError,
    InvalidExponentError,
    RegimeWarning,
    UnsupportedExponentError,
)
from .propagator import CompositeTimeGrid, SpaceTimeField, TimeGrid, stream_evolution
from .spectral import Field, lebesgue_norm, sobolev_norm

Exponent = Fraction | float

ADMISSIBILITY_TOL = 1e-12


class PairClass(str, enum.Enum):
    NON_ENDPOINT = "non-endpoint admissible"
    ENDPOINT = "endpoint"
    INADMISSIBLE = "inadmissible"


def parse_exponent(value) -> Exponent:
    """Read an exponent given as a number, ``"p/q"`` string or ``"inf"``.

    Integers and fraction strings become exact :class:`~fractions.Fraction`
    values; floats are kept as floats and infinity as ``math.inf``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "oo"):
            return math.inf
        try:
            return Fraction(text)
        except ValueError as exc:
            raise InvalidExponentError(f"cannot parse exponent {value!r}") from exc
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, Real):
        return float(value)
    raise InvalidExponentError(f"cannot parse exponent {value!r}")


def _reciprocal(x: Exponent) -> Exponent:
    if isinstance(x, float) and math.isinf(x):
        return Fraction(0)
    return 1 / x


def _scaling_gap(q: Exponent, r: Exponent, d: int) -> Exponent:
    """``d/2 - 2/q - d/r``; exact when both exponents are rational."""
    return Fraction(d, 2) - 2 * _reciprocal(q) - d * _reciprocal(r)


def classify_pair(q, r, d: int) -> PairClass:
    """Classify ``(q, r)`` for the Schrödinger equation in dimension ``d``.

    Examples
    --------
    >>> classify_pair(6, 6, 1).value
    'non-endpoint admissible'
    >>> classify_pair(2, "inf", 2).value
    'inadmissible'
    """
    q, r = parse_exponent(q), parse_exponent(r)
    if q < 2 or r < 2:
        return PairClass.INADMISSIBLE
    if abs(float(_scaling_gap(q, r, d))) > ADMISSIBILITY_TOL:
        return PairClass.INADMISSIBLE
    if d == 2 and q == 2 and math.isinf(r):
        return PairClass.INADMISSIBLE
    if d >= 3 and q == 2:
        return PairClass.ENDPOINT
    if d == 1 and q == 4 and math.isinf(r):
        return PairClass.ENDPOINT
    return PairClass.NON_ENDPOINT


def sobolev_exponent(q, r, d: int) -> float:
    """``s(q, r) = d/2 - 2/q - d/r``.

    Non-positive values lie outside the Sobolev-Strichartz regime and emit a
    :class:`~strichartz_lab.errors.RegimeWarning`.

    Raises
    ------
    UnsupportedExponentError
        If either exponent is infinite or below 2.
    """
    q, r = parse_exponent(q), parse_exponent(r)
    if math.isinf(q) or math.isinf(r):
        raise UnsupportedExponentError("sobolev_exponent needs finite q and r")
    if q < 2 or r < 2:
        raise UnsupportedExponentError("sobolev_exponent needs q, r >= 2")
    s = float(_scaling_gap(q, r, d))
    if s <= 0:
        warnings.warn(f"s(q,r) = {s} is outside the Sobolev-Strichartz regime", RegimeWarning,
                      stacklevel=2)
    return s


@dataclass(frozen=True)
class ExponentPair:
    """Exponents ``(q, r)`` in dimension ``d`` with their admissibility class."""

    q: Exponent
    r: Exponent
    d: int

    def __post_init__(self):
        object.__setattr__(self, "q", parse_exponent(self.q))
        object.__setattr__(self, "r", parse_exponent(self.r))

    @property
    def cls(self) -> PairClass:
        return classify_pair(self.q, self.r, self.d)

    @property
    def qf(self) -> float:
        return float(self.q)

    @property
    def rf(self) -> float:
        return float(self.r)

    def label(self) -> str:
        return f"({self.q},{self.r})"


@dataclass(frozen=True)
class QuotientSpec:
    """Exponents, regularity and time window of a Strichartz-type quotient.

    ``s = 0`` requires a non-endpoint admissible pair.  ``s > 0`` requires
    finite ``q, r >= 2`` with ``s = s(q, r)``.
    """

    pair: ExponentPair
    s: float = 0.0
    time_grid: TimeGrid | None = None

    def __post_init__(self):
        d = self.pair.d
        if self.time_grid is None:
            object.__setattr__(self, "time_grid", TimeGrid.default(d))
        if self.s < 0:
            raise ConfigurationError(f"regularity must be >= 0, got {self.s}")
        cls = self.pair.cls
        if self.s == 0:
            if cls is PairClass.ENDPOINT:
                raise EndpointRefusedError(
                    f"{self.pair.label()} is the endpoint pair in d={d}; windowed quotients "
                    "are only supported for non-endpoint admissible pairs"
                )
            if cls is PairClass.INADMISSIBLE:
                raise EndpointRefusedError(f"{self.pair.label()} is not admissible in d={d}")
        else:
            q, r = self.pair.q, self.pair.r
            if math.isinf(q) or math.isinf(r) or q < 2 or r < 2:
                raise ConfigurationError("s > 0 needs finite q, r >= 2")
            expected = float(_scaling_gap(q, r, d))
            if abs(expected - self.s) > ADMISSIBILITY_TOL:
                raise ConfigurationError(
                    f"s = {self.s} does not match s(q,r) = {expected} for {self.pair.label()}"
                )

    @classmethod
    def make(cls, q, r, d: int, s: float | None = 0.0, time_grid: TimeGrid | None = None):
        """Build a spec; ``s=None`` takes ``s(q, r)``."""
        pair = ExponentPair(q, r, d)
        if s is None:
            s = max(0.0, float(_scaling_gap(pair.q, pair.r, d)))
        return cls(pair, s, time_grid)

    @property
    def d(self) -> int:
        return self.pair.d

    def to_json(self) -> dict:
        return {"q": str(self.pair.q), "r": str(self.pair.r), "d": self.d, "s": self.s,
                "window": self.time_grid.to_json()}


@dataclass(frozen=True)
class NormResult:
    """A windowed mixed norm and its whole-line estimate.

    Attributes
    ----------
    value : float
        Norm over the quadrature window.
    tail_bound : float
        Estimated contribution from outside the window, ``corrected - value``.
    corrected : float
        Window plus dispersive tails.
    """

    value: float
    tail_bound: float
    corrected: float


def decay_rate(d: int, r: float, waves: int = 1) -> float:
    """Exponent ``alpha`` in ``||prod of waves||_{L^r} ~ |t|^-alpha`` for free waves."""
    if waves == 0:
        return 0.0
    inv_r = 0.0 if math.isinf(r) else 1.0 / r
    return d * (0.5 * waves - inv_r)


def mixed_norm(
    slice_norms: np.ndarray, tg: TimeGrid | CompositeTimeGrid, q: float, alpha: float | None = None
) -> NormResult:
    """Outer ``L^q_t`` quadrature of per-slice norms with dispersive tail estimate.

    Parameters
    ----------
    slice_norms : ndarray
        Inner norms ``A(t_i)`` on the nodes of ``tg``.
    q : float
        Outer exponent, at least 1 or infinite.
    alpha : float, optional
        Decay rate of ``A`` beyond the window.  ``None`` disables the tail.

    Notes
    -----
    Beyond an edge at distance ``T`` from the clustering point the slice norm is
    modelled as ``A(T) (T/|t|)^alpha``, so each side adds
    ``A(T)^q T / (q alpha - 1)``.  When ``q alpha <= 1`` the tail diverges and
    is reported as infinite.
    """
    a = np.asarray(slice_norms, dtype=float)
    if not q >= 1:
        raise InvalidExponentError(f"time exponent must be >= 1, got {q}")
    if math.isinf(q):
        peak = float(a.max()) if a.size else 0.0
        return NormResult(peak, 0.0, peak)
    power = float(np.sum(tg.weights * a**q))
    value = power ** (1.0 / q)
    if alpha is None or value == 0.0:
        return NormResult(value, 0.0, value)
    tail = 0.0
    for dist, amp in zip(tg.edge_distances, (a[0], a[-1])):
        if amp == 0.0 or dist == 0.0:
            continue
        if q * alpha <= 1.0:
            return NormResult(value, math.inf, math.inf)
        tail += float(amp) ** q * dist / (q * alpha - 1.0)
    corrected = (power + tail) ** (1.0 / q)
    return NormResult(value, corrected - value, corrected)


def _inner_norms(values: np.ndarray, cell: float, r: float, d: int) -> np.ndarray:
    axes = tuple(range(1, d + 1))
    mag = np.abs(values)
    if math.isinf(r):
        return mag.max(axis=axes)
    return (cell * np.sum(mag**r, axis=axes)) ** (1.0 / r)


def spacetime_norm(u: SpaceTimeField, q, r) -> NormResult:
    """``L^q_t L^r_x`` norm of a sampled space-time field.

    Inner norms are taken per slice, the outer integral uses the time grid's
    quadrature, and a dispersive tail estimate is attached.

    Raises
    ------
    InvalidExponentError
        If ``q`` or ``r`` is below 1.
    """
    q, r = float(parse_exponent(q)), float(parse_exponent(r))
    if not (q >= 1 and r >= 1):
        raise InvalidExponentError(f"exponents must be >= 1, got ({q}, {r})")
    a = _inner_norms(u.values, u.grid.cell, r, u.grid.d)
    alpha = decay_rate(u.grid.d, r, u.waves) if u.waves else None
    return mixed_norm(a, u.time_grid, q, alpha)


def evolved_slice_norms(u0: Field, tg: TimeGrid, r: float) -> np.ndarray:
    """``||exp(i t Laplacian) u0||_{L^r}`` at every node, streamed in blocks."""
    out = np.empty(tg.n_t)
    for sl, block in stream_evolution(u0, tg.times):
        out[sl] = _inner_norms(block, u0.grid.cell, r, u0.grid.d)
    return out


def evolved_norm(u0: Field, tg: TimeGrid, q, r) -> NormResult:
    """``||exp(i t Laplacian) u0||_{L^q_t L^r_x}`` without materialising the evolution."""
    q, r = float(parse_exponent(q)), float(parse_exponent(r))
    if not (q >= 1 and r >= 1):
        raise InvalidExponentError(f"exponents must be >= 1, got ({q}, {r})")
    a = evolved_slice_norms(u0, tg, r)
    return mixed_norm(a, tg, q, decay_rate(u0.grid.d, r))


@dataclass(frozen=True)
class QuotientResult:
    quotient: float
    numerator: NormResult
    denominator: float
    spec: QuotientSpec = field(repr=False)

    def to_json(self, grid=None) -> dict:
        out = {
            "q": str(self.spec.pair.q),
            "r": str(self.spec.pair.r),
            "d": self.spec.d,
            "s": self.spec.s,
            "value": self.quotient,
            "windowed_value": self.numerator.value / self.denominator,
            "tail_bound": self.numerator.tail_bound / self.denominator,
            "window": self.spec.time_grid.to_json(),
        }
        if grid is not None:
            out["grid"] = grid.to_json()
        return out


def evaluate_quotient(u0: Field, spec: QuotientSpec) -> QuotientResult:
    """Tail-corrected quotient with its ingredients.

    Raises
    ------
    DegenerateInputError
        If the denominator norm vanishes.
    GridMismatchError
        If the field's dimension differs from the spec's.
    """
    if u0.grid.d != spec.d:
        raise GridMismatchError(f"field is {u0.grid.d}-dimensional, spec is for d={spec.d}")
    denom = lebesgue_norm(u0, 2) if spec.s == 0 else sobolev_norm(u0, spec.s)
    if denom == 0:
        raise DegenerateInputError("quotient of a zero field")
    num = evolved_norm(u0, spec.time_grid, spec.pair.q, spec.pair.r)
    return QuotientResult(num.corrected / denom, num, denom, spec)


def strichartz_quotient(u0: Field, spec: QuotientSpec) -> float:
    """``||exp(i t Laplacian) u0||_{L^q L^r} / ||u0||``, the norm being L² or ``Hdot^s``."""
    return evaluate_quotient(u0, spec).quotient
