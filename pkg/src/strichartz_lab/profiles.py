"""Profile families, their orthogonality diagnostics, and frequency elimination.

A :class:`ProfileFamily` holds profiles ``phi^j`` with parameter sequences
``Gamma_n^j`` and an optional error schedule.  At index ``n`` it synthesises

    u_n = sum_j g_n^j(phi^j) + e_n                     (s = 0)
    u_n = sum_j U_{-t_n^j} [h^{-(d/2-s)} phi^j((. - x_n^j)/h)] + e_n   (s > 0)

and measures the quantities that the orthogonality of the parameters is
supposed to drive to zero.

Space-time quantities have two backends.  ``"exact"`` evaluates Gaussian
profiles through closed-form whole-space evolution with composite
sinh-clustered time quadrature; it is the default whenever every profile is
a :class:`~strichartz_lab.gaussian.GaussianProfile` and the exponents allow
closed forms.  ``"grid"`` streams the spectral evolution on an adaptive
periodic grid and works for arbitrary sampled profiles, at the price of
periodic wrap-around once a wave has spread over the whole box.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Literal, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    EndpointRefusedError,
    UndeterminedCaseError,
    WrongCaseError,
)
from .gaussian import (
    GaussianProfile,
    GaussianWave,
    inner_product,
    lebesgue_power,
    product_power,
    sum_power,
)
from .norms import PairClass, classify_pair, decay_rate, evolved_norm, mixed_norm, parse_exponent
from .propagator import CompositeTimeGrid, TimeGrid, propagate, stream_evolution
from .spectral import Field, Grid, fractional_derivative, inner, lebesgue_norm, sobolev_norm
from .symmetry import (
    GroupElement,
    ParameterSequence,
    ParamEntry,
    apply,
    modulate,
    orthogonality_statistic,
)

Profile = GaussianProfile | Field
Backend = Literal["auto", "exact", "grid"]

#: Largest grid the adaptive synthesis will build, points per axis.
MAX_POINTS = 1 << 21
#: Half-width of exact-backend windows in units of the slowest dispersion time.
EXACT_WINDOW = 1e6
#: Nodes per unit of the sinh variable.
EXACT_NODES_PER_UNIT = 32
GRID_NODES_PER_UNIT = 16
#: Half-width of grid-backend windows in units of the slowest dispersion time.
GRID_WINDOW = 32.0


def _next_pow2(x: float) -> int:
    return max(8, 1 << max(0, math.ceil(math.log2(max(x, 1.0)))))


def wave_grid(waves: Sequence[GaussianWave], half_window: float = 0.0) -> Grid:
    """Grid holding ``waves`` over ``|t| <= half_window``.

    The box contains each wave's essential support at ``t = 0`` and at the
    window edges; the spacing resolves the widest band.
    """
    reach, band = 0.0, 0.0
    for w in waves:
        for t in {0.0, -half_window, half_window}:
            reach = max(reach, float(np.abs(w.centroid(t)).max()) + 6.0 * w.spread(t))
        band = max(band, float(np.abs(w.frequency).max()) + 6.0 * w.spectral_width)
    extent = 2.0 * reach
    points = _next_pow2(extent * band / math.pi)
    if points > MAX_POINTS:
        raise ConfigurationError(f"waves need {points} points per axis; use the exact backend")
    return Grid(waves[0].d, points, extent)


@dataclass(frozen=True)
class ErrorSchedule:
    """Error terms ``e_n = lambda_n * profile`` with prescribed Strichartz norm.

    ``lambda_n`` is chosen so that ``||exp(i t Laplacian) e_n||`` in
    ``L^{2+4/d}_{t,x}`` equals ``amplitude * rate**n``.
    """

    profile: GaussianProfile
    amplitude: float = 0.1
    rate: float = 0.5

    def target(self, n: int) -> float:
        return self.amplitude * self.rate**n

    def unit_norm(self) -> float:
        """Whole-line ``L^{2+4/d}_{t,x}`` norm of the evolved profile."""
        d = self.profile.d
        p = 2.0 + 4.0 / d
        wave = self.profile.wave()
        quad = _quadrature([wave], EXACT_WINDOW)
        a = lebesgue_power(wave, quad.times, p) ** (1.0 / p)
        return mixed_norm(a, quad, p, decay_rate(d, p)).corrected

    def coefficient(self, n: int) -> float:
        return self.target(n) / self.unit_norm()

    def to_json(self) -> dict:
        return {"kind": "gaussian", "rate": self.rate, "amplitude": self.amplitude,
                "profile": self.profile.to_json()}

    @classmethod
    def from_json(cls, data: dict | None, d: int) -> "ErrorSchedule | None":
        if not data or data.get("kind", "none") == "none":
            return None
        prof = GaussianProfile.from_json(data.get("profile", {"kind": "gaussian"}), d)
        return cls(prof, float(data.get("amplitude", 0.1)), float(data.get("rate", 0.5)))


@dataclass(frozen=True, eq=False)
class ProfileFamily:
    """Profiles, parameter sequences and error schedule.

    Parameters
    ----------
    profiles : sequence of GaussianProfile or Field
    params : sequence of ParameterSequence
        One per profile, all of the same length.
    s : float
        Regularity; ``s > 0`` families must be modulation-free.
    error : ErrorSchedule, optional
    grid : Grid, optional
        Base grid for sampled profiles; defaults to the grid of the first
        sampled profile or the default grid for ``d``.
    require_orthogonal : bool
        Reject families whose parameter pairs are not orthogonal at this depth.
    """

    profiles: tuple[Profile, ...]
    params: tuple[ParameterSequence, ...]
    s: float = 0.0
    error: ErrorSchedule | None = None
    grid: Grid | None = None
    require_orthogonal: bool = True

    def __post_init__(self):
        profiles, params = tuple(self.profiles), tuple(self.params)
        object.__setattr__(self, "profiles", profiles)
        object.__setattr__(self, "params", params)
        if not profiles or len(profiles) != len(params):
            raise ConfigurationError("need one parameter sequence per profile")
        if len({len(p) for p in params}) != 1:
            raise ConfigurationError("parameter sequences must have equal length")
        dims = {p.d if isinstance(p, GaussianProfile) else p.grid.d for p in profiles}
        dims |= {p.d for p in params}
        if len(dims) != 1:
            raise ConfigurationError("profiles and parameters disagree on the dimension")
        sampled = [p for p in profiles if isinstance(p, Field)]
        if len({p.grid for p in sampled}) > 1:
            raise ConfigurationError("sampled profiles must share one grid")
        if self.grid is None:
            object.__setattr__(self, "grid", sampled[0].grid if sampled else Grid.default(dims.pop()))
        if self.s < 0:
            raise ConfigurationError("regularity must be >= 0")
        if self.s > 0 and any(np.any(p.xi != 0) for p in params):
            raise ConfigurationError(
                "s > 0 families are modulation-free; route modulated sequences through "
                "absorb_modulation or escaping_frequency_decay first"
            )
        if self.require_orthogonal:
            for (a, pa), (b, pb) in combinations(enumerate(params), 2):
                if not orthogonality_statistic(pa, pb).orthogonal:
                    raise ConfigurationError(f"parameter sequences {a} and {b} are not orthogonal")

    @property
    def d(self) -> int:
        return self.params[0].d

    @property
    def depth(self) -> int:
        return len(self.params[0])

    @property
    def count(self) -> int:
        return len(self.profiles)

    @property
    def exponent(self) -> float:
        """Dilation exponent ``d/2 - s``."""
        return self.d / 2 - self.s

    @property
    def is_gaussian(self) -> bool:
        return all(isinstance(p, GaussianProfile) for p in self.profiles)

    def _n_terms(self, N: int | None) -> int:
        N = self.count if N is None else N
        if not 1 <= N <= self.count:
            raise ConfigurationError(f"N must lie in [1, {self.count}], got {N}")
        return N

    def _entry(self, n: int, j: int) -> ParamEntry:
        if not 0 <= n < self.depth:
            raise ConfigurationError(f"index n={n} outside depth {self.depth}")
        return self.params[j][n]

    # closed-form waves

    def wave(self, n: int, j: int) -> GaussianWave:
        """Closed-form ``g_n^j(phi^j)`` for a Gaussian profile."""
        prof = self.profiles[j]
        if not isinstance(prof, GaussianProfile):
            raise ConfigurationError("closed-form waves need Gaussian profiles")
        e = self._entry(n, j)
        return prof.wave().act(0.0, e.h, e.xi, e.x, e.t, exponent=self.exponent)

    def error_wave(self, n: int) -> GaussianWave | None:
        if self.error is None:
            return None
        w = self.error.profile.wave()
        return GaussianWave(w.amp * self.error.coefficient(n), w.a, w.c, w.k, w.t_f)

    # sampled fields

    def synthesis_grid(self, n: int, N: int | None = None, half_window: float = 0.0) -> Grid:
        """Grid holding every term at ``n`` over ``|t| <= half_window``.

        Sampled profiles use the base grid.  Gaussian families get a box that
        contains each wave's essential support at ``t = 0`` and at the window
        edges, with spacing resolving the widest band.
        """
        N = self._n_terms(N)
        if not self.is_gaussian:
            return self.grid
        waves = [self.wave(n, j) for j in range(N)]
        if self.error is not None:
            waves.append(self.error_wave(n))
        return wave_grid(waves, half_window)

    def term(self, n: int, j: int, grid: Grid | None = None) -> Field:
        """Sampled ``g_n^j(phi^j)``.

        Gaussian profiles are dilated analytically on the target grid and the
        remaining group action goes through :func:`~strichartz_lab.symmetry.apply`;
        sampled profiles go through ``apply`` entirely.
        """
        grid = self.synthesis_grid(n) if grid is None else grid
        e = self._entry(n, j)
        prof = self.profiles[j]
        if isinstance(prof, GaussianProfile):
            base = prof.sample(grid, h=e.h, exponent=self.exponent)
            return apply(GroupElement(0.0, 1.0, e.xi, e.x, e.t), base)
        out = apply(GroupElement(0.0, e.h, e.xi, e.x, e.t), prof)
        return out * e.h**self.s if self.s else out

    def error_field(self, n: int, grid: Grid) -> Field:
        if self.error is None:
            return Field.zeros(grid)
        return self.error.profile.sample(grid) * self.error.coefficient(n)

    def profile_field(self, j: int, grid: Grid | None = None) -> Field:
        prof = self.profiles[j]
        if isinstance(prof, Field):
            return prof
        if grid is None:
            extent = 2.0 * prof.radius + 2.0
            grid = Grid(self.d, _next_pow2(extent * prof.band / math.pi), extent)
        return prof.sample(grid)

    # serialisation

    def to_json(self) -> dict:
        if not self.is_gaussian:
            raise ConfigurationError("only Gaussian families serialise to JSON")
        return {"s": self.s, "grid": self.grid.to_json(),
                "profiles": [p.to_json() for p in self.profiles],
                "params": [p.to_json() for p in self.params],
                "error": self.error.to_json() if self.error else {"kind": "none"}}

    @classmethod
    def from_json(cls, data: dict) -> "ProfileFamily":
        grid = Grid.from_json(data["grid"])
        d = grid.d
        return cls(tuple(GaussianProfile.from_json(p, d) for p in data["profiles"]),
                   tuple(ParameterSequence.from_json(p) for p in data["params"]),
                   float(data.get("s", 0.0)), ErrorSchedule.from_json(data.get("error"), d), grid)


def stock_family(depth: int = 6, ratio: float = 4.0, modulation: float = 4.0,
                 error: bool = True, s: float = 0.0) -> ProfileFamily:
    """Two unit Gaussians at scales ``1`` and ``ratio**n`` in ``d = 1``.

    The narrow profile carries the modulation ``exp(i modulation x)``, so the
    two profiles are separated in frequency as well as in scale; without it
    the L² overlap of co-centred real Gaussians decays only like
    ``ratio**(-n/2)``.
    """
    n = np.arange(depth)
    narrow = GaussianProfile(1.0, 0.0, modulation)
    wide = GaussianProfile(1.0, 0.0, 0.0)
    params = (ParameterSequence.from_arrays("narrow", np.ones(depth)),
              ParameterSequence.from_arrays("wide", ratio ** n.astype(float)))
    sched = ErrorSchedule(GaussianProfile(1.0, 0.0, -modulation), 0.1, 0.5) if error else None
    return ProfileFamily((narrow, wide), params, s, sched)


def synthesize(pf: ProfileFamily, n: int, N: int | None = None, grid: Grid | None = None) -> Field:
    """``u_n``: the first ``N`` transformed profiles plus the scheduled error."""
    N = pf._n_terms(N)
    grid = pf.synthesis_grid(n, N) if grid is None else grid
    total = pf.error_field(n, grid)
    for j in range(N):
        total = total + pf.term(n, j, grid)
    return total


# space-time evaluation

def _quadrature(waves: Sequence[GaussianWave], window: float,
                per_unit: int = EXACT_NODES_PER_UNIT) -> CompositeTimeGrid:
    """Composite sinh quadrature clustered at every focal time of ``waves``."""
    by_focus: dict[float, float] = {}
    for w in waves:
        by_focus[w.t_f] = min(by_focus.get(w.t_f, math.inf), w.time_scale)
    slowest = max(w.time_scale for w in waves)
    return CompositeTimeGrid.around(list(by_focus), list(by_focus.values()),
                                    window * slowest, per_unit)


def _resolve_backend(pf: ProfileFamily, backend: Backend, exponents: Sequence[float]) -> str:
    if backend != "auto":
        if backend == "exact" and not pf.is_gaussian:
            raise ConfigurationError("the exact backend needs Gaussian profiles")
        return backend
    even = all(float(r).is_integer() and int(r) % 2 == 0 for r in exponents)
    return "exact" if pf.is_gaussian and even else "grid"


@dataclass(frozen=True)
class SpaceTimeSummary:
    """Mixed norms of the superposition, of each term, and of pairwise products."""

    sum_norm: float
    term_norms: tuple[float, ...]
    products: dict[tuple[int, int], float]
    backend: str


def _product_exponents(q: float, r: float) -> tuple[float, float]:
    return q / 2.0, r / 2.0


def _exact_summary(waves: list[GaussianWave], q: float, r: float,
                   pairs: Sequence[tuple[int, int]], product_qr: tuple[float, float] | None,
                   d: int) -> SpaceTimeSummary:
    quad = _quadrature(waves, EXACT_WINDOW)
    t = quad.times
    alpha = decay_rate(d, r)
    a_sum = sum_power(waves, t, r) ** (1.0 / r)
    sum_norm = mixed_norm(a_sum, quad, q, alpha).corrected
    term_norms = tuple(
        mixed_norm(lebesgue_power(w, t, r) ** (1.0 / r), quad, q, alpha).corrected if w.amp else 0.0
        for w in waves
    )
    products = {}
    if pairs:
        pq, pr = product_qr
        for j, k in pairs:
            a = product_power([waves[j], waves[k]], t, pr) ** (1.0 / pr)
            products[(j, k)] = mixed_norm(a, quad, pq, decay_rate(d, pr, 2)).corrected
    return SpaceTimeSummary(sum_norm, term_norms, products, "exact")


def _grid_summary(fields: list[Field], scales: list[float], center: float, q: float, r: float,
                  pairs: Sequence[tuple[int, int]], product_qr: tuple[float, float] | None
                  ) -> SpaceTimeSummary:
    grid = fields[0].grid
    d = grid.d
    half = GRID_WINDOW * max(scales)
    tg = TimeGrid.multiscale(center - half, center + half, min(scales), center, GRID_NODES_PER_UNIT)
    n_t = tg.n_t
    a_sum = np.empty(n_t)
    a_terms = np.empty((len(fields), n_t))
    a_prod = {jk: np.empty(n_t) for jk in pairs}
    streams = [stream_evolution(f, tg.times, chunk=max(1, (1 << 20) // grid.size)) for f in fields]
    axes = tuple(range(1, d + 1))
    cell = grid.cell
    pr = product_qr[1] if product_qr else None
    for blocks in zip(*streams):
        sl = blocks[0][0]
        vals = [b for _, b in blocks]
        total = np.sum(vals, axis=0)
        a_sum[sl] = (cell * np.sum(np.abs(total) ** r, axis=axes)) ** (1.0 / r)
        for j, v in enumerate(vals):
            a_terms[j, sl] = (cell * np.sum(np.abs(v) ** r, axis=axes)) ** (1.0 / r)
        for j, k in pairs:
            a_prod[(j, k)][sl] = (cell * np.sum(np.abs(vals[j] * vals[k]) ** pr, axis=axes)) ** (1.0 / pr)
    alpha = decay_rate(d, r)
    sum_norm = mixed_norm(a_sum, tg, q, alpha).corrected
    term_norms = tuple(mixed_norm(a, tg, q, alpha).corrected for a in a_terms)
    products = {jk: mixed_norm(a, tg, product_qr[0], decay_rate(d, pr, 2)).corrected
                for jk, a in a_prod.items()}
    return SpaceTimeSummary(sum_norm, term_norms, products, "grid")


def _field_time_scale(f: Field) -> float:
    """Dispersion time ``sigma^2`` with ``sigma^2`` the per-axis position variance."""
    dens = np.abs(f.values) ** 2
    mass = dens.sum()
    var = 0.0
    for c in f.grid.coords():
        mean = float((dens * c).sum() / mass)
        var += float((dens * (c - mean) ** 2).sum() / mass)
    return var / f.grid.d


def spacetime_summary(pf: ProfileFamily, n: int, N: int | None, q, r,
                      pairs: Sequence[tuple[int, int]] = (),
                      product_qr: tuple[float, float] | None = None,
                      backend: Backend = "auto") -> SpaceTimeSummary:
    """Mixed norms at index ``n`` of the superposition of the first ``N`` evolved terms."""
    N = pf._n_terms(N)
    q, r = float(parse_exponent(q)), float(parse_exponent(r))
    mode = _resolve_backend(pf, backend, [r])
    if mode == "exact":
        waves = [pf.wave(n, j) for j in range(N)]
        return _exact_summary(waves, q, r, pairs, product_qr, pf.d)
    if pf.is_gaussian:
        waves = [pf.wave(n, j) for j in range(N)]
        scales = [w.time_scale for w in waves]
        center = waves[int(np.argmin(scales))].t_f
        grid = pf.synthesis_grid(n, N, center + GRID_WINDOW * max(scales))
    else:
        grid = pf.grid
    fields = [pf.term(n, j, grid) for j in range(N)]
    if not pf.is_gaussian:
        scales = [_field_time_scale(f) for f in fields]
        center = float(pf.params[int(np.argmin(scales))][n].t)
    return _grid_summary(fields, scales, center, q, r, pairs, product_qr)


def profile_norm(pf: ProfileFamily, j: int, q, r, backend: Backend = "auto") -> float:
    """``||exp(i t Laplacian) phi^j||_{L^q L^r}`` over the whole line (tail-corrected)."""
    q, r = float(parse_exponent(q)), float(parse_exponent(r))
    prof = pf.profiles[j]
    if isinstance(prof, GaussianProfile):
        w = prof.wave()
        if _resolve_backend(pf, backend, [r]) == "exact":
            quad = _quadrature([w], EXACT_WINDOW)
            a = lebesgue_power(w, quad.times, r) ** (1.0 / r)
            return mixed_norm(a, quad, q, decay_rate(pf.d, r)).corrected
        scale, half = w.time_scale, GRID_WINDOW * w.time_scale
        f = w.sample(wave_grid([w], half))
    else:
        f = prof
        scale = _field_time_scale(f)
        half = GRID_WINDOW * scale
    tg = TimeGrid.multiscale(-half, half, scale, 0.0, GRID_NODES_PER_UNIT)
    return evolved_norm(f, tg, q, r).corrected


def cross_term_norm(pf: ProfileFamily, j: int, k: int, n: int, pair=None,
                    diagnostic: bool = False, backend: Backend = "auto") -> float:
    """Mixed norm of the product of the evolved ``j``-th and ``k``-th terms.

    Parameters
    ----------
    pair : (q, r), optional
        Exponents of the product norm.  Defaults to the diagonal
        ``L^{1+2/d}_{t,x}``.  For an interpolated variant pass ``(q/2, r/2)``.
    diagnostic : bool
        Allow ``j == k`` (the non-orthogonal control case).

    Raises
    ------
    ConfigurationError
        If ``j == k`` without ``diagnostic``.
    """
    if j == k and not diagnostic:
        raise ConfigurationError("cross terms need distinct profiles (pass diagnostic=True)")
    if pair is None:
        pair = (1.0 + 2.0 / pf.d, 1.0 + 2.0 / pf.d)
    pq, pr = (float(parse_exponent(v)) for v in pair)
    N = max(j, k) + 1
    summary = spacetime_summary(pf, n, N, 2 * pq, 2 * pr, [(j, k)], (pq, pr), backend)
    return summary.products[(j, k)]


def weak_orthogonality(pf: ProfileFamily, n: int, N: int | None = None
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Inner products among the transformed profiles and against the error.

    Uses the L² inner product for ``s = 0`` and the ``Hdot^s`` one otherwise.

    Returns
    -------
    pairwise : ndarray, shape (N, N)
    against_error : ndarray, shape (N,)
    """
    N = pf._n_terms(N)
    grid = pf.synthesis_grid(n, N)
    terms = [pf.term(n, j, grid) for j in range(N)]
    err = pf.error_field(n, grid)
    if pf.s:
        terms = [fractional_derivative(f, pf.s) for f in terms]
        err = fractional_derivative(err, pf.s)
    pairwise = np.array([[inner(a, b) for b in terms] for a in terms])
    against = np.array([inner(a, err) for a in terms])
    return pairwise, against


def default_power(q: float, r: float, d: int) -> float:
    """Branch exponent: ``2+4/d`` at the diagonal pair, ``r`` if ``q >= r``, else ``q``."""
    sym = 2.0 + 4.0 / d
    if q == r == sym:
        return sym
    return r if q >= r else q


def superposition_defect(pf: ProfileFamily, n: int, N: int | None, q, r, s: float | None = None,
                         p: float | None = None, backend: Backend = "auto") -> float:
    """``||sum_j exp(itL) g_n^j phi^j||^p - sum_j ||exp(itL) phi^j||^p`` in ``L^q_t L^r_x``.

    Raises
    ------
    EndpointRefusedError
        For endpoint or inadmissible pairs when ``s = 0``.
    """
    s = pf.s if s is None else s
    if s != pf.s:
        raise ConfigurationError(f"family has s={pf.s}, requested s={s}")
    qf, rf = float(parse_exponent(q)), float(parse_exponent(r))
    if s == 0 and classify_pair(q, r, pf.d) is not PairClass.NON_ENDPOINT:
        raise EndpointRefusedError(f"({q},{r}) is not non-endpoint admissible in d={pf.d}")
    p = default_power(qf, rf, pf.d) if p is None else p
    N = pf._n_terms(N)
    summary = spacetime_summary(pf, n, N, qf, rf, backend=backend)
    rhs = sum(profile_norm(pf, j, qf, rf, backend) ** p for j in range(N))
    return summary.sum_norm**p - rhs


# reports

def fit_log_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``x``; nan if any ``y <= 0``."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or y.size < 2:
        return math.nan
    return float(np.polyfit(np.asarray(x, dtype=float), np.log(y), 1)[0])


@dataclass
class DecompositionReport:
    """Per-index diagnostics of a profile family.

    Attributes
    ----------
    rows : list of dict
        One record per ``n`` with keys ``field_norm``, ``pythagorean``,
        ``pythagorean_rel``, ``inner_max``, ``inner_error_max``,
        ``cross_terms``, ``error_norm``, ``error_target``, ``superposition``
        and ``invariance``.
    slopes : dict
        Fitted log-slopes over ``n`` of the main series.
    config : dict
    """

    rows: list[dict]
    slopes: dict[str, float]
    config: dict = field(default_factory=dict)

    def series(self, key: str, sub: str | None = None) -> np.ndarray:
        if sub is None:
            return np.array([row[key] for row in self.rows])
        return np.array([row[key][sub] for row in self.rows])

    def to_json(self) -> dict:
        return {"config": self.config, "rows": self.rows, "slopes": self.slopes,
                "note": "certifies synthesized families only, not arbitrary bounded sequences"}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "quantity", "value"])
        for row in self.rows:
            n = row["n"]
            for key, value in row.items():
                if key == "n":
                    continue
                if isinstance(value, dict):
                    for sub, v in value.items():
                        writer.writerow([n, f"{key}:{sub}", repr(float(v))])
                else:
                    writer.writerow([n, key, repr(float(value))])
        return buf.getvalue()


def _hs_norm(f: Field, s: float) -> float:
    return sobolev_norm(f, s) if s else lebesgue_norm(f, 2)


def decomposition_report(pf: ProfileFamily, N: int | None = None,
                         superposition_pairs: Sequence[tuple] | None = None,
                         backend: Backend = "auto") -> DecompositionReport:
    """Evaluate every orthogonality diagnostic at each index of the family.

    Parameters
    ----------
    superposition_pairs : sequence of (q, r), optional
        Exponent pairs for superposition defects; defaults to the diagonal
        pair ``q = r = 2 + 4/d`` for ``s = 0``.
    """
    N = pf._n_terms(N)
    d = pf.d
    sym = 2.0 + 4.0 / d
    if superposition_pairs is None:
        superposition_pairs = [(sym, sym)] if pf.s == 0 else []
    diag = 1.0 + 2.0 / d
    pairs = list(combinations(range(N), 2))
    base_norms = [_hs_norm(pf.profile_field(j), pf.s) for j in range(N)]
    rhs = {}
    for q, r in superposition_pairs:
        qf, rf = float(parse_exponent(q)), float(parse_exponent(r))
        p = default_power(qf, rf, d)
        rhs[(q, r)] = (p, [profile_norm(pf, j, qf, rf, backend) for j in range(N)])
    rows = []
    for n in range(pf.depth):
        grid = pf.synthesis_grid(n, N)
        terms = [pf.term(n, j, grid) for j in range(N)]
        err = pf.error_field(n, grid)
        u = err
        for f in terms:
            u = u + f
        u_norm = _hs_norm(u, pf.s)
        e_norm = _hs_norm(err, pf.s)
        pyth = abs(u_norm**2 - sum(b**2 for b in base_norms) - e_norm**2)
        ip_terms = [fractional_derivative(f, pf.s) for f in terms] if pf.s else terms
        ip_err = fractional_derivative(err, pf.s) if pf.s else err
        inner_max = max((abs(inner(ip_terms[j], ip_terms[k])) for j, k in pairs), default=0.0)
        inner_err = max(abs(inner(f, ip_err)) for f in ip_terms)
        cross = {}
        if pairs:
            summ = spacetime_summary(pf, n, N, 2 * diag, 2 * diag, pairs, (diag, diag), backend)
            cross = {f"{j}-{k}": summ.products[(j, k)] for j, k in pairs}
        sup, inv = {}, {}
        for (q, r), (p, norms) in rhs.items():
            summ = spacetime_summary(pf, n, N, q, r, backend=backend)
            sup[f"{q},{r}"] = summ.sum_norm**p - sum(v**p for v in norms)
            inv[f"{q},{r}"] = max(abs(a - b) for a, b in zip(summ.term_norms, norms))
        row = {"n": n, "field_norm": u_norm, "pythagorean": pyth,
               "pythagorean_rel": pyth / u_norm**2, "inner_max": inner_max,
               "inner_error_max": inner_err, "cross_terms": cross,
               "superposition": sup, "invariance": inv}
        if pf.error is not None:
            row["error_target"] = pf.error.target(n)
            row["error_norm"] = _measured_error_norm(pf, n)
        rows.append(row)
    ns = np.arange(pf.depth)
    slopes = {"pythagorean": fit_log_slope(ns, [r["pythagorean"] for r in rows]),
              "inner_max": fit_log_slope(ns, [r["inner_max"] for r in rows])}
    for key in rows[0]["cross_terms"]:
        slopes[f"cross_terms:{key}"] = fit_log_slope(ns, [r["cross_terms"][key] for r in rows])
    for key in rows[0]["superposition"]:
        slopes[f"superposition:{key}"] = fit_log_slope(ns, [abs(r["superposition"][key]) for r in rows])
    config = {"depth": pf.depth, "N": N, "s": pf.s, "backend": backend,
              "superposition_pairs": [[str(q), str(r)] for q, r in superposition_pairs]}
    if pf.is_gaussian:
        config["family"] = pf.to_json()
    return DecompositionReport(rows, slopes, config)


def _measured_error_norm(pf: ProfileFamily, n: int) -> float:
    """Grid-pipeline ``L^{2+4/d}_{t,x}`` norm of the evolved error term."""
    d = pf.d
    p = 2.0 + 4.0 / d
    w = pf.error.profile.wave()
    half = GRID_WINDOW * w.time_scale
    tg = TimeGrid.multiscale(-half, half, w.time_scale, 0.0, GRID_NODES_PER_UNIT)
    grid = wave_grid([w], half)
    return evolved_norm(pf.error_field(n, grid), tg, p, p).corrected


# frequency elimination

FrequencyCase = Literal["convergent", "escaping", "undetermined"]


def classify_frequency_case(seq: ParameterSequence, tol: float = 0.1) -> FrequencyCase:
    """Route a sequence by the behaviour of ``h_n xi_n``.

    ``"escaping"`` when ``|h_n xi_n|`` increases strictly over the last three
    entries without decelerating; ``"convergent"`` when the last step of
    ``h_n xi_n`` is within ``tol`` of its size (Cauchy test); divergence wins
    ties.
    """
    v = seq.h[:, None] * seq.xi
    mag = np.linalg.norm(v, axis=1)
    steps = np.diff(mag[-3:])
    if np.all(steps > 0) and steps[-1] >= steps[-2]:
        return "escaping"
    last = float(np.linalg.norm(v[-1] - v[-2]))
    if last <= tol * max(float(mag[-1]), 1.0):
        return "convergent"
    return "undetermined"


def extrapolate_limit(v: np.ndarray) -> np.ndarray:
    """Aitken extrapolation of a vector sequence from its last three terms."""
    a, b, c = v[-3], v[-2], v[-1]
    out = np.array(c, dtype=float)
    denom = c - 2 * b + a
    ok = np.abs(denom) > 1e-14 * np.maximum(np.abs(c), 1.0)
    out[ok] = c[ok] - (c[ok] - b[ok]) ** 2 / denom[ok]
    return out


@dataclass(frozen=True)
class AbsorptionResult:
    """Output of :func:`absorb_modulation`.

    Attributes
    ----------
    phi_new : Field
        ``D^{-s}(exp(i x.xi_star) psi)``.
    seq_new : ParameterSequence
        Modulation-free parameters with shifted centres ``x_n + 2 t_n xi_n``.
    phases : ndarray
        Per-index phases ``x_n.xi_n + t_n |xi_n|^2`` produced by the rewrite.
    xi_star : ndarray
    replacement_error : ndarray
    """

    phi_new: Field
    seq_new: ParameterSequence
    phases: np.ndarray
    xi_star: np.ndarray
    replacement_error: np.ndarray
    s: float = 0.0


def absorb_modulation(psi: Field, seq: ParameterSequence, s: float = 0.0) -> AbsorptionResult:
    """Fold a convergent modulation ``h_n xi_n -> xi_star`` into the profile.

    Raises
    ------
    WrongCaseError
        If ``h_n xi_n`` escapes; use :func:`escaping_frequency_decay`.
    UndeterminedCaseError
        If the sequence is neither convergent nor escaping at this depth.
    """
    case = classify_frequency_case(seq)
    if case == "escaping":
        raise WrongCaseError("h_n xi_n diverges; use escaping_frequency_decay")
    if case == "undetermined":
        raise UndeterminedCaseError("h_n xi_n neither converges nor escapes at this depth")
    v = seq.h[:, None] * seq.xi
    xi_star = extrapolate_limit(v)
    twisted = modulate(psi, xi_star)
    phi_new = fractional_derivative(twisted, -s, zero_mode="drop") if s else twisted
    err = np.array([(modulate(psi, vn) - twisted).norm() for vn in v])
    phases = np.einsum("ij,ij->i", seq.x, seq.xi) + seq.t * np.sum(seq.xi**2, axis=1)
    new_x = seq.x + 2.0 * seq.t[:, None] * seq.xi
    seq_new = ParameterSequence(
        f"{seq.label}*",
        tuple(ParamEntry(e.h, (0.0,) * seq.d, tuple(x), e.t) for e, x in zip(seq.entries, new_x)),
    )
    return AbsorptionResult(phi_new, seq_new, phases, xi_star, err, s)


def original_term(psi: Field, seq: ParameterSequence, n: int, s: float = 0.0) -> Field:
    """``D^s`` of the ``n``-th synthesised term ``D^{-s} g_n(psi)`` (zero mode dropped)."""
    g = apply(seq[n].element(), psi)
    if not s:
        return g
    return fractional_derivative(fractional_derivative(g, -s, zero_mode="drop"), s)


def rebuilt_term(res: AbsorptionResult, n: int) -> Field:
    """``D^s`` of the term rebuilt from ``(phi_new, seq_new)`` with its phase."""
    e = res.seq_new[n]
    u = apply(e.element(res.phases[n]), res.phi_new)
    if res.s:
        u = fractional_derivative(u * e.h**res.s, res.s)
    return u


@dataclass(frozen=True)
class DecayResult:
    frequencies: np.ndarray
    norms: np.ndarray
    slope: float
    s: float

    @property
    def relative_slope_error(self) -> float:
        return abs(self.slope + self.s) / self.s


def _decay_grid(psi: GaussianProfile, e: ParamEntry, half_window: float) -> Grid:
    wave = psi.wave().act(0.0, e.h, e.xi, e.x, e.t)
    reach = 0.0
    for t in (0.0, -half_window, half_window):
        reach = max(reach, 6.0 * wave.spread(t))
    extent = 2.0 * (reach + float(np.abs(e.x).max()) + 6.0 * e.h * psi.width)
    band = float(np.abs(wave.frequency).max()) + 6.0 * wave.spectral_width
    return Grid(psi.d, _next_pow2(extent * band / math.pi), extent)


def escaping_frequency_decay(psi: GaussianProfile | Field, s: float, seq: ParameterSequence,
                             q, r, time_grid: TimeGrid | None = None) -> DecayResult:
    """Norms ``||D^{-s} exp(itL) g_n(psi)||_{L^q L^r}`` and their log-log slope in ``|h_n xi_n|``.

    Gaussian ``psi`` is sampled on a grid sized per index; a sampled ``psi``
    uses its own grid.  The time window defaults to the standard window
    scaled by ``h_n^2``.

    Raises
    ------
    ConfigurationError
        If ``s <= 0``.
    WrongCaseError
        If ``|h_n xi_n|`` does not escape.
    """
    if not s > 0:
        raise ConfigurationError("escaping-frequency decay needs s > 0")
    if classify_frequency_case(seq) != "escaping":
        raise WrongCaseError("|h_n xi_n| does not escape; use absorb_modulation")
    freqs = np.linalg.norm(seq.h[:, None] * seq.xi, axis=1)
    base = TimeGrid.default(seq.d) if time_grid is None else time_grid
    norms = []
    for e in seq.entries:
        tg = TimeGrid(base.t_min * e.h**2 + e.t, base.t_max * e.h**2 + e.t, base.n_t,
                      base.rule, base.scale * e.h**2, base.center * e.h**2 + e.t)
        if isinstance(psi, GaussianProfile):
            grid = _decay_grid(psi, e, max(abs(tg.t_min), abs(tg.t_max)))
            g = psi.wave().act(0.0, e.h, e.xi, e.x, e.t).sample(grid)
        else:
            g = apply(e.element(), psi)
        dg = fractional_derivative(g, -s, zero_mode="drop")
        norms.append(evolved_norm(dg, tg, q, r).corrected)
    norms = np.array(norms)
    slope = float(np.polyfit(np.log(freqs), np.log(norms), 1)[0])
    return DecayResult(freqs, norms, slope, s)
