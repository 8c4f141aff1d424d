"""Projected gradient ascent for Strichartz and Sobolev-Strichartz quotients.

The objective is the tail-corrected mixed norm ``Phi(u)`` of
:func:`~strichartz_lab.norms.evaluate_quotient`.  Its tail terms depend only
on the edge slices, so they fold into augmented quadrature weights and
``Phi^q = sum_i w_i A_i^q`` holds exactly with ``A_i`` the inner ``L^r``
norm at node ``t_i``.  Differentiating gives

    grad Phi = Phi^(1-q) sum_i w_i A_i^(q-r) exp(-i t_i Laplacian)(|U_i|^(r-2) U_i),

which is the L² gradient.  For ``s > 0`` the search runs on the ``Hdot^s``
sphere and uses the Riesz representative ``D^{-2s} grad Phi``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy import integrate, special

from .errors import (
    AliasingError,
    ConfigurationError,
    DegenerateInputError,
    DivergentIntegralError,
    ResolutionWarning,
    SearchAbortedError,
    UnsupportedExponentError,
)
from .norms import QuotientSpec, decay_rate, parse_exponent
from .propagator import DEFAULT_WINDOWS, TimeGrid, propagate, propagator_symbol
from .spectral import Field, Grid, fractional_derivative, inner
from .symmetry import GroupElement, apply, modulate, translate

#: Nodes per unit of the sinh variable in search windows.
SEARCH_NODES_PER_UNIT = 16

ARMIJO = 1e-4
SHRINK = 0.5
MAX_BACKTRACKS = 30
STALL_WINDOW = 10


def search_time_grid(d: int, s: float = 0.0) -> TimeGrid:
    """Default window for ``d`` with sinh-clustered nodes.

    Uniform nodes with spacing ``dt`` cannot tell ``exp(-i t |xi|^2)`` from 1
    when ``|xi|^2 dt`` is a multiple of ``2 pi``, and an ascent will pile mass
    onto such frequencies.  Non-uniform nodes break that resonance.  Searches
    with ``s > 0`` still find quadrature-favoured iterates at moderate
    density and get three times as many nodes.
    """
    half, _ = DEFAULT_WINDOWS[d]
    per_unit = SEARCH_NODES_PER_UNIT if s == 0 else 3 * SEARCH_NODES_PER_UNIT
    return TimeGrid.multiscale(-half, half, 0.25, 0.0, per_unit)


def refine(tg: TimeGrid, factor: int = 4) -> TimeGrid:
    """Same window and rule with ``factor`` times as many intervals."""
    return TimeGrid(tg.t_min, tg.t_max, factor * (tg.n_t - 1) + 1, tg.rule, tg.scale, tg.center)


def _weights(tg: TimeGrid, q: float, alpha: float) -> np.ndarray:
    """Quadrature weights with the dispersive tail folded into the edge nodes."""
    w = np.array(tg.weights, dtype=float)
    if q * alpha <= 1.0:
        raise DivergentIntegralError(f"tail integral diverges for q*alpha = {q * alpha:g}")
    left, right = tg.edge_distances
    w[0] += left / (q * alpha - 1.0)
    w[-1] += right / (q * alpha - 1.0)
    return w


@dataclass(frozen=True)
class _Evaluation:
    """Objective value with the slice data needed for its gradient."""

    phi: float
    slice_norms: np.ndarray
    denominator: float


class Objective:
    """``u -> ||exp(itL) u||_{L^q L^r} / ||u||`` with an exact gradient.

    Parameters
    ----------
    spec : QuotientSpec
    chunk : int
        Time slices evolved per block.
    """

    def __init__(self, spec: QuotientSpec, chunk: int = 32):
        q, r = float(parse_exponent(spec.pair.q)), float(parse_exponent(spec.pair.r))
        if math.isinf(q) or math.isinf(r):
            raise UnsupportedExponentError("gradients need finite exponents")
        if r < 2:
            raise UnsupportedExponentError(f"gradients need r >= 2, got {r}")
        self.spec, self.q, self.r, self.chunk = spec, q, r, chunk
        self.tg = spec.time_grid
        self.weights = _weights(self.tg, q, decay_rate(spec.d, r))

    def norm(self, u: Field) -> float:
        """Denominator: L² for ``s = 0``, ``Hdot^s`` otherwise."""
        s = self.spec.s
        return u.norm() if s == 0 else fractional_derivative(u, s).norm()

    def inner(self, a: Field, b: Field) -> complex:
        s = self.spec.s
        if s == 0:
            return inner(a, b)
        return inner(fractional_derivative(a, s), fractional_derivative(b, s))

    def _blocks(self, u: Field):
        grid = u.grid
        spec = sfft.fftn(u.values)
        axes = tuple(range(1, grid.d + 1))
        times = self.tg.times
        for start in range(0, times.size, self.chunk):
            sl = slice(start, min(start + self.chunk, times.size))
            sym = propagator_symbol(grid, times[sl])
            yield sl, sym, sfft.ifftn(spec * sym, axes=axes)

    def evaluate(self, u: Field) -> _Evaluation:
        grid = u.grid
        axes = tuple(range(1, grid.d + 1))
        a = np.empty(self.tg.n_t)
        for sl, _, block in self._blocks(u):
            a[sl] = (grid.cell * np.sum(np.abs(block) ** self.r, axis=axes)) ** (1.0 / self.r)
        phi = float(np.sum(self.weights * a**self.q)) ** (1.0 / self.q)
        return _Evaluation(phi, a, self.norm(u))

    def value(self, u: Field) -> float:
        ev = self.evaluate(u)
        if ev.denominator == 0:
            raise DegenerateInputError("quotient of a zero field")
        return ev.phi / ev.denominator

    def gradient(self, u: Field) -> tuple[Field, _Evaluation]:
        """Gradient of the numerator ``Phi`` in the search geometry."""
        grid = u.grid
        axes = tuple(range(1, grid.d + 1))
        q, r = self.q, self.r
        ev = self.evaluate(u)
        if ev.phi == 0:
            raise DegenerateInputError("gradient of a zero field")
        coef = self.weights * np.where(ev.slice_norms > 0, ev.slice_norms, 1.0) ** (q - r)
        coef = coef * ev.phi ** (1.0 - q)
        total = np.zeros(grid.shape, dtype=np.complex128)
        for sl, sym, block in self._blocks(u):
            mag = np.abs(block)
            # |U|^(r-2) U, with the removable singularity at U = 0 set to 0
            with np.errstate(divide="ignore", invalid="ignore"):
                dens = np.where(mag > 0, mag ** (r - 2.0), 0.0) * block
            shape = (-1,) + (1,) * grid.d
            spec = sfft.fftn(dens, axes=axes) * np.conj(sym)
            total += np.sum(coef[sl].reshape(shape) * spec, axis=0)
        g = Field(grid, sfft.ifftn(total))
        s = self.spec.s
        if s:
            g = fractional_derivative(g, -2.0 * s, zero_mode="drop")
        return g, ev


def functional_gradient(u0: Field, spec: QuotientSpec) -> Field:
    """Gradient of ``Phi(u) = ||exp(itL) u||_{L^q L^r}`` (tail-corrected).

    For ``s = 0`` this is the L² gradient, so ``Re <grad, v>`` is the
    directional derivative along ``v``.  For ``s > 0`` it is the ``Hdot^s``
    Riesz representative ``D^{-2s}`` of the L² gradient.  In both cases
    ``<grad, u0>`` in the matching inner product equals ``Phi(u0)``.

    Raises
    ------
    DegenerateInputError
        If ``u0`` is zero.
    UnsupportedExponentError
        If ``q`` or ``r`` is infinite or ``r < 2``.
    """
    return Objective(spec).gradient(u0)[0]


# renormalisation

def _moments(u: Field) -> tuple[np.ndarray, np.ndarray, float]:
    """Mass centroid, mean frequency and mean squared distance from the centroid."""
    grid = u.grid
    dens = np.abs(u.values) ** 2
    mass = dens.sum()
    centre = np.array([(dens * c).sum() / mass for c in grid.coords()])
    spec = np.abs(sfft.fftn(u.values)) ** 2
    freq = np.array([(spec * k).sum() / spec.sum() for k in grid.freqs()])
    spread = sum(float((dens * (c - m) ** 2).sum() / mass) for c, m in zip(grid.coords(), centre))
    return centre, freq, spread


@dataclass(frozen=True)
class Renormalization:
    """Symmetry moves applied after one accepted step."""

    iteration: int
    frequency: tuple[float, ...]
    time: float
    shift: tuple[float, ...]
    dilation: float
    phase: float
    kept: bool

    def to_json(self) -> dict:
        return {"iteration": self.iteration, "frequency": list(self.frequency), "time": self.time,
                "shift": list(self.shift), "dilation": self.dilation, "phase": self.phase,
                "kept": self.kept}


def renormalize(u: Field, slice_norms: np.ndarray, tg: TimeGrid, weights: np.ndarray,
                q: float, target_spread: float, modulation: bool = True
                ) -> tuple[Field, dict]:
    """Recentre ``u`` along the symmetry orbit.

    Removes the mean frequency, moves the time at which the evolution
    concentrates to ``t = 0``, moves the mass centroid to the origin,
    dilates to the target second moment and removes the mean phase.  A
    dilation that would alias is skipped.
    """
    d = u.grid.d
    moves = {"frequency": (0.0,) * d, "time": 0.0, "shift": (0.0,) * d, "dilation": 1.0, "phase": 0.0}
    if modulation:
        _, freq, _ = _moments(u)
        u = modulate(u, -freq)
        moves["frequency"] = tuple(float(v) for v in -freq)
    mass_t = weights * slice_norms**q
    t_c = float(np.sum(mass_t * tg.times) / np.sum(mass_t))
    u = propagate(u, t_c)
    moves["time"] = t_c
    centre, _, spread = _moments(u)
    u = translate(u, -centre)
    moves["shift"] = tuple(float(v) for v in -centre)
    h = math.sqrt(target_spread / spread)
    try:
        u = apply(GroupElement(0.0, h, (0.0,) * d, (0.0,) * d, 0.0), u)
        moves["dilation"] = h
    except AliasingError:
        pass
    theta = float(np.angle(np.sum(np.abs(u.values) * u.values)))
    u = u * np.exp(-1j * theta)
    moves["phase"] = -theta
    return u, moves


# search

@dataclass(frozen=True)
class SearchConfig:
    """Parameters of :func:`maximize`.

    Attributes
    ----------
    spec : QuotientSpec
    max_iters : int
    initial_step : float
        First trial step of every line search.
    tol : float
        Stop when the quotient gains less than ``tol`` over
        ``STALL_WINDOW`` accepted iterations.
    renormalize : bool
    seed : int
        Seed of :func:`random_initial`.
    grid : Grid, optional
        Defaults to the default grid for ``d``.
    """

    spec: QuotientSpec
    max_iters: int = 200
    initial_step: float = 1.0
    tol: float = 1e-7
    renormalize: bool = True
    seed: int = 0
    grid: Grid | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigurationError("tolerance must be positive")
        if self.max_iters < 0:
            raise ConfigurationError("max_iters must be >= 0")
        if not self.initial_step > 0:
            raise ConfigurationError("initial step must be positive")
        if self.grid is None:
            object.__setattr__(self, "grid", Grid.default(self.spec.d))
        if self.grid.d != self.spec.d:
            raise ConfigurationError("grid and spec dimensions differ")

    @classmethod
    def make(cls, q, r, d: int, s: float | None = 0.0, **kwargs) -> "SearchConfig":
        """Config on the search window of :func:`search_time_grid`."""
        spec = QuotientSpec.make(q, r, d, s)
        return cls(QuotientSpec(spec.pair, spec.s, search_time_grid(d, spec.s)), **kwargs)

    def to_json(self) -> dict:
        return {"spec": self.spec.to_json(), "max_iters": self.max_iters,
                "initial_step": self.initial_step, "tol": self.tol,
                "renormalize": self.renormalize, "seed": self.seed, "grid": self.grid.to_json()}


@dataclass
class MaximizerReport:
    """Trajectory and outcome of a search.

    Attributes
    ----------
    field : Field
        Final iterate, on the unit sphere.
    trajectory : list of float
        Quotient after each accepted step, starting with the initial value.
    residuals : list of float
        ``||grad - <grad, u> u|| / Phi`` at each recorded iterate.
    steps : list of float
        Accepted step sizes.
    backtracks : list of int
        Line-search halvings per iteration.
    renormalizations : list of Renormalization
    reference : float or None
        Gaussian reference value, when it exists.
    validated : float or None
        Quotient of the final iterate on a window with four times as many
        nodes; a large gap to ``best`` means the search exploited quadrature.
    """

    field: Field
    trajectory: list[float]
    residuals: list[float]
    steps: list[float] = field(default_factory=list)
    backtracks: list[int] = field(default_factory=list)
    renormalizations: list[Renormalization] = field(default_factory=list)
    reference: float | None = None
    validated: float | None = None
    config: dict | None = None
    stop_reason: str = ""

    @property
    def best(self) -> float:
        return max(self.trajectory)

    @property
    def iters(self) -> int:
        return len(self.trajectory) - 1

    @property
    def gap(self) -> float | None:
        return None if self.reference is None else self.reference - self.best

    @property
    def quadrature_gap(self) -> float | None:
        """Relative change of the final quotient under node refinement."""
        if self.validated is None:
            return None
        return abs(self.validated - self.trajectory[-1]) / self.trajectory[-1]

    def to_json(self) -> dict:
        return {"quotient_estimate": self.best, "reference": self.reference, "gap": self.gap,
                "iters": self.iters, "validated": self.validated,
                "quadrature_gap": self.quadrature_gap, "trajectory": self.trajectory, "residuals": self.residuals,
                "steps": self.steps, "backtracks": self.backtracks, "stop_reason": self.stop_reason,
                "renormalizations": [r.to_json() for r in self.renormalizations],
                "config": self.config}


def random_initial(grid: Grid, seed: int, bumps: int = 4, spread: float = 1.5,
                   band: float = 1.5) -> Field:
    """Random smooth seed: a few Gaussian bumps with random centres, widths, frequencies and phases."""
    rng = np.random.default_rng(seed)
    coords = grid.coords()
    values = np.zeros(grid.shape, dtype=np.complex128)
    for _ in range(bumps):
        c = rng.uniform(-spread, spread, grid.d)
        w = rng.uniform(0.4, 1.2)
        k = rng.uniform(-band, band, grid.d)
        amp = rng.normal() + 1j * rng.normal()
        r2 = sum((x - ci) ** 2 for x, ci in zip(coords, c))
        ph = sum(x * ki for x, ki in zip(coords, k))
        values = values + amp * np.exp(-r2 / w**2 + 1j * ph)
    return Field(grid, values)


def _tangent(obj: Objective, g: Field, u: Field) -> Field:
    return g - u * obj.inner(g, u).real


def maximize(cfg: SearchConfig, initial: Field | None = None,
             validate: bool = True) -> MaximizerReport:
    """Projected gradient ascent with Armijo backtracking.

    Each accepted step is followed by symmetry renormalisation; a
    renormalised iterate replaces the raw one only if it does not lower the
    quotient, so the trajectory stays non-decreasing.

    Parameters
    ----------
    cfg : SearchConfig
    initial : Field, optional
        Starting field; defaults to :func:`random_initial` with ``cfg.seed``.
    validate : bool
        Re-evaluate the final iterate on a refined window.

    Raises
    ------
    SearchAbortedError
        If the objective becomes non-finite.

    Warns
    -----
    ResolutionWarning
        If ``spec.window`` has uniform nodes.
    """
    obj = Objective(cfg.spec)
    d = cfg.spec.d
    if cfg.spec.time_grid.rule == "simpson":
        warnings.warn("uniform time nodes alias fast frequencies; use SearchConfig.make",
                      ResolutionWarning, stacklevel=2)
    u = random_initial(cfg.grid, cfg.seed) if initial is None else initial
    if initial is not None and initial.grid != cfg.grid:
        raise ConfigurationError("initial field is not on the configured grid")
    if cfg.spec.s:
        # the zero mode is invisible to the Hdot^s norm but not to the numerator
        u = Field(u.grid, u.values - u.values.mean())
    nrm = obj.norm(u)
    if nrm == 0:
        raise DegenerateInputError("initial field is zero")
    u = u * (1.0 / nrm)
    target = d / 4.0
    grad, ev = obj.gradient(u)
    phi = ev.phi
    if not math.isfinite(phi):
        raise SearchAbortedError("initial quotient is not finite", [phi])
    trajectory = [phi]
    tangent = _tangent(obj, grad, u)
    residuals = [obj.norm(tangent) / phi]
    steps, backtracks, renorms = [], [], []
    reason = "max_iters"
    for it in range(cfg.max_iters):
        slope = obj.norm(tangent) ** 2
        tau = cfg.initial_step
        for k in range(MAX_BACKTRACKS):
            trial = u + tangent * tau
            trial = trial * (1.0 / obj.norm(trial))
            val = obj.evaluate(trial).phi
            if not math.isfinite(val):
                raise SearchAbortedError(f"quotient became {val} at iteration {it}", trajectory)
            if val >= phi + ARMIJO * tau * slope:
                break
            tau *= SHRINK
        else:
            reason = "line search failed"
            break
        backtracks.append(k)
        steps.append(tau)
        u, phi = trial, val
        if cfg.renormalize:
            ev = obj.evaluate(u)
            cand, moves = renormalize(u, ev.slice_norms, obj.tg, obj.weights, obj.q, target,
                                      modulation=cfg.spec.s == 0)
            cand = cand * (1.0 / obj.norm(cand))
            cand_val = obj.evaluate(cand).phi
            kept = cand_val >= phi
            if kept:
                u, phi = cand, cand_val
            renorms.append(Renormalization(it, moves["frequency"], moves["time"], moves["shift"],
                                           moves["dilation"], moves["phase"], kept))
        trajectory.append(phi)
        grad, _ = obj.gradient(u)
        tangent = _tangent(obj, grad, u)
        residuals.append(obj.norm(tangent) / phi)
        if len(trajectory) > STALL_WINDOW and trajectory[-1] - trajectory[-1 - STALL_WINDOW] < cfg.tol:
            reason = "converged"
            break
    try:
        ref = gaussian_reference(d, cfg.spec.pair.q, cfg.spec.pair.r, cfg.spec.s)
    except DivergentIntegralError:
        ref = None
    fine = Objective(QuotientSpec(cfg.spec.pair, cfg.spec.s, refine(cfg.spec.time_grid)))
    validated = fine.value(u) if validate else None
    return MaximizerReport(u, trajectory, residuals, steps, backtracks, renorms, ref,
                           validated, cfg.to_json(), reason)


def gaussian_reference(d: int, q, r, s: float = 0.0) -> float:
    """Quotient of ``exp(-|x|^2)`` over the whole line, by quadrature of its closed form.

    The evolution satisfies ``|u(t, x)|^2 = (1+16t^2)^(-d/2) exp(-2|x|^2/(1+16t^2))``,
    so the inner ``L^r`` norm is explicit and only the time integral is
    computed numerically.

    Raises
    ------
    DivergentIntegralError
        If the time integral diverges.
    """
    q, r = float(parse_exponent(q)), float(parse_exponent(r))
    if math.isinf(r):
        def inner_norm(t):
            return (1 + 16 * t * t) ** (-d / 4)
    else:
        def inner_norm(t):
            m = 1 + 16 * t * t
            return m ** (-d / 4) * (math.pi * m / r) ** (d / (2 * r))
    if math.isinf(q):
        numerator = inner_norm(0.0)
    else:
        beta = q * d * (0.25 - (0.0 if math.isinf(r) else 0.5 / r))
        if beta <= 0.5:
            raise DivergentIntegralError(f"time integral diverges for ({q}, {r}) in d={d}")
        val, _ = integrate.quad(lambda t: inner_norm(t) ** q, 0.0, np.inf, epsabs=0, epsrel=1e-13, limit=400)
        numerator = (2.0 * val) ** (1.0 / q)
    if s == 0:
        denominator = (math.pi / 2) ** (d / 4)
    else:
        # ||D^s e^{-|x|^2}||^2 = (2 pi)^-d pi^d |S^{d-1}| 2^(s+d/2-1) Gamma(s+d/2)
        sphere = 2 * math.pi ** (d / 2) / special.gamma(d / 2)
        power = (2 * math.pi) ** (-d) * math.pi**d * sphere * 2 ** (s + d / 2 - 1) * special.gamma(s + d / 2)
        denominator = math.sqrt(power)
    return numerator / denominator
