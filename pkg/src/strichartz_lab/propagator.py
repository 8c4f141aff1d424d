"""Free Schrödinger evolution as an exact spectral multiplier.

The flow ``exp(i t Laplacian)`` multiplies each Fourier coefficient by
``exp(-i t |xi|^2)``.  There is no time stepping: time grids exist only to
integrate space-time norms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator, Literal, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, GridMismatchError, InvalidFieldError
from .fieldio import read_field, write_field
from .spectral import Field, Grid

Rule = Literal["simpson", "sinh"]

#: Default symmetric windows ``d -> (half_width, n_t)``.
DEFAULT_WINDOWS = {1: (8.0, 257), 2: (4.0, 129), 3: (1.0, 65)}

#: Complex samples per streamed chunk.
CHUNK_ELEMENTS = 1 << 22


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights for ``n`` (odd) equispaced nodes."""
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


@dataclass(frozen=True)
class TimeGrid:
    """Quadrature nodes and weights on ``[t_min, t_max]``.

    Parameters
    ----------
    t_min, t_max : float
        Window endpoints.
    n_t : int
        Number of nodes; odd and at least 3.
    rule : {"simpson", "sinh"}
        ``"simpson"`` is composite Simpson on uniform nodes.  ``"sinh"``
        applies Simpson in ``tau`` after the substitution
        ``t = center + scale * sinh(tau)``, which clusters nodes near
        ``center`` and suits integrands with several time scales.
    scale : float
        Inner time scale of the ``"sinh"`` rule.
    center : float, optional
        Clustering point; defaults to the window midpoint.
    """

    t_min: float
    t_max: float
    n_t: int
    rule: Rule = "simpson"
    scale: float = 1.0
    center: float | None = None

    def __post_init__(self):
        if not self.t_min < self.t_max:
            raise ConfigurationError(f"need t_min < t_max, got [{self.t_min}, {self.t_max}]")
        if self.rule not in ("simpson", "sinh"):
            raise ConfigurationError(f"unknown quadrature rule {self.rule!r}")
        if self.n_t < 3 or self.n_t % 2 == 0:
            raise ConfigurationError(f"{self.rule} rule needs an odd n_t >= 3, got {self.n_t}")
        if self.rule == "sinh" and not self.scale > 0:
            raise ConfigurationError("sinh rule needs a positive scale")
        if self.center is None:
            object.__setattr__(self, "center", 0.5 * (self.t_min + self.t_max))
        elif not self.t_min <= self.center <= self.t_max:
            raise ConfigurationError("center must lie inside the window")

    @classmethod
    def default(cls, d: int) -> "TimeGrid":
        half, n_t = DEFAULT_WINDOWS[d]
        return cls(-half, half, n_t)

    @classmethod
    def multiscale(cls, t_min: float, t_max: float, scale: float, center: float = 0.0,
                   per_unit: int = 16) -> "TimeGrid":
        """Sinh-mapped grid resolving ``scale`` near ``center`` with ``per_unit`` nodes per unit tau."""
        span = math.asinh((t_max - center) / scale) - math.asinh((t_min - center) / scale)
        n_t = 2 * max(1, math.ceil(span * per_unit / 2)) + 1
        return cls(t_min, t_max, n_t, "sinh", scale, center)

    @cached_property
    def _nodes(self) -> tuple[np.ndarray, np.ndarray]:
        if self.rule == "simpson":
            t = np.linspace(self.t_min, self.t_max, self.n_t)
            return t, simpson_weights(self.n_t, t[1] - t[0])
        c, a = self.center, self.scale
        tau = np.linspace(math.asinh((self.t_min - c) / a), math.asinh((self.t_max - c) / a), self.n_t)
        w = simpson_weights(self.n_t, tau[1] - tau[0]) * a * np.cosh(tau)
        t = c + a * np.sinh(tau)
        t[0], t[-1] = self.t_min, self.t_max
        return t, w

    @property
    def times(self) -> np.ndarray:
        return self._nodes[0]

    @property
    def weights(self) -> np.ndarray:
        return self._nodes[1]

    @property
    def length(self) -> float:
        return self.t_max - self.t_min

    @property
    def edge_distances(self) -> tuple[float, float]:
        """Distances from the clustering point to each edge, used by tail estimates."""
        return self.center - self.t_min, self.t_max - self.center

    def to_json(self) -> dict:
        return {"t_min": self.t_min, "t_max": self.t_max, "n_t": self.n_t, "rule": self.rule,
                "scale": self.scale, "center": self.center}

    @classmethod
    def from_json(cls, data: dict) -> "TimeGrid":
        return cls(float(data["t_min"]), float(data["t_max"]), int(data["n_t"]),
                   data.get("rule", "simpson"), float(data.get("scale", 1.0)), data.get("center"))


@dataclass(frozen=True, eq=False)
class CompositeTimeGrid:
    """Concatenation of time grids on adjacent segments.

    Each segment keeps its own rule, so a window containing several focal
    times can cluster nodes around each of them.
    """

    segments: tuple[TimeGrid, ...]

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=lambda g: g.t_min))
        for left, right in zip(segs, segs[1:]):
            if abs(left.t_max - right.t_min) > 1e-12 * max(1.0, abs(left.t_max)):
                raise ConfigurationError("composite segments must be adjacent")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def around(cls, centers: Sequence[float], scales: Sequence[float], half_width: float,
               per_unit: int = 32) -> "CompositeTimeGrid":
        """Sinh-clustered segments around each centre, split at midpoints."""
        order = np.argsort(centers)
        cs = [float(centers[i]) for i in order]
        ss = [float(scales[i]) for i in order]
        cuts = [cs[0] - half_width] + [0.5 * (a + b) for a, b in zip(cs, cs[1:])] + [cs[-1] + half_width]
        segs = tuple(TimeGrid.multiscale(lo, hi, sc, c, per_unit)
                     for lo, hi, c, sc in zip(cuts, cuts[1:], cs, ss))
        return cls(segs)

    @property
    def t_min(self) -> float:
        return self.segments[0].t_min

    @property
    def t_max(self) -> float:
        return self.segments[-1].t_max

    @cached_property
    def times(self) -> np.ndarray:
        return np.concatenate([g.times for g in self.segments])

    @cached_property
    def weights(self) -> np.ndarray:
        return np.concatenate([g.weights for g in self.segments])

    @property
    def n_t(self) -> int:
        return self.times.size

    @property
    def edge_distances(self) -> tuple[float, float]:
        return self.segments[0].edge_distances[0], self.segments[-1].edge_distances[1]

    def to_json(self) -> dict:
        return {"rule": "composite", "segments": [g.to_json() for g in self.segments]}


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Samples of a wave on every node of a :class:`TimeGrid`.

    Parameters
    ----------
    time_grid : TimeGrid
    grid : Grid
    values : ndarray
        Shape ``(n_t, *grid.shape)``.
    waves : int
        Number of free waves multiplied together to form the samples; sets
        the dispersive decay rate used by tail estimates.
    """

    time_grid: TimeGrid
    grid: Grid
    values: np.ndarray
    waves: int = 1

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != (self.time_grid.n_t, *self.grid.shape):
            raise InvalidFieldError(
                f"expected shape {(self.time_grid.n_t, *self.grid.shape)}, got {vals.shape}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def slices(self) -> tuple[Field, ...]:
        return tuple(Field(self.grid, v) for v in self.values)

    def slice(self, i: int) -> Field:
        return Field(self.grid, self.values[i])

    def __mul__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        """Pointwise product of two space-time fields."""
        if other.grid != self.grid or other.time_grid != self.time_grid:
            raise GridMismatchError("space-time fields sampled differently")
        return SpaceTimeField(self.time_grid, self.grid, self.values * other.values,
                              self.waves + other.waves)


def propagator_symbol(grid: Grid, t: float | np.ndarray) -> np.ndarray:
    """``exp(-i t |xi|^2)``, broadcast over a leading time axis if ``t`` is an array."""
    t = np.asarray(t, dtype=float)
    return np.exp(-1j * t.reshape(t.shape + (1,) * grid.d) * grid.xi_sq)


def propagate(u0: Field, t: float) -> Field:
    """Exact free evolution ``exp(i t Laplacian) u0``.

    Examples
    --------
    >>> g = Grid.default(1)
    >>> u0 = Field.from_function(g, lambda x: np.exp(-x**2))
    >>> propagate(u0, 0.0) is u0
    True
    """
    if t == 0:
        return u0
    if not math.isfinite(t):
        raise ConfigurationError(f"propagation time must be finite, got {t}")
    spec = sfft.fftn(u0.values)
    return Field(u0.grid, sfft.ifftn(spec * propagator_symbol(u0.grid, t)))


def mass_defect(u0: Field, u: Field) -> float:
    """Relative change of the squared L² norm."""
    m0 = u0.norm() ** 2
    return abs(u.norm() ** 2 - m0) / m0


def stream_evolution(
    u0: Field, times: Sequence[float] | np.ndarray, chunk: int | None = None
) -> Iterator[tuple[slice, np.ndarray]]:
    """Yield ``(index_slice, block)`` with ``block[i] = propagate(u0, times[i])``.

    Slices are produced in blocks sized to bound memory, so long windows on
    fine grids never need to be materialised at once.
    """
    times = np.asarray(times, dtype=float)
    grid = u0.grid
    spec = sfft.fftn(u0.values)
    if chunk is None:
        chunk = max(1, CHUNK_ELEMENTS // grid.size)
    axes = tuple(range(1, grid.d + 1))
    for start in range(0, times.size, chunk):
        sl = slice(start, min(start + chunk, times.size))
        block = sfft.ifftn(spec * propagator_symbol(grid, times[sl]), axes=axes)
        yield sl, block


def evolve(u0: Field, tg: TimeGrid) -> SpaceTimeField:
    """Materialise ``exp(i t Laplacian) u0`` at every node of ``tg``."""
    out = np.empty((tg.n_t, *u0.grid.shape), dtype=np.complex128)
    for sl, block in stream_evolution(u0, tg.times):
        out[sl] = block
    return SpaceTimeField(tg, u0.grid, out)


def save_spacetime(path: str | Path, u: SpaceTimeField) -> None:
    """Write one FLD1 file per slice plus ``manifest.json``."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    names = []
    for i, sl in enumerate(u.slices):
        name = f"slice_{i:05d}.fld"
        write_field(root / name, sl)
        names.append(name)
    manifest = {
        "times": u.time_grid.times.tolist(),
        "rule": u.time_grid.rule,
        "time_grid": u.time_grid.to_json(),
        "waves": u.waves,
        "slices": names,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_spacetime(path: str | Path) -> SpaceTimeField:
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    tg = TimeGrid.from_json(manifest["time_grid"])
    fields = [read_field(root / name) for name in manifest["slices"]]
    grid = fields[0].grid
    if any(f.grid != grid for f in fields):
        raise GridMismatchError("slices on different grids")
    return SpaceTimeField(tg, grid, np.stack([f.values for f in fields]), manifest.get("waves", 1))
