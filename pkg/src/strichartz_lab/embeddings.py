"""Improved Sobolev embeddings and the Littlewood-Paley square function.

For ``0 < s < d/2`` and ``1/r + s/d = 1/2`` two refinements of the Sobolev
embedding ``Hdot^s -> L^r`` are measured as ratios ``LHS / RHS``:

* the Besov form, ``||f||_r <~ ||D^s f||_2^(1-2s/d) sup_k ||(D^s f)_k||_2^(2s/d)``;
* the Lebesgue form, ``||f||_r <~ ||D^s f||_2^(1-2s/d) sup_k ||f_k||_r^(2s/d)``.

Implicit constants are never asserted; ratios are checked for finiteness,
dyadic-scaling invariance and regression brackets.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import special

from .errors import ConfigurationError, DegenerateInputError, InvalidExponentError
from .spectral import (
    Cutoff,
    Field,
    Grid,
    fractional_derivative,
    lebesgue_norm,
    lp_piece_norms,
    lp_pieces,
    lp_symbol,
)

EXPONENT_TOL = 1e-12

#: Regression brackets ``(min, max)`` of the mixed ensemble at ``d = 1,
#: s = 1/4, r = 4``, 100 samples, seed 0, default grid.
PINNED_BRACKETS = {
    "keraani": (0.2859, 1.2393),
    "killip_visan": (0.5536, 1.6995),
    "square_r": (1.0760, 1.9075),
}


@dataclass(frozen=True)
class EmbeddingSpec:
    """Exponents of an improved Sobolev embedding.

    Parameters
    ----------
    s : float
        Regularity, ``0 < s < d/2``.
    d : int
    r : float, optional
        Lebesgue exponent; derived from ``1/r = 1/2 - s/d`` when omitted.
    cutoff : {"sharp", "smooth"}
        Littlewood-Paley convention for the Besov and piece factors.
    """

    s: float
    d: int = 1
    r: float | None = None
    cutoff: Cutoff = "sharp"

    def __post_init__(self):
        if not 0 < self.s < self.d / 2:
            raise ConfigurationError(f"need 0 < s < d/2, got s={self.s}, d={self.d}")
        if self.r is None:
            object.__setattr__(self, "r", 1.0 / (0.5 - self.s / self.d))
        if not 1 < self.r < math.inf:
            raise InvalidExponentError(f"need 1 < r < inf, got {self.r}")
        if abs(1.0 / self.r + self.s / self.d - 0.5) > EXPONENT_TOL:
            raise ConfigurationError(f"1/r + s/d = {1 / self.r + self.s / self.d} != 1/2")
        if self.cutoff not in ("sharp", "smooth"):
            raise ConfigurationError(f"unknown cutoff {self.cutoff!r}")

    @property
    def theta(self) -> float:
        """Interpolation weight ``2s/d`` of the refined factor."""
        return 2.0 * self.s / self.d

    def to_json(self) -> dict:
        return {"s": self.s, "d": self.d, "r": self.r, "cutoff": self.cutoff}


@dataclass(frozen=True)
class EmbeddingTerms:
    """Ingredients of both embedding ratios for one field."""

    lebesgue: float
    sobolev: float
    besov: float
    piece_sup: float
    spec: EmbeddingSpec

    @property
    def keraani_rhs(self) -> float:
        t = self.spec.theta
        return self.sobolev ** (1 - t) * self.besov**t

    @property
    def killip_visan_rhs(self) -> float:
        t = self.spec.theta
        return self.sobolev ** (1 - t) * self.piece_sup**t

    @property
    def keraani(self) -> float:
        return self.lebesgue / self.keraani_rhs

    @property
    def killip_visan(self) -> float:
        return self.lebesgue / self.killip_visan_rhs


def embedding_terms(f: Field, spec: EmbeddingSpec) -> EmbeddingTerms:
    """Norms entering both ratios.

    The zero mode carries no ``Hdot^s`` weight and is left in place: it is
    the lattice sample of the spectrum at the origin, a null set on the
    whole space.

    Raises
    ------
    DegenerateInputError
        If ``f`` vanishes or ``D^s f`` vanishes.
    ConfigurationError
        If ``f`` lives in a dimension other than ``spec.d``.
    """
    if f.grid.d != spec.d:
        raise ConfigurationError(f"field is {f.grid.d}-dimensional, spec is for d={spec.d}")
    lhs = lebesgue_norm(f, spec.r)
    if lhs == 0:
        raise DegenerateInputError("embedding ratio of a zero field")
    ds = fractional_derivative(f, spec.s)
    sob = ds.norm()
    if sob == 0:
        raise DegenerateInputError("D^s f vanishes")
    besov = max(lp_piece_norms(ds, spec.cutoff).values())
    pieces, _ = lp_pieces(f, spec.cutoff)
    piece_sup = max(lebesgue_norm(p, spec.r) for p in pieces.values())
    return EmbeddingTerms(lhs, sob, besov, piece_sup, spec)


def keraani_ratio(f: Field, spec: EmbeddingSpec) -> float:
    """``||f||_r / (||D^s f||_2^(1-2s/d) sup_k ||(D^s f)_k||_2^(2s/d))``."""
    return embedding_terms(f, spec).keraani


def killip_visan_ratio(f: Field, spec: EmbeddingSpec) -> float:
    """``||f||_r / (||D^s f||_2^(1-2s/d) sup_k ||f_k||_r^(2s/d))``."""
    return embedding_terms(f, spec).killip_visan


def square_function_ratio(f: Field, p: float, cutoff: Cutoff = "sharp") -> float:
    """``||f||_p / ||(sum_k |f_k|^2)^(1/2)||_p`` with the low remainder as a piece.

    Raises
    ------
    InvalidExponentError
        Unless ``1 < p < inf``.
    DegenerateInputError
        If ``f`` is zero.
    """
    if not 1 < p < math.inf:
        raise InvalidExponentError(f"square-function estimate needs 1 < p < inf, got {p}")
    lhs = lebesgue_norm(f, p)
    if lhs == 0:
        raise DegenerateInputError("square-function ratio of a zero field")
    pieces, low = lp_pieces(f, cutoff)
    sq = np.abs(low.values) ** 2
    for piece in pieces.values():
        sq = sq + np.abs(piece.values) ** 2
    return lhs / lebesgue_norm(np.sqrt(sq), p, f.grid.cell)


def bernstein_constant(grid: Grid, spec: EmbeddingSpec) -> float:
    """Constant ``C`` with ``sup_k ||f_k||_r <= C sup_k ||(D^s f)_k||_2`` on ``grid``.

    A piece supported on ``n_k`` lattice points of the box of volume ``V``
    satisfies ``||f_k||_inf <= (n_k/V)^(1/2) ||f_k||_2``; interpolating with
    L² gives ``||f_k||_r <= (n_k/V)^(s/d) ||f_k||_2``, and ``|xi| >= rho_k``
    on the support gives ``||f_k||_2 <= rho_k^(-s) ||(D^s f)_k||_2``.
    """
    k_min, k_max = grid.dyadic_range(spec.cutoff)
    worst = 0.0
    for k in range(k_min, k_max + 1):
        support = lp_symbol(grid, k, spec.cutoff) > 0
        n_k = int(support.sum())
        if not n_k:
            continue
        inner_radius = float(grid.xi_abs[support].min())
        worst = max(worst, (n_k / grid.volume) ** (spec.s / spec.d) * inner_radius ** (-spec.s))
    return worst


def continuum_bernstein_constant(spec: EmbeddingSpec) -> float:
    """Whole-space analogue ``(|B_1| (2^d - 1) / (2 pi)^d)^(s/d)`` for sharp annuli."""
    ball = math.pi ** (spec.d / 2) / special.gamma(spec.d / 2 + 1)
    return (ball * (2**spec.d - 1) / (2 * math.pi) ** spec.d) ** (spec.s / spec.d)


def dyadic_dilate(f: Field) -> Field:
    """``f(2x)`` as the same samples on a box of half the extent.

    The frequency lattice doubles, so Littlewood-Paley pieces shift by
    exactly one index and every norm scales exactly.
    """
    g = f.grid
    return Field(Grid(g.d, g.n_per_axis, g.extent / 2), f.values)


def dilation_residual(f: Field, spec: EmbeddingSpec) -> dict[str, float]:
    """Relative change of both embedding ratios under :func:`dyadic_dilate`."""
    a, b = embedding_terms(f, spec), embedding_terms(dyadic_dilate(f), spec)
    return {"keraani": abs(b.keraani / a.keraani - 1.0),
            "killip_visan": abs(b.killip_visan / a.killip_visan - 1.0)}


# generators

GeneratorKind = Literal["gaussian", "multibump", "bandlimited", "lacunary", "mixed"]
_KINDS = ("gaussian", "multibump", "bandlimited", "lacunary")


def _gaussian(grid: Grid, rng: np.random.Generator, params: dict) -> Field:
    """Translated, phase-rotated Gaussian at a dyadic scale.

    The scale ``2^j`` is realised by sampling on a box scaled by ``2^j``,
    so samples form one exact dilation orbit.
    """
    j = int(rng.integers(-2, 3))
    box = Grid(grid.d, grid.n_per_axis, grid.extent * 2.0**j)
    c = rng.uniform(-4, 4, grid.d) * 2.0**j
    theta = rng.uniform(0, 2 * math.pi)
    width = params.get("width", 1.0) * 2.0**j
    r2 = sum((x - ci) ** 2 for x, ci in zip(box.coords(), c))
    return Field(box, np.exp(-r2 / width**2 + 1j * theta))


def _multibump(grid: Grid, rng: np.random.Generator, params: dict) -> Field:
    coords = grid.coords()
    values = np.zeros(grid.shape, dtype=np.complex128)
    for _ in range(int(params.get("bumps", rng.integers(2, 6)))):
        c = rng.uniform(-20, 20, grid.d)
        w = 2.0 ** rng.uniform(-1.5, 2.0)
        amp = rng.normal() + 1j * rng.normal()
        r2 = sum((x - ci) ** 2 for x, ci in zip(coords, c))
        values = values + amp * np.exp(-r2 / w**2)
    return Field(grid, values)


def _bandlimited(grid: Grid, rng: np.random.Generator, params: dict) -> Field:
    """Random-phase spectrum in a random band with a smooth envelope."""
    lo = 2.0 ** rng.uniform(-2, 1)
    hi = lo * 2.0 ** rng.uniform(1, 4)
    rho = grid.xi_abs
    envelope = np.exp(-(((np.log(np.where(rho > 0, rho, 1.0)) - math.log(math.sqrt(lo * hi)))
                         / math.log(hi / lo)) ** 2) * 8.0)
    envelope[rho == 0] = 0.0
    coeffs = envelope * (rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape))
    values = np.fft.ifftn(coeffs) * grid.size
    window = np.exp(-sum(x**2 for x in grid.coords()) / params.get("window", 40.0) ** 2)
    return Field(grid, values * window)


def lacunary_field(grid: Grid, K: int, s: float, window: float = 30.0, k0: int = -1) -> Field:
    """``sum_{k0 <= k <= K} 2^(-k s) exp(i x 2^k)`` under a wide Gaussian window."""
    x = grid.coords()[0]
    env = np.exp(-sum(c**2 for c in grid.coords()) / window**2)
    values = sum(2.0 ** (-k * s) * np.exp(1j * x * 2.0**k) for k in range(k0, K + 1))
    return Field(grid, values * env)


def _lacunary(grid: Grid, rng: np.random.Generator, params: dict) -> Field:
    top = math.floor(math.log2(grid.nyquist)) - 2
    K = int(params.get("K", rng.integers(1, top + 1)))
    return lacunary_field(grid, K, params.get("s", 0.25), params.get("window", 30.0))


GENERATORS: dict[str, Callable[[Grid, np.random.Generator, dict], Field]] = {
    "gaussian": _gaussian,
    "multibump": _multibump,
    "bandlimited": _bandlimited,
    "lacunary": _lacunary,
}


@dataclass(frozen=True)
class GeneratorSpec:
    """Sample generator ``{kind, params, seed}``; ``"mixed"`` cycles through all kinds."""

    kind: GeneratorKind = "mixed"
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind != "mixed" and self.kind not in GENERATORS:
            raise ConfigurationError(f"unknown generator {self.kind!r}")

    def samples(self, grid: Grid, n: int):
        """Yield ``(kind, field)`` pairs."""
        rng = np.random.default_rng(self.seed)
        for i in range(n):
            kind = _KINDS[i % len(_KINDS)] if self.kind == "mixed" else self.kind
            yield kind, GENERATORS[kind](grid, rng, self.params)

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": self.params, "seed": self.seed}


@dataclass
class EnsembleReport:
    """Per-sample ratios and checks of an ensemble run.

    Attributes
    ----------
    samples : list of dict
        One record per evaluated sample.
    skipped : list of str
        Log entries for samples that could not be evaluated.
    violations : list of str
        Ratios beyond ten times a pinned bracket.
    """

    spec: EmbeddingSpec
    generator: GeneratorSpec
    samples: list[dict]
    skipped: list[str]
    bernstein: float
    violations: list[str] = field(default_factory=list)

    def column(self, key: str) -> np.ndarray:
        return np.array([row[key] for row in self.samples])

    @property
    def max_ratios(self) -> dict[str, float]:
        return {k: float(self.column(k).max())
                for k in ("keraani", "killip_visan", "square_2", "square_r")}

    @property
    def all_finite(self) -> bool:
        keys = ("keraani", "killip_visan", "square_2", "square_r")
        return all(np.all(np.isfinite(self.column(k)) & (self.column(k) > 0)) for k in keys)

    @property
    def max_dilation_residual(self) -> float:
        return float(max(self.column("dilation_keraani").max(),
                         self.column("dilation_killip_visan").max()))

    @property
    def dominance_holds(self) -> bool:
        return bool(np.all(self.column("killip_visan_rhs")
                           <= self.bernstein ** self.spec.theta * self.column("keraani_rhs") * (1 + 1e-12)))

    @property
    def besov_bound_holds(self) -> bool:
        return bool(np.all(self.column("besov") <= self.column("sobolev") * (1 + 1e-12)))

    def to_json(self) -> dict:
        return {"spec": self.spec.to_json(), "generator": self.generator.to_json(),
                "n_samples": len(self.samples), "skipped": self.skipped,
                "bernstein": self.bernstein, "max_ratios": self.max_ratios,
                "max_dilation_residual": self.max_dilation_residual,
                "dominance_holds": self.dominance_holds,
                "besov_bound_holds": self.besov_bound_holds,
                "violations": self.violations, "samples": self.samples}

    def to_csv(self) -> str:
        buf = io.StringIO()
        keys = ["index", "kind", "keraani", "killip_visan", "square_2", "square_r",
                "dilation_keraani", "dilation_killip_visan"]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(keys)
        for row in self.samples:
            writer.writerow([row[k] if k in ("index", "kind") else repr(float(row[k])) for k in keys])
        return buf.getvalue()


def _pinned(spec: EmbeddingSpec) -> dict[str, tuple[float, float]] | None:
    if spec.d == 1 and spec.s == 0.25 and spec.cutoff == "sharp":
        return PINNED_BRACKETS
    return None


def ensemble_test(spec: EmbeddingSpec, generator: GeneratorSpec | None = None,
                  n_samples: int = 100, grid: Grid | None = None) -> EnsembleReport:
    """Evaluate all ratios and checks on a random ensemble.

    Raises
    ------
    ConfigurationError
        If ``n_samples < 10``.
    """
    if n_samples < 10:
        raise ConfigurationError("ensembles need at least 10 samples")
    generator = GeneratorSpec() if generator is None else generator
    grid = Grid.default(spec.d) if grid is None else grid
    rows, skipped = [], []
    for i, (kind, f) in enumerate(generator.samples(grid, n_samples)):
        try:
            terms = embedding_terms(f, spec)
            dil = dilation_residual(f, spec)
            sq2 = square_function_ratio(f, 2.0, "sharp")
            sqr = square_function_ratio(f, spec.r, "smooth")
        except DegenerateInputError as exc:
            skipped.append(f"sample {i} ({kind}): {exc}")
            continue
        rows.append({"index": i, "kind": kind, "keraani": terms.keraani,
                     "killip_visan": terms.killip_visan, "square_2": sq2, "square_r": sqr,
                     "lebesgue": terms.lebesgue, "sobolev": terms.sobolev, "besov": terms.besov,
                     "piece_sup": terms.piece_sup, "keraani_rhs": terms.keraani_rhs,
                     "killip_visan_rhs": terms.killip_visan_rhs,
                     "dilation_keraani": dil["keraani"],
                     "dilation_killip_visan": dil["killip_visan"]})
    report = EnsembleReport(spec, generator, rows, skipped, bernstein_constant(grid, spec))
    brackets = _pinned(spec)
    if brackets and rows:
        for key, (_, hi) in brackets.items():
            if hi > 0:
                worst = float(report.column(key).max())
                if worst > 10 * hi:
                    report.violations.append(f"{key} ratio {worst:.4g} exceeds 10x pinned {hi:.4g}")
    return report


def lacunary_trend(spec: EmbeddingSpec, Ks, grid: Grid | None = None) -> dict[str, list[float]]:
    """Embedding factors of lacunary sums as the number of octaves grows."""
    grid = Grid.default(spec.d) if grid is None else grid
    out = {"K": list(Ks), "keraani": [], "killip_visan": [], "besov_over_sobolev": []}
    for K in Ks:
        t = embedding_terms(lacunary_field(grid, K, spec.s), spec)
        out["keraani"].append(t.keraani)
        out["killip_visan"].append(t.killip_visan)
        out["besov_over_sobolev"].append(t.besov / t.sobolev)
    return out
