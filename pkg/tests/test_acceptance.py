"""Acceptance criteria, one test per criterion.

Each test records a PASS or FAIL line with its measured values, tolerance and
runtime; the lines are printed in the terminal summary.  Run with::

    python3 -m pytest tests/test_acceptance.py -v
"""

import json
import math
import time
import warnings

import numpy as np
import pytest

from strichartz_lab.cli import main
from strichartz_lab.errors import SupportWarning
from strichartz_lab.embeddings import EmbeddingSpec, GeneratorSpec, ensemble_test
from strichartz_lab.gaussian import GaussianProfile
from strichartz_lab.maximizer import (
    Objective,
    SearchConfig,
    functional_gradient,
    gaussian_reference,
    maximize,
    random_initial,
    search_time_grid,
)
from strichartz_lab.norms import QuotientSpec, evaluate_quotient
from strichartz_lab.profiles import (
    absorb_modulation,
    decomposition_report,
    escaping_frequency_decay,
    fit_log_slope,
    original_term,
    rebuilt_term,
    stock_family,
)
from strichartz_lab.propagator import mass_defect, propagate
from strichartz_lab.spectral import Field, Grid, inner
from strichartz_lab.symmetry import ParameterSequence, galilean_conjugate

from conftest import ACCEPTANCE, gaussian, random_field

SEED = 12345


def record(number: int, title: str, checks: dict[str, bool], detail: str, elapsed: float, limit: float):
    """Store the criterion line and fail the test if any check or the time budget fails."""
    checks = {**checks, f"runtime < {limit:g} s": elapsed < limit}
    passed = all(checks.values())
    failed = [name for name, ok in checks.items() if not ok]
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail} [{elapsed:.1f} s]"
    if failed:
        line += f"  failed: {'; '.join(failed)}"
    ACCEPTANCE.append(line)
    print(line)
    assert passed, line


@pytest.fixture(scope="module")
def stock_report():
    start = time.perf_counter()
    rep = decomposition_report(stock_family(6), superposition_pairs=[(6, 6), (8, 4), (5, 10)])
    return rep, time.perf_counter() - start


def test_01_unitarity():
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    grids = [Grid.default(1), Grid(2, 128, 40.0), Grid(3, 32, 16.0)]
    worst = 0.0
    for i in range(100):
        f = random_field(grids[i % 3], rng)
        for t in rng.uniform(-10, 10, 20):
            worst = max(worst, mass_defect(f, propagate(f, float(t))))
    record(1, "unitarity", {"max mass defect < 1e-12": worst < 1e-12},
           f"max relative mass defect {worst:.2e} over 100 fields x 20 times (tol 1e-12)",
           time.perf_counter() - start, 10)


def test_02_gaussian_propagation():
    start = time.perf_counter()
    worst = 0.0
    for d in (1, 2):
        g = Grid.default(d)
        u0 = gaussian(g)
        for t in (0.1, 0.5, 2.0):
            m = 1 + 4j * t
            exact = m ** (-d / 2) * np.exp(-g.r_sq / m)
            worst = max(worst, float(np.max(np.abs(propagate(u0, t).values - exact))))
    record(2, "Gaussian propagation oracle", {"max abs error < 1e-9": worst < 1e-9},
           f"max abs error {worst:.2e} for d=1,2 and t in {{0.1, 0.5, 2}} (tol 1e-9)",
           time.perf_counter() - start, 10)


def test_03_symmetric_quotient():
    start = time.perf_counter()
    res = evaluate_quotient(gaussian(Grid.default(1)), QuotientSpec.make(6, 6, 1))
    oracle = gaussian_reference(1, 6, 6)
    value = res.quotient
    checks = {"|Q - 0.81297| <= 2e-3": abs(value - 0.81297) <= 2e-3,
              "|Q - oracle| <= 2e-3": abs(value - oracle) <= 2e-3}
    record(3, "symmetric Strichartz quotient at the Gaussian", checks,
           f"pipeline {value:.6f}, closed-form oracle {oracle:.6f}, "
           f"tail {res.numerator.tail_bound / res.denominator:.2e} (tol 2e-3)",
           time.perf_counter() - start, 30)


def test_04_maximizer_search():
    start = time.perf_counter()
    reference = gaussian_reference(1, 6, 6)
    best = []
    for seed in range(5):
        rep = maximize(SearchConfig.make(6, 6, 1, seed=seed))
        best.append(rep.best)
    best = np.array(best)
    checks = {"all within 1% of reference": bool(np.all(np.abs(best - reference) <= 1e-2 * reference)),
              "none above reference + 1e-2": bool(np.all(best <= reference + 1e-2))}
    record(4, "maximizer search from 5 seeds", checks,
           f"best quotients {np.array2string(best, precision=6)} vs reference {reference:.6f} "
           "(tol 1%, overshoot 1e-2)", time.perf_counter() - start, 600)


def test_05_gradient():
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    spec = QuotientSpec(QuotientSpec.make(6, 6, 1).pair, 0.0, search_time_grid(1))
    obj = Objective(spec)
    grid = Grid.default(1)
    worst, eps = 0.0, 1e-4
    for k in range(3):
        u = random_initial(grid, int(rng.integers(1 << 30)))
        grad = functional_gradient(u, spec)
        for _ in range(5):
            v = random_initial(grid, int(rng.integers(1 << 30)))
            v = v * (1 / v.norm())
            fd = (obj.evaluate(u + v * eps).phi - obj.evaluate(u - v * eps).phi) / (2 * eps)
            worst = max(worst, abs(inner(grad, v).real - fd) / abs(fd))
    record(5, "gradient correctness", {"max relative FD error < 1e-5": worst < 1e-5},
           f"max relative error {worst:.2e} over 3 fields x 5 directions, step 1e-4 (tol 1e-5)",
           time.perf_counter() - start, 120)


def test_06_profile_orthogonality(stock_report):
    rep, elapsed = stock_report
    cross = rep.series("cross_terms", "0-1")
    pyth = rep.rows[-1]["pythagorean_rel"]
    inner_max = rep.series("inner_max")
    sup = rep.series("superposition", "6,6")
    checks = {"cross terms strictly decrease": bool(np.all(np.diff(cross) < 0)),
              "Pythagorean defect < 1e-2 at n=5": pyth < 1e-2,
              "superposition limsup <= 5e-3": sup[-1] <= 5e-3,
              "inner products decrease": bool(np.all(np.diff(inner_max) < 0))}
    record(6, "profile orthogonality suite (stock family, depth 6)", checks,
           f"cross terms {cross[0]:.4f} -> {cross[-1]:.4f}; Pythagorean rel {pyth:.2e} (tol 1e-2); "
           f"(6,6) defect series {np.array2string(sup, precision=4)} (tol 5e-3 at n=5); "
           f"inner max {inner_max[0]:.3e} -> {inner_max[-1]:.3e}", elapsed, 300)


def test_07_lemma_branches(stock_report):
    rep, elapsed = stock_report
    above = rep.series("superposition", "8,4")
    below = rep.series("superposition", "5,10")
    checks = {"(8,4), p=4: limsup <= 5e-3": above[-1] <= 5e-3,
              "(5,10), p=5: limsup <= 5e-3": below[-1] <= 5e-3}
    record(7, "superposition branches q>=r and q<=r", checks,
           f"(8,4) p=4 defect at n=5 {above[-1]:.4f}; (5,10) p=5 defect at n=5 {below[-1]:.4f} (tol 5e-3); "
           "(4,8) is inadmissible in d=1, so (5,10) stands in", elapsed, 300)


def test_08_escaping_decay():
    start = time.perf_counter()
    n = np.arange(2, 8)
    seq = ParameterSequence.from_arrays("escaping", np.ones(n.size), 2.0 ** n.astype(float))
    results = {s: escaping_frequency_decay(GaussianProfile(1.0), s, seq, 8, 4) for s in (0.25, 0.5)}
    checks = {f"s={s}: slope within 10%": r.relative_slope_error <= 0.1 for s, r in results.items()}
    detail = ", ".join(f"s={s}: slope {r.slope:.4f} ({100 * r.relative_slope_error:.1f}%)"
                       for s, r in results.items())
    record(8, "escaping-frequency decay", checks, detail + " (tol 10%)", time.perf_counter() - start, 300)


def test_09_modulation_absorption():
    start = time.perf_counter()
    psi = GaussianProfile(1.0).sample(Grid(1, 2048, 160.0))
    n = np.arange(1, 9)
    seq = ParameterSequence.from_arrays("convergent", np.ones(n.size), 1.5 * (1 - 2.0**-n), x=0.5, t=0.2)
    s = 0.25
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SupportWarning)
        res = absorb_modulation(psi, seq, s)
        defects = np.array([(rebuilt_term(res, i) - original_term(psi, seq, i, s)).norm()
                            for i in range(n.size)])
    slope = fit_log_slope(n, res.replacement_error)
    checks = {"slope within 15% of -log 2": abs(slope + math.log(2)) <= 0.15 * math.log(2),
              "reconstruction defect <= replacement error": bool(np.all(defects <= res.replacement_error))}
    record(9, "modulation absorption", checks,
           f"slope {slope:.4f} vs {-math.log(2):.4f} (tol 15%); max defect/error ratio "
           f"{np.max(defects / res.replacement_error):.4f}", time.perf_counter() - start, 120)


def test_10_galilean_identity():
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    g = Grid.default(1)
    phi = Field(g, np.exp(-g.r_sq + 0.3j * g.coords()[0]))
    worst = max(galilean_conjugate(phi, rng.uniform(-3, 3), rng.uniform(-2, 2)).defect for _ in range(20))
    record(10, "Galilean identity", {"max defect < 1e-10": worst < 1e-10},
           f"max defect {worst:.2e} over 20 draws (tol 1e-10)", time.perf_counter() - start, 30)


def test_11_embeddings():
    start = time.perf_counter()
    rep = ensemble_test(EmbeddingSpec(0.25), GeneratorSpec("mixed", seed=0), 100)
    sq2 = float(np.max(np.abs(rep.column("square_2") - 1)))
    checks = {"all ratios finite": rep.all_finite,
              "dilation residual < 1e-6": rep.max_dilation_residual < 1e-6,
              "Besov factor <= L2 factor": rep.besov_bound_holds,
              "Killip-Visan dominates Keraani": rep.dominance_holds,
              "p=2 square function = 1 +- 1e-12": sq2 <= 1e-12}
    maxima = ", ".join(f"{k} {v:.4f}" for k, v in rep.max_ratios.items())
    record(11, "improved Sobolev embeddings", checks,
           f"max ratios {maxima}; dilation residual {rep.max_dilation_residual:.1e}; "
           f"|square_2 - 1| {sq2:.1e}", time.perf_counter() - start, 120)


def test_12_determinism(tmp_path, monkeypatch):
    start = time.perf_counter()
    monkeypatch.chdir(tmp_path)
    commands = {
        "maximize": ["maximize", "--d", "1", "--q", "6", "--r", "6", "--seed", "7"],
        "embeddings": ["embeddings", "--samples", "30", "--seed", "3"],
        "decay": ["decay", "--s", "0.25", "--q", "8", "--r", "4", "--depth", "6"],
    }
    checks = {}
    for name, argv in commands.items():
        blobs = []
        for run in range(2):
            path = tmp_path / f"{name}{run}.json"
            main(argv + ["--json", str(path)])
            blobs.append(path.read_bytes())
        json.loads(blobs[0])
        checks[f"{name} byte-identical"] = blobs[0] == blobs[1]
    record(12, "determinism", checks, f"{len(commands)} CLI commands run twice with fixed seeds",
           time.perf_counter() - start, 120)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
