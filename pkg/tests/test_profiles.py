import json
import math
import warnings

import numpy as np
import pytest

from strichartz_lab.errors import (
    ConfigurationError,
    EndpointRefusedError,
    SupportWarning,
    UndeterminedCaseError,
    WrongCaseError,
)
from strichartz_lab.gaussian import GaussianProfile
from strichartz_lab.profiles import (
    ErrorSchedule,
    ProfileFamily,
    absorb_modulation,
    classify_frequency_case,
    cross_term_norm,
    decomposition_report,
    escaping_frequency_decay,
    extrapolate_limit,
    fit_log_slope,
    original_term,
    profile_norm,
    rebuilt_term,
    stock_family,
    superposition_defect,
    synthesize,
    weak_orthogonality,
)
from strichartz_lab.spectral import Field, Grid, fractional_derivative, lp_project
from strichartz_lab.symmetry import ParameterSequence

from conftest import random_field

DEPTH = 6


def identity_params(label="id", depth=DEPTH):
    return ParameterSequence.from_arrays(label, np.ones(depth))


def disjoint_family(rng):
    grid = Grid(1, 512, 40.0)
    base = random_field(grid, rng, band=8.0)
    low, high = lp_project(base, 1), lp_project(base, 3)
    return ProfileFamily((low, high), (identity_params("a"), identity_params("b")),
                         grid=grid, require_orthogonal=False)


def translated_family():
    n = np.arange(DEPTH)
    params = (identity_params("fixed"), ParameterSequence.from_arrays("moving", np.ones(DEPTH), x=4.0**n))
    return ProfileFamily((GaussianProfile(1.0), GaussianProfile(1.0)), params)


@pytest.fixture(scope="module")
def stock():
    return stock_family(DEPTH)


@pytest.fixture(scope="module")
def stock_report(stock):
    return decomposition_report(stock, superposition_pairs=[(6, 6), (8, 4)])


class TestFamily:
    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ConfigurationError):
            ProfileFamily((GaussianProfile(),), (identity_params(), identity_params()))

    def test_rejects_non_orthogonal(self):
        with pytest.raises(ConfigurationError):
            ProfileFamily((GaussianProfile(), GaussianProfile(2.0)), (identity_params(), identity_params()))

    def test_rejects_modulated_sobolev_family(self):
        seq = ParameterSequence.from_arrays("m", np.ones(DEPTH), xi=1.0)
        with pytest.raises(ConfigurationError):
            ProfileFamily((GaussianProfile(),), (seq,), s=0.25)

    def test_json_round_trip(self, stock):
        back = ProfileFamily.from_json(json.loads(json.dumps(stock.to_json())))
        assert back.to_json() == stock.to_json()

    def test_error_schedule_hits_target(self, stock):
        sched = stock.error
        for n in range(3):
            w = stock.error_wave(n)
            assert abs(w.amp) / abs(sched.profile.amplitude) * sched.unit_norm() == pytest.approx(sched.target(n))
        assert ErrorSchedule.from_json(sched.to_json(), 1) == sched


class TestSynthesize:
    def test_single_profile_identity(self):
        prof = GaussianProfile(1.0, 0.3, 1.0)
        pf = ProfileFamily((prof,), (identity_params(),))
        u = synthesize(pf, 2)
        assert np.max(np.abs(u.values - prof.sample(u.grid).values)) < 1e-14

    def test_disjoint_frequencies_are_pythagorean(self, rng):
        pf = disjoint_family(rng)
        u = synthesize(pf, 3)
        a, b = pf.profiles
        assert u.norm() ** 2 == pytest.approx(a.norm() ** 2 + b.norm() ** 2, rel=1e-12)

    def test_stock_terms_match_closed_form(self, stock):
        n = 3
        grid = stock.synthesis_grid(n)
        for j in range(2):
            sampled = stock.term(n, j, grid)
            closed = stock.wave(n, j).sample(grid)
            assert np.max(np.abs(sampled.values - closed.values)) < 1e-12

    def test_rejects_bad_index(self, stock):
        with pytest.raises(ConfigurationError):
            synthesize(stock, DEPTH)
        with pytest.raises(ConfigurationError):
            synthesize(stock, 0, N=3)


class TestCrossTerms:
    def test_scale_separated_decrease(self, stock):
        series = [cross_term_norm(stock, 0, 1, n) for n in range(DEPTH)]
        assert np.all(np.diff(series) < 0)

    def test_translation_separated_decrease(self):
        pf = translated_family()
        series = [cross_term_norm(pf, 0, 1, n) for n in range(DEPTH)]
        assert np.all(np.diff(series) < 0)
        assert fit_log_slope(np.arange(DEPTH), series) < 0

    def test_diagnostic_self_pairing_is_constant(self, stock):
        series = [cross_term_norm(stock, 1, 1, n, diagnostic=True) for n in range(DEPTH)]
        np.testing.assert_allclose(series, series[0], rtol=1e-6)

    def test_self_pairing_needs_diagnostic(self, stock):
        with pytest.raises(ConfigurationError):
            cross_term_norm(stock, 0, 0, 1)

    def test_backends_agree(self, stock):
        exact = cross_term_norm(stock, 0, 1, 1, backend="exact")
        grid = cross_term_norm(stock, 0, 1, 1, backend="grid")
        assert grid == pytest.approx(exact, rel=1e-4)


class TestWeakOrthogonality:
    def test_disjoint_frequencies(self, rng):
        pf = disjoint_family(rng)
        for n in range(DEPTH):
            pairwise, against = weak_orthogonality(pf, n)
            assert abs(pairwise[0, 1]) < 1e-12
            np.testing.assert_array_equal(against, 0.0)

    def test_scale_separated_decrease(self, stock):
        series = [abs(weak_orthogonality(stock, n)[0][0, 1]) for n in range(DEPTH)]
        assert np.all(np.diff(series) < 0)


class TestSuperposition:
    def test_single_profile(self, stock):
        for n in range(DEPTH):
            assert superposition_defect(stock, n, 1, 6, 6) == 0.0

    def test_diagonal_pair_is_positive_and_shrinking(self, stock_report):
        # measured sign: positive, so the series approaches zero from above
        series = stock_report.series("superposition", "6,6")
        assert np.all(series > 0)
        assert np.all(np.diff(series) < 0)

    def test_q_above_r_branch(self, stock_report):
        series = stock_report.series("superposition", "8,4")
        assert series[-1] <= 5e-3

    def test_agrees_with_report(self, stock, stock_report):
        assert superposition_defect(stock, 2, None, 6, 6) == pytest.approx(
            stock_report.rows[2]["superposition"]["6,6"], rel=1e-12)

    def test_grid_backend(self, stock):
        exact = superposition_defect(stock, 1, None, 6, 6, backend="exact")
        grid = superposition_defect(stock, 1, None, 6, 6, backend="grid")
        assert grid == pytest.approx(exact, rel=1e-4)

    def test_refuses_endpoint(self):
        pf = ProfileFamily((GaussianProfile(d=3),), (ParameterSequence.from_arrays("a", np.ones(4), d=3),))
        with pytest.raises(EndpointRefusedError):
            superposition_defect(pf, 0, None, 2, 6)

    def test_profile_norm_of_unit_gaussian(self, stock):
        wide = profile_norm(stock, 1, 6, 6)
        assert wide == pytest.approx(((math.pi / 4) * math.sqrt(math.pi / 6)) ** (1 / 6), rel=1e-8)


class TestReport:
    def test_pythagorean_defect_decreases(self, stock_report):
        series = stock_report.series("pythagorean")
        assert np.all(np.diff(series) < 0)
        assert stock_report.rows[-1]["pythagorean_rel"] < 1e-2

    def test_error_norm_follows_schedule(self, stock_report):
        np.testing.assert_allclose(stock_report.series("error_norm"), stock_report.series("error_target"),
                                   rtol=1e-5)

    def test_profile_norms_are_invariant(self, stock_report):
        assert np.max(stock_report.series("invariance", "6,6")) < 1e-10

    def test_serialisation(self, stock_report):
        payload = json.dumps(stock_report.to_json())
        assert "certifies synthesized families only" in payload
        lines = stock_report.to_csv().splitlines()
        assert lines[0] == "n,quantity,value"
        assert any(line.startswith("5,cross_terms:0-1,") for line in lines)


class TestAbsorption:
    @pytest.fixture
    def psi(self):
        return GaussianProfile(1.0).sample(Grid(1, 2048, 160.0))

    def test_no_modulation(self, psi):
        res = absorb_modulation(psi, identity_params(), s=0.25)
        np.testing.assert_array_equal(res.xi_star, 0.0)
        np.testing.assert_array_equal(res.replacement_error, 0.0)
        expected = fractional_derivative(psi, -0.25, zero_mode="drop")
        assert np.max(np.abs(res.phi_new.values - expected.values)) < 1e-14

    def test_geometric_rate(self, psi):
        n = np.arange(1, 9)
        seq = ParameterSequence.from_arrays("c", np.ones(n.size), 1.5 * (1 - 2.0**-n))
        res = absorb_modulation(psi, seq, s=0.25)
        assert res.xi_star[0] == pytest.approx(1.5, abs=1e-12)
        slope = fit_log_slope(n, res.replacement_error)
        assert slope == pytest.approx(-math.log(2), rel=0.15)

    def test_reconstruction(self, psi):
        n = np.arange(1, 9)
        seq = ParameterSequence.from_arrays("c", np.ones(n.size), 1.5 * (1 - 2.0**-n), x=0.5, t=0.2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SupportWarning)
            res = absorb_modulation(psi, seq, s=0.25)
            for i in range(n.size):
                defect = (rebuilt_term(res, i) - original_term(psi, seq, i, 0.25)).norm()
                assert defect <= res.replacement_error[i]
        np.testing.assert_allclose(res.seq_new.x[:, 0], 0.5 + 2 * 0.2 * seq.xi[:, 0])

    def test_escaping_sequence_is_rejected(self, psi):
        seq = ParameterSequence.from_arrays("e", np.ones(6), 2.0 ** np.arange(6))
        assert classify_frequency_case(seq) == "escaping"
        with pytest.raises(WrongCaseError):
            absorb_modulation(psi, seq)

    def test_undetermined(self, psi):
        seq = ParameterSequence.from_arrays("u", np.ones(6), [0, 3, 0, 3, 0, 3])
        with pytest.raises(UndeterminedCaseError):
            absorb_modulation(psi, seq)

    def test_aitken_is_exact_on_geometric_sequences(self):
        v = (2.0 - 0.7 ** np.arange(5))[:, None]
        assert extrapolate_limit(v)[0] == pytest.approx(2.0, abs=1e-12)


class TestEscapingDecay:
    @staticmethod
    def sequence(start=2, depth=6, factor=1.0):
        n = np.arange(start, start + depth)
        return ParameterSequence.from_arrays("e", np.ones(depth), factor * 2.0 ** n.astype(float))

    def test_quarter_derivative(self):
        res = escaping_frequency_decay(GaussianProfile(1.0), 0.25, self.sequence(), 8, 4)
        assert -0.275 <= res.slope <= -0.225

    def test_half_derivative(self):
        res = escaping_frequency_decay(GaussianProfile(1.0), 0.5, self.sequence(), 8, 4)
        assert res.relative_slope_error <= 0.1

    def test_doubling_frequency(self):
        a = escaping_frequency_decay(GaussianProfile(1.0), 0.25, self.sequence(4, 4), 8, 4)
        b = escaping_frequency_decay(GaussianProfile(1.0), 0.25, self.sequence(4, 4, 2.0), 8, 4)
        np.testing.assert_allclose(b.norms / a.norms, 2.0**-0.25, rtol=0.02)

    def test_needs_positive_regularity(self):
        with pytest.raises(ConfigurationError):
            escaping_frequency_decay(GaussianProfile(1.0), 0.0, self.sequence(), 8, 4)

    def test_convergent_sequence_is_rejected(self):
        seq = ParameterSequence.from_arrays("c", np.ones(6), 1.0)
        with pytest.raises(WrongCaseError):
            escaping_frequency_decay(GaussianProfile(1.0), 0.25, seq, 8, 4)
