import math
import warnings

import numpy as np
import pytest

from strichartz_lab.errors import AliasingError, SupportWarning
from strichartz_lab.propagator import propagate
from strichartz_lab.spectral import Grid, fourier_forward
from strichartz_lab.symmetry import (
    GroupElement,
    ParameterSequence,
    apply,
    compose,
    galilean_conjugate,
    modulate,
    orthogonality_statistic,
    translate,
)

from conftest import gaussian, random_field


def random_element(rng, d=1):
    return GroupElement(rng.uniform(0, 2 * math.pi), rng.uniform(0.7, 1.4),
                        tuple(rng.uniform(-1, 1, d)), tuple(rng.uniform(-2, 2, d)), rng.uniform(-0.5, 0.5))


class TestApply:
    def test_identity(self, small_grid, rng):
        f = random_field(small_grid, rng)
        out = apply(GroupElement.identity(), f)
        assert np.max(np.abs(out.values - f.values)) < 1e-14

    def test_unitary(self, rng):
        g = Grid(1, 1024, 80.0)
        f = random_field(g, rng, band=3.0)
        for _ in range(5):
            out = apply(random_element(rng), f)
            assert out.norm() == pytest.approx(f.norm(), rel=1e-10)

    def test_modulation_shifts_spectrum(self):
        g = Grid(1, 512, 40.0)
        xi0 = 5 * g.dxi
        F = fourier_forward(apply(GroupElement(xi0=xi0), gaussian(g))).coefficients
        F0 = fourier_forward(gaussian(g)).coefficients
        np.testing.assert_allclose(F, np.roll(F0, 5), atol=1e-12)

    def test_dilation_matches_resampling(self):
        g = Grid(1, 512, 40.0)
        out = apply(GroupElement(h0=2.0), gaussian(g))
        expected = 2.0**-0.5 * np.exp(-(g.coords()[0] / 2) ** 2)
        assert np.max(np.abs(out.values - expected)) < 1e-10

    def test_contraction_aliasing_raises(self):
        g = Grid(1, 64, 20.0)
        with pytest.raises(AliasingError):
            apply(GroupElement(h0=0.05), gaussian(g))

    def test_leaving_the_box_warns(self):
        g = Grid(1, 256, 20.0)
        with pytest.warns(SupportWarning):
            apply(GroupElement(x0=9.0), gaussian(g))

    def test_agrees_with_generators(self, small_grid, rng):
        f = random_field(small_grid, rng)
        g = GroupElement(0.0, 1.0, 0.5, 1.5, 0.2)
        by_hand = modulate(translate(propagate(f, -0.2), 1.5), 0.5)
        assert np.max(np.abs(apply(g, f).values - by_hand.values)) < 1e-12


class TestCompose:
    def test_translations_add(self):
        c = compose(GroupElement(x0=1.5), GroupElement(x0=-0.25))
        assert c.x0 == (1.25,) and c.h0 == 1.0

    def test_dilations_multiply(self):
        assert compose(GroupElement(h0=2.0), GroupElement(h0=3.0)).h0 == 6.0

    def test_inverse(self, rng):
        for _ in range(10):
            g = random_element(rng)
            e = compose(g, g.inverse())
            theta = (e.theta + math.pi) % (2 * math.pi) - math.pi
            np.testing.assert_allclose([theta, e.h0, *e.xi0, *e.x0, e.t0], [0, 1, 0, 0, 0], atol=1e-12)

    def test_matches_action(self, rng):
        grid = Grid(1, 1024, 80.0)
        f = random_field(grid, rng, band=3.0)
        g1, g2 = random_element(rng), random_element(rng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SupportWarning)
            two = apply(g1, apply(g2, f))
            one = apply(compose(g1, g2), f)
        assert (two - one).norm() < 1e-8 * f.norm()

    def test_json_round_trip(self, rng):
        g = random_element(rng)
        assert GroupElement.from_json(g.to_json()) == g


class TestGalilean:
    def test_no_modulation(self, small_grid, rng):
        assert galilean_conjugate(random_field(small_grid, rng), 0.0, 0.8).defect < 1e-12

    def test_no_time(self, small_grid, rng):
        assert galilean_conjugate(random_field(small_grid, rng), 1.7, 0.0).defect < 1e-12

    def test_gaussian(self):
        g = Grid(1, 512, 40.0)
        assert galilean_conjugate(gaussian(g), 2.0, 0.3).defect < 1e-10

    def test_two_dimensions(self):
        g = Grid(2, 128, 32.0)
        assert galilean_conjugate(gaussian(g), (1.0, -0.5), 0.4).defect < 1e-10


class TestOrthogonality:
    def test_scale_separation(self):
        # the default threshold 1e3 is crossed at n = 10
        n = np.arange(12)
        a = ParameterSequence.from_arrays("a", np.ones(12))
        b = ParameterSequence.from_arrays("b", 2.0**n)
        res = orthogonality_statistic(a, b)
        np.testing.assert_allclose(res.stat_scale, 2.0**n + 2.0**-n)
        assert res.orthogonal

    def test_identical_sequences(self):
        a = ParameterSequence.from_arrays("a", np.ones(6))
        res = orthogonality_statistic(a, a)
        np.testing.assert_allclose(res.stat_scale, 2.0)
        np.testing.assert_allclose(res.stat_spacetime, 0.0)
        assert res.verdict == "undetermined at this depth"

    def test_translation_separation(self):
        n = np.arange(6.0)
        a = ParameterSequence.from_arrays("a", np.ones(6))
        b = ParameterSequence.from_arrays("b", np.ones(6), x=n**2)
        res = orthogonality_statistic(a, b, threshold=10)
        np.testing.assert_allclose(res.stat_spacetime, n**2)
        assert res.orthogonal

    def test_length_mismatch(self):
        a = ParameterSequence.from_arrays("a", np.ones(5))
        b = ParameterSequence.from_arrays("b", np.ones(6))
        with pytest.raises(ValueError):
            orthogonality_statistic(a, b)

    def test_minimum_length(self):
        with pytest.raises(ValueError):
            ParameterSequence.from_arrays("a", np.ones(3))

    def test_json_round_trip(self):
        a = ParameterSequence.from_arrays("a", 2.0 ** np.arange(4), xi=1.0, x=np.arange(4.0), t=0.5)
        assert ParameterSequence.from_json(a.to_json()) == a
