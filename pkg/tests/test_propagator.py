import math

import numpy as np
import pytest

from strichartz_lab.errors import ConfigurationError
from strichartz_lab.propagator import (
    CompositeTimeGrid,
    TimeGrid,
    evolve,
    load_spacetime,
    mass_defect,
    propagate,
    save_spacetime,
    simpson_weights,
    stream_evolution,
)
from strichartz_lab.spectral import Grid
from strichartz_lab.symmetry import GroupElement, apply

from conftest import gaussian, random_field


def closed_form(grid, t):
    m = 1 + 4j * t
    return m ** (-grid.d / 2) * np.exp(-grid.r_sq / m)


class TestTimeGrid:
    def test_simpson_integrates_cubics(self):
        tg = TimeGrid(-1.0, 2.0, 11)
        assert np.sum(tg.weights * tg.times**3) == pytest.approx((16 - 1) / 4, rel=1e-13)

    @pytest.mark.parametrize("n", [2, 4, 1])
    def test_rejects_even_or_tiny(self, n):
        with pytest.raises(ConfigurationError):
            TimeGrid(0.0, 1.0, n)

    def test_rejects_reversed_window(self):
        with pytest.raises(ConfigurationError):
            TimeGrid(1.0, 0.0, 5)

    def test_sinh_rule(self):
        tg = TimeGrid.multiscale(-50.0, 50.0, 0.1, 0.0, 16)
        assert tg.times[0] == -50.0 and tg.times[-1] == 50.0
        integral = np.sum(tg.weights / (1 + 100 * tg.times**2))
        assert integral == pytest.approx(2 * math.atan(500) / 10, rel=1e-6)
        assert tg.edge_distances == (50.0, 50.0)

    def test_json_round_trip(self):
        tg = TimeGrid.multiscale(-3.0, 5.0, 0.5, 1.0)
        assert TimeGrid.from_json(tg.to_json()) == tg

    def test_composite_covers_window(self):
        cg = CompositeTimeGrid.around([0.0, 10.0], [0.1, 2.0], 100.0)
        assert cg.t_min < -100 + 1e-9 and cg.t_max > 110 - 1e-9
        assert np.all(np.diff(cg.times) >= 0)
        assert np.sum(cg.weights) == pytest.approx(cg.t_max - cg.t_min, rel=1e-7)

    def test_simpson_weights_sum(self):
        assert simpson_weights(9, 0.25).sum() == pytest.approx(2.0)


class TestPropagate:
    def test_zero_time_is_identity(self, small_grid):
        f = gaussian(small_grid)
        assert propagate(f, 0.0) is f

    def test_gaussian_closed_form(self):
        g = Grid.default(1)
        out = propagate(gaussian(g), 0.5)
        assert np.max(np.abs(out.values - closed_form(g, 0.5))) < 1e-9

    def test_unitary(self, rng):
        g = Grid(1, 512, 40.0)
        f = random_field(g, rng)
        assert mass_defect(f, propagate(f, 3.7)) < 1e-13

    def test_reversible(self, rng):
        g = Grid(2, 32, 12.0)
        f = random_field(g, rng)
        back = propagate(propagate(f, 1.3), -1.3)
        assert np.max(np.abs(back.values - f.values)) < 1e-12

    def test_rejects_infinite_time(self, small_grid):
        with pytest.raises(ConfigurationError):
            propagate(gaussian(small_grid), math.inf)


class TestEvolve:
    def test_middle_slice(self, small_grid, rng):
        f = random_field(small_grid, rng)
        u = evolve(f, TimeGrid(-1.0, 1.0, 3))
        assert np.max(np.abs(u.slice(1).values - f.values)) < 1e-15

    def test_gaussian_slices(self):
        g = Grid.default(1)
        tg = TimeGrid(-2.0, 2.0, 9)
        u = evolve(gaussian(g), tg)
        for t, sl in zip(tg.times, u.slices):
            assert np.max(np.abs(sl.values - closed_form(g, t))) < 1e-9

    def test_time_shift(self, rng):
        g = Grid(1, 512, 40.0)
        f = random_field(g, rng)
        t0 = 0.7
        shifted = apply(GroupElement(t0=t0), f)
        tg = TimeGrid(-1.0, 1.0, 9)
        a = evolve(shifted, tg)
        # the element carries U(-t0), so its evolution lags by t0
        b = evolve(f, TimeGrid(-1.0 - t0, 1.0 - t0, 9))
        assert np.max(np.abs(a.values - b.values)) < 1e-12

    def test_streaming_blocks_agree(self, small_grid, rng):
        f = random_field(small_grid, rng)
        times = np.linspace(-2, 2, 17)
        full = np.concatenate([blk for _, blk in stream_evolution(f, times)])
        small = np.concatenate([blk for _, blk in stream_evolution(f, times, chunk=3)])
        assert np.array_equal(full, small)

    def test_product_counts_waves(self, small_grid, rng):
        u = evolve(random_field(small_grid, rng), TimeGrid(0.0, 1.0, 5))
        assert (u * u).waves == 2

    def test_save_and_load(self, tmp_path, small_grid, rng):
        u = evolve(random_field(small_grid, rng), TimeGrid(0.0, 1.0, 5))
        save_spacetime(tmp_path / "run", u)
        back = load_spacetime(tmp_path / "run")
        assert back.time_grid == u.time_grid
        assert np.array_equal(back.values, u.values)
