import numpy as np
import pytest

from strichartz_lab.errors import InvalidFieldError
from strichartz_lab.fieldio import MAGIC, decode_field, encode_field, payload_bytes, read_field, write_field
from strichartz_lab.spectral import Field, Grid

from conftest import random_field


class TestFLD1:
    @pytest.mark.parametrize("d,n", [(1, 64), (2, 16), (3, 8)])
    def test_round_trip_is_exact(self, rng, d, n):
        g = Grid(d, n, 12.5)
        f = Field(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
        back = decode_field(encode_field(f))
        assert back.grid == g
        assert np.array_equal(back.values, f.values)

    def test_file_layout(self, tmp_path, small_grid, rng):
        f = random_field(small_grid, rng)
        path = tmp_path / "f.fld"
        write_field(path, f)
        blob = path.read_bytes()
        assert blob[:4] == MAGIC
        payload = payload_bytes(path)
        assert len(payload) == 16 * small_grid.size
        assert np.array_equal(np.frombuffer(payload, "<f8")[::2], f.values.real)
        assert np.array_equal(read_field(path).values, f.values)

    def test_bad_magic(self):
        with pytest.raises(InvalidFieldError):
            decode_field(b"XXXX" + b"\0" * 16)

    def test_truncated_payload(self, small_grid, rng):
        blob = encode_field(random_field(small_grid, rng))
        with pytest.raises(InvalidFieldError):
            decode_field(blob[:-8])
