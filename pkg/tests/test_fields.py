import math

import numpy as np
import pytest

from modspace.errors import FieldError, GridMismatchError
from modspace.fields import (
    ComplexField,
    PhaseSpaceField,
    inner,
    l2_norm,
    read_complex_field,
    read_phase_space_field,
    write_complex_field,
    write_phase_space_field,
)
from modspace.grid import make_grid


def test_non_finite_samples_rejected(grid):
    values = np.zeros(grid.size, dtype=complex)
    values[3] = np.nan
    with pytest.raises(FieldError):
        ComplexField(grid, values)
    with pytest.raises(FieldError):
        PhaseSpaceField(grid, np.full((grid.size, grid.size), np.inf))


def test_grid_mismatch(grid, gaussian):
    other = ComplexField.zeros(make_grid(1, [128], [8.0]))
    with pytest.raises(GridMismatchError):
        gaussian + other
    with pytest.raises(GridMismatchError):
        inner(gaussian, other)


def test_l2_norm_of_gaussian(gaussian):
    assert l2_norm(gaussian) == pytest.approx(math.pi**0.25, rel=1e-12)


def test_inner_is_conjugate_linear_in_second_slot(gaussian):
    norm_sq = l2_norm(gaussian) ** 2
    assert inner(gaussian * 1j, gaussian) == pytest.approx(1j * norm_sq)
    assert inner(gaussian, gaussian * 1j) == pytest.approx(-1j * norm_sq)


def test_arithmetic(gaussian):
    doubled = gaussian + gaussian
    np.testing.assert_allclose(doubled.values, 2 * gaussian.values)
    np.testing.assert_allclose((doubled - gaussian).values, gaussian.values)
    np.testing.assert_allclose((3 * gaussian).values, 3 * gaussian.values)


def test_complex_field_file(tmp_path, grid, rng):
    field = ComplexField(grid, rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size))
    path = write_complex_field(field, tmp_path / "u.csv")
    assert path.read_text().splitlines()[0] == "x_index,re,im"
    np.testing.assert_array_equal(read_complex_field(grid, path).values, field.values)


def test_phase_space_field_file(tmp_path, rng):
    grid = make_grid(1, [8], [2.0])
    F = PhaseSpaceField(grid, rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)))
    path = write_phase_space_field(F, tmp_path / "W.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "x_index,xi_index,re,im"
    # row-major: x outer, xi inner
    assert lines[2].startswith("0,1,")
    np.testing.assert_array_equal(read_phase_space_field(grid, path).values, F.values)


def test_bad_header(tmp_path, grid):
    path = tmp_path / "bad.csv"
    path.write_text("index,real,imag\n0,1,0\n")
    with pytest.raises(FieldError, match="header"):
        read_complex_field(grid, path)


def test_wrong_row_count(tmp_path, grid):
    path = tmp_path / "short.csv"
    path.write_text("x_index,re,im\n0,1,0\n1,1,0\n")
    with pytest.raises(FieldError, match="rows"):
        read_complex_field(grid, path)


def test_missing_file(tmp_path, grid):
    with pytest.raises(FieldError):
        read_complex_field(grid, tmp_path / "absent.csv")
