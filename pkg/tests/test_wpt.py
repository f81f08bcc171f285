import math

import numpy as np
import pytest

from modspace.errors import DegenerateWindowError
from modspace.fields import ComplexField, PhaseSpaceField, l2_norm
from modspace.grid import MixedNormSpec, make_grid, mixed_norm
from modspace.harness.initial import gaussian as gaussian_field
from modspace.harness.initial import hermite
from modspace.wpt import Window, inner_product, invert, shift, wpt, wpt_adjoint


def random_field(grid, rng):
    return ComplexField(grid, rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size))


def test_gaussian_pair_closed_form(grid, gaussian, window):
    W = wpt(gaussian, window)
    x = grid.points[:, 0][:, None]
    xi = grid.dual_points[:, 0][None, :]
    expected = math.sqrt(math.pi) * np.exp(-(x * x + xi * xi) / 4 - 0.5j * x * xi)
    np.testing.assert_allclose(W.values, expected, atol=1e-10)


def test_gaussian_m11(fine_grid):
    u = gaussian_field(fine_grid)
    W = wpt(u, Window(u))
    assert mixed_norm(W, MixedNormSpec(p=1, q=1)) == pytest.approx(4 * math.pi**1.5, rel=1e-9)


@pytest.mark.parametrize("width", [1.0, 0.5, 2.0])
def test_inversion(grid, window, rng, width):
    f = random_field(grid, rng)
    psi = Window(gaussian_field(grid, width=width))
    back = invert(wpt(f, window), psi, window)
    np.testing.assert_allclose(back.values, f.values, atol=1e-10)


def test_plancherel(grid, window, rng):
    f = random_field(grid, rng)
    W = wpt(f, window)
    expected = 2 * math.pi * l2_norm(f) ** 2 * window.l2_norm_sq
    assert mixed_norm(W, MixedNormSpec(p=2, q=2)) ** 2 == pytest.approx(expected, rel=1e-10)


def test_adjoint(grid, window, rng):
    f = random_field(grid, rng)
    G = PhaseSpaceField(grid, rng.normal(size=(grid.size, grid.size)) + 0j)
    weight = grid.cell_volume * grid.dual_cell_volume / (2 * math.pi)
    lhs = np.vdot(G.values, wpt(f, window).values) * weight
    rhs = np.vdot(wpt_adjoint(G, window).values, f.values) * grid.cell_volume
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_translation_covariance(grid, gaussian, window):
    m = 5
    a = m * grid.spacing[0]
    shifted = wpt(shift(gaussian, [m]), window).values
    xi = grid.dual_points[:, 0]
    expected = np.roll(wpt(gaussian, window).values, m, axis=0) * np.exp(-1j * a * xi)
    np.testing.assert_allclose(shifted, expected, atol=1e-12)


def test_two_dimensional_inversion(rng):
    grid = make_grid(2, [8, 8], [3.0, 3.0])
    f = random_field(grid, rng)
    phi = Window(gaussian_field(grid))
    assert wpt(f, phi).values.shape == (64, 64)
    np.testing.assert_allclose(invert(wpt(f, phi), phi, phi).values, f.values, atol=1e-10)


def test_orthogonal_windows_are_degenerate(grid, window, gaussian):
    odd = Window(hermite(grid, 1))
    assert abs(inner_product(odd, window)) < 1e-12
    with pytest.raises(DegenerateWindowError):
        invert(wpt(gaussian, window), odd, window)


def test_zero_window(grid):
    with pytest.raises(DegenerateWindowError):
        Window(ComplexField.zeros(grid))


def test_linear_in_signal(grid, window, rng):
    f, g = random_field(grid, rng), random_field(grid, rng)
    a, b = 1.5 - 0.5j, -0.25 + 2j
    combined = wpt(f * a + g * b, window)
    expected = wpt(f, window) * a + wpt(g, window) * b
    np.testing.assert_allclose(combined.values, expected.values, atol=1e-10)


@pytest.mark.parametrize("c", [2.0, 1j, 0.5 - 1.5j])
def test_conjugate_linear_in_window(grid, gaussian, window, c):
    scaled = wpt(gaussian, Window(window.field * c))
    expected = wpt(gaussian, window) * np.conj(c)
    np.testing.assert_allclose(scaled.values, expected.values, atol=1e-12)
