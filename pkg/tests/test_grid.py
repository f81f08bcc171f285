import math

import numpy as np
import pytest
from pydantic import ValidationError

from modspace.errors import FieldError, GridError
from modspace.fields import ComplexField, PhaseSpaceField
from modspace.grid import MixedNormSpec, make_grid, mixed_norm


@pytest.mark.parametrize(
    "dim,counts,half_widths",
    [
        (1, [100], [8.0]),
        (1, [4], [8.0]),
        (1, [64], [-1.0]),
        (1, [64], [math.inf]),
        (3, [8, 8, 8], [1.0, 1.0, 1.0]),
        (2, [64], [8.0]),
    ],
)
def test_make_grid_rejects_bad_parameters(dim, counts, half_widths):
    with pytest.raises(GridError):
        make_grid(dim, counts, half_widths)


def test_spacings():
    grid = make_grid(1, [64], [8.0])
    assert grid.spacing[0] == pytest.approx(0.25)
    assert grid.dual_spacing[0] == pytest.approx(math.pi / 8)
    assert grid.axes[0][0] == -8.0
    assert grid.dual_axes[0][32] == 0.0
    assert not grid.is_square_phase_space


def test_square_phase_space(square_grid):
    assert square_grid.is_square_phase_space
    np.testing.assert_allclose(square_grid.axes[0], square_grid.dual_axes[0], atol=1e-12)


def test_two_dimensional_points():
    grid = make_grid(2, [8, 16], [1.0, 2.0])
    assert grid.size == 128
    assert grid.points.shape == (128, 2)
    # C order: the last axis varies fastest
    assert grid.points[1, 0] == grid.points[0, 0]
    assert grid.points[1, 1] > grid.points[0, 1]


def test_fourier_of_gaussian(grid):
    x = grid.points[:, 0]
    xi = grid.dual_points[:, 0]
    spectrum = grid.fourier(np.exp(-0.5 * x * x))
    np.testing.assert_allclose(
        spectrum, math.sqrt(2 * math.pi) * np.exp(-0.5 * xi * xi), atol=1e-12
    )


def test_fourier_inverse(grid, rng):
    values = rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size)
    back = grid.inverse_fourier(grid.fourier(values))
    np.testing.assert_allclose(back, values, atol=1e-12)


def test_fourier_inverse_two_dimensional(rng):
    grid = make_grid(2, [16, 32], [4.0, 6.0])
    values = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    np.testing.assert_allclose(grid.inverse_fourier(grid.fourier(values)), values, atol=1e-12)


def test_mixed_norm_of_constant():
    grid = make_grid(1, [32], [4.0])
    F = PhaseSpaceField(grid, np.ones((32, 32)))
    total = (2 * 4.0) * (32 * math.pi / 4.0)
    assert mixed_norm(F, MixedNormSpec(p=1, q=1)) == pytest.approx(total)
    assert mixed_norm(F, MixedNormSpec(p=2, q=2)) == pytest.approx(math.sqrt(total))
    assert mixed_norm(F, MixedNormSpec(p=math.inf, q=math.inf)) == pytest.approx(1.0)
    assert mixed_norm(F, MixedNormSpec(p=math.inf, q=1)) == pytest.approx(32 * math.pi / 4.0)


def test_mixed_norm_orders_axes():
    grid = make_grid(1, [8], [4.0])
    values = np.zeros((8, 8))
    values[:, 0] = 1.0  # constant in x at a single xi
    F = PhaseSpaceField(grid, values)
    dx, dxi = grid.spacing[0], grid.dual_spacing[0]
    assert mixed_norm(F, MixedNormSpec(p=1, q=math.inf)) == pytest.approx(8 * dx)
    assert mixed_norm(F, MixedNormSpec(p=math.inf, q=1)) == pytest.approx(dxi)


def test_mixed_norm_spec_parsing():
    spec = MixedNormSpec.parse("inf, 1")
    assert math.isinf(spec.p) and spec.q == 1
    assert spec.label == "M^{inf,1}"
    with pytest.raises(ValidationError):
        MixedNormSpec(p=0.5, q=1)


def test_field_is_validated_on_grid(grid):
    with pytest.raises(FieldError):
        ComplexField(grid, np.zeros(grid.size + 1))


PAIRS = [MixedNormSpec(p=p, q=q) for p in (1, 2, math.inf) for q in (1, 2, math.inf)]


def random_phase_space_field(grid, rng):
    shape = (grid.size, grid.size)
    return PhaseSpaceField(grid, rng.normal(size=shape) + 1j * rng.normal(size=shape))


@pytest.mark.parametrize("spec", PAIRS, ids=lambda s: s.label)
def test_mixed_norm_is_homogeneous(grid, rng, spec):
    F = random_phase_space_field(grid, rng)
    c = 2.5 - 1.5j
    assert mixed_norm(F * c, spec) == pytest.approx(abs(c) * mixed_norm(F, spec), rel=1e-12)


@pytest.mark.parametrize("spec", PAIRS, ids=lambda s: s.label)
def test_mixed_norm_triangle_inequality(grid, rng, spec):
    F = random_phase_space_field(grid, rng)
    G = random_phase_space_field(grid, rng)
    assert mixed_norm(F + G, spec) <= mixed_norm(F, spec) + mixed_norm(G, spec) + 1e-12


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0, math.inf])
def test_diagonal_mixed_norm_is_flat_sum(grid, rng, p):
    F = random_phase_space_field(grid, rng)
    magnitude = np.abs(F.values)
    if math.isinf(p):
        expected = magnitude.max()
    else:
        weight = grid.cell_volume * grid.dual_cell_volume
        expected = ((magnitude**p).sum() * weight) ** (1 / p)
    assert mixed_norm(F, MixedNormSpec(p=p, q=p)) == pytest.approx(expected, rel=1e-12)


def _kinked(grid):
    # exp(-|x|) has a kink at x = 0, so Riemann sums converge at O(dx^2)
    x = grid.axes[0][:, None]
    xi = grid.dual_axes[0][None, :]
    return PhaseSpaceField(grid, np.exp(-np.abs(x) - xi * xi))


@pytest.mark.parametrize("p,q", [(1, 1), (2, 2), (1, 2)])
def test_mixed_norm_refinement_is_second_order(p, q):
    exact = (2.0 / p) ** (1.0 / p) * math.sqrt(math.pi / q) ** (1.0 / q)
    spec = MixedNormSpec(p=p, q=q)
    errors = [
        abs(mixed_norm(_kinked(make_grid(1, [N], [16.0])), spec) - exact)
        for N in (64, 128)
    ]
    assert 3.5 <= errors[0] / errors[1] <= 4.5
