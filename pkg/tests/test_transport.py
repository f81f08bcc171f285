import math

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import quad

from modspace.classical import FlowOptions, flow, phase_space_points
from modspace.errors import ConvergenceError
from modspace.fields import PhaseSpaceField
from modspace.grid import MixedNormSpec, make_grid, mixed_norm
from modspace.harness.initial import gaussian as gaussian_field
from modspace.modulation import WindowEvolution, evolved_window, mod_norm
from modspace.potentials import PotentialModel, build_potential
from modspace.schrod import free_propagate, propagate_dt
from modspace.settings import get_settings
from modspace.transport import (
    PhaseIntegralSpec,
    PhaseSpaceInterpolator,
    RemainderSpec,
    change_of_variables_check,
    contraction_constant,
    fixed_point_residual,
    increment_ratios,
    leading_transport,
    phase_h,
    picard_propagate,
    relative_l2,
    remainder_apply,
    write_iteration_report,
)
from modspace.wpt import Window, wpt


@pytest.fixture
def transport_grid():
    return make_grid(1, [256], [24.0])


def test_phase_h():
    V = build_potential("harmonic", 1)
    f = np.array([[2.0]])
    g = np.array([[3.0]])
    # 9/2 + 2 - 4
    assert phase_h(V, 0.0, f, g)[0] == pytest.approx(2.5)


def test_interpolator_reproduces_nodes(grid, gaussian, window):
    W = wpt(gaussian, window)
    x = grid.points[:, None, :].repeat(grid.size, axis=1)
    xi = grid.dual_points[None, :, :].repeat(grid.size, axis=0)
    values, outside = PhaseSpaceInterpolator(W)(x, xi)
    assert outside == 0
    np.testing.assert_allclose(values, W.values, atol=1e-10)


def test_interpolator_between_nodes(grid, gaussian, window):
    W = wpt(gaussian, window)
    x = np.array([[0.37], [-1.21]])
    xi = np.array([[0.55], [0.8]])
    values, _ = PhaseSpaceInterpolator(W)(x, xi)
    exact = math.sqrt(math.pi) * np.exp(
        -(x[:, 0] ** 2 + xi[:, 0] ** 2) / 4 - 0.5j * x[:, 0] * xi[:, 0]
    )
    np.testing.assert_allclose(values, exact, atol=1e-3)


def test_interpolator_counts_far_targets(grid, gaussian, window):
    W = wpt(gaussian, window)
    x = np.array([[100.0], [0.0], [grid.axes[0][-1] + grid.spacing[0]]])
    xi = np.zeros((3, 1))
    values, outside = PhaseSpaceInterpolator(W)(x, xi)
    assert outside == 1
    assert values[0] == 0


def test_leading_transport_at_zero_time(gaussian, window):
    V = build_potential("cosine", 1)
    W = leading_transport(gaussian, window, V, 0.0)
    np.testing.assert_array_equal(W.values, wpt(gaussian, window).values)


@pytest.mark.parametrize("t", [1.0, -0.5])
def test_leading_transport_is_exact_without_potential(transport_grid, t):
    u0 = gaussian_field(transport_grid)
    phi0 = Window(gaussian_field(transport_grid))
    V = build_potential("free", 1)
    W = leading_transport(u0, phi0, V, t, FlowOptions(step=0.05))
    exact = wpt(free_propagate(u0, t), evolved_window(phi0, t, WindowEvolution.FREE))
    assert relative_l2(exact, W) <= 1e-3


def test_phase_integral_nodes(transport_grid):
    u0 = gaussian_field(transport_grid)
    phi0 = Window(gaussian_field(transport_grid))
    V = build_potential("free", 1)
    coarse = leading_transport(u0, phi0, V, 1.0, phase=PhaseIntegralSpec(nodes=3))
    fine = leading_transport(u0, phi0, V, 1.0, FlowOptions(step=0.05))
    # h is constant along free characteristics, so few nodes suffice
    assert relative_l2(fine, coarse) <= 1e-10


def _without_hessian_shortcut(V):
    return PotentialModel(
        name="harmonic_general",
        dim=V.dim,
        value=V.value,
        grad=V.grad,
        hess=V.hess,
        potential_class=V.potential_class,
        c1_bound=V.c1_bound,
        c2_bound=V.c2_bound,
    )


def test_remainder_quadrature_matches_quadratic_shortcut(gaussian, window):
    V = build_potential("harmonic", 1)
    fast = remainder_apply(gaussian, window, V, 0.0)
    general = remainder_apply(gaussian, window, _without_hessian_shortcut(V), 0.0)
    assert np.abs(fast.values).max() > 0.1
    np.testing.assert_allclose(general.values, fast.values, atol=1e-10)


def test_remainder_vanishes_without_potential(gaussian, window):
    R = remainder_apply(gaussian, window, build_potential("free", 1), 0.3)
    assert not R.values.any()


def test_remainder_spec_nodes():
    spec = RemainderSpec(tau_step=0.05)
    np.testing.assert_allclose(spec.tau_nodes(0.5), np.linspace(0, 0.5, 11))
    np.testing.assert_allclose(spec.tau_nodes(-0.12), np.linspace(0, -0.12, 4))
    assert len(spec.tau_nodes(0.0)) == 1


def test_picard_reports_non_convergence():
    grid = make_grid(1, [32], [8.0])
    u0 = gaussian_field(grid)
    phi0 = Window(gaussian_field(grid))
    spec = RemainderSpec(max_iterations=1, tolerance=1e-14, tau_step=0.05)
    with pytest.raises(ConvergenceError) as info:
        picard_propagate(u0, phi0, build_potential("cosine", 1), 0.1, spec)
    assert len(info.value.increments) == 1


def test_change_of_variables_at_zero_time(gaussian, window):
    report = change_of_variables_check(build_potential("cosine", 1), 0.0, gaussian, window)
    assert report.relative_difference == 0.0


def test_change_of_variables_harmonic(gaussian, window):
    report = change_of_variables_check(
        build_potential("harmonic", 1), 0.5, gaussian, window, p=1.0
    )
    assert report.relative_difference <= 1e-3
    assert report.max_det_deviation <= 1e-9


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["harmonic", "cosine"])
def test_picard_matches_reference_solution(tmp_path, kind):
    grid = make_grid(1, [256], [32.0])
    u0 = gaussian_field(grid)
    phi0 = Window(gaussian_field(grid))
    V = build_potential(kind, 1)
    t = 0.5
    result = picard_propagate(u0, phi0, V, t, RemainderSpec())
    reference = wpt(propagate_dt(u0, V, t), evolved_window(phi0, t, WindowEvolution.FREE))
    assert relative_l2(reference, result.field) <= 1e-2
    increments = result.increments
    assert len(increments) <= 8
    assert result.monotone
    assert 0 < result.contraction <= 0.5
    assert fixed_point_residual(result) <= 1e-5

    path = write_iteration_report(result.report, tmp_path / "iterations.csv")
    assert path.read_text().splitlines()[0] == "k,increment_l2,wall_seconds"


def test_interpolator_uses_zero_extension_inside_pad(grid):
    # carrier-free unit field: the spline sees a plateau that drops to zero past the edge
    carrier = np.exp(-0.5j * (grid.points @ grid.dual_points.T))
    F = PhaseSpaceField(grid, carrier)
    last = grid.axes[0][-1]
    dx = grid.spacing[0]
    x = np.array([[last], [last + 0.5 * dx], [last + 2.5 * dx]])
    xi = np.zeros((3, 1))
    values, outside = PhaseSpaceInterpolator(F)(x, xi)
    assert values[0] == pytest.approx(1.0, abs=1e-10)
    assert 0.2 < abs(values[1]) < 0.9
    assert values[2] == 0
    assert outside == 1


@pytest.mark.parametrize("kind", ["harmonic", "cosine", "harmonic_cosine"])
def test_leading_transport_modulus_ignores_phase(transport_grid, kind):
    u0 = gaussian_field(transport_grid, center=(0.5,), momentum=(1.0,))
    phi0 = Window(gaussian_field(transport_grid))
    V = build_potential(kind, 1)
    t = 0.8
    opts = FlowOptions(step=0.01)
    W = leading_transport(u0, phi0, V, t, opts)
    x, xi = phase_space_points(transport_grid)
    start = flow(V, t, x, xi, 0.0, opts)
    unphased, _ = PhaseSpaceInterpolator(wpt(u0, phi0))(start.f, start.g)
    np.testing.assert_allclose(np.abs(W.values), np.abs(unphased), atol=1e-12)


@pytest.mark.parametrize("p", [1.0, 2.0, math.inf])
def test_leading_transport_preserves_diagonal_norms(transport_grid, p):
    u0 = gaussian_field(transport_grid)
    phi0 = Window(gaussian_field(transport_grid))
    V = build_potential("harmonic_cosine", 1)
    spec = MixedNormSpec(p=p, q=p)
    W = leading_transport(u0, phi0, V, 1.0)
    assert mixed_norm(W, spec) <= (1 + 1e-2) * mod_norm(u0, phi0, spec)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_change_of_variables_quarter_rotation_is_exact(square_grid, p):
    u0 = gaussian_field(square_grid)
    phi0 = Window(gaussian_field(square_grid))
    report = change_of_variables_check(
        build_potential("harmonic", 1), math.pi / 2, u0, phi0, p=p
    )
    assert report.relative_difference <= 1e-10


def _cosine_remainder(x, xi, width=1.0):
    # V(y) - V(x) - V'(x)(y - x) for V = cos, the Taylor kernel in closed form
    def integrand(y, part):
        taylor = np.cos(y) - np.cos(x) + (y - x) * np.sin(x)
        value = np.exp(-((y - x) ** 2) / 2 - y * y / (2 * width**2)) * taylor
        return value * (np.cos(y * xi) if part == "re" else -np.sin(y * xi))

    re, _ = quad(integrand, x - 20, x + 20, args=("re",), limit=400, epsabs=1e-13)
    im, _ = quad(integrand, x - 20, x + 20, args=("im",), limit=400, epsabs=1e-13)
    return re + 1j * im


def test_remainder_matches_direct_quadrature(grid, gaussian, window, rng):
    R = remainder_apply(gaussian, window, build_potential("cosine", 1), 0.0)
    n = grid.size
    xs = rng.integers(n // 4, 3 * n // 4, size=5)
    xis = rng.integers(n // 2 - 20, n // 2 + 20, size=5)
    for a, k in zip(xs, xis):
        expected = _cosine_remainder(grid.axes[0][a], grid.dual_axes[0][k])
        assert abs(R.values[a, k] - expected) <= 1e-6


def test_increment_ratios_and_contraction():
    increments = [1e-2, 2e-3, 6e-4, 1e-4]
    np.testing.assert_allclose(increment_ratios(increments), [0.2, 0.3, 1 / 6])
    assert contraction_constant(increments, 0.5) == pytest.approx(0.6)
    assert contraction_constant(increments, -0.5) == pytest.approx(0.6)
    assert contraction_constant([1e-3], 0.5) == 0.0


def _picard_small(kind="cosine"):
    grid = make_grid(1, [32], [8.0])
    u0 = gaussian_field(grid)
    phi0 = Window(gaussian_field(grid))
    spec = RemainderSpec(tolerance=1e-8, tau_step=0.05)
    return picard_propagate(u0, phi0, build_potential(kind, 1), 0.1, spec)


def test_picard_result_flags_growing_increments():
    result = _picard_small()
    assert result.monotone
    report = pd.DataFrame(
        {"k": [1, 2, 3], "increment_l2": [1e-2, 1e-3, 2e-3], "wall_seconds": [0, 0, 0]}
    )
    grown = type(result)(result.field, result.slices, report, result.transport)
    assert not grown.monotone
    assert grown.contraction == pytest.approx(2.0 / 0.1)


def test_picard_is_deterministic():
    first, second = _picard_small(), _picard_small()
    np.testing.assert_array_equal(first.field.values, second.field.values)
    assert first.increments == second.increments


def test_results_do_not_depend_on_thread_count(monkeypatch, transport_grid):
    def run():
        get_settings.cache_clear()
        u0 = gaussian_field(transport_grid, momentum=(1.0,))
        phi0 = Window(gaussian_field(transport_grid))
        leading = leading_transport(u0, phi0, build_potential("cosine", 1), 0.5)
        return leading.values, _picard_small().field.values

    monkeypatch.setenv("MODSPACE_THREADS", "1")
    serial = run()
    monkeypatch.setenv("MODSPACE_THREADS", "4")
    threaded = run()
    for a, b in zip(serial, threaded):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)
