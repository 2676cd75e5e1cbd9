import numpy as np
import pytest
from scipy import integrate

from fwsolitary.errors import DataError, DomainError
from fwsolitary.spectral_core import (
    Field,
    apply_inv_cL,
    functional_Q,
    l2_norm,
    make_grid,
    residual_tw,
    shift,
)
from fwsolitary.traveling_wave import (
    PEAKON_MASS,
    WaveProfile,
    decay_rate,
    fit_decay,
    kernel_smooth,
    peakon_reference,
    petviashvili_solve,
)


def amplitude_closed_form(c):
    # crest height from the first integral u'^2 (c - u)^2 = u^2 (c(c-1) - (c - 2/3) u + u^2/4)
    return 2.0 * (c - 2.0 / 3.0 - np.sqrt(4.0 / 9.0 - c / 3.0))


def test_decay_rate_values():
    assert decay_rate(4 / 3) == pytest.approx(0.5)
    assert decay_rate(2.0) == pytest.approx(np.sqrt(0.5))
    for c in (1.0, 0.9, -2.0):
        with pytest.raises(DomainError):
            decay_rate(c)


def test_kernel_value_at_peakon_speed():
    assert kernel_smooth(0.0, 4 / 3) == pytest.approx(9 / 16)


@pytest.mark.parametrize("c", [1.2, 4 / 3, 2.0])
def test_kernel_fourier_transform(c):
    # int g(y) cos(xi y) dy = 1 / (c^2 xi^2 + c (c - 1))
    for xi in (0.0, 0.5, 2.0):
        val = 2 * integrate.quad(lambda y: kernel_smooth(y, c) * np.cos(xi * y), 0, np.inf,
                                 limit=400)[0]
        assert val == pytest.approx(1 / (c * c * xi * xi + c * (c - 1)), rel=1e-7)


def test_inverse_operator_splits_into_local_plus_kernel(grid512):
    c = 1.5
    f = lambda x: np.exp(-x ** 2)
    w = apply_inv_cL(Field.from_function(grid512, f), c)
    for j in (200, 256, 300):
        y0 = grid512.nodes[j]
        conv = integrate.quad(lambda x: kernel_smooth(y0 - x, c) * f(x), -20, 20,
                              points=[y0], limit=200)[0]
        assert w.values[j] == pytest.approx(f(y0) / c + conv, abs=1e-10)


def test_wave_at_c12(wave12):
    w = wave12
    assert w.converged and w.residual_l2 <= 1e-10
    assert w.stabilizer == pytest.approx(1.0, abs=1e-8)
    assert np.max(w.field.values) == pytest.approx(amplitude_closed_form(1.2), rel=1e-6)
    assert np.argmax(w.field.values) == w.grid.N // 2
    # even about the crest
    v = w.field.values
    assert np.max(np.abs(v[1:] - v[1:][::-1])) < 1e-8
    assert np.min(v) > -1e-12


@pytest.mark.parametrize("c", [1.1, 1.25, 1.3])
def test_amplitude_closed_form(c):
    w = petviashvili_solve(c, make_grid(60.0, 1024))
    assert w.converged
    assert np.max(w.field.values) == pytest.approx(amplitude_closed_form(c), rel=1e-5)


def test_solver_rejects_subsonic_speed(grid512):
    with pytest.raises(DomainError):
        petviashvili_solve(0.9, grid512)


def test_nonconvergence_is_flagged(grid512):
    w = petviashvili_solve(1.2, grid512, max_iters=3)
    assert not w.converged and w.status == "max_iters"


def test_collapse_is_flagged(grid512):
    w = petviashvili_solve(1.2, grid512, init=Field(grid512, -np.exp(-grid512.nodes ** 2)))
    assert not w.converged and w.status.startswith("diverged")


def test_profile_invariant_rejects_large_residual(wave12):
    with pytest.raises(DataError):
        WaveProfile(field=wave12.field, speed_c=1.3, mass_q=1.0, residual_l2=1.0, tol=1e-10)


def test_peakon_reference_is_an_approximate_solution():
    p = peakon_reference(make_grid(40.0, 4096))
    assert p.residual_l2 < 1e-4
    assert p.speed_c == pytest.approx(4 / 3)


def test_peakon_mass():
    # trapezoid error of the corner is (32/9) h^2 / 12, so a fine grid is needed
    p = peakon_reference(make_grid(40.0, 65536))
    assert p.mass_q == pytest.approx(PEAKON_MASS, abs=1e-6)


def test_fit_decay_on_exact_exponential(grid512):
    f = Field.from_function(grid512, lambda y: np.exp(-0.6 * np.abs(y)))
    fit = fit_decay(f)
    assert fit.sigma_fit == pytest.approx(0.6, rel=1e-6)
    assert fit.r_squared > 0.999999


def test_fit_decay_is_translation_invariant(wave12):
    a = fit_decay(wave12)
    b = fit_decay(WaveProfile(shift(wave12.field, 11.0), 1.2, wave12.mass_q, 0.0))
    assert a.sigma_fit == pytest.approx(b.sigma_fit, rel=1e-3)


def test_fit_decay_wave_c12(wave12):
    fit = fit_decay(wave12)
    assert fit.accepted
    assert fit.relative_error < 0.01


def test_fit_decay_too_few_points():
    g = make_grid(5.0, 32)
    with pytest.raises(DataError):
        fit_decay(Field.from_function(g, lambda y: np.exp(-np.abs(y))))


def test_wave_translates_residual(wave12):
    moved = shift(wave12.field, 5.3)
    assert l2_norm(residual_tw(moved, 1.2)) < 1e-9
    assert functional_Q(moved) == pytest.approx(wave12.mass_q, rel=1e-12)
