import json

import numpy as np
import pytest

from fwsolitary.errors import BarrierBreachError, ConfigurationError, DomainError
from fwsolitary.spectral_core import Field, functional_Q, l2_norm, make_grid, residual_tw
from fwsolitary.traveling_wave import petviashvili_solve
from fwsolitary.variational_solver import (
    MinimizeConfig,
    PenaltySpec,
    check_h1_bound,
    config_from_json,
    extend_to_line,
    minimize_periodic,
    penalty_value,
    recover_multiplier,
)


@pytest.fixture(scope="module")
def result_q1(grid512):
    return minimize_periodic(MinimizeConfig(q=1.0, grid=grid512))


def test_penalty_values():
    spec = PenaltySpec(R=1.0)
    assert penalty_value(1.5, spec) == (0.5, 3.0)
    assert penalty_value(0.3, spec) == (0.0, 0.0)
    assert penalty_value(1.0, spec) == (0.0, 0.0)
    for t in (2.0, 2.5, -0.1):
        with pytest.raises(DomainError):
            penalty_value(t, spec)


def test_penalty_derivative_matches_difference():
    spec = PenaltySpec(R=1.3, scale=2.0)
    for t in (1.8, 2.5, 3.3):
        h = 1e-6
        fd = (penalty_value(t + h, spec)[0] - penalty_value(t - h, spec)[0]) / (2 * h)
        assert penalty_value(t, spec)[1] == pytest.approx(fd, rel=1e-6)


def test_penalty_spec_validation():
    with pytest.raises(ConfigurationError):
        PenaltySpec(R=0.0)
    with pytest.raises(ConfigurationError):
        PenaltySpec(R=1.0, scale=-1.0)
    assert PenaltySpec.default_for(1.5).R == pytest.approx(np.sqrt(8.0))


@pytest.mark.parametrize("q", [0.0, -1.0])
def test_config_rejects_nonpositive_mass(grid512, q):
    with pytest.raises(ConfigurationError, match="q > 0"):
        MinimizeConfig(q=q, grid=grid512)


def test_minimizer_q1(result_q1):
    r = result_q1
    assert r.success and r.status == "converged"
    assert r.Q_value == pytest.approx(1.0, rel=1e-12)
    assert l2_norm(residual_tw(r.minimizer, r.multiplier_c)) <= 1e-7
    assert 1.0 < r.multiplier_c < 4 / 3
    assert r.to_dict()["lagrange_multiplier"] == pytest.approx(-r.multiplier_c / 2)


def test_objective_never_increases(result_q1):
    tr = np.array(result_q1.objective_trace)
    assert np.all(np.diff(tr) <= 1e-12)


def test_recovered_multiplier_matches(result_q1):
    c = recover_multiplier(result_q1.minimizer)
    assert c == pytest.approx(result_q1.multiplier_c, rel=1e-7)


def test_multiplier_of_known_wave(wave12):
    assert recover_multiplier(wave12.field) == pytest.approx(1.2, rel=1e-9)


def test_multiplier_of_zero_field(grid512):
    with pytest.raises(DomainError):
        recover_multiplier(Field.zeros(grid512))


def test_h1_bound(result_q1):
    rep = check_h1_bound(result_q1, result_q1.multiplier_c)
    assert rep.linf_condition and rep.holds


def test_same_wave_as_fixed_point(result_q1, grid512):
    w = petviashvili_solve(result_q1.multiplier_c, grid512)
    assert l2_norm(result_q1.minimizer - w.field) < 1e-6
    assert w.mass_q == pytest.approx(1.0, rel=1e-6)


def test_barrier_breach(grid512):
    narrow = Field.from_function(grid512, lambda y: np.exp(-(y / 0.2) ** 2))
    with pytest.raises(BarrierBreachError):
        minimize_periodic(MinimizeConfig(q=1.0, grid=grid512), init=narrow)


def test_small_radius_limits_feasible_set(grid512):
    with pytest.raises(BarrierBreachError):
        minimize_periodic(MinimizeConfig(q=1.0, grid=grid512, r=0.5))


def test_callback_sees_every_iterate(grid512):
    seen = []
    r = minimize_periodic(MinimizeConfig(q=0.5, grid=grid512, max_iters=20),
                          callback=lambda k, u: seen.append(k))
    assert seen == list(range(r.iterations + 1))
    assert r.status == "max_iters" and not r.success


def test_config_from_json_nested_and_dotted():
    cfg, spec = config_from_json(json.dumps({"q": 2.0, "N": 256, "penalty": {"R": 3.0}}))
    assert cfg.q == 2.0 and cfg.grid.N == 256 and cfg.grid.P == 40.0
    assert spec.R == 3.0 and spec.scale == 1.0
    cfg, spec = config_from_json({"q": 1.0, "penalty.scale": 2.0})
    assert spec.scale == 2.0 and spec.R == pytest.approx(PenaltySpec.default_for(1.0).R)


def test_extend_to_line(result_q1):
    u = result_q1.minimizer
    big = extend_to_line(u, 80.0)
    assert big.grid.P == 80.0 and big.grid.spacing == pytest.approx(u.grid.spacing)
    assert functional_Q(big) == pytest.approx(functional_Q(u), rel=1e-12)
    mid = big.values[big.grid.N // 2 - 256: big.grid.N // 2 + 256]
    plateau = np.abs(u.grid.nodes) <= 35.0
    assert np.max(np.abs(mid - u.values)[plateau]) < 1e-10
    assert np.max(np.abs(mid - u.values)) < 5e-6
    with pytest.raises(ConfigurationError):
        extend_to_line(u, 20.0)
