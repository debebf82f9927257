import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from levitated2d.errors import DegenerateError, DiscordConditionError, FlatLandscapeWarning, PhysicalityError
from levitated2d.gaussian import (discord, entropy_function, ground_state_probability, max_discord_over_angle,
                                  metric_errors, occupancy, purity, rotate_frame, rotated_discord,
                                  state_metrics, symplectic_data)
from levitated2d.model import TWO_PI
from levitated2d.steady_state import mechanical_block, steady_state

from conftest import PRINTED_VM, random_stable_params
from oracles import discord_by_measurement, p00_quadrature, symplectic_eigs, thermal_entropy

seeds = st.integers(0, 2**32 - 1)


def two_mode_squeezed_thermal(r, nx, ny):
    a, b = 2 * nx + 1, 2 * ny + 1
    c, s = math.cosh(2 * r), math.sinh(2 * r)
    # thermal state passed through a two-mode squeezer
    S = np.block([[math.cosh(r) * np.eye(2), math.sinh(r) * np.diag([1, -1])],
                  [math.sinh(r) * np.diag([1, -1]), math.cosh(r) * np.eye(2)]])
    return S @ np.diag([a, a, b, b]) @ S.T


def local_symplectic(rng):
    def one():
        th, r = rng.uniform(0, math.pi), rng.uniform(-0.8, 0.8)
        R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        return R @ np.diag([math.exp(r), math.exp(-r)])
    S = np.zeros((4, 4))
    S[:2, :2], S[2:, 2:] = one(), one()
    return S


def steady_vm(seed):
    p = random_stable_params(np.random.default_rng(seed))
    return p, mechanical_block(steady_state(p))


@pytest.mark.parametrize("Vm, nx, ny", [(np.eye(4), 0.0, 0.0), (3 * np.eye(4), 1.0, 1.0),
                                        (np.diag([3.0, 3.0, 5.0, 5.0]), 1.0, 2.0)])
def test_occupancy_of_simple_states(Vm, nx, ny):
    assert occupancy(Vm, "x") == pytest.approx(nx)
    assert occupancy(Vm, "y") == pytest.approx(ny)


def test_printed_matrix_occupancies(printed_vm):
    assert occupancy(printed_vm, "x") == pytest.approx(0.55, abs=0.01)
    assert occupancy(printed_vm, "y") == pytest.approx(0.74, abs=0.01)


def test_purity_of_simple_states():
    assert purity(np.eye(4)) == pytest.approx((1.0, 1.0))
    mu, mu_ind = purity(3 * np.eye(4))
    assert mu == pytest.approx(1 / 9) and mu_ind == pytest.approx(1 / 9)


def test_printed_matrix_purity(printed_vm):
    mu, mu_ind = purity(printed_vm)
    assert mu == pytest.approx(0.209, abs=0.005)
    assert mu_ind == pytest.approx(0.192, abs=0.005)
    assert mu - mu_ind == pytest.approx(0.0167, abs=0.002)


def test_symplectic_data_of_simple_states():
    s = symplectic_data(np.eye(4))
    assert (s.I1, s.I2, s.I3, s.I4, s.d_plus, s.d_minus, s.physical) == (1, 1, 0, 1, 1, 1, True)
    s = symplectic_data(np.diag([3.0, 3.0, 5.0, 5.0]))
    assert (s.I1, s.I2, s.I3, s.I4) == pytest.approx((9, 25, 0, 225))
    assert (s.d_plus, s.d_minus) == pytest.approx((5, 3))


def test_symplectic_data_of_printed_matrix(printed_vm):
    s = symplectic_data(printed_vm)
    V = printed_vm
    assert s.I1 == pytest.approx(V[0, 0] * V[1, 1] - V[0, 1] * V[1, 0])
    assert s.I3 == pytest.approx(V[0, 2] * V[1, 3] - V[0, 3] * V[1, 2])
    assert s.I4 == pytest.approx(np.linalg.det(V))
    assert (s.d_plus, s.d_minus) == pytest.approx(tuple(symplectic_eigs(V)), rel=1e-10)


def test_unphysical_matrix_is_flagged():
    s = symplectic_data(0.5 * np.eye(4))
    assert not s.physical
    with pytest.raises(PhysicalityError):
        discord(0.5 * np.eye(4))


@pytest.mark.parametrize("nu", [1.0, 1.5, 3.0, 11.0, 101.0])
def test_entropy_function_matches_bose_sum(nu):
    assert entropy_function(nu) == pytest.approx(thermal_entropy(nu), abs=1e-12)


def test_entropy_function_rejects_subunit_argument():
    with pytest.raises(PhysicalityError):
        entropy_function(0.9)


@pytest.mark.parametrize("Vm", [np.eye(4) * 2, np.diag([3.0, 3.0, 1.5, 1.5])])
def test_product_states_have_zero_discord(Vm):
    assert discord(Vm, "X_from_Y") == pytest.approx(0.0, abs=1e-14)
    assert discord(Vm, "Y_from_X") == pytest.approx(0.0, abs=1e-14)


def test_printed_matrix_discords(printed_vm):
    assert discord(printed_vm, "X_from_Y") == pytest.approx(0.0423, abs=0.001)
    assert discord(printed_vm, "Y_from_X") == pytest.approx(0.0471, abs=0.002)


@pytest.mark.parametrize("r, nx, ny", [(0.05, 0.3, 0.6), (0.1, 0.0, 0.5), (0.2, 1.0, 0.2)])
def test_discord_matches_measurement_minimization(r, nx, ny):
    V = two_mode_squeezed_thermal(r, nx, ny)
    assert discord(V, "X_from_Y") == pytest.approx(discord_by_measurement(V, "y"), abs=1e-8)
    assert discord(V, "Y_from_X") == pytest.approx(discord_by_measurement(V, "x"), abs=1e-8)


def test_discord_of_printed_matrix_matches_measurement_minimization(printed_vm):
    assert discord(printed_vm, "X_from_Y") == pytest.approx(discord_by_measurement(printed_vm, "y"), abs=1e-8)


def test_discord_needs_mixed_measured_mode():
    with pytest.raises(DegenerateError):
        discord(np.diag([3.0, 3.0, 1.0, 1.0]), "X_from_Y")


def test_discord_condition_violation_raises():
    # weak, anisotropic correlations fall outside the closed-form region
    V = np.array([[3.0, 0, 0.3, 0], [0, 3.0, 0, 0.1], [0.3, 0, 1.2, 0], [0, 0.1, 0, 1.2]])
    assert symplectic_data(V).physical
    for direction in ("X_from_Y", "Y_from_X"):
        with pytest.raises(DiscordConditionError):
            discord(V, direction)
    assert state_metrics(V).discord_x_from_y is None


def test_ground_state_probability_simple_states():
    assert ground_state_probability(np.eye(4)) == pytest.approx(1.0)
    assert ground_state_probability(3 * np.eye(4)) == pytest.approx(0.25)


def test_printed_matrix_ground_state_probability(printed_vm):
    assert ground_state_probability(printed_vm) == pytest.approx(0.386, abs=0.01)


@pytest.mark.parametrize("Vm", [
    PRINTED_VM,
    two_mode_squeezed_thermal(0.15, 0.4, 0.9),
    np.array([[1.8, 0.1, 0.2, -0.3], [0.1, 2.5, 0.4, 0.0], [0.2, 0.4, 3.1, 0.2], [-0.3, 0.0, 0.2, 1.9]]),
])
def test_ground_state_probability_against_quadrature(Vm):
    value, err = p00_quadrature(Vm)
    assert err <= 1e-4
    assert ground_state_probability(Vm) == pytest.approx(value, abs=max(err, 1e-12))


def test_zero_correlation_consistency(printed_vm):
    # 1/((n_x+1)(n_y+1)) holds for per-mode isotropic blocks
    V = np.diag([2.13, 2.13, 2.47, 2.47])
    nx, ny = occupancy(V, "x"), occupancy(V, "y")
    assert ground_state_probability(V) == pytest.approx(1 / ((nx + 1) * (ny + 1)), rel=1e-12)
    V = printed_vm.copy()
    V[:2, 2:] = V[2:, :2] = 0
    assert discord(V, "X_from_Y") == pytest.approx(0.0, abs=1e-12)
    assert discord(V, "Y_from_X") == pytest.approx(0.0, abs=1e-12)


@given(seeds)
def test_steady_state_metrics_are_physical(seed):
    p, Vm = steady_vm(seed)
    m = state_metrics(Vm, p)
    d_plus, d_minus = m.symplectic_d
    assert d_plus >= d_minus >= 1 - 1e-9
    assert m.purity * math.sqrt(m.invariants_I[3]) == pytest.approx(1.0, rel=1e-12)
    assert 0 <= m.p00 <= 1
    assert 0 < m.purity <= 1 + 1e-12
    for d in (m.discord_x_from_y, m.discord_y_from_x):
        assert d is None or d >= -1e-9


@given(seeds, seeds)
def test_local_symplectic_invariance(seed, seed2):
    _, Vm = steady_vm(seed)
    S = local_symplectic(np.random.default_rng(seed2))
    W = S @ Vm @ S.T
    a, b = symplectic_data(Vm), symplectic_data(W)
    assert (b.I1, b.I2, b.I3, b.I4) == pytest.approx((a.I1, a.I2, a.I3, a.I4), rel=1e-8)
    for direction in ("X_from_Y", "Y_from_X"):
        try:
            d = discord(Vm, direction)
        except DiscordConditionError:
            continue
        # discord is a difference of O(1) entropies, so allow for cancellation
        assert discord(W, direction) == pytest.approx(d, rel=1e-7, abs=1e-10)


@given(seeds, st.floats(-math.pi, math.pi))
def test_pure_rotations_preserve_global_quantities(seed, phi):
    _, Vm = steady_vm(seed)
    W = rotate_frame(Vm, 1.0, 1.0, phi)
    a, b = symplectic_data(Vm), symplectic_data(W)
    assert b.I4 == pytest.approx(a.I4, rel=1e-10)
    assert (b.d_plus, b.d_minus) == pytest.approx((a.d_plus, a.d_minus), rel=1e-10)
    assert purity(W)[0] == pytest.approx(purity(Vm)[0], rel=1e-10)
    assert ground_state_probability(W) == pytest.approx(ground_state_probability(Vm), rel=1e-10)


def test_rotation_identity_and_quarter_turn(printed_vm):
    assert np.allclose(rotate_frame(printed_vm, 1.0, 1.0, 0.0), printed_vm)
    W = rotate_frame(printed_vm, 1.0, 1.0, math.pi / 2)
    assert np.allclose(W[:2, :2], printed_vm[2:, 2:])
    assert np.allclose(W[2:, 2:], printed_vm[:2, :2])
    assert np.allclose(np.abs(W[:2, 2:]), np.abs(printed_vm[2:, :2]))


def test_rotated_maximum_for_printed_matrix(printed_vm, params):
    phi, value = max_discord_over_angle(printed_vm, params.omega_x, params.omega_y)
    assert math.degrees(phi) == pytest.approx(-9.0, abs=1.0)
    assert value == pytest.approx(0.0482, abs=0.001)
    assert value >= rotated_discord(printed_vm, params.omega_x, params.omega_y, math.radians(-9.0))


def test_flat_landscape_for_isotropic_product_state():
    with pytest.warns(FlatLandscapeWarning):
        _, value = max_discord_over_angle(2 * np.eye(4), 1.0, 1.0)
    assert value == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("angle_deg", [-37.0, -9.0, 12.5, 61.0])
def test_recovers_applied_rotation(printed_vm, angle_deg):
    from levitated2d.gaussian import _rotation
    phi0, _ = max_discord_over_angle(printed_vm, 1.0, 1.0)
    R = _rotation(-math.radians(angle_deg))
    phi, _ = max_discord_over_angle(R @ printed_vm @ R.T, 1.0, 1.0)
    delta = (math.degrees(phi - phi0) - angle_deg + 90) % 180 - 90
    assert abs(delta) < 0.1


def test_state_metrics_bundle(params):
    m = state_metrics(mechanical_block(steady_state(params)), params)
    assert m.overlap_s == pytest.approx(0.842, abs=0.005)
    assert m.discord_symmetrized == pytest.approx(0.5 * (m.discord_x_from_y + m.discord_y_from_x))
    assert m.purity_difference == pytest.approx(m.purity - m.purity_independent)
    d = m.as_dict()
    assert set(d) >= {"n_x", "n_y", "purity", "p00", "discord_symmetrized"}


def test_metric_errors_statistics(params):
    ms = [state_metrics(mechanical_block(steady_state(params.replace(Gamma_x=params.Gamma_x * f))), params)
          for f in (0.98, 1.0, 1.02)]
    out = metric_errors(ms, ms[0], ms[2])
    vals = [m.n_x for m in ms]
    assert out["n_x"]["value"] == pytest.approx(np.mean(vals))
    assert out["n_x"]["stat"] == pytest.approx(np.std(vals, ddof=1))
    assert out["n_x"]["syst"] == pytest.approx(0.5 * abs(vals[2] - vals[0]))
    single = metric_errors(ms[:1])
    assert single["n_x"]["stat"] is None and single["n_x"]["syst"] is None
