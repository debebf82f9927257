import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from levitated2d.model import TWO_PI
from levitated2d.presets import table1
from levitated2d.spectrum import (CSV_COLUMNS, decompose, heterodyne_psd, sideband_peaks, spectrum_grid,
                                  symmetrized_bright_psd, transfer_matrix_psd, weighted_bright_psd)
from levitated2d.steady_state import steady_state

from conftest import random_stable_params
from oracles import variance_by_integration

seeds = st.integers(0, 2**32 - 1)
W = TWO_PI * np.linspace(-200e3, 200e3, 200)


def test_no_coupling_gives_no_signal(params):
    p = params.replace(g_x=0.0, g_y=0.0)
    total, parts = weighted_bright_psd(W, p)
    assert np.all(total == 0)
    assert np.all(heterodyne_psd(W, p) == 1.0)
    assert np.allclose(transfer_matrix_psd(W, p), 1.0, rtol=0, atol=1e-15)


def test_without_heating_only_quantum_term_remains(params):
    total, (tx, ty, tq) = weighted_bright_psd(W, params.replace(Gamma_x=0.0, Gamma_y=0.0))
    assert np.all(tx == 0) and np.all(ty == 0)
    assert np.array_equal(total, tq)


def test_closed_form_matches_transfer_matrix(params):
    assert np.allclose(heterodyne_psd(W, params, shot_subtracted=True),
                       transfer_matrix_psd(W, params, shot_subtracted=True), rtol=1e-9, atol=0)


def test_single_mode_backaction_only_matches_transfer_matrix(params):
    p = params.replace(Gamma_x=0.0, Gamma_y=0.0, g_y=0.0)
    assert np.allclose(heterodyne_psd(W, p), transfer_matrix_psd(W, p), rtol=1e-9, atol=0)


@given(seeds)
def test_oracle_equivalence_on_random_draws(seed):
    rng = np.random.default_rng(seed)
    p = random_stable_params(rng)
    w = TWO_PI * rng.uniform(-400e3, 400e3, 64)
    a = heterodyne_psd(w, p, shot_subtracted=True)
    b = transfer_matrix_psd(w, p, shot_subtracted=True)
    assert np.allclose(a, b, rtol=1e-9, atol=1e-13 * np.max(b))


def test_detection_off_gives_shot_noise(params):
    p = params.replace(eta=1e-300)
    assert np.allclose(heterodyne_psd(W, p), 1.0, rtol=0, atol=1e-250)


@given(seeds)
def test_classical_terms_are_even(seed):
    rng = np.random.default_rng(seed)
    p = random_stable_params(rng)
    w = TWO_PI * rng.uniform(1e3, 400e3, 32)
    _, (tx, ty, _) = weighted_bright_psd(w, p)
    _, (tx_m, ty_m, _) = weighted_bright_psd(-w, p)
    for a, b in ((tx, tx_m), (ty, ty_m)):
        nz = a > 0
        assert np.all(np.abs(a[nz] - b[nz]) <= 1e-10 * a[nz])


@given(seeds)
def test_quantum_term_is_asymmetric_for_red_detuning(seed):
    p = random_stable_params(np.random.default_rng(seed))
    if p.g_x == 0 and p.g_y == 0:
        return
    D = abs(p.detuning)
    _, (_, _, tq) = weighted_bright_psd(np.array([-D, D]), p)
    # the vacuum term is cavity-enhanced at the Stokes offset -|detuning|
    assert tq[0] > tq[1]


@given(seeds, st.floats(0.05, 0.95))
def test_psd_nondecreasing_in_efficiency(seed, eta):
    rng = np.random.default_rng(seed)
    p = random_stable_params(rng)
    w = TWO_PI * rng.uniform(-400e3, 400e3, 32)
    lo = heterodyne_psd(w, p.replace(eta=eta))
    hi = heterodyne_psd(w, p.replace(eta=min(1.0, eta + 0.05)))
    assert np.all(hi >= lo)


def test_sidebands_and_classical_variant(params):
    peaks = sideband_peaks(params)
    stokes, anti = peaks["stokes"], peaks["anti_stokes"]
    assert stokes["side"] == "negative" and stokes["quantum_dominated"]
    assert not anti["quantum_dominated"]
    # the quantum-dominated Stokes line is the weaker one
    assert stokes["peak"] < anti["peak"]
    w = TWO_PI * stokes["freq_hz"]
    full = heterodyne_psd(w, params, shot_subtracted=True)
    classical = heterodyne_psd(w, params, shot_subtracted=True, mirrored=True)
    assert full > 2 * classical


def test_decomposition_sums_and_is_nonnegative(params):
    for shot_subtracted in (False, True):
        dec = decompose(W, params, shot_subtracted=shot_subtracted)
        parts = dec.term_gamma_x + dec.term_gamma_y + dec.term_quantum
        assert np.all(dec.term_gamma_x >= 0) and np.all(dec.term_gamma_y >= 0) and np.all(dec.term_quantum >= 0)
        assert np.allclose(dec.total, parts + (0.0 if shot_subtracted else 1.0), rtol=1e-12, atol=0)
    assert np.allclose(dec.total, heterodyne_psd(W, params, shot_subtracted=True), rtol=1e-12)


def test_grid_endpoints(params):
    dec = spectrum_grid(params, -100e3, 100e3, 2)
    assert np.array_equal(dec.freq_hz, [-100e3, 100e3])
    assert np.allclose(dec.total, heterodyne_psd(TWO_PI * np.array([-100e3, 100e3]), params))


def test_grid_without_coupling_is_flat(params):
    dec = spectrum_grid(params.replace(g_x=0.0, g_y=0.0), -50e3, 50e3, 101)
    assert np.all(dec.total == 1.0)


def test_grid_export_is_reproducible(params, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    spectrum_grid(params, -300e3, 300e3, 501).write_csv(a)
    spectrum_grid(params, -300e3, 300e3, 501).write_csv(b)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


@pytest.mark.parametrize("f_min, f_max, n", [(1.0, 1.0, 10), (2.0, 1.0, 10), (0.0, 1.0, 1), (0.0, math.inf, 5)])
def test_grid_rejects_bad_input(params, f_min, f_max, n):
    from levitated2d.errors import ValidationError
    with pytest.raises(ValidationError):
        spectrum_grid(params, f_min, f_max, n)


def test_symmetrized_psd_integrates_to_bright_variance(params):
    p = params.replace(gamma_x=1e3, gamma_y=1e3)
    V = steady_state(p)
    gb2 = p.g_x**2 + p.g_y**2
    var_b = (p.g_x**2 * V[2, 2] + 2 * p.g_x * p.g_y * V[2, 4] + p.g_y**2 * V[4, 4]) / gb2
    # the bright-mode normalization g_b differs from sqrt(g_x^2 + g_y^2); rescale accordingly
    from levitated2d.model import bright_mode_params
    _, g_b = bright_mode_params(p)
    var = variance_by_integration(lambda w: symmetrized_bright_psd(w, p), TWO_PI * 3e6, 2_000_001)
    assert var == pytest.approx(var_b * gb2 / g_b**2, rel=2e-3)


def test_symmetrized_psd_is_even(params):
    assert np.allclose(symmetrized_bright_psd(W, params), symmetrized_bright_psd(-W, params), rtol=1e-12)
