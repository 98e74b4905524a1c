import json
import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfsqueezer.dispersion import (
    BULK_LN,
    ConstantIndex,
    Tabulated,
    TwoMaterial,
    available_models,
    coupling_kappa,
    load_model,
    parametric_g,
    refractive_index,
    single_pass_gain_constant,
    wavelength_to_omega,
    wavevector_mismatch,
)
from cfsqueezer.errors import DispersionRangeExceeded, DomainError
from cfsqueezer.plants import dopo_internal_stability, CavityDOPOParams

W1550 = float(wavelength_to_omega(1.55e-6))
N_E_1550 = 2.129929809470047  # independent evaluation of the published polynomial
DK_1THZ = -3.7779476843943818  # 1/m, same evaluation


def test_constant_index():
    assert refractive_index(ConstantIndex(1.0), 1e15) == 1.0


def test_bulk_ln_golden():
    assert refractive_index(load_model(BULK_LN), W1550) == pytest.approx(N_E_1550, rel=1e-14)


def test_bulk_ln_mismatch_golden():
    dk = wavevector_mismatch(load_model(BULK_LN), W1550, 2 * math.pi * 1e12)
    assert dk == pytest.approx(DK_1THZ, rel=1e-9)


def test_range_checked():
    m = load_model(BULK_LN)
    with pytest.raises(DispersionRangeExceeded):
        m.index(wavelength_to_omega(6e-6))


def test_catalog_schema():
    doc = json.loads(resources.files("cfsqueezer").joinpath("data", "dispersion_models.json").read_text())
    for entry in doc["models"]:
        assert {"name", "type", "validity_um", "citation"} <= set(entry)
    assert BULK_LN in available_models()
    assert "sio2_malitson1965" in available_models()


def test_material_indices_above_one():
    for name in available_models():
        m = load_model(name, temperature_c=25.0)
        lam = np.linspace(m.lam_min * 1.01, m.lam_max * 0.99, 50)
        assert np.all(m.index(wavelength_to_omega(lam)) > 1)


def test_gayer_temperature_range():
    with pytest.raises(DomainError):
        load_model("mgo_ln_e_gayer2008", temperature_c=500)


def test_silica_reference_value():
    # widely tabulated fused-silica index at 1550 nm
    assert load_model("sio2_malitson1965").index(W1550) == pytest.approx(1.4440, abs=2e-4)


def test_tabulated_knots_and_order():
    lam = np.array([1.4, 1.5, 1.6, 1.7, 1.8]) * 1e-6
    n = [2.14, 2.135, 2.13, 2.126, 2.122]
    for rule in ("linear", "cubic"):
        t = Tabulated(tuple(lam), tuple(n), rule)
        assert t.index(wavelength_to_omega(lam[2])) == pytest.approx(n[2], abs=1e-13)
    with pytest.raises(DomainError):
        Tabulated((1.5e-6, 1.4e-6), (2.0, 2.1))


def test_two_material_bounds():
    core, clad = load_model(BULK_LN), load_model("sio2_malitson1965")
    m = TwoMaterial(core, clad, 0.8)
    n = m.index(W1550)
    assert clad.index(W1550) < n < core.index(W1550)
    assert "two-material" in m.model_id


def test_mismatch_zero_cases():
    m = load_model(BULK_LN)
    assert wavevector_mismatch(m, W1550, 0.0) == 0.0
    assert wavevector_mismatch(ConstantIndex(2.2), W1550, 1e13) == 0.0


def test_mismatch_even_1000_draws():
    m = load_model(BULK_LN)
    w = np.random.default_rng(3).uniform(0, 2 * math.pi * 20e12, 1000)
    assert np.allclose(wavevector_mismatch(m, W1550, w), wavevector_mismatch(m, W1550, -w), rtol=1e-9, atol=1e-9)


def test_gain_constant_examples():
    assert single_pass_gain_constant(0.9, 0.005) == pytest.approx(0.05518652874068531, rel=1e-12)
    assert single_pass_gain_constant(0.7, 0.0075697349532) == pytest.approx(0.18213673737, rel=1e-10)
    assert single_pass_gain_constant(1 - 1e-12, 0.0) < 1e-11
    with pytest.raises(DomainError):
        single_pass_gain_constant(1.0, 0.0)


def test_kappa_examples():
    m = ConstantIndex(1.0)
    assert coupling_kappa(m, W1550, 0.0, 0.2, 0.5) == pytest.approx(0.1)
    assert coupling_kappa(m, W1550, W1550 / 10, 0.2, 0.5) == pytest.approx(0.11)
    assert coupling_kappa(load_model(BULK_LN), W1550, 1e13, 0.2, 0.0) == 0.0


def test_parametric_g_examples():
    assert parametric_g(0.3, 0.12, 0.0, 1.0) == pytest.approx(math.sqrt(0.036))
    assert parametric_g(0.0, 0.0, 2.0, 1.0) == pytest.approx(1j)
    assert parametric_g(0.1, 0.1, 1.0, 1.0) == pytest.approx(0.4898979485566356j)


@given(st.floats(0.05, 0.99), st.floats(0.0, 0.3), st.floats(0.0, 1.5))
def test_calibration_closes_threshold(R_o, L_o, xi):
    p = CavityDOPOParams.calibrated(R_o, L_o, 1.0, 0.01, xi)
    if abs(xi - 1) > 1e-9:
        assert dopo_internal_stability(p) == (xi < 1)
