"""Stage-1 elastic estimation pipeline."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orthofrac.curves import LoadDeflectionCurve
from orthofrac.estimation import (
    EngineeringConstants,
    EstimationReport,
    WaveVelocitySet,
    coupling_stiffness,
    estimate_ratio_tensor,
    longitudinal_stiffness,
    reduce_to_ratios,
    scale_ratios,
    shear_stiffness,
    solve_poisson_ratios,
    stiffness_from_velocities,
    young_from_compression,
    _diag_from_constants,
)

RHO = 1350.0
SPEEDS = {
    ("V", "V"): 2730.0, ("T", "T"): 2530.0, ("H", "H"): 2332.0,
    ("V", "T"): 2020.0, ("T", "V"): 1980.0,
    ("T", "H"): 1696.0, ("H", "T"): 1745.0,
    ("H", "V"): 1799.0, ("V", "H"): 1476.0,
}
YOUNGS = (1485.0, 1365.0, 1512.0)


def velocity_set() -> WaveVelocitySet:
    return WaveVelocitySet(RHO, dict(SPEEDS))


def test_longitudinal_stiffness_reference_values():
    assert longitudinal_stiffness(1350.0, 2730.0) == pytest.approx(10061.0, abs=1.0)
    assert longitudinal_stiffness(1350.0, 2332.0) == pytest.approx(7342.0, abs=1.0)


def test_longitudinal_stiffness_unit_cancellation():
    assert longitudinal_stiffness(1000.0, 1000.0) == pytest.approx(1000.0, rel=1e-14)


def test_longitudinal_stiffness_domain_errors():
    with pytest.raises(ValueError):
        longitudinal_stiffness(-1.0, 100.0)
    with pytest.raises(ValueError):
        longitudinal_stiffness(1000.0, 0.0)


def test_shear_stiffness_reference_values():
    assert shear_stiffness(1350.0, 2020.0, 1980.0) == pytest.approx(5400.0, abs=1.0)
    assert shear_stiffness(1350.0, 1696.0, 1745.0) == pytest.approx(3996.0, abs=1.0)


def test_shear_stiffness_equal_speeds_match_longitudinal():
    assert shear_stiffness(1350.0, 2000.0, 2000.0) == pytest.approx(
        longitudinal_stiffness(1350.0, 2000.0), rel=1e-14
    )


def test_velocity_set_validation():
    incomplete = dict(SPEEDS)
    del incomplete[("H", "T")]
    with pytest.raises(ValueError, match=r"\('H', 'T'\)"):
        WaveVelocitySet(RHO, incomplete)
    with pytest.raises(ValueError, match="density"):
        WaveVelocitySet(0.0, SPEEDS)
    bad = dict(SPEEDS)
    bad[("V", "V")] = -5.0
    with pytest.raises(ValueError, match="positive"):
        WaveVelocitySet(RHO, bad)


def test_stiffness_from_velocities():
    diag, shear = stiffness_from_velocities(velocity_set())
    np.testing.assert_allclose(diag, [10061.0, 8641.0, 7342.0], atol=1.0)
    np.testing.assert_allclose(shear, [5400.0, 3996.0, 3620.0], atol=1.0)


def test_young_from_compression_geometry_factor_one():
    # length = pi R^2 so the geometry factor cancels exactly.
    radius = 1.0
    length = np.pi
    u = np.linspace(0.0, 2.0, 200)[1:]
    k_true = 37.5
    curve = LoadDeflectionCurve(u, k_true * u)
    assert young_from_compression(curve, length, radius) == pytest.approx(k_true, rel=1e-12)


def test_young_from_compression_formula_identity():
    length, radius = 50.8, 12.7
    u = np.linspace(0.0, 1.0, 500)[1:]
    k_true = 14.81
    curve = LoadDeflectionCurve(u, k_true * u)
    expected = k_true * length / (np.pi * radius**2)
    assert young_from_compression(curve, length, radius) == pytest.approx(expected, rel=1e-12)


def test_young_from_compression_bilinear_window():
    # Slope K1 up to 0.7*Fmax, then flat: the 15-65 % window sees only K1.
    k1 = 20.0
    u_rise = np.linspace(0.0, 1.0, 401)
    f_rise = k1 * u_rise
    u_flat = np.linspace(1.0025, 1.5, 100)
    f_flat = np.full_like(u_flat, k1)
    curve = LoadDeflectionCurve(np.concatenate([u_rise, u_flat]), np.concatenate([f_rise, f_flat]))
    # geometry factor 1
    assert young_from_compression(curve, np.pi, 1.0) == pytest.approx(k1, rel=1e-9)


def test_young_from_compression_insufficient_window():
    curve = LoadDeflectionCurve(np.array([0.0, 1.0]), np.array([0.0, 10.0]))
    with pytest.raises(ValueError, match="window"):
        young_from_compression(curve, 1.0, 1.0)


def test_solve_poisson_ratios_reference():
    diag, _ = stiffness_from_velocities(velocity_set())
    con = solve_poisson_ratios(diag, YOUNGS)
    assert con.nu_vt == pytest.approx(0.638, abs=1e-3)
    assert con.nu_th == pytest.approx(0.338, abs=1e-3)
    assert con.nu_vh == pytest.approx(0.425, abs=1e-3)


def test_solve_poisson_ratios_round_trip():
    diag, _ = stiffness_from_velocities(velocity_set())
    con = solve_poisson_ratios(diag, YOUNGS)
    np.testing.assert_allclose(_diag_from_constants(con), diag, rtol=1e-8)


def test_solve_poisson_ratios_isotropic():
    e_mod, nu = 1000.0, 0.3
    c11 = e_mod * (1 - nu) / ((1 + nu) * (1 - 2 * nu))
    con = solve_poisson_ratios((c11, c11, c11), (e_mod, e_mod, e_mod))
    for value in (con.nu_vt, con.nu_th, con.nu_vh):
        assert value == pytest.approx(0.3, abs=1e-6)


def test_solve_poisson_ratios_rejects_bad_input():
    with pytest.raises(ValueError):
        solve_poisson_ratios((-1.0, 2.0, 3.0), YOUNGS)


def test_reciprocity_exact():
    con = EngineeringConstants(*YOUNGS, 0.6, 0.3, 0.4)
    assert con.nu_vt / con.e_v == pytest.approx(con.nu_tv / con.e_t, rel=1e-14)
    assert con.nu_th / con.e_t == pytest.approx(con.nu_ht / con.e_h, rel=1e-14)
    assert con.nu_vh / con.e_v == pytest.approx(con.nu_hv / con.e_h, rel=1e-14)


def test_coupling_stiffness_reference():
    diag, _ = stiffness_from_velocities(velocity_set())
    con = solve_poisson_ratios(diag, YOUNGS)
    np.testing.assert_allclose(coupling_stiffness(con), [8439.0, 6887.0, 7513.0], atol=1.0)


def test_coupling_stiffness_zero_ratios():
    con = EngineeringConstants(*YOUNGS, 0.0, 0.0, 0.0)
    np.testing.assert_allclose(coupling_stiffness(con), [0.0, 0.0, 0.0], atol=1e-14)


def test_coupling_stiffness_isotropic_lame():
    e_mod, nu = 1000.0, 0.3
    con = EngineeringConstants(e_mod, e_mod, e_mod, nu, nu, nu)
    lam = e_mod * nu / ((1 + nu) * (1 - 2 * nu))
    np.testing.assert_allclose(coupling_stiffness(con), [lam] * 3, rtol=1e-12)


def test_full_pipeline_ratio_matrix():
    report = estimate_ratio_tensor(velocity_set(), YOUNGS)
    r = report.ratios.voigt
    assert r[0, 0] == 1.0
    assert r[0, 1] == pytest.approx(0.8388, abs=2e-4)
    assert r[0, 2] == pytest.approx(0.7467, abs=2e-4)
    assert r[1, 1] == pytest.approx(0.8588, abs=2e-4)
    assert r[1, 2] == pytest.approx(0.6845, abs=2e-4)
    assert r[2, 2] == pytest.approx(0.7297, abs=2e-4)
    assert r[3, 3] == pytest.approx(0.3972, abs=2e-4)
    assert r[4, 4] == pytest.approx(0.3598, abs=2e-4)
    assert r[5, 5] == pytest.approx(0.5367, abs=2e-4)


def test_pipeline_determinism():
    a = estimate_ratio_tensor(velocity_set(), YOUNGS)
    b = estimate_ratio_tensor(velocity_set(), YOUNGS)
    assert np.array_equal(a.ratios.voigt, b.ratios.voigt)


def test_scale_ratios_round_trip():
    report = estimate_ratio_tensor(velocity_set(), YOUNGS)
    scaled = scale_ratios(report.ratios, 2057.0)
    np.testing.assert_allclose(
        reduce_to_ratios(scaled).voigt, report.ratios.voigt, rtol=1e-12
    )


def test_scale_ratios_requires_unit_leading_entry():
    report = estimate_ratio_tensor(velocity_set(), YOUNGS)
    with pytest.raises(ValueError, match="unit leading"):
        scale_ratios(report.tensor, 2057.0)


@settings(max_examples=60, deadline=None)
@given(
    nu_vt=st.floats(0.05, 0.55),
    nu_th=st.floats(0.05, 0.55),
    nu_vh=st.floats(0.05, 0.55),
    e_v=st.floats(500.0, 5000.0),
    e_t=st.floats(500.0, 5000.0),
    e_h=st.floats(500.0, 5000.0),
)
def test_solve_inverts_forward_map(nu_vt, nu_th, nu_vh, e_v, e_t, e_h):
    """Forward-evaluating then solving recovers the ratios on the admissible region."""
    try:
        con = EngineeringConstants(e_v, e_t, e_h, nu_vt, nu_th, nu_vh)
    except ValueError:
        return  # outside the admissible region, nothing to invert
    if con.coupling_factor < 0.05:
        return  # keep away from the singular surface where the map degenerates
    diag = _diag_from_constants(con)
    solved = solve_poisson_ratios(diag, (e_v, e_t, e_h))
    assert solved.nu_vt == pytest.approx(nu_vt, rel=1e-6, abs=1e-8)
    assert solved.nu_th == pytest.approx(nu_th, rel=1e-6, abs=1e-8)
    assert solved.nu_vh == pytest.approx(nu_vh, rel=1e-6, abs=1e-8)
