import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.utils.estimator_checks import (
    check_get_params_invariance,
    check_no_attributes_set_in_init,
    check_parameters_default_constructible,
    check_set_params,
)

from avianjump.metrics import (
    PowerLawRegressor,
    allometric_leg_mass,
    average_acceleration,
    cost_of_transport,
    efficiency,
    electrical_power,
    energy_input,
    energy_output,
    energy_report,
    fit_allometry,
    froude,
    gear_ratio_bound,
    interpolate_takeoff_speed,
    mechanical_power,
    speed_contribution,
    takeoff_metrics,
    takeoff_power,
)
from avianjump.fixtures import allometry_data


def test_takeoff_power():
    assert round(takeoff_power(0.6, 2.5), 1) == 14.7
    assert takeoff_power(0.6, 0.0) == 0.0
    assert takeoff_power(1.0, 1.0) == pytest.approx(9.81)
    with pytest.raises(ValueError):
        takeoff_power(0.0, 1.0)


def test_interpolate_takeoff_speed():
    assert interpolate_takeoff_speed(0.491) == pytest.approx(1.85)
    assert interpolate_takeoff_speed(0.783) == pytest.approx(3.21)
    exact = interpolate_takeoff_speed(0.6)
    assert exact == pytest.approx(1.85 + (3.21 - 1.85) * (0.6 - 0.491) / (0.783 - 0.491))
    assert exact == pytest.approx(2.357, abs=1e-3)
    assert interpolate_takeoff_speed(0.6, round_to=0.5) == 2.5


def test_energy_input_examples():
    t = np.linspace(0, 2, 11)
    assert energy_input(t, np.full(11, 10.0)) == pytest.approx(20.0)
    assert energy_input(t, 5.0 * t) == pytest.approx(10.0)
    assert energy_input(t, 5.0 * t, until=1.0) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        energy_input([0, 1, 0.5], [1, 1, 1])
    with pytest.raises(ValueError):
        energy_input([0.0], [1.0])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=3, max_size=30), st.integers(1, 28))
def test_energy_input_additive_and_non_negative(p, cut):
    p = np.array(p)
    t = np.arange(len(p)) * 0.01
    cut = min(cut, len(p) - 2)
    whole = energy_input(t, p)
    parts = energy_input(t[: cut + 1], p[: cut + 1]) + energy_input(t[cut:], p[cut:])
    assert whole >= 0
    assert whole == pytest.approx(parts, rel=1e-12, abs=1e-12)


def test_power_series():
    np.testing.assert_allclose(electrical_power([11.1, 12.0], [2.0, 0.5]), [22.2, 6.0])
    np.testing.assert_allclose(mechanical_power([[1.0, -2.0]], [[3.0, 4.0]]), [11.0])


def test_energy_output_and_efficiency():
    assert energy_output(0.62, 0.0, 0.0) == 0.0
    assert energy_output(0.62, 2.4, 0.4) == pytest.approx(4.218, abs=1e-3)
    ke = energy_output(1.0, 2.0, 0.0)
    assert energy_output(1.0, 4.0, 0.0) == pytest.approx(4 * ke)
    assert efficiency(3.0, 3.0) == 1.0
    assert efficiency(4.218, 60.1) == pytest.approx(0.0702, abs=1e-4)
    with pytest.raises(ValueError):
        efficiency(1.0, 0.0)


def test_average_acceleration():
    t = np.linspace(0, 0.17, 18)
    assert average_acceleration(t, 2.4 * t / 0.17, 0.17) == pytest.approx(14.1, abs=0.05)
    assert average_acceleration(t, np.full(18, 1.3), 0.17) == 0.0
    assert average_acceleration(t, 3.0 * t, 0.1) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        average_acceleration(t, t, 0.5)


def test_froude_and_cot():
    assert froude(0.0, 0.24) == 0.0
    assert froude(0.23, 0.24) == pytest.approx(0.0225, abs=1e-4)
    assert froude(0.46, 0.24) == pytest.approx(4 * froude(0.23, 0.24))
    assert cost_of_transport(2 * 9.81 * 3, 2.0, 3.0) == pytest.approx(1.0)
    assert cost_of_transport(0.0, 1.0, 1.0) == 0.0
    assert cost_of_transport(5.0, 0.623, 1.0) == pytest.approx(0.818, abs=1e-3)
    with pytest.raises(ValueError):
        cost_of_transport(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        froude(1.0, 0.0)


def test_gear_ratio_bound():
    assert gear_ratio_bound(99900, 4384) == pytest.approx(22.79, abs=0.005)
    assert round(gear_ratio_bound(99900, 4384), 1) == 22.8
    assert 19.13 < gear_ratio_bound(99900, 4384)
    assert gear_ratio_bound(5.0, 5.0) == 1.0
    assert speed_contribution(2.2, 2.4) == pytest.approx(0.9167, abs=1e-4)


def test_energy_report_and_takeoff_metrics_agree():
    t = np.linspace(0, 0.2, 201)
    power = 30 + 100 * t
    speed = 12 * t
    height = 0.5 * t**2
    r = energy_report(t, power, speed, height, 0.5, 0.15)
    m = takeoff_metrics(t, speed, height, 0.5, 0.15, 0.24, power=power)
    assert m["E_elec"] == pytest.approx(r.e_in) and m["eta"] == pytest.approx(r.eta)
    assert m["E_out"] == pytest.approx(energy_output(0.5, 1.8, 0.5 * 0.15**2), rel=1e-9)
    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * (power[1:] + power[:-1]) * np.diff(t))])
    m2 = takeoff_metrics(t, speed, height, 0.5, 0.15, 0.24, energy=cumulative, label="E_mech", elastic=0.5)
    assert m2["E_mech"] == pytest.approx(r.e_in)
    assert m2["eta"] == pytest.approx(r.e_out / (r.e_in + 0.5))
    with pytest.raises(ValueError):
        takeoff_metrics(t, speed, height, 0.5, 0.15, 0.24)


# -- allometry ---------------------------------------------------------------------


def test_fit_recovers_noiseless():
    m_b, m_l = allometry_data()
    fit = fit_allometry(m_b, m_l)
    assert fit.a == pytest.approx(0.1289, abs=1e-8)
    assert fit.b == pytest.approx(1.2, abs=1e-8)
    assert fit.r2 == pytest.approx(1.0)


def test_fit_with_noise():
    m_b, m_l = allometry_data(noise=0.02, seed=0)
    fit = fit_allometry(m_b, m_l)
    assert abs(fit.a / 0.1289 - 1) < 0.05
    assert abs(fit.b / 1.2 - 1) < 0.02
    assert fit.r2 > 0.98


def test_fit_two_points_interpolates():
    fit = fit_allometry([0.5, 2.0], [0.3, 1.1])
    np.testing.assert_allclose(fit.predict([0.5, 2.0]), [0.3, 1.1], rtol=1e-10)
    assert fit.r2 == pytest.approx(1.0)


def test_fit_rejects_bad_data():
    with pytest.raises(ValueError):
        fit_allometry([1.0, -2.0, 3.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        fit_allometry([1.0], [1.0])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(0.2, 3.0), st.floats(0.1, 10.0))
def test_fit_scale_covariance(a, b, k):
    """Scaling y by k scales a by k; scaling x by k scales a by k^-b."""
    x = np.geomspace(0.1, 10, 8)
    y = allometric_leg_mass(x, a, b)
    f1 = fit_allometry(x, k * y)
    assert f1.a == pytest.approx(k * a, rel=1e-6) and f1.b == pytest.approx(b, rel=1e-6)
    f2 = fit_allometry(k * x, y)
    assert f2.a == pytest.approx(a * k**-b, rel=1e-6) and f2.b == pytest.approx(b, rel=1e-6)


def test_regressor_estimator_contract():
    name = "PowerLawRegressor"
    est = PowerLawRegressor()
    check_no_attributes_set_in_init(name, est)
    check_parameters_default_constructible(name, est)
    check_get_params_invariance(name, est)
    check_set_params(name, est)
    with pytest.raises(NotFittedError):
        est.predict([[1.0]])
    m_b, m_l = allometry_data()
    X = m_b.reshape(-1, 1)
    reg = clone(est).fit(X, m_l)
    assert reg.score(X, m_l) == pytest.approx(1.0)
    np.testing.assert_allclose(reg.predict(X), m_l, rtol=1e-9)
    log_r2 = PowerLawRegressor(r2_space="log").fit(X, m_l).r2_
    assert 0.0 <= log_r2 <= 1.0
    with pytest.raises(ValueError):
        PowerLawRegressor(r2_space="cubic").fit(X, m_l)
    with pytest.raises(ValueError):
        PowerLawRegressor().fit(np.hstack([X, X]), m_l)
    assert math.isfinite(reg.n_iter_)
