import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsaclab.reference import (CollapseError, ReferenceScenario, corrected_radius, cutoff,
                               laplace_jump, leading_order_c, transported_center)


def test_profile_values_at_known_distances(profile):
    sc = ReferenceScenario("stationary_bubble", eps=1 / 32)
    # on the circle, one eps inside, and far inside / outside
    x = np.array([0.75, 0.75 - 1 / 32, 0.5 + 1e-3, 0.95])
    y = np.full(4, 0.5)
    c = leading_order_c(x, y, 0.0, sc, profile)
    d = 0.25 - np.hypot(x - 0.5, y - 0.5)
    np.testing.assert_allclose(c, np.tanh(d / (2 / 32)), atol=1e-7)
    np.testing.assert_allclose(c[:2], [0.0, np.tanh(0.5)], atol=1e-7)


def test_cutoff_blends_to_sign(profile):
    sc = ReferenceScenario("stationary_bubble", eps=1 / 8, delta=0.05)
    x = np.array([0.5 + 0.25 - 0.11, 0.5 + 0.25 + 0.11])
    c = leading_order_c(x, np.full(2, 0.5), 0.0, sc, profile)
    np.testing.assert_array_equal(c, [1.0, -1.0])


def test_corrected_radius_and_collapse():
    assert corrected_radius(0.25, 1 / 32, 0.5, 0.0125 / (2 * (1 / 32) ** 0.5)) == pytest.approx(np.sqrt(0.05))
    with pytest.raises(CollapseError):
        corrected_radius(0.25, 1.0, 0.0, 1.0)
    sc = ReferenceScenario("mobility_corrected_bubble", eps=1.0, alpha=0.0)
    with pytest.raises(CollapseError):
        sc.validate(1.0)


def test_laplace_jump():
    assert laplace_jump(ReferenceScenario("stationary_bubble")) == pytest.approx(8 / 3)
    assert laplace_jump(0.5) == pytest.approx(4 / 3)


def test_uncorrected_switches_kind():
    sc = ReferenceScenario("mobility_corrected_bubble", U=(1.0, 0.0))
    assert sc.uncorrected().kind == "transported_bubble"
    assert sc.uncorrected().radius_at(0.1) == sc.R0
    assert ReferenceScenario("mobility_corrected_bubble").uncorrected().kind == "stationary_bubble"


def test_invalid_scenarios():
    with pytest.raises(ValueError):
        ReferenceScenario("square")
    with pytest.raises(ValueError):
        ReferenceScenario("stationary_bubble", R0=-1)
    sc = ReferenceScenario("stationary_bubble", R0=0.4, delta=0.05, box=(0, 0, 1, 1))
    with pytest.raises(ValueError):
        sc.validate(0.0)


@settings(max_examples=40)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 2))
def test_periodic_center_in_box(ux, uy, t):
    c = transported_center((0.5, 0.5), (ux, uy), t, box=(0.0, 0.0, 1.0, 1.0))
    assert 0.0 <= c[0] < 1.0 + 1e-12 and 0.0 <= c[1] < 1.0 + 1e-12


@settings(max_examples=40)
@given(st.floats(0, 1), st.floats(0, 1))
def test_minimum_image_distance_bounded(x, y):
    sc = ReferenceScenario("transported_bubble", U=(1.0, 0.0), box=(0.0, 0.0, 1.0, 1.0))
    d = sc.distance(np.array([x]), np.array([y]), 0.37)
    assert -np.hypot(0.5, 0.5) + 0.25 - 1e-12 <= d[0] <= 0.25 + 1e-12


@given(st.floats(-1, 1), st.floats(0.01, 0.5))
def test_cutoff_range(d, delta):
    z = cutoff(np.array([d]), delta)[0]
    assert 0.0 <= z <= 1.0
    if abs(d) <= delta:
        assert z == 1.0
    if abs(d) >= 2 * delta:
        assert z == 0.0
