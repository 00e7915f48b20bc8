import math

import pytest

from crystalflow.closedforms import (
    OracleParams,
    comparison_lower_bound,
    resolvent_closed_form,
    wulff_radius_law,
    wulff_step_radius,
)
from crystalflow.errors import InputError


def test_plateau_value():
    p = OracleParams(N=2, R=0.5, h=0.004)
    assert resolvent_closed_form(0.0, p) == pytest.approx(-0.353941, abs=1e-6)


def test_outer_branch():
    p = OracleParams(N=2, R=0.5, h=0.004)
    # at the original radius f = 0, leaving the curvature term h(N-1)/rho
    assert resolvent_closed_form(0.5, p) == pytest.approx(0.008)


def test_two_slope_data():
    p = OracleParams(N=2, R=0.5, h=0.004, c1=1.0, c2=2.0)
    assert resolvent_closed_form(0.7, p) == pytest.approx(2.0 * 0.2 + 0.004 / 0.7)
    assert resolvent_closed_form(0.3, p) == pytest.approx(1.0 * (-0.2) + 0.004 / 0.3)


def test_vanishing_step_recovers_data():
    for x in (0.2, 0.5, 0.9):
        p = OracleParams(N=2, R=0.5, h=1e-12)
        f = max(x - 0.5, x - 0.5)
        assert resolvent_closed_form(x, p) == pytest.approx(f, abs=1e-9)


def test_validity_window_enforced():
    with pytest.raises(InputError):
        resolvent_closed_form(0.0, OracleParams(N=2, R=0.1, h=0.004))


def test_step_radius_value():
    r = wulff_step_radius(0.5, OracleParams(N=2, R=0.5, h=0.004))
    assert r.radius == pytest.approx(0.491868, abs=1e-6)
    assert not r.extinct
    assert r.window_ok


def test_step_radius_identity_at_h_zero():
    r = wulff_step_radius(0.5, OracleParams(N=2, R=0.5, h=1e-15))
    assert r.radius == pytest.approx(0.5, abs=1e-7)


def test_step_radius_extinction():
    # R=0.1, h=0.004, N=2: discriminant 0.01 - 0.016 < 0
    r = wulff_step_radius(0.1, OracleParams(N=2, R=0.1, h=0.004))
    assert r.radius == 0.0
    assert r.extinct


def test_radius_law_closed_form():
    assert wulff_radius_law(0.3, 0.04, 2, 0.0).radius == pytest.approx(0.1)
    assert wulff_radius_law(0.5, 0.05, 3, 0.0).radius == pytest.approx(0.223607, abs=1e-6)


def test_radius_law_stationary():
    R0 = 0.4
    r = wulff_radius_law(R0, 1.0, 2, c=-(2 - 1) / R0)
    assert r.radius == pytest.approx(R0)


def test_radius_law_past_extinction():
    r = wulff_radius_law(0.3, 0.1, 2, 0.0)
    assert r.extinct
    assert r.radius == 0.0


def test_radius_law_forced_matches_ode():
    # independent check: dense Euler integration of R' = -(1/R + c)
    R0, c, T = 0.3, 0.5, 0.02
    n = 200000
    dt = T / n
    r = R0
    for _ in range(n):
        r -= dt * (1.0 / r + c)
    assert wulff_radius_law(R0, T, 2, c).radius == pytest.approx(r, abs=1e-7)


def test_recursion_converges_to_law():
    R0 = 0.3
    t = 0.032  # 0.8 * extinction horizon of 0.045 is 0.036
    law = wulff_radius_law(R0, t, 2, 0.0).radius
    for h in (4e-3, 2e-3, 1e-3):
        r = R0
        for _ in range(int(round(t / h))):
            r = wulff_step_radius(r, OracleParams(N=2, R=r, h=h)).radius
        assert abs(r - law) <= 3 * h / law


def test_comparison_bound_values():
    p = OracleParams(Delta=0.2, beta=1.0, L=1.0, h=0.01)
    assert comparison_lower_bound(0.2, 50, p) == pytest.approx(0.2 * 0.99**50, rel=1e-12)
    assert comparison_lower_bound(0.2, 0, p) == pytest.approx(0.2)
    p0 = OracleParams(Delta=0.2, beta=1.0, L=0.0, h=0.01)
    assert comparison_lower_bound(0.2, 10, p0, c=0.05) == pytest.approx(0.195)
    # L = 0, c = 0: separation is preserved for all k
    assert comparison_lower_bound(0.2, 1000, p0) == pytest.approx(0.2)


def test_comparison_bound_monotone_in_k():
    p = OracleParams(Delta=0.2, beta=1.5, L=0.8, h=0.01)
    vals = [comparison_lower_bound(0.2, k, p, c=0.03) for k in range(0, 200, 10)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_comparison_bound_continuous_at_L_zero():
    for c in (0.0, 0.05):
        small_L = comparison_lower_bound(
            0.2, 20, OracleParams(Delta=0.2, beta=1.0, L=1e-10, h=0.01), c=c
        )
        limit = comparison_lower_bound(
            0.2, 20, OracleParams(Delta=0.2, beta=1.0, L=0.0, h=0.01), c=c
        )
        assert small_L == pytest.approx(limit, abs=1e-6)


def test_param_validation():
    with pytest.raises(InputError):
        OracleParams(c1=2.0, c2=1.0)
    with pytest.raises(InputError):
        OracleParams(R=-1.0)
    with pytest.raises(InputError):
        OracleParams(theta=1.5)
