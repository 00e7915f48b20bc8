"""Closed-form reference values for Wulff-shape evolutions and comparison bounds.

These are the desk-scale ground truths used by the acceptance suite: the
explicit solution of the per-step problem for two-slope radial data, the
one-step radius recursion for a Wulff shape, the shrinking-radius law of the
self-similar flow, and the discrete separation bound under forcing gaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from scipy.integrate import solve_ivp

from .errors import InputError


@dataclass
class OracleParams:
    """Scalar constants for the reference formulas.

    c1, c2: ellipticity constants with c1*phi° <= psi° <= c2*phi°.
    gmax: sup bound of the forcing, L: its spatial Lipschitz constant,
    M: comparison rate constant, beta: mobility bound psi <= beta*phi,
    Delta: initial separation, theta: horizon fraction.
    """

    N: int = 2
    R: float = 0.5
    h: float = 0.004
    c1: float = 1.0
    c2: float = 1.0
    gmax: float = 0.0
    L: float = 0.0
    M: float = 0.0
    beta: float = 1.0
    Delta: float = 0.0
    theta: float = 0.5

    def __post_init__(self):
        if not (0 < self.c1 <= self.c2):
            raise InputError("require 0 < c1 <= c2")
        if self.R <= 0 or self.h <= 0:
            raise InputError("R and h must be positive")
        if not (0 < self.theta < 1):
            raise InputError("theta must lie in (0, 1)")


def resolvent_closed_form(x_norm: float, params: OracleParams) -> float:
    """Explicit per-step solution for f = c1(rho - R) v c2(rho - R), rho = phi°(x).

    Valid for h/c1 <= R^2/(N+1): an inner plateau of value
    sqrt(c1 h) * 2N/sqrt(N+1) - c1 R for rho <= sqrt((h/c1)(N+1)), and
    f + h(N-1)/rho outside.
    """
    N, R, h, c1, c2 = params.N, params.R, params.h, params.c1, params.c2
    if h / c1 > R * R / (N + 1):
        raise InputError("outside the validity window h/c1 <= R^2/(N+1)")
    if x_norm < 0:
        raise InputError("x_norm is a gauge value and must be nonnegative")
    plateau_edge = math.sqrt(h / c1 * (N + 1))
    if x_norm <= plateau_edge:
        return math.sqrt(c1 * h) * 2.0 * N / math.sqrt(N + 1) - c1 * R
    f = max(c1 * (x_norm - R), c2 * (x_norm - R))
    return f + h * (N - 1) / x_norm


class WulffStepRadius(NamedTuple):
    radius: float
    extinct: bool
    window_ok: bool


def wulff_step_radius(R: float, params: OracleParams) -> WulffStepRadius:
    """Post-step inner radius of a Wulff shape under one implicit step:

        rbar = (a + sqrt(a^2 - 4 (h/c1)(N-1))) / 2,   a = R - (h/c1) gmax.

    A negative discriminant signals imminent extinction (radius 0, flagged).
    ``window_ok`` records the explicit validity window h/c1 <= R^2/(N+1).
    """
    if R <= 0:
        return WulffStepRadius(0.0, True, False)
    N, h, c1, gmax = params.N, params.h, params.c1, params.gmax
    a = R - (h / c1) * gmax
    disc = a * a - 4.0 * (h / c1) * (N - 1)
    window_ok = h / c1 <= R * R / (N + 1)
    if disc < 0 or a <= 0:
        return WulffStepRadius(0.0, True, window_ok)
    return WulffStepRadius(0.5 * (a + math.sqrt(disc)), False, window_ok)


class WulffRadius(NamedTuple):
    radius: float
    extinct: bool


def wulff_radius_law(R0: float, t: float, N: int = 2, c: float = 0.0) -> WulffRadius:
    """Radius of the self-similar Wulff evolution (psi = phi, constant forcing c):

        R'(t) = -((N-1)/R + c),  R(0) = R0.

    Closed form sqrt(R0^2 - 2(N-1)t) for c = 0; high-order adaptive
    integration otherwise (tolerance 1e-10).  Past extinction: (0, True).
    """
    if R0 <= 0:
        return WulffRadius(0.0, True)
    if t < 0:
        raise InputError("t must be nonnegative")
    if t == 0:
        return WulffRadius(float(R0), False)
    if c == 0.0:
        disc = R0 * R0 - 2.0 * (N - 1) * t
        if disc <= 0:
            return WulffRadius(0.0, True)
        return WulffRadius(math.sqrt(disc), False)
    if abs(c + (N - 1) / R0) < 1e-15:
        return WulffRadius(float(R0), False)  # equilibrium of the radius ODE

    def rhs(_s, r):
        return [-((N - 1) / r[0] + c)]

    def hit_zero(_s, r):
        return r[0] - 1e-12

    hit_zero.terminal = True
    hit_zero.direction = -1
    sol = solve_ivp(rhs, (0.0, t), [float(R0)], method="DOP853", rtol=1e-10, atol=1e-12,
                    events=hit_zero)
    if sol.t_events[0].size > 0:
        return WulffRadius(0.0, True)
    return WulffRadius(float(sol.y[0, -1]), False)


def comparison_lower_bound(Delta: float, k: int, params: OracleParams, c: float = 0.0) -> float:
    """Guaranteed separation after k steps for forcing gap g2 - g1 <= c:

        (Delta + c/L) (1 - beta L h)^k - c/L,

    with the L -> 0 continuity extension Delta - c*beta*k*h.
    """
    if k < 0:
        raise InputError("k must be nonnegative")
    L, beta, h = params.L, params.beta, params.h
    if L < 1e-14:
        return Delta - c * beta * k * h
    decay = (1.0 - beta * L * h) ** k
    return (Delta + c / L) * decay - c / L
