"""Scalar filter mathematics for the time-filtered wave iteration.

Everything in this module is a pure function of scalars (vectorized over
numpy arrays where it is convenient).  The central object is the transfer
function beta: one filtered wave solve maps an eigencomponent with spatial
eigenvalue lambda to beta(lambda; omega) times itself.  The discrete
time-stepping analogues (trapezoid quadrature, the time-corrected eigenvalue
maps, and the adjusted target frequency) live here as well so that the grid
operator can be validated against an independent scalar pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError


class SchemeKind(Enum):
    """Time integrator for the wave equation."""

    EXPLICIT = "explicit"
    IMPLICIT = "implicit"


def sinc(x):
    """sin(x)/x with sinc(0) = 1, series-evaluated near zero.

    The series branch keeps beta smooth through lambda = omega where the
    leading sinc argument crosses zero.
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    x2 = x * x
    series = 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    out = np.where(small, series, np.sin(xs) / xs)
    return out if out.ndim else float(out)


def beta(lam, omega, n_periods=1):
    """Filter transfer function as a sum of three sinc lobes.

    One lobe is centered at lambda = omega (the peak, value one), its mirror
    sits at -omega, and a half-amplitude lobe at zero.  Values lie in
    [-1/2, 1].
    """
    if omega <= 0:
        raise ValueError(f"target frequency must be positive, got {omega}")
    if n_periods < 1 or int(n_periods) != n_periods:
        raise ValueError(f"n_periods must be a positive integer, got {n_periods}")
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be nonnegative")
    t_final = n_periods * 2.0 * np.pi / omega
    out = (sinc((omega - lam) * t_final) + sinc((omega + lam) * t_final)
           - 0.5 * sinc(lam * t_final))
    return out if np.ndim(out) else float(out)


def sigma_weights(n_steps, dt):
    """Trapezoid quadrature weights over n_steps+1 time levels; ends halved."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    sigma = np.full(n_steps + 1, dt, dtype=float)
    sigma[0] = sigma[-1] = 0.5 * dt
    return sigma


def alpha_d(omega_dt):
    """Quadrature correction tan(x/2)/tan(x) at x = omega*dt.

    Chosen so the trapezoid-discretized filter reaches exactly one at the
    target frequency; tends to 1/2 (the continuous coefficient is 1/4 = a/2)
    as dt -> 0.  Evaluated through the equivalent form cos(x)/(1 + cos(x)),
    which removes the tan singularity at x = pi/2 (four steps per period) and
    is defined for 0 < x < pi.
    """
    if not 0.0 < omega_dt < np.pi:
        raise ValueError(f"omega*dt must lie in (0, pi), got {omega_dt}")
    c = math.cos(omega_dt)
    return c / (1.0 + c)


def lambda_tilde(lam, dt, scheme):
    """Effective oscillation frequency of a spatial mode under time-stepping.

    The three-level schemes advance an eigencomponent as cos(lambda_tilde t^n)
    exactly, with

        implicit: (2/dt) asin( (lam dt/2) / sqrt(1 + (lam dt)^2 / 2) )
        explicit: (2/dt) asin( lam dt / 2 ),  requires lam*dt <= 2 (CFL)
    """
    lam = np.asarray(lam, dtype=float)
    x = 0.5 * lam * dt
    if scheme == SchemeKind.IMPLICIT:
        arg = x / np.sqrt(1.0 + 2.0 * x * x)
    elif scheme == SchemeKind.EXPLICIT:
        if np.any(x > 1.0 + 1e-12):
            raise ValueError("lambda*dt exceeds 2: explicit scheme unstable (CFL)")
        arg = np.clip(x, -1.0, 1.0)
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    out = (2.0 / dt) * np.arcsin(arg)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class FilterSpec:
    """Target frequency, period count, and time-step count for one wave solve.

    Derived quantities (final time, dt, the alpha_d correction and the
    trapezoid weights) are fixed at construction.  Fewer than three steps per
    period leaves alpha_d undefined and is rejected; production runs should
    stay at five or more (enforced at the configuration level), but the
    scalar diagnostics remain evaluable down to the mathematical limit.
    """

    omega: float
    n_periods: int = 1
    n_steps: int = 10
    t_final: float = field(init=False)
    dt: float = field(init=False)
    alpha: float = field(init=False)

    def __post_init__(self):
        if self.omega <= 0:
            raise ConfigError(f"omega must be positive, got {self.omega}")
        if self.n_periods < 1:
            raise ConfigError(f"n_periods must be >= 1, got {self.n_periods}")
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be >= 1, got {self.n_steps}")
        t_final = self.n_periods * 2.0 * np.pi / self.omega
        dt = t_final / self.n_steps
        object.__setattr__(self, "t_final", t_final)
        object.__setattr__(self, "dt", dt)
        try:
            object.__setattr__(self, "alpha", alpha_d(self.omega * dt))
        except ValueError as exc:
            raise ConfigError(f"n_steps={self.n_steps} gives fewer than 3 steps "
                              f"per period of omega={self.omega}: {exc}") from exc

    @property
    def steps_per_period(self):
        return self.n_steps / self.n_periods

    @property
    def times(self):
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def sigma(self):
        return sigma_weights(self.n_steps, self.dt)

    def quadrature_coefficients(self):
        """Per-time-level filter weights (2/T) sigma_n (cos(omega t^n) - alpha/2).

        Accumulating coefficients[n] * W^n over the time loop applies the
        discrete filter.
        """
        t = self.times
        return (2.0 / self.t_final) * self.sigma * (np.cos(self.omega * t) - 0.5 * self.alpha)


def beta_discrete(lam_tilde, spec):
    """Trapezoid-quadrature filter evaluated at an effective frequency.

    Equals one at lam_tilde = spec.omega for any step count (that is what the
    alpha_d correction buys).
    """
    lam_tilde = np.asarray(lam_tilde, dtype=float)
    coef = spec.quadrature_coefficients()
    t = spec.times
    out = np.cos(np.multiply.outer(lam_tilde, t)) @ coef
    return out if out.ndim else float(out)


def beta_tilde_d(lam, spec, scheme):
    """Fully discrete transfer function: time correction then quadrature.

    This is the exact eigenvalue of the discrete filtered-wave operator for a
    spatial mode with eigenvalue ``lam``.
    """
    return beta_discrete(lambda_tilde(lam, spec.dt, scheme), spec)


def adjusted_omega(omega, n_its):
    """Reduced target frequency that re-centers the implicit filter peak.

    With large implicit steps the discrete filter peaks above the requested
    frequency; retargeting to the returned value puts the peak back at
    ``omega``.  Requires at least 5 steps per period.
    """
    if n_its < 5:
        raise ValueError(f"adjusted omega needs n_its >= 5, got {n_its}")
    s = math.sin(math.pi / n_its)
    radicand = (1.0 - 2.0 * s * s) / (s * s)
    return omega * math.pi / n_its * math.sqrt(radicand)
