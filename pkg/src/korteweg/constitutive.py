"""Closed-form constitutive laws and their Bregman-type modulations.

Every law is a power of the density:

    p(rho)   = rho**gamma
    H(rho)   = rho**gamma / (gamma - 1)
    mu(rho)  = rho**theta,             theta = (s + 3) / 2
    lambda   = 2 (rho mu' - mu) = (s + 1) mu
    K(rho)   = (s + 3)**2 / 4 * rho**s  (so that mu'**2 = rho K)
    phi(tau) = tau**(2 gamma / (s + 3))

All functions accept scalars or numpy arrays and raise ``DomainError`` on
non-positive densities.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, ParameterError


@dataclass(frozen=True)
class ModelParams:
    """Constitutive tuple (gamma, s, epsilon, nu).

    ``lemma_hypotheses=False`` skips the ``gamma >= s + 2`` check; it exists
    only so the lemma suite can build negative controls.
    """

    gamma: float
    s: float = -1.0
    epsilon: float = 0.0
    nu: float = 0.0
    lemma_hypotheses: bool = True

    def __post_init__(self):
        for name in ("gamma", "s", "epsilon", "nu"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.gamma <= 1:
            raise ParameterError(f"gamma must exceed 1, got {self.gamma}")
        if self.s < -1:
            raise ParameterError(f"s must be >= -1, got {self.s}")
        if self.epsilon < 0 or self.nu < 0:
            raise ParameterError("epsilon and nu must be non-negative")
        if self.lemma_hypotheses and self.gamma < self.s + 2:
            raise ParameterError(
                f"gamma >= s + 2 required, got gamma={self.gamma}, s={self.s}")

    @property
    def theta(self) -> float:
        return (self.s + 3) / 2

    @property
    def phi_exponent(self) -> float:
        return 2 * self.gamma / (self.s + 3)

    @property
    def coupling(self) -> float:
        """sqrt(epsilon**2 - nu**2), the dispersive weight of the (w, vbar) form."""
        self.require_nsk()
        return float(np.sqrt(self.epsilon**2 - self.nu**2))

    def require_nsk(self):
        if not self.nu < self.epsilon:
            raise ParameterError(
                f"Navier-Stokes-Korteweg needs 0 <= nu < epsilon, got nu={self.nu}, "
                f"epsilon={self.epsilon}")

    def replace(self, **changes) -> "ModelParams":
        fields = dict(gamma=self.gamma, s=self.s, epsilon=self.epsilon, nu=self.nu,
                      lemma_hypotheses=self.lemma_hypotheses)
        fields.update(changes)
        return ModelParams(**fields)

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "s": self.s, "epsilon": self.epsilon, "nu": self.nu}


class ThermoSample(NamedTuple):
    """A (rho, r) pair; use as ``modulated_enthalpy(*sample, params)``."""

    rho: float
    r: float

    def validate(self) -> "ThermoSample":
        _positive(self.rho, "rho")
        _positive(self.r, "r")
        return self


def _positive(x, name="rho"):
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0):  # also catches NaN
        raise DomainError(f"{name} must be strictly positive")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def bregman_power(x, y, a, h=None):
    """x**a - y**a - a*y**(a-1)*(x - y) evaluated without cancellation.

    Near the diagonal the remainder is summed as the binomial tail
    y**a * sum_{k>=2} C(a, k) h**k with h = (x - y) / y.  Callers that know
    h more accurately than the rounded x, y allow may pass it in.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if h is None:
        h = (x - y) / y
    direct = x**a - y**a - a * y ** (a - 1) * (x - y)

    small = np.abs(h) < 0.125
    if np.any(small):
        hs = np.where(small, h, 0.0)
        coef = a * (a - 1) / 2
        power = hs * hs
        tail = coef * power
        for k in range(3, 26):
            coef *= (a - k + 1) / k
            power = power * hs
            tail = tail + coef * power
        direct = np.where(small, y**a * tail, direct)
    return direct


# -- pressure and enthalpy ---------------------------------------------------

def pressure(rho, params: ModelParams):
    return _out(_positive(rho) ** params.gamma)


def pressure_prime(rho, params: ModelParams):
    rho = _positive(rho)
    return _out(params.gamma * rho ** (params.gamma - 1))


def enthalpy(rho, params: ModelParams):
    # linear-in-rho part of the literal integral from 1 to rho is dropped
    return _out(_positive(rho) ** params.gamma / (params.gamma - 1))


def enthalpy_prime(rho, params: ModelParams):
    rho = _positive(rho)
    return _out(params.gamma / (params.gamma - 1) * rho ** (params.gamma - 1))


def enthalpy_second(rho, params: ModelParams):
    """H'' = p'(rho) / rho."""
    rho = _positive(rho)
    return _out(params.gamma * rho ** (params.gamma - 2))


def modulated_enthalpy(rho, r, params: ModelParams):
    """H(rho | r) = H(rho) - H(r) - H'(r)(rho - r), non-negative."""
    rho = _positive(rho)
    r = _positive(r, "r")
    return _out(bregman_power(rho, r, params.gamma) / (params.gamma - 1))


# -- viscosity / capillarity ----------------------------------------------------

def mu(rho, params: ModelParams):
    return _out(_positive(rho) ** params.theta)


def mu_prime(rho, params: ModelParams):
    rho = _positive(rho)
    return _out(params.theta * rho ** (params.theta - 1))


def mu_second(rho, params: ModelParams):
    rho = _positive(rho)
    th = params.theta
    return _out(th * (th - 1) * rho ** (th - 2))


def lambda_bd(rho, params: ModelParams):
    """BD bulk coefficient 2(rho mu' - mu) = (s + 1) mu."""
    rho = _positive(rho)
    return _out((params.s + 1) * rho**params.theta)


def capillarity(rho, params: ModelParams):
    rho = _positive(rho)
    return _out((params.s + 3) ** 2 / 4 * rho**params.s)


def capillarity_prime(rho, params: ModelParams):
    rho = _positive(rho)
    s = params.s
    return _out((s + 3) ** 2 / 4 * s * rho ** (s - 1))


# -- flux potential ---------------------------------------------------------------

def _nonnegative(tau):
    arr = np.asarray(tau, dtype=float)
    if not np.all(arr >= 0):
        raise DomainError("tau must be non-negative")
    return arr


def phi(tau, params: ModelParams):
    return _out(_nonnegative(tau) ** params.phi_exponent)


def phi_prime(tau, params: ModelParams):
    q = params.phi_exponent
    return _out(q * _nonnegative(tau) ** (q - 1))


def phi_second(tau, params: ModelParams):
    q = params.phi_exponent
    return _out(q * (q - 1) * _nonnegative(tau) ** (q - 2))


def phi_integrand(sigma, params: ModelParams):
    """p'(mu^-1(sigma)) / mu'(mu^-1(sigma)), whose primitive from 0 is phi."""
    x = np.asarray(sigma, dtype=float) ** (1 / params.theta)
    return params.gamma * x ** (params.gamma - 1) / (params.theta * x ** (params.theta - 1))


def _mu_increment(rho, r, theta):
    """(mu(rho) - mu(r)) / mu(r) = (rho/r)**theta - 1 without forming the difference."""
    return np.expm1(theta * np.log1p((rho - r) / r))


def phi1(rho, r, params: ModelParams):
    """Bregman remainder of phi in the mu variable."""
    rho = _positive(rho)
    r = _positive(r, "r")
    th = params.theta
    return _out(bregman_power(rho**th, r**th, params.phi_exponent,
                              h=_mu_increment(rho, r, th)))


def phi2(rho, r, params: ModelParams):
    """phi''(mu(r))(mu(rho) - mu(r)) r - rho (phi'(mu(rho)) - phi'(mu(r))).

    Evaluated as (gamma/theta) * (g - f) where f, g are Bregman remainders
    in the mu variable (exponents (gamma+1)/theta - 1 and 1/theta), which
    keeps full relative accuracy as rho -> r.
    """
    rho = _positive(rho)
    r = _positive(r, "r")
    th = params.theta
    g = params.gamma
    m_rho, m_r = rho**th, r**th
    h = _mu_increment(rho, r, th)
    f_part = bregman_power(m_rho, m_r, (g + 1) / th - 1, h=h)
    g_part = r ** (g - th) * bregman_power(m_rho, m_r, 1 / th, h=h)
    return _out(g / th * (g_part - f_part))


def phi2_direct(rho, r, params: ModelParams):
    """Literal definition of phi2; kept as an independent oracle."""
    rho = _positive(rho)
    r = _positive(r, "r")
    m_rho, m_r = rho**params.theta, r**params.theta
    return _out(phi_second(m_r, params) * (m_rho - m_r) * r
                - rho * (phi_prime(m_rho, params) - phi_prime(m_r, params)))


def in_far_set(rho, r):
    """Indicator of {rho <= r/2 or rho >= 2r}."""
    rho = np.asarray(rho, dtype=float)
    r = np.asarray(r, dtype=float)
    return (rho <= r / 2) | (rho >= 2 * r)
