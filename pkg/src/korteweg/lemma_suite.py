"""Exact identities checked to round-off and inequality constants estimated by sampling.

Identity checks work on random tuples (rho, r, rho_x, r_x) -- the gradients
stand in for the spatial derivatives at one point -- or on smooth periodic
fields where derivatives are spectral.  Inequality lemmas are probed with
scrambled Sobol points on a log-uniform (r, rho) box; the sup of each ratio
is the empirical proxy for the lemma's constant C(r).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.stats import qmc

from . import constitutive as cv
from .errors import DomainError, ParameterError
from .field import Grid


class PointSamples(NamedTuple):
    rho: np.ndarray
    r: np.ndarray
    rho_x: np.ndarray
    r_x: np.ndarray


def random_samples(n: int, seed: int = 0, rho_range=(0.1, 10.0), r_range=(0.5, 2.0),
                   grad_scale: float = 3.0) -> PointSamples:
    """Log-uniform densities and normally distributed gradients."""
    rng = np.random.default_rng(seed)
    rho = np.exp(rng.uniform(*np.log(rho_range), n))
    r = np.exp(rng.uniform(*np.log(r_range), n))
    return PointSamples(rho, r, grad_scale * rng.standard_normal(n),
                        grad_scale * rng.standard_normal(n))


def _validated(samples) -> PointSamples:
    s = PointSamples(*(np.asarray(a, dtype=float) for a in samples))
    if not (np.all(s.rho > 0) and np.all(s.r > 0)):
        raise DomainError("sample densities must be strictly positive")
    if not all(np.all(np.isfinite(a)) for a in s):
        raise DomainError("samples must be finite")
    return s


def _relative(residual, scale):
    scale = np.asarray(scale, dtype=float)
    safe = np.where(scale > 0, scale, 1.0)
    return float(np.max(np.where(scale > 0, np.abs(residual) / safe, np.abs(residual))))


# -- modulated pressure identity ---------------------------------------------------

def _pressure_ratio(x, params):
    """p'(x) / mu'(x) = phi'(mu(x))."""
    return cv.pressure_prime(x, params) / cv.mu_prime(x, params)


def modulated_pressure_sides(rho, r, v, V, grad_phi1, params):
    """Left side, right side and a term-magnitude scale of the identity.

    rho (P(rho) v - P(r) V)(v - V) = [phi1_x + phi2 V] V + rho P(rho) (V - v)^2,
    with P = p'/mu'.
    """
    P_rho, P_r = _pressure_ratio(rho, params), _pressure_ratio(r, params)
    phi2 = cv.phi2(rho, r, params)
    lhs_terms = (rho * P_rho * v * (v - V), -rho * P_r * V * (v - V))
    rhs_terms = (grad_phi1 * V, phi2 * V * V, rho * P_rho * (V - v) ** 2)
    scale = sum(np.abs(t) for t in lhs_terms + rhs_terms)
    return sum(lhs_terms), sum(rhs_terms), scale


def expanded_grad_phi1(rho, r, v, V, params):
    """(P(rho) - P(r)) mu(rho)_x - phi''(mu(r)) (mu(rho) - mu(r)) mu(r)_x, with mu(.)_x = (.) drift."""
    mu_rho, mu_r = cv.mu(rho, params), cv.mu(r, params)
    return ((_pressure_ratio(rho, params) - _pressure_ratio(r, params)) * rho * v
            - cv.phi_second(mu_r, params) * (mu_rho - mu_r) * r * V)


def identity_modulated_pressure(samples, params: cv.ModelParams, mode: str = "algebraic",
                                grid: Optional[Grid] = None) -> float:
    """Max relative residual of the modulated-pressure identity.

    ``algebraic``: ``samples`` are PointSamples and phi1_x uses the expanded
    chain rule.  ``field``: ``samples`` is a pair of periodic arrays
    (rho, r) on ``grid`` and phi1_x is the spectral derivative of phi1.
    """
    if mode == "algebraic":
        s = _validated(samples)
        v = cv.mu_prime(s.rho, params) * s.rho_x / s.rho
        V = cv.mu_prime(s.r, params) * s.r_x / s.r
        lhs, rhs_, scale = modulated_pressure_sides(
            s.rho, s.r, v, V, expanded_grad_phi1(s.rho, s.r, v, V, params), params)
        return _relative(lhs - rhs_, scale)
    if mode == "field":
        if grid is None:
            raise ValueError("field mode needs a grid")
        rho, r = (np.asarray(a, dtype=float) for a in samples)
        cv._positive(rho)
        cv._positive(r, "r")
        v = cv.mu_prime(rho, params) * grid.deriv(rho) / rho
        V = cv.mu_prime(r, params) * grid.deriv(r) / r
        grad_phi1 = grid.deriv(cv.phi1(rho, r, params))
        lhs, rhs_, scale = modulated_pressure_sides(rho, r, v, V, grad_phi1, params)
        return float(np.max(np.abs(lhs - rhs_)) / max(np.max(scale), 1e-300))
    raise ValueError(f"unknown mode {mode!r}")


# -- gradient-form equivalence identity ------------------------------------------------

def glt_sides(rho, r, rho_x, r_x, params):
    """Both sides of the identity linking the drift form to the gradient form."""
    K_rho, K_r = cv.capillarity(rho, params), cv.capillarity(r, params)
    Kp_r = cv.capillarity_prime(r, params)
    I_euk = np.sqrt(K_rho) * rho_x - np.sqrt(rho / r) * np.sqrt(K_r) * r_x
    gap = np.sqrt(K_r / K_rho) - np.sqrt(rho / r)
    I_T = (K_rho * rho_x**2 - K_r * r_x**2 - Kp_r * r_x**2 * (rho - r)
           - 2 * K_r * r_x * (rho_x - r_x))
    lhs_terms = (I_euk**2, K_r * r_x**2 * gap**2,
                 -K_r**2 * r_x**2 * (1 / K_rho - 1 / K_r + Kp_r / K_r**2 * (rho - r)))
    rhs_terms = (K_rho * rho_x**2, -K_r * r_x**2, -Kp_r * r_x**2 * (rho - r),
                 -2 * K_r * r_x * (rho_x - r_x), 2 * np.sqrt(K_r) * r_x * I_euk * gap)
    scale = sum(np.abs(t) for t in lhs_terms + rhs_terms)
    return sum(lhs_terms), I_T + rhs_terms[-1], scale


def identity_glt_equivalence(samples, params: cv.ModelParams) -> float:
    """Max relative residual of the gradient-form equivalence identity."""
    s = _validated(samples)
    lhs, rhs_, scale = glt_sides(s.rho, s.r, s.rho_x, s.r_x, params)
    return _relative(lhs - rhs_, scale)


# -- quantum case ------------------------------------------------------------------

def quantum_case_consistency(samples, params: cv.ModelParams) -> float:
    """max |phi1 - (g-1) H| / H and |phi2 + g(g-1) H| / H for K = 1/rho."""
    if params.s != -1:
        raise ParameterError("the quantum-case reductions hold only for s = -1")
    if isinstance(samples, PointSamples):
        rho, r = samples.rho, samples.r
    else:
        rho, r = samples[0], samples[1]
    rho = cv._positive(rho)
    r = cv._positive(r, "r")
    g = params.gamma
    H = cv.modulated_enthalpy(rho, r, params)
    res1 = np.abs(cv.phi1(rho, r, params) - (g - 1) * H)
    res2 = np.abs(cv.phi2(rho, r, params) + g * (g - 1) * H)
    return max(_relative(res1, H), _relative(res2, H))


# -- inequality lemmas -------------------------------------------------------------

@dataclass(frozen=True)
class SampleRegion:
    r_range: tuple = (0.5, 2.0)
    rho_range: tuple = (0.1, 10.0)
    n_samples: int = 4096
    seed: int = 0

    def __post_init__(self):
        for name in ("r_range", "rho_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo < hi and np.isfinite(hi)):
                raise DomainError(f"{name} must satisfy 0 < min < max")
        if int(self.n_samples) != self.n_samples or self.n_samples < 16:
            raise ValueError("n_samples must be an integer >= 16")

    def points(self, n: Optional[int] = None):
        """Scrambled Sobol points (log-uniform) plus the four box corners."""
        n = n or self.n_samples
        m = int(np.ceil(np.log2(n)))
        sob = qmc.Sobol(d=2, scramble=True, seed=self.seed).random_base2(m)
        lo = np.log([self.r_range[0], self.rho_range[0]])
        hi = np.log([self.r_range[1], self.rho_range[1]])
        pts = np.exp(lo + sob * (hi - lo))
        corners = np.array([[a, b] for a in self.r_range for b in self.rho_range])
        pts = np.vstack([pts, corners])
        return pts[:, 1], pts[:, 0]  # rho, r


@dataclass
class RatioReport:
    lemma_id: str
    sup_ratio: float
    argmax_sample: tuple
    stable: bool
    n_samples: int
    parts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"lemma_id": self.lemma_id, "sup_ratio": self.sup_ratio,
                "argmax_sample": {"rho": self.argmax_sample[0], "r": self.argmax_sample[1]},
                "stable": self.stable, "n_samples": self.n_samples, **self.parts}


LEMMA_IDS = ("tech1", "tech2", "tech3", "tech3b", "tech4")


def _normalize_id(lemma_id: str) -> str:
    key = lemma_id.replace("lem_", "")
    if key not in LEMMA_IDS:
        raise ValueError(f"unknown lemma id {lemma_id!r}; expected one of {LEMMA_IDS}")
    return key


def far_near_split(rho, r):
    """Boolean masks (far, near); every sample lies in exactly one."""
    far = cv.in_far_set(rho, r)
    return far, ~far


def lemma_ratios(lemma_id: str, rho, r, params: cv.ModelParams) -> np.ndarray:
    """Pointwise ratio whose sup estimates the lemma's constant.

    tech1 is a lower bound, so the reciprocal (quadratic or growth weight over
    H(rho|r)) is returned; its sup is 1 / C(r).
    """
    key = _normalize_id(lemma_id)
    rho = np.asarray(rho, dtype=float)
    r = np.asarray(r, dtype=float)
    far, near = far_near_split(rho, r)
    H = cv.modulated_enthalpy(rho, r, params)
    quad = (rho - r) ** 2
    growth = (1 + rho) ** params.gamma
    weight = np.where(near, quad, growth)
    with np.errstate(divide="ignore", invalid="ignore"):
        if key == "tech1":
            out = weight / H
        elif key == "tech2":
            phis = np.maximum(np.abs(cv.phi1(rho, r, params)), np.abs(cv.phi2(rho, r, params)))
            out = phis / weight
        elif key == "tech3":
            out = np.abs(cv.phi1(rho, r, params)) / H
        elif key == "tech3b":
            out = np.abs(cv.phi2(rho, r, params)) / H
        else:
            out = rho * (cv.mu_prime(rho, params) - cv.mu_prime(r, params)) ** 2 / H
    # rho == r exactly: every ratio is 0/0; its limit is finite and attained nearby
    return np.where(rho == r, 0.0, out)


def _sup(values, rho, r):
    k = int(np.argmax(values))
    return float(values[k]), (float(rho[k]), float(r[k]))


def bound_ratios(region: SampleRegion, params: cv.ModelParams, lemma_id: str,
                 negative_control: bool = False) -> RatioReport:
    """Sup of the lemma ratio over the region, with a sample-doubling stability flag."""
    key = _normalize_id(lemma_id)
    violated = params.gamma < params.s + 2 or params.s < -1
    if violated and not negative_control:
        raise ParameterError(
            f"lemma hypotheses violated (gamma={params.gamma}, s={params.s}); "
            "pass negative_control=True to run it as a control")
    rho, r = region.points(region.n_samples)
    ratios = lemma_ratios(key, rho, r, params)
    sup, arg = _sup(ratios, rho, r)
    rho2, r2 = region.points(2 * region.n_samples)
    sup2, arg2 = _sup(lemma_ratios(key, rho2, r2, params), rho2, r2)
    if not np.isfinite(sup2):
        stable = False
    elif sup == 0:
        stable = sup2 == 0
    else:
        stable = abs(sup2 - sup) / abs(sup) < 0.05
    far, near = far_near_split(rho2, r2)
    ratios2 = lemma_ratios(key, rho2, r2, params)
    parts = {
        "sup_near": float(np.max(ratios2[near])) if np.any(near) else 0.0,
        "sup_far": float(np.max(ratios2[far])) if np.any(far) else 0.0,
        "n_near": int(np.sum(near)), "n_far": int(np.sum(far)),
        "negative_control": bool(negative_control),
    }
    if key == "tech1":
        # the growth bound is stated for asymptotic pressure exponents above 3/2
        parts["growth_regime_asserted"] = bool(params.gamma > 1.5)
    return RatioReport(key, sup2, arg2, bool(stable), len(rho2), parts)


# -- suite driver --------------------------------------------------------------------

DEFAULT_PAIRS = ((2.0, -1.0), (3.0, 0.0), (3.0, 1.0))
NEGATIVE_CONTROLS = ((1.5, 1.0),)


def growth_factor(params, lemma_id, region: SampleRegion, rho_max_hi: float) -> float:
    """sup ratio over rho <= rho_max_hi divided by sup ratio over the region."""
    base = bound_ratios(region, params, lemma_id, negative_control=True)
    wide = SampleRegion(region.r_range, (region.rho_range[0], rho_max_hi),
                        region.n_samples, region.seed)
    grown = bound_ratios(wide, params, lemma_id, negative_control=True)
    return grown.sup_ratio / base.sup_ratio if base.sup_ratio > 0 else float("inf")


def run_suite(pairs=DEFAULT_PAIRS, negative_controls=NEGATIVE_CONTROLS,
              region: Optional[SampleRegion] = None, identity_samples: int = 10_000,
              seed: int = 0, field_n: int = 256, growth_rho_max: float = 100.0,
              identity_tol: float = 1e-12, field_tol: float = 1e-8,
              growth_threshold: float = 10.0) -> dict:
    """Run identities and ratio lemmas; returns a JSON-ready report with a verdict.

    Positive cases pass when identities meet their tolerances and every
    ratio sup is finite and stable.  A negative control passes (as a control)
    when some ratio grows by at least ``growth_threshold`` as rho_max grows.
    """
    region = region or SampleRegion(seed=seed)
    grid = Grid(field_n, 2 * np.pi)
    x = grid.x
    report = {"cases": [], "negative_controls": [], "ok": True}
    for gamma, s in pairs:
        params = cv.ModelParams(gamma, s)
        pts = random_samples(identity_samples, seed)
        fields = (2 + np.sin(x), 1.5 + 0.5 * np.cos(2 * x))
        case = {
            "gamma": gamma, "s": s,
            "modulated_pressure_algebraic": identity_modulated_pressure(pts, params),
            "modulated_pressure_field": identity_modulated_pressure(fields, params, "field",
                                                                    grid),
            "glt_equivalence": identity_glt_equivalence(pts, params),
            "ratios": {},
        }
        if s == -1:
            case["quantum_case"] = quantum_case_consistency(pts, params)
        ok = (case["modulated_pressure_algebraic"] <= identity_tol
              and case["modulated_pressure_field"] <= field_tol
              and case["glt_equivalence"] <= identity_tol
              and case.get("quantum_case", 0.0) <= identity_tol)
        for lem in LEMMA_IDS:
            rep = bound_ratios(region, params, lem)
            case["ratios"][lem] = rep.to_dict()
            ok = ok and np.isfinite(rep.sup_ratio) and rep.stable
        case["pass"] = bool(ok)
        report["ok"] = report["ok"] and bool(ok)
        report["cases"].append(case)
    for gamma, s in negative_controls:
        params = cv.ModelParams(gamma, s, lemma_hypotheses=False)
        growth = {lem: growth_factor(params, lem, region, growth_rho_max)
                  for lem in ("tech2", "tech4")}
        detected = any(g >= growth_threshold for g in growth.values())
        report["negative_controls"].append(
            {"gamma": gamma, "s": s, "growth": growth, "expected_failure_detected": detected})
        report["ok"] = report["ok"] and detected
    return report
