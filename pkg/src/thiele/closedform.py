"""Prospective reserves of the two-state products by quadrature over the
Vasicek bond and digital prices, and fair-premium solving."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProductError, DomainError, ProductError
from .lifestate import GompertzMakeham, TransitionModel, survival_probability, transition_path
from .policy import ProductParams
from .shortrate import (
    Unbounded,
    VasicekModel,
    conditional_moments,
    digital_average_price,
    digital_rate_price,
    norm_cdf,
    simulate_exact,
    zcb_price,
)


@dataclass(frozen=True)
class QuadratureRule:
    scheme: str = "simpson"
    panels_per_year: int = 32

    def __post_init__(self):
        if self.scheme not in ("simpson", "trapezoid"):
            raise DomainError(f"unknown quadrature scheme {self.scheme!r}")
        if self.panels_per_year < 2:
            raise DomainError("panels_per_year must be >= 2")

    def nodes(self, lo: float, hi: float, breakpoints=()):
        """Nodes and weights on ``[lo, hi]``; every breakpoint is a panel boundary."""
        if hi < lo:
            raise DomainError("quadrature interval is reversed")
        if hi == lo:
            return np.array([lo]), np.array([0.0])
        cuts = [lo] + sorted(b for b in breakpoints if lo < b < hi) + [hi]
        xs, ws = [], []
        for a, b in zip(cuts[:-1], cuts[1:]):
            n = max(2, int(math.ceil((b - a) * self.panels_per_year - 1e-9)))
            if self.scheme == "simpson" and n % 2:
                n += 1
            x = np.linspace(a, b, n + 1)
            step = (b - a) / n
            if self.scheme == "simpson":
                w = np.full(n + 1, 2.0)
                w[1::2] = 4.0
                w[0] = w[-1] = 1.0
                w *= step / 3.0
            else:
                w = np.full(n + 1, step)
                w[0] = w[-1] = 0.5 * step
            xs.append(x)
            ws.append(w)
        return np.concatenate(xs), np.concatenate(ws)


DEFAULT_RULE = QuadratureRule()


def survival(life, t: float, s):
    """``p_**(t, s)`` for a Gompertz-Makeham law or a two-state TransitionModel."""
    s = np.asarray(s, dtype=float)
    if isinstance(life, GompertzMakeham):
        return survival_probability(life, np.full_like(s, t), s)
    if isinstance(life, TransitionModel):
        return transition_path(life, t, s)[:, 0, 0]
    raise TypeError(f"unsupported life model {type(life).__name__}")


def _leg(life, model, t, x, lo, hi, K, rule, origin=None, breakpoints=()):
    """``int_lo^hi p(o, s) U^K_s(o, x) ds`` with ``o`` = origin (default ``t``)."""
    o = t if origin is None else origin
    x = np.asarray(x, dtype=float)
    if hi <= lo:
        return np.zeros_like(x)
    s, w = rule.nodes(lo, hi, breakpoints)
    p = survival(life, o, s)
    u = digital_rate_price(model, (s - o)[:, None], x[None, ...] if x.ndim else x, K)
    u = np.asarray(u).reshape((s.size,) + x.shape)
    return np.tensordot(w * p, u, axes=(0, 0))


def _check_t(t, T):
    if not 0 <= t <= T:
        raise DomainError(f"t={t} outside [0, {T}]")


def _result(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


def endowment_reduction_reserve(params: ProductParams, life, model: VasicekModel, t, x,
                                rule: QuadratureRule = DEFAULT_RULE):
    T = params.T
    _check_t(t, T)
    full = _leg(life, model, t, x, t, T, Unbounded.BELOW, rule)
    if params.rho:
        high = _leg(life, model, t, x, t, T, params.K, rule)
    else:
        high = 0.0
    bond = params.E * survival(life, t, np.array([T]))[0] * np.asarray(zcb_price(model, T - t, x))
    return _result(-params.premium * (full - params.rho * high) + bond)


def pension_bonus_reserve(params: ProductParams, life, model: VasicekModel, t, x,
                          rule: QuadratureRule = DEFAULT_RULE, valuation: str = "standard"):
    """Pension with bonus while ``x >= K``, truncated at ``params.T``.

    ``valuation="retirement"`` values the pension leg before retirement as of
    ``T_hat`` (survival and discounting start at ``T_hat`` with the rate at its
    current level). This convention reproduces the reference premiums; the
    ``"standard"`` one is the prospective reserve.
    """
    if valuation not in ("standard", "retirement"):
        raise DomainError(f"unknown pension valuation {valuation!r}")
    T, Th, K = params.T, params.T_hat, params.K
    _check_t(t, T)
    lo = min(t, Th)
    prem = _leg(life, model, t, x, lo, Th, Unbounded.BELOW, rule)
    if params.premium_gated:
        prem = prem - _leg(life, model, t, x, lo, Th, K, rule)
    start = max(t, Th)
    origin = Th if (valuation == "retirement" and t < Th) else t
    pens = _leg(life, model, t, x, start, T, Unbounded.BELOW, rule, origin=origin)
    if params.rho:
        pens = pens + params.rho * _leg(life, model, t, x, start, T, K, rule, origin=origin)
    return _result(-params.premium * prem + params.P * pens)


def pension_value(P: float, T_hat: float, T: float, life, model: VasicekModel, t, x,
                  rule: QuadratureRule = DEFAULT_RULE):
    """``P * int_{max(t,T_hat)}^T p(t, s) zcb(s - t, x) ds``: the inner pension reserve."""
    _check_t(t, T)
    return _result(P * _leg(life, model, t, x, max(t, T_hat), T, Unbounded.BELOW, rule))


def binary_endowment_reserve(params: ProductParams, life, model: VasicekModel, t, x, y,
                             rule: QuadratureRule = DEFAULT_RULE):
    """Pays ``E1`` at ``T`` if the rate integral reaches ``K*T``, else ``E2``, less premiums."""
    T, K = params.T, params.K
    _check_t(t, T)
    surv = survival(life, t, np.array([T]))[0]
    hit = np.asarray(digital_average_price(model, t, T, x, y, K))
    bond = np.asarray(zcb_price(model, T - t, x))
    benefit = surv * (params.E1 * hit + params.E2 * (bond - hit))
    prem = _leg(life, model, t, x, t, T, Unbounded.BELOW, rule) if params.premium else 0.0
    return _result(benefit - params.premium * prem)


def rate_option_reserve(params: ProductParams, life, model: VasicekModel, t, x):
    """Caps, floors, caplets and floorlets on the terminal rate.

    Under the bond-tilted measure ``r_T`` is Gaussian with mean
    ``mu_r - cov`` and variance ``var_r``, which gives the usual
    normal-model call and put formulas for caplets and floorlets.
    """
    T, K, E = params.T, params.K, params.E
    _check_t(t, T)
    surv = survival(life, t, np.array([T]))[0]
    bond = np.asarray(zcb_price(model, T - t, x))
    if params.template == "rate_cap":
        val = digital_rate_price(model, T - t, x, K)
    elif params.template == "rate_floor":
        val = bond - np.asarray(digital_rate_price(model, T - t, x, K))
    elif params.template in ("caplet", "floorlet"):
        if isinstance(K, Unbounded):
            raise ProductError("caplet/floorlet need a finite strike")
        m = conditional_moments(model, T - t, x)
        mean = m.mu_r - m.cov
        sd = np.sqrt(m.var_r)
        sign = 1.0 if params.template == "caplet" else -1.0
        if np.all(sd > 0):
            d = sign * (mean - K) / sd
            pdf = np.exp(-0.5 * d * d) / math.sqrt(2 * math.pi)
            val = bond * (sign * (mean - K) * norm_cdf(d) + sd * pdf)
        else:
            val = bond * np.maximum(sign * (mean - K), 0.0)
    else:
        raise ProductError(f"{params.template} is not a rate option")
    return _result(E * surv * np.asarray(val))


def reserve(params: ProductParams, life, model: VasicekModel, t, x, y=0.0,
            rule: QuadratureRule = DEFAULT_RULE, valuation: str = "standard"):
    """Dispatch to the closed-form reserve of ``params.template``."""
    tpl = params.template
    if tpl == "endowment_reduction":
        return endowment_reduction_reserve(params, life, model, t, x, rule)
    if tpl == "pension_bonus":
        return pension_bonus_reserve(params, life, model, t, x, rule, valuation)
    if tpl == "binary_average_endowment":
        return binary_endowment_reserve(params, life, model, t, x, y, rule)
    if tpl in ("rate_cap", "rate_floor", "caplet", "floorlet"):
        return rate_option_reserve(params, life, model, t, x)
    raise ProductError(f"no closed form for template {tpl!r}")


PREMIUM_TEMPLATES = ("endowment_reduction", "pension_bonus", "binary_average_endowment")


@dataclass(frozen=True)
class PremiumQuote:
    premium: float
    benefit_value: float
    annuity_value: float


def solve_premium(params: ProductParams, life, model: VasicekModel, r0=None, y0: float = 0.0,
                  rule: QuadratureRule = DEFAULT_RULE, valuation: str = "standard") -> PremiumQuote:
    """Yearly premium making the reserve vanish at inception.

    The reserve is affine in the premium: the benefit value is the reserve
    at premium 0 and the annuity value is minus the reserve of a unit premium
    with all benefits removed, so the root needs no iteration.
    """
    if params.template not in PREMIUM_TEMPLATES:
        raise ProductError(f"template {params.template!r} has no premium leg")
    x = model.r0 if r0 is None else r0
    v0 = float(reserve(params.with_(premium=0.0), life, model, 0.0, x, y0, rule, valuation))
    unit = params.with_(premium=1.0, E=0.0, E1=0.0, E2=0.0, P=0.0)
    annuity = -float(reserve(unit, life, model, 0.0, x, y0, rule, valuation))
    if not math.isfinite(annuity) or abs(annuity) < 1e-300:
        raise DegenerateProductError("premium annuity value is zero")
    return PremiumQuote(premium=v0 / annuity, benefit_value=v0, annuity_value=annuity)


def mean_reserve_difference(params_a: ProductParams, params_b: ProductParams, life, model: VasicekModel,
                            t_grid, n_paths: int, seed: int, rule: QuadratureRule = DEFAULT_RULE,
                            valuation: str = "standard"):
    """Monte Carlo mean and standard error of ``V_a(t, r_t) - V_b(t, r_t)`` on ``t_grid``.

    ``r_t`` is simulated from ``model.r0`` under the real-world measure and
    the closed-form reserves are applied path by path. ``t_grid`` must be
    uniform and start at 0.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0.0:
        raise DomainError("t_grid must start at 0")
    steps = np.diff(t_grid)
    if steps.size and not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise DomainError("t_grid must be uniform")
    if steps.size:
        ens = simulate_exact(model, 0.0, model.r0, 0.0, t_grid[-1], steps[0], n_paths, seed, measure="p")
        paths = ens.r
    else:
        paths = np.full((1, n_paths), model.r0)
    mean = np.empty(t_grid.size)
    err = np.empty(t_grid.size)
    for k, t in enumerate(t_grid):
        x = paths[k]
        d = np.asarray(reserve(params_a, life, model, t, x, 0.0, rule, valuation)) - np.asarray(
            reserve(params_b, life, model, t, x, 0.0, rule, valuation))
        mean[k] = d.mean()
        err[k] = d.std(ddof=1) / math.sqrt(d.size) if d.size > 1 else 0.0
    return mean, err
