"""Short-rate dynamics: a generic Ito diffusion and the Vasicek model.

Vasicek closed forms are stated under the pricing measure. A constant market
price of risk ``gamma`` is absorbed into the long-run level, so every pricing
formula below uses :attr:`VasicekModel.b_q` rather than ``b``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.special import erfc

from .errors import DomainError


class Unbounded(enum.Enum):
    """Explicit infinite strike. ``BELOW`` is -inf (indicator always on), ``ABOVE`` is +inf."""

    BELOW = "-inf"
    ABOVE = "+inf"


Strike = Union[float, Unbounded]


def as_strike(k) -> Strike:
    """Normalize user input: ``"-inf"``/``-math.inf`` become tagged values."""
    if isinstance(k, Unbounded):
        return k
    if isinstance(k, str):
        return Unbounded(k.strip().lower().replace("infinity", "inf"))
    k = float(k)
    if math.isnan(k):
        raise DomainError("strike may not be NaN")
    if math.isinf(k):
        return Unbounded.BELOW if k < 0 else Unbounded.ABOVE
    return k


def norm_cdf(z):
    """Standard normal distribution function through ``erfc``; accurate in both tails."""
    return 0.5 * erfc(-np.asarray(z, dtype=float) / math.sqrt(2.0))


@dataclass(frozen=True)
class DiffusionModel:
    """``dr = drift(t, r) dt + vol(t, r) dW`` with market price of risk ``gamma(t, r)``."""

    drift: Callable
    vol: Callable
    gamma: Callable = staticmethod(lambda t, x: 0.0)
    r0: float = 0.0

    def q_drift(self, t, x):
        """Drift under the pricing measure: ``lambda + gamma * tau``."""
        return self.drift(t, x) + self.gamma(t, x) * self.vol(t, x)


@dataclass(frozen=True)
class VasicekModel:
    a: float
    b: float
    sigma: float
    gamma: float = 0.0
    r0: float = 0.03

    def __post_init__(self):
        for name in ("a", "b", "sigma", "gamma", "r0"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"Vasicek parameter {name} must be finite")
        if self.a == 0.0:
            raise DomainError("a = 0 is not supported by the Vasicek closed forms; use DiffusionModel")
        if self.sigma < 0.0:
            raise DomainError("sigma must be nonnegative")

    @property
    def b_q(self) -> float:
        """Long-run level under the pricing measure."""
        return self.b + self.sigma * self.gamma / self.a

    def as_diffusion(self) -> DiffusionModel:
        a, b, sigma, gamma = self.a, self.b, self.sigma, self.gamma
        return DiffusionModel(
            drift=lambda t, x: a * (b - np.asarray(x, dtype=float)),
            vol=lambda t, x: np.full_like(np.asarray(x, dtype=float), sigma),
            gamma=lambda t, x: np.full_like(np.asarray(x, dtype=float), gamma),
            r0=self.r0,
        )

    def risk_neutral(self) -> "VasicekModel":
        return VasicekModel(self.a, self.b_q, self.sigma, 0.0, self.r0)


# Fitted example parameters. The long-run level is 2%; see README for why.
REFERENCE_VASICEK = dict(a=0.1, b=0.02, sigma=0.01, gamma=0.0, r0=0.03)


def reference_vasicek(**overrides) -> VasicekModel:
    return VasicekModel(**{**REFERENCE_VASICEK, **overrides})


@dataclass(frozen=True)
class ConditionalMoments:
    """Gaussian law of ``(r_s, int_t^s r_u du)`` given ``r_t = x``, with ``h = s - t``."""

    mu_r: np.ndarray
    var_r: np.ndarray
    mu_rbar: np.ndarray
    var_rbar: np.ndarray
    cov: np.ndarray
    rho: np.ndarray


def _one_minus_exp(u):
    return -np.expm1(-u)


def conditional_moments(model: VasicekModel, h, x, *, measure: str = "q") -> ConditionalMoments:
    """Closed-form conditional moments over horizon ``h`` (broadcasts with ``x``).

    ``measure="q"`` uses the pricing-measure level ``b_q``; ``"p"`` uses ``b``.
    """
    h = np.asarray(h, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(h < 0):
        raise DomainError("horizon h must be nonnegative")
    a, s = model.a, model.sigma
    b = model.b_q if measure == "q" else model.b
    u = a * h
    e1 = _one_minus_exp(u)
    e2 = _one_minus_exp(2.0 * u)
    mu_r = x * (1.0 - e1) + b * e1
    mu_rbar = (x - b) * e1 / a + b * h
    var_r = s * s * e2 / (2.0 * a)
    # h - 2(1-e^{-u})/a + (1-e^{-2u})/(2a) cancels badly for small u; use its series there.
    with np.errstate(invalid="ignore"):
        bracket = np.where(
            np.abs(u) < 1e-3,
            (u**3 / 3.0 - u**4 / 4.0 + 7.0 * u**5 / 60.0) / a,
            h - 2.0 * e1 / a + e2 / (2.0 * a),
        )
    var_rbar = np.maximum(s * s / (a * a) * bracket, 0.0)
    # (1-e^{-u})/a - (1-e^{-2u})/(2a) == (1-e^{-u})^2 / (2a)
    cov = s * s * e1 * e1 / (2.0 * a * a)
    denom = np.sqrt(var_r * var_rbar)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(denom > 0, cov / np.where(denom > 0, denom, 1.0), 0.0)
    rho = np.clip(rho, -1.0, 1.0)
    mu_r, mu_rbar, var_r, var_rbar, cov, rho = np.broadcast_arrays(mu_r, mu_rbar, var_r, var_rbar, cov, rho)
    return ConditionalMoments(mu_r, var_r, mu_rbar, var_rbar, cov, rho)


def _scalar(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def zcb_price(model: VasicekModel, h, x):
    """Zero-coupon bond ``E_Q[exp(-int_t^{t+h} r du) | r_t = x]``."""
    m = conditional_moments(model, h, x)
    return _scalar(np.exp(-m.mu_rbar + 0.5 * m.var_rbar))


def digital_rate_price(model: VasicekModel, h, x, K: Strike):
    """``E_Q[exp(-int r) 1{r_{t+h} >= K} | r_t = x]``.

    Under the measure with density ``exp(-R)/E[exp(-R)]`` the terminal rate
    stays Gaussian with variance ``var_r`` and mean shifted by ``-cov``.
    """
    K = as_strike(K)
    m = conditional_moments(model, h, x)
    bond = np.exp(-m.mu_rbar + 0.5 * m.var_rbar)
    if K is Unbounded.BELOW:
        return _scalar(bond)
    if K is Unbounded.ABOVE:
        return _scalar(np.zeros_like(bond))
    sd = np.sqrt(m.var_r)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (m.mu_r - m.cov - K) / np.where(sd > 0, sd, 1.0)
    prob = np.where(sd > 0, norm_cdf(z), (m.mu_r >= K).astype(float))
    return _scalar(bond * prob)


def digital_average_price(model: VasicekModel, t, s, x, y, K: Strike):
    """``E_Q[exp(-int_t^s r) 1{y + int_t^s r >= K s} | r_t = x]``.

    ``y`` is the realized integral of the rate over ``[0, t]``. Tilting by
    ``exp(-R)`` shifts the mean of ``R = int_t^s r`` by ``-var_rbar``.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t > s):
        raise DomainError("digital_average_price requires t <= s")
    K = as_strike(K)
    m = conditional_moments(model, s - t, x)
    bond = np.exp(-m.mu_rbar + 0.5 * m.var_rbar)
    if K is Unbounded.BELOW:
        return _scalar(bond)
    if K is Unbounded.ABOVE:
        return _scalar(np.zeros_like(bond))
    gap = K * s - np.asarray(y, dtype=float)
    sd = np.sqrt(m.var_rbar)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (m.mu_rbar - m.var_rbar - gap) / np.where(sd > 0, sd, 1.0)
    prob = np.where(sd > 0, norm_cdf(z), (m.mu_rbar >= gap).astype(float))
    return _scalar(bond * prob)


# ---------------------------------------------------------------------------
# Path simulation

# Paths are generated in fixed-size blocks; block ``i`` draws from the child
# stream ``SeedSequence(seed).spawn(...)[i]``. Results therefore do not depend
# on how blocks are scheduled across workers.
BLOCK_SIZE = 1 << 14


def block_streams(seed: int, n_paths: int):
    """Yield ``(start, stop, Generator)`` for each fixed-size path block."""
    n_blocks = max(1, -(-n_paths // BLOCK_SIZE))
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    for i, child in enumerate(children):
        start = i * BLOCK_SIZE
        yield start, min(n_paths, start + BLOCK_SIZE), np.random.default_rng(child)


@dataclass(frozen=True)
class PathEnsemble:
    """Simulated paths: ``r[k, p]`` and ``rbar[k, p]`` at ``times[k]``."""

    times: np.ndarray
    r: np.ndarray
    rbar: np.ndarray
    seed: int


def _step_count(horizon: float, dt: float) -> int:
    if dt <= 0:
        raise DomainError("dt must be positive")
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    n = int(round(horizon / dt))
    if horizon > 0 and n == 0:
        n = 1
    return n


class ExactStepper:
    """Exact joint transition of ``(r, int r)`` over a fixed step ``dt``."""

    def __init__(self, model: VasicekModel, dt: float, measure: str = "q"):
        m = conditional_moments(model, dt, 0.0, measure=measure)
        b = model.b_q if measure == "q" else model.b
        self.decay = math.exp(-model.a * dt)
        self.r_const = b * (1.0 - self.decay)
        self.rbar_slope = -math.expm1(-model.a * dt) / model.a
        self.rbar_const = b * dt - b * self.rbar_slope
        var_r = float(m.var_r)
        var_rbar = float(m.var_rbar)
        cov = float(m.cov)
        self.sd_r = math.sqrt(var_r)
        self.load = cov / self.sd_r if self.sd_r > 0 else 0.0
        self.sd_resid = math.sqrt(max(var_rbar - self.load**2, 0.0))

    def step(self, r, rng):
        z1 = rng.standard_normal(r.shape)
        z2 = rng.standard_normal(r.shape)
        dr = self.rbar_slope * r + self.rbar_const + self.load * z1 + self.sd_resid * z2
        r_next = self.decay * r + self.r_const + self.sd_r * z1
        return r_next, dr


def simulate_exact(model: VasicekModel, t0: float, x0: float, y0: float, horizon: float, dt: float,
                   n_paths: int, seed: int, measure: str = "q") -> PathEnsemble:
    """Simulate ``(r, rbar)`` on ``t0 + k*dt`` by sampling the exact Gaussian transition.

    ``rbar`` starts at ``y0`` and accumulates the integral of ``r``.
    """
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    n = _step_count(horizon, dt)
    h = horizon / n if n else dt
    stepper = ExactStepper(model, h, measure)
    r = np.empty((n + 1, n_paths))
    rbar = np.empty((n + 1, n_paths))
    r[0] = x0
    rbar[0] = y0
    for start, stop, rng in block_streams(seed, n_paths):
        cur = np.full(stop - start, float(x0))
        acc = np.full(stop - start, float(y0))
        for k in range(n):
            cur, inc = stepper.step(cur, rng)
            acc = acc + inc
            r[k + 1, start:stop] = cur
            rbar[k + 1, start:stop] = acc
    return PathEnsemble(t0 + h * np.arange(n + 1), r, rbar, seed)


def simulate_euler(model: DiffusionModel, t0: float, x0: float, y0: float, horizon: float, dt: float,
                   n_paths: int, seed: int) -> PathEnsemble:
    """Euler-Maruyama under the pricing measure for a generic diffusion.

    The running integral uses the trapezoid rule. The scheme is first order
    weak; halve ``dt`` until the quantity of interest stops moving.
    """
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    n = _step_count(horizon, dt)
    h = horizon / n if n else dt
    r = np.empty((n + 1, n_paths))
    rbar = np.empty((n + 1, n_paths))
    r[0] = x0
    rbar[0] = y0
    sq = math.sqrt(h)
    for start, stop, rng in block_streams(seed, n_paths):
        cur = np.full(stop - start, float(x0))
        acc = np.full(stop - start, float(y0))
        for k in range(n):
            t = t0 + k * h
            nxt = cur + model.q_drift(t, cur) * h + model.vol(t, cur) * sq * rng.standard_normal(cur.shape)
            acc = acc + 0.5 * h * (cur + nxt)
            cur = nxt
            r[k + 1, start:stop] = cur
            rbar[k + 1, start:stop] = acc
    return PathEnsemble(t0 + h * np.arange(n + 1), r, rbar, seed)
