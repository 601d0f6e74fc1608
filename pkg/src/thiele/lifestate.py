"""Multi-state Markov model of the insured.

Contract time ``t`` is measured in years from policy inception. Transition
probabilities ``p_ij(s, t)`` are obtained from the intensities by integrating
the Kolmogorov forward equation ``d/dt P(s, t) = P(s, t) Q(t)`` with a
fixed-step classical Runge-Kutta scheme.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, RateEvaluationError

# Negative entries down to this magnitude are rounding noise and are clamped.
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class GompertzMakeham:
    """Force of mortality ``alpha0 + alpha1 * exp(alpha2 * (entry_age + t))``.

    ``entry_age`` shifts the law so that contract time 0 corresponds to the
    age at inception; with the default of 0 the law is used as is.
    """

    alpha0: float
    alpha1: float
    alpha2: float
    entry_age: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.alpha0, self.alpha1, self.alpha2, self.entry_age)):
            raise DomainError("Gompertz-Makeham parameters must be finite")
        if self.alpha1 < 0:
            raise DomainError("alpha1 must be nonnegative")

    @property
    def _scale(self) -> float:
        # alpha1 * exp(alpha2 * entry_age), i.e. the law pre-shifted to entry age
        return self.alpha1 * math.exp(self.alpha2 * self.entry_age)

    def rate(self, t):
        return self.alpha0 + self._scale * np.exp(self.alpha2 * np.asarray(t, dtype=float))

    def cumulative_hazard(self, s, t):
        """Closed-form integral of the force of mortality over [s, t]."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.alpha2 == 0.0:
            return (self.alpha0 + self._scale) * (t - s)
        return self.alpha0 * (t - s) + (self._scale / self.alpha2) * (
            np.exp(self.alpha2 * t) - np.exp(self.alpha2 * s)
        )


# Fitted Gompertz-Makeham parameters used by the shipped configurations.
REFERENCE_MORTALITY = (0.00127529, 2.51137e-6, 0.1271853)
REFERENCE_ENTRY_AGE = 30.0


def reference_mortality(entry_age: float = REFERENCE_ENTRY_AGE) -> GompertzMakeham:
    return GompertzMakeham(*REFERENCE_MORTALITY, entry_age=entry_age)


def mortality_rate(mortality: GompertzMakeham, t):
    return mortality.rate(t)


def survival_probability(mortality: GompertzMakeham, s, t):
    """``exp(-int_s^t mu(u) du)`` in closed form; ``s`` and ``t`` broadcast."""
    s_arr = np.asarray(s, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    if np.any(s_arr > t_arr) or np.any(s_arr < 0):
        raise DomainError("survival_probability requires 0 <= s <= t")
    out = np.exp(-mortality.cumulative_hazard(s_arr, t_arr))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TransitionModel:
    """Finite-state Markov chain with time-dependent transition intensities.

    ``intensity(t)`` returns an ``(m, m)`` array whose off-diagonal entries are
    the rates ``mu_ij(t)`` per year; the diagonal is ignored.
    """

    states: tuple[str, ...]
    intensity: Callable[[float], np.ndarray]
    absorbing: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        if len(self.states) < 2:
            raise DomainError("a transition model needs at least two states")
        if len(set(self.states)) != len(self.states):
            raise DomainError("state names must be unique")
        if not self.absorbing:
            object.__setattr__(self, "absorbing", (False,) * len(self.states))
        elif len(self.absorbing) != len(self.states):
            raise DomainError("absorbing flags must match the number of states")

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self, state) -> int:
        if isinstance(state, (int, np.integer)):
            if not 0 <= state < self.size:
                raise IndexError(f"state index {state} out of range")
            return int(state)
        return self.states.index(state)

    def rates(self, t: float) -> np.ndarray:
        """Validated off-diagonal rate matrix at time ``t`` (zero diagonal)."""
        mu = np.array(self.intensity(t), dtype=float, copy=True)
        m = self.size
        if mu.shape != (m, m):
            raise RateEvaluationError(f"intensity returned shape {mu.shape}, expected {(m, m)}")
        np.fill_diagonal(mu, 0.0)
        if not np.all(np.isfinite(mu)):
            raise RateEvaluationError(f"non-finite transition rate at t={t:g}")
        if np.any(mu < 0):
            raise RateEvaluationError(f"negative transition rate at t={t:g}")
        for i, absorbing in enumerate(self.absorbing):
            if absorbing and np.any(mu[i] != 0):
                raise RateEvaluationError(f"absorbing state {self.states[i]!r} has outgoing rate at t={t:g}")
        return mu

    def generator(self, t: float) -> np.ndarray:
        mu = self.rates(t)
        return mu - np.diag(mu.sum(axis=1))

    @classmethod
    def two_state(cls, mortality) -> "TransitionModel":
        """Alive/dead model; ``mortality`` is a GompertzMakeham or any ``t -> rate`` callable."""
        force = mortality.rate if hasattr(mortality, "rate") else mortality

        def intensity(t):
            return np.array([[0.0, float(force(t))], [0.0, 0.0]])

        return cls(states=("alive", "dead"), intensity=intensity, absorbing=(False, True))

    @classmethod
    def constant(cls, states: Sequence[str], rates: np.ndarray) -> "TransitionModel":
        rates = np.array(rates, dtype=float)
        absorbing = tuple(bool(np.all(np.delete(rates[i], i) == 0)) for i in range(len(states)))
        return cls(states=tuple(states), intensity=lambda t: rates, absorbing=absorbing)


def _rk4_step(model: TransitionModel, p: np.ndarray, t: float, h: float) -> np.ndarray:
    q0 = model.generator(t)
    qm = model.generator(t + 0.5 * h)
    q1 = model.generator(t + h)
    k1 = p @ q0
    k2 = (p + 0.5 * h * k1) @ qm
    k3 = (p + 0.5 * h * k2) @ qm
    k4 = (p + h * k3) @ q1
    return p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _clamp(p: np.ndarray, t: float) -> np.ndarray:
    if np.any(p < -CLAMP_TOL):
        raise RateEvaluationError(
            f"transition probability {p.min():.3e} < 0 at t={t:g}; increase the number of steps"
        )
    return np.clip(p, 0.0, 1.0)


def transition_probabilities(model: TransitionModel, s: float, t: float, steps: int = 200) -> np.ndarray:
    """Matrix ``P[i, j] = p_ij(s, t)`` from ``steps`` RK4 steps of the forward equation."""
    if s > t:
        raise DomainError(f"transition_probabilities requires s <= t (got s={s}, t={t})")
    if steps < 1:
        raise DomainError("steps must be >= 1")
    p = np.eye(model.size)
    if s == t:
        return p
    h = (t - s) / steps
    for k in range(steps):
        p = _rk4_step(model, p, s + k * h, h)
    return _clamp(p, t)


def transition_path(model: TransitionModel, s: float, times, steps_per_year: int = 200) -> np.ndarray:
    """``p_ij(s, u)`` for every ``u`` in the increasing sequence ``times`` (all >= s).

    Returns an array of shape ``(len(times), m, m)``. Each interval between
    consecutive times is integrated with at least one RK4 step.
    """
    times = np.asarray(times, dtype=float)
    if times.size and (times[0] < s or np.any(np.diff(times) < 0)):
        raise DomainError("times must be nondecreasing and start at or after s")
    out = np.empty((times.size, model.size, model.size))
    p = np.eye(model.size)
    current = s
    for k, u in enumerate(times):
        if u > current:
            n = max(1, int(math.ceil((u - current) * steps_per_year)))
            h = (u - current) / n
            for i in range(n):
                p = _rk4_step(model, p, current + i * h, h)
            p = _clamp(p, u)
            current = u
        out[k] = p
    return out
