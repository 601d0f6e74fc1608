"""Interest-rate dependent policy cash flows and the product templates.

A :class:`PolicySpec` carries, per state ``i``, a terminal payoff
``f_i(x, y)`` paid at the horizon, a running payment rate ``g_i(t, x, y)``
and, per pair ``(i, j)``, a lump sum ``h_ij(t, x, y)`` paid on transition.
``x`` is the current short rate and ``y`` the integral of the rate since
inception. Benefits are positive, premiums negative. All callables must
accept numpy arrays and broadcast. ``None`` stands for an identically zero
function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ProductError
from .shortrate import Strike, Unbounded, as_strike

Terminal = Callable[[np.ndarray, np.ndarray], np.ndarray]
Running = Callable[[float, np.ndarray, np.ndarray], np.ndarray]

TEMPLATES = (
    "endowment_reduction",
    "pension_bonus",
    "rate_cap",
    "rate_floor",
    "caplet",
    "floorlet",
    "binary_average_endowment",
    "reinsurance_treaty",
)

ALIVE, DEAD = 0, 1


@dataclass(frozen=True)
class PolicySpec:
    n_states: int
    horizon: float
    terminal: tuple = ()
    running: tuple = ()
    transition: dict = field(default_factory=dict)
    uses_average: bool = False
    breakpoints: tuple = ()
    start: float = 0.0

    def __post_init__(self):
        if not self.terminal:
            object.__setattr__(self, "terminal", (None,) * self.n_states)
        if not self.running:
            object.__setattr__(self, "running", (None,) * self.n_states)
        if len(self.terminal) != self.n_states or len(self.running) != self.n_states:
            raise ProductError("terminal/running need one entry per state")
        if not self.start < self.horizon:
            raise ProductError(f"policy start {self.start} must precede horizon {self.horizon}")
        for (i, j) in self.transition:
            if i == j or not (0 <= i < self.n_states and 0 <= j < self.n_states):
                raise ProductError(f"invalid transition pair {(i, j)}")
        bps = tuple(sorted(b for b in self.breakpoints if self.start < b < self.horizon))
        object.__setattr__(self, "breakpoints", bps)


def zero_policy(n_states: int = 2, horizon: float = 10.0) -> PolicySpec:
    return PolicySpec(n_states=n_states, horizon=horizon)


def _check_state(spec: PolicySpec, i: int):
    if not 0 <= i < spec.n_states:
        raise IndexError(f"state index {i} out of range for {spec.n_states} states")


def evaluate_cashflow(spec: PolicySpec, kind: str, state, t, x, y=0.0):
    """Evaluate one of the policy functions.

    ``state`` is an index for ``terminal``/``running`` and an ``(i, j)`` pair
    for ``transition``. Returns an array broadcast over ``x`` and ``y``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(x.shape, y.shape)
    if kind == "terminal":
        _check_state(spec, state)
        fn = spec.terminal[state]
        out = fn(x, y) if fn is not None else 0.0
    elif kind == "running":
        _check_state(spec, state)
        fn = spec.running[state]
        out = fn(t, x, y) if fn is not None else 0.0
    elif kind == "transition":
        i, j = state
        _check_state(spec, i)
        _check_state(spec, j)
        fn = spec.transition.get((i, j))
        out = fn(t, x, y) if fn is not None else 0.0
    else:
        raise ValueError(f"unknown cash-flow kind {kind!r}")
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()


# ---------------------------------------------------------------------------
# combinators used by linearity and aggregation checks

def _lin(fs, cs):
    live = [(f, c) for f, c in zip(fs, cs) if f is not None and c != 0]
    if not live:
        return None

    def combined(*args):
        return sum(c * np.asarray(f(*args), dtype=float) for f, c in live)

    return combined


def combine(specs, coefs) -> PolicySpec:
    """Policy paying ``sum_k coefs[k] * specs[k]`` (same states and horizon)."""
    specs = list(specs)
    coefs = [float(c) for c in coefs]
    first = specs[0]
    for s in specs[1:]:
        if (s.n_states, s.horizon, s.start) != (first.n_states, first.horizon, first.start):
            raise ProductError("combined policies must share states, start and horizon")
    n = first.n_states
    pairs = sorted({p for s in specs for p in s.transition})
    return PolicySpec(
        n_states=n,
        horizon=first.horizon,
        start=first.start,
        terminal=tuple(_lin([s.terminal[i] for s in specs], coefs) for i in range(n)),
        running=tuple(_lin([s.running[i] for s in specs], coefs) for i in range(n)),
        transition={p: _lin([s.transition.get(p) for s in specs], coefs) for p in pairs},
        uses_average=any(s.uses_average for s in specs),
        breakpoints=tuple(sorted({b for s in specs for b in s.breakpoints})),
    )


def scale(spec: PolicySpec, c: float) -> PolicySpec:
    return combine([spec], [c])


# ---------------------------------------------------------------------------
# product templates

@dataclass(frozen=True)
class ProductParams:
    """Parameters of the product templates.

    Money amounts: ``E`` endowment, ``E1``/``E2`` binary endowments, ``P``
    yearly pension. ``premium`` is a yearly premium rate. ``K`` is a rate
    threshold, and ``rho`` a reduction/bonus/cession factor in [0, 1].
    ``T`` is the contract horizon and ``T_hat`` the retirement time.
    ``premium_gated`` makes pension premiums payable only while ``x < K``.
    """

    template: str
    E: float = 0.0
    E1: float = 0.0
    E2: float = 0.0
    P: float = 0.0
    K: Strike = 0.04
    rho: float = 0.0
    premium: float = 0.0
    T: float = 10.0
    T_hat: Optional[float] = None
    premium_gated: bool = False

    def __post_init__(self):
        if self.template not in TEMPLATES:
            raise ProductError(f"unknown product template {self.template!r}")
        object.__setattr__(self, "K", as_strike(self.K))
        if not 0.0 <= self.rho <= 1.0:
            raise ProductError("rho must lie in [0, 1]")
        for name in ("E", "E1", "E2", "P", "premium"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ProductError(f"{name} must be a finite nonnegative amount")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ProductError("T must be positive")
        if self.template in ("pension_bonus", "reinsurance_treaty"):
            if self.T_hat is None or not 0 < self.T_hat < self.T:
                raise ProductError("pension products need 0 < T_hat < T")

    def with_(self, **changes) -> "ProductParams":
        return replace(self, **changes)


def indicator_ge(x, K: Strike):
    """``1{x >= K}`` as floats, with tagged infinite strikes."""
    x = np.asarray(x, dtype=float)
    if K is Unbounded.BELOW:
        return np.ones_like(x)
    if K is Unbounded.ABOVE:
        return np.zeros_like(x)
    return (x >= K).astype(float)


def indicator_le(x, K: Strike):
    x = np.asarray(x, dtype=float)
    if K is Unbounded.BELOW:
        return np.zeros_like(x)
    if K is Unbounded.ABOVE:
        return np.ones_like(x)
    return (x <= K).astype(float)


def _threshold(K: Strike, T: float) -> Strike:
    # K scaled by time for conditions on the running integral
    return K if isinstance(K, Unbounded) else K * T


def _endowment_reduction(p: ProductParams) -> PolicySpec:
    E, pi, rho, K, T = p.E, p.premium, p.rho, p.K, p.T

    def f(x, y):
        return np.full(np.broadcast_shapes(np.shape(x), np.shape(y)), E)

    def g(t, x, y):
        return -pi * (1.0 - rho * indicator_ge(x, K)) * (t < T) + 0.0 * np.asarray(y)

    return PolicySpec(n_states=2, horizon=T, terminal=(f, None), running=(g, None))


def _pension_bonus(p: ProductParams) -> PolicySpec:
    pi, P, rho, K, T, Th = p.premium, p.P, p.rho, p.K, p.T, p.T_hat
    gated = p.premium_gated

    def g(t, x, y):
        x = np.asarray(x, dtype=float) + 0.0 * np.asarray(y)
        if t < Th:
            gate = 1.0 - indicator_ge(x, K) if gated else 1.0
            return -pi * gate * np.ones_like(x)
        return P * (1.0 + rho * indicator_ge(x, K))

    return PolicySpec(n_states=2, horizon=T, running=(g, None), breakpoints=(Th,))


def _rate_option(template: str):
    def build(p: ProductParams) -> PolicySpec:
        E, K = p.E, p.K
        if template in ("caplet", "floorlet") and isinstance(K, Unbounded):
            raise ProductError("caplet/floorlet need a finite strike")

        def f(x, y):
            x = np.asarray(x, dtype=float) + 0.0 * np.asarray(y)
            if template == "rate_cap":
                return E * indicator_ge(x, K)
            if template == "rate_floor":
                return E * indicator_le(x, K)
            if template == "caplet":
                return E * np.maximum(x - K, 0.0)
            return E * np.maximum(K - x, 0.0)

        return PolicySpec(n_states=2, horizon=p.T, terminal=(f, None))

    return build


def _binary_average(p: ProductParams) -> PolicySpec:
    E1, E2, pi, T = p.E1, p.E2, p.premium, p.T
    level = _threshold(p.K, T)

    def f(x, y):
        hit = indicator_ge(np.asarray(y, dtype=float) + 0.0 * np.asarray(x), level)
        return E1 * hit + E2 * (1.0 - hit)

    def g(t, x, y):
        return np.full(np.broadcast_shapes(np.shape(x), np.shape(y)), -pi * (t < T))

    return PolicySpec(n_states=2, horizon=T, terminal=(f, None), running=(g if pi else None, None),
                      uses_average=True)


def reinsurance_pair(p: ProductParams, inner_value: Callable[[np.ndarray], np.ndarray]):
    """``(inner, outer)`` policies of the pension reinsurance treaty.

    ``inner`` pays the pension ``P`` on ``[T_hat, T]``. ``outer`` runs on
    ``[0, T_hat]`` and pays ``rho * inner_value(x)`` at ``T_hat`` when the
    rate integral up to ``T_hat`` is below ``K * T_hat``. ``inner_value`` is
    the inner reserve at ``T_hat`` as a function of the rate.
    """
    P, rho, T, Th = p.P, p.rho, p.T, p.T_hat
    level = _threshold(p.K, Th)

    def g_inner(t, x, y):
        return np.full(np.broadcast_shapes(np.shape(x), np.shape(y)), P)

    inner = PolicySpec(n_states=2, horizon=T, start=Th, running=(g_inner if P else None, None))

    def f_outer(x, y):
        x = np.asarray(x, dtype=float)
        below = 1.0 - indicator_ge(y, level)
        return rho * np.asarray(inner_value(x), dtype=float) * below

    outer = PolicySpec(n_states=2, horizon=Th, terminal=(f_outer if rho else None, None),
                       uses_average=True)
    return inner, outer


_BUILDERS = {
    "endowment_reduction": _endowment_reduction,
    "pension_bonus": _pension_bonus,
    "rate_cap": _rate_option("rate_cap"),
    "rate_floor": _rate_option("rate_floor"),
    "caplet": _rate_option("caplet"),
    "floorlet": _rate_option("floorlet"),
    "binary_average_endowment": _binary_average,
}


def make_product(params: ProductParams, inner_value=None):
    """Two-state :class:`PolicySpec` for a template.

    ``reinsurance_treaty`` returns the ``(inner, outer)`` pair from
    :func:`reinsurance_pair` and needs ``inner_value``.
    """
    if params.template == "reinsurance_treaty":
        if inner_value is None:
            raise ProductError("reinsurance_treaty needs the inner reserve at T_hat (inner_value)")
        return reinsurance_pair(params, inner_value)
    return _BUILDERS[params.template](params)
