"""Risk-neutral Monte Carlo reserves, used as an independent oracle.

State uncertainty is integrated out with transition probabilities; only the
short rate is simulated. Per path the estimator is

    int_t^T e^{-R_s} sum_j p_ij(t,s) [g_j + sum_k mu_jk h_jk] ds
        + e^{-R_T} sum_j p_ij(t,T) f_j,

with ``R_s = int_t^s r`` and the time integral taken by the trapezoid rule
on the simulation grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .lifestate import TransitionModel, transition_path
from .policy import PolicySpec, evaluate_cashflow
from .shortrate import DiffusionModel, ExactStepper, VasicekModel, block_streams


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n_paths: int
    seed: int


def _step_grid(t: float, T: float, dt: float, breakpoints):
    """Simulation times on [t, T] with spacing <= dt and each breakpoint as a node."""
    cuts = [t] + [b for b in breakpoints if t < b < T] + [T]
    pieces = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(math.ceil((b - a) / dt - 1e-9)))
        pieces.append(np.linspace(a, b, n + 1)[:-1])
    return np.concatenate(pieces + [np.array([T])])


def _running_rate(spec: PolicySpec, life: TransitionModel, probs, s, x, y, side: str):
    """``sum_j p_ij [g_j + sum_k mu_jk h_jk]`` at time ``s``; ``side`` picks a one-sided limit."""
    if side == "left":
        s_eval = float(np.nextafter(s, -np.inf))
    else:
        s_eval = float(s)
    mu = life.rates(s)
    total = np.zeros_like(x)
    for j in range(spec.n_states):
        if probs[j] == 0.0:
            continue
        if spec.running[j] is not None:
            total = total + probs[j] * evaluate_cashflow(spec, "running", j, s_eval, x, y)
        for k in range(spec.n_states):
            if k != j and mu[j, k] != 0.0 and spec.transition.get((j, k)) is not None:
                total = total + probs[j] * mu[j, k] * evaluate_cashflow(spec, "transition", (j, k), s_eval, x, y)
    return total


def pathwise_values(model, life: TransitionModel, spec: PolicySpec, t: float, x: float, y: float,
                    dt: float, n_paths: int, seed: int, state: int = 0) -> np.ndarray:
    """Discounted cash flow of every simulated path (the MC sample)."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    if not spec.start - 1e-12 <= t <= spec.horizon:
        raise DomainError(f"t={t} outside the policy term")
    T = spec.horizon
    times = _step_grid(t, T, dt, spec.breakpoints)
    probs = transition_path(life, t, times)[:, state, :]
    has_running = any(g is not None for g in spec.running) or bool(spec.transition)
    steppers = {}
    samples = np.empty(n_paths)
    for start, stop, rng in block_streams(seed, n_paths):
        n = stop - start
        r = np.full(n, float(x))
        R = np.zeros(n)
        acc = np.zeros(n)
        if has_running and times.size > 1:
            prev = _running_rate(spec, life, probs[0], times[0], r, y + R, "right")
        for k in range(times.size - 1):
            h = times[k + 1] - times[k]
            if isinstance(model, VasicekModel):
                key = round(h, 14)
                if key not in steppers:
                    steppers[key] = ExactStepper(model, h)
                r, dR = steppers[key].step(r, rng)
            else:
                r_new = r + model.q_drift(times[k], r) * h + model.vol(times[k], r) * math.sqrt(h) * rng.standard_normal(n)
                dR = 0.5 * h * (r + r_new)
                r = r_new
            R_new = R + dR
            if has_running:
                left = _running_rate(spec, life, probs[k + 1], times[k + 1], r, y + R_new, "left")
                acc += 0.5 * h * (np.exp(-R) * prev + np.exp(-R_new) * left)
                if k + 1 < times.size - 1:
                    prev = _running_rate(spec, life, probs[k + 1], times[k + 1], r, y + R_new, "right")
            R = R_new
        terminal = np.zeros(n)
        for j in range(spec.n_states):
            if spec.terminal[j] is not None and probs[-1, j] != 0.0:
                terminal += probs[-1, j] * evaluate_cashflow(spec, "terminal", j, T, r, y + R)
        samples[start:stop] = acc + np.exp(-R) * terminal
    return samples


def _pairwise_sum(v: np.ndarray) -> float:
    # numpy's float reductions are pairwise; kept explicit to document the contract
    return float(np.add.reduce(v, dtype=np.float64))


def mc_reserve(model, life: TransitionModel, spec: PolicySpec, t: float, x: float, y: float = 0.0,
               dt: float = 0.05, n_paths: int = 100_000, seed: int = 0, state: int = 0) -> McEstimate:
    """Monte Carlo reserve of ``spec`` in ``state`` at ``(t, x, y)``.

    Vasicek models use exact transitions; a generic :class:`DiffusionModel`
    falls back to Euler-Maruyama (halve ``dt`` to check the bias).
    """
    if n_paths < 2:
        raise DomainError("n_paths must be >= 2")
    v = pathwise_values(model, life, spec, t, x, y, dt, n_paths, seed, state)
    mean = _pairwise_sum(v) / n_paths
    var = _pairwise_sum((v - mean) ** 2) / (n_paths - 1)
    return McEstimate(mean=mean, stderr=math.sqrt(var / n_paths), n_paths=n_paths, seed=seed)


@dataclass
class SpotcheckReport:
    nodes: list
    surface_values: np.ndarray
    estimates: list
    z: np.ndarray
    threshold: float = 3.0

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z))) if self.z.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_abs_z <= self.threshold

    def lines(self):
        for node, sv, est, z in zip(self.nodes, self.surface_values, self.estimates, self.z):
            yield (f"node={tuple(float(c) for c in node)} surface={sv:.6g} mc={est.mean:.6g} "
                   f"stderr={est.stderr:.3g} z={z:+.3f}")


def surface_spotcheck(model, life: TransitionModel, spec: PolicySpec, surface, nodes, dt: float = 0.05,
                      n_paths: int = 100_000, seed: int = 0, state: int = 0,
                      threshold: float = 3.0) -> SpotcheckReport:
    """Compare a solved surface with MC at ``nodes`` (``(t, x)`` or ``(t, x, y)`` tuples)."""
    values, ests, zs = [], [], []
    for i, node in enumerate(nodes):
        t, x = float(node[0]), float(node[1])
        y = float(node[2]) if len(node) > 2 else 0.0
        if not (surface.x[0] < x < surface.x[-1]):
            raise DomainError(f"node {node} is outside the surface interior")
        sv = surface.value_at(t, x, y if surface.is_2d else None, state=state)
        est = mc_reserve(model, life, spec, t, x, y, dt, n_paths, seed + i, state)
        diff = sv - est.mean
        if est.stderr > 0:
            z = diff / est.stderr
        else:
            z = 0.0 if abs(diff) <= 1e-9 * max(1.0, abs(sv)) else math.copysign(math.inf, diff)
        values.append(sv)
        ests.append(est)
        zs.append(z)
    return SpotcheckReport(list(nodes), np.array(values), ests, np.array(zs), threshold)
