"""Explicit finite differences for the Thiele PDE

    dV_i/dt = x V_i - g_i - sum_{j != i} mu_ij (h_ij + V_j - V_i) - L V_i,
    L = (lambda + gamma tau) d/dx + x d/dy + 1/2 tau^2 d^2/dx^2,

marched backward from ``V_i(T) = f_i``. Drift and the ``x d/dy`` transport
are upwinded (first order) except where the cell Peclet number
``|c| dx / tau^2`` is at most 1, where centred differences are already
monotone and are used instead; diffusion is centred. At the ``x`` edges the
second derivative is set to zero (linear extrapolation); at the ``y`` edges
the transport derivative is taken one-sided from the interior.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator, RegularGridInterpolator

from .errors import DivergenceError, DomainError, StabilityError
from .lifestate import TransitionModel
from .policy import PolicySpec, ProductParams, evaluate_cashflow, make_product
from .shortrate import DiffusionModel, VasicekModel

# Reported in place of an unbounded stable step.
DT_CAP = 1e9


def _nodes(lo: float, hi: float, step: float, name: str, min_intervals: int = 2) -> np.ndarray:
    if not step > 0:
        raise DomainError(f"{name} step must be positive")
    if not hi > lo:
        raise DomainError(f"{name} range is empty")
    n = int(round((hi - lo) / step))
    if n < min_intervals or abs(n * step - (hi - lo)) > 1e-9 * max(1.0, hi - lo):
        raise DomainError(f"{name} range [{lo}, {hi}] is not a multiple of the step {step}")
    return lo + step * np.arange(n + 1)


@dataclass(frozen=True)
class Grid:
    """Uniform time-rate grid. ``t0`` is the start of the solve (usually 0)."""

    t0: float
    T: float
    dt: float
    x_min: float
    x_max: float
    dx: float

    @property
    def t(self) -> np.ndarray:
        return _nodes(self.t0, self.T, self.dt, "time", min_intervals=1)

    @property
    def x(self) -> np.ndarray:
        return _nodes(self.x_min, self.x_max, self.dx, "rate")

    @property
    def nt(self) -> int:
        return int(round((self.T - self.t0) / self.dt))

    def contains_rate(self, r: float) -> bool:
        return self.x_min < r < self.x_max

    def with_(self, **kw) -> "Grid":
        return type(self)(**{**self.__dict__, **kw})

    def refined(self, factor: int = 2) -> "Grid":
        # dt shrinks by factor**2 so the refined grid keeps the diffusive CFL margin
        return self.with_(dt=self.dt / factor**2, dx=self.dx / factor)


@dataclass(frozen=True)
class Grid2(Grid):
    y_min: float = -1.0
    y_max: float = 1.0
    dy: float = 0.01

    @property
    def y(self) -> np.ndarray:
        return _nodes(self.y_min, self.y_max, self.dy, "average")

    def refined(self, factor: int = 2) -> "Grid2":
        return self.with_(dt=self.dt / factor**2, dx=self.dx / factor, dy=self.dy / factor)


def default_rate_range(model: VasicekModel, width: float = 8.0):
    """``b +/- width * sigma / sqrt(2a)``: the stationary spread around the long-run level."""
    half = width * model.sigma / math.sqrt(2.0 * abs(model.a))
    return model.b_q - half, model.b_q + half


def snapped_range(lo: float, hi: float, dx: float):
    """Widen ``[lo, hi]`` to multiples of ``dx`` so any multiple of ``dx`` is a node."""
    return math.floor(lo / dx + 1e-9) * dx, math.ceil(hi / dx - 1e-9) * dx


def snap_distance(nodes: np.ndarray, value) -> float:
    """Distance from ``value`` to the nearest node (0 for infinite thresholds)."""
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        return 0.0
    return float(np.min(np.abs(np.asarray(nodes) - value)))


def _as_diffusion(model) -> DiffusionModel:
    return model.as_diffusion() if isinstance(model, VasicekModel) else model


def max_stable_dt(model, grid: Grid) -> float:
    """Largest stable explicit step: ``1 / (tau^2/dx^2 + |c|/dx + x+ [+ 2|x|/dy])``.

    ``c`` is the pricing drift; maxima are over the grid. For a 2-d grid the
    transport term enters the same sum with a factor two, which keeps the
    limited y-transport total-variation diminishing (Courant number <= 1/2).
    """
    diff = _as_diffusion(model)
    x = grid.x
    times = np.linspace(grid.t0, grid.T, 5)
    tau2 = max(float(np.max(np.asarray(diff.vol(t, x), dtype=float) ** 2)) for t in times)
    drift = max(float(np.max(np.abs(np.asarray(diff.q_drift(t, x), dtype=float)))) for t in times)
    rate = tau2 / grid.dx**2 + drift / grid.dx + max(grid.x_max, 0.0)
    if isinstance(grid, Grid2):
        rate += 2.0 * max(abs(grid.x_min), abs(grid.x_max)) / grid.dy
    if rate <= 0:
        return DT_CAP
    return min(DT_CAP, 1.0 / rate)


@dataclass
class ReserveSurface:
    """Reserve values ``values[state, k, m(, n)]`` at ``t[k]``, ``x[m]`` (``y[n]``)."""

    t: np.ndarray
    x: np.ndarray
    values: np.ndarray
    states: tuple
    y: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def is_2d(self) -> bool:
        return self.y is not None

    def state_index(self, state) -> int:
        return state if isinstance(state, (int, np.integer)) else self.states.index(state)

    def at_time(self, t: float, state=0) -> np.ndarray:
        k = int(np.argmin(np.abs(self.t - t)))
        if abs(self.t[k] - t) > 1e-9:
            raise DomainError(f"t={t} is not a stored time level")
        return self.values[self.state_index(state), k]

    def interpolator(self, state=0, method: str = "linear"):
        axes = (self.t, self.x) if self.y is None else (self.t, self.x, self.y)
        return RegularGridInterpolator(axes, self.values[self.state_index(state)], method=method)

    def value_at(self, t, x, y=None, state=0, method: str = "linear"):
        pts = np.column_stack(np.broadcast_arrays(*(
            [np.atleast_1d(t), np.atleast_1d(x)] + ([] if self.y is None else [np.atleast_1d(y)])
        )))
        out = self.interpolator(state, method)(pts)
        return float(out[0]) if np.ndim(t) == 0 and np.ndim(x) == 0 and np.ndim(y) == 0 else out

    def scaled(self, c: float) -> "ReserveSurface":
        return ReserveSurface(self.t, self.x, self.values * c, self.states, self.y, dict(self.meta))


def _check_grid(model, spec: PolicySpec, grid: Grid):
    if abs(grid.T - spec.horizon) > 1e-12:
        raise DomainError(f"grid ends at {grid.T} but the policy horizon is {spec.horizon}")
    if grid.t0 < spec.start - 1e-12:
        raise DomainError("grid starts before the policy")
    t = grid.t
    for b in spec.breakpoints:
        if b > grid.t0 and np.min(np.abs(t - b)) > 1e-9:
            raise DomainError(f"breakpoint t={b} is not a time node")
    limit = max_stable_dt(model, grid)
    if grid.dt > limit * (1 + 1e-12):
        raise StabilityError(grid.dt, limit)


def _save_stride(nt: int, max_levels: Optional[int]) -> int:
    if not max_levels or nt + 1 <= max_levels:
        return 1
    return int(math.ceil(nt / (max_levels - 1)))


def _levels(t: np.ndarray, max_levels, save_times):
    nt = t.size - 1
    if save_times is not None:
        keep = {0, nt}
        for s in save_times:
            k = int(np.argmin(np.abs(t - s)))
            if abs(t[k] - s) > 1e-9:
                raise DomainError(f"save time {s} is not a time node")
            keep.add(k)
        return sorted(keep)
    stride = _save_stride(nt, max_levels)
    return sorted(set(range(nt, -1, -stride)) | {0, nt})


def _minmod(a, b):
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _limited_dy(v, dy):
    """Slope-limited one-sided y-derivatives (from above, from below)."""
    u = np.pad(v, ((0, 0), (2, 2)), mode="reflect", reflect_type="odd")
    d = np.diff(u, axis=1)
    s = _minmod(d[:, 1:], d[:, :-1])  # slopes at u[1:-1]
    c = u[:, 1:-1]
    up = c[:, 1:] - 0.5 * s[:, 1:]    # face j+1/2 seen from the right
    lo = c[:, :-1] + 0.5 * s[:, :-1]  # face j+1/2 seen from the left
    fy = (up[:, 1:] - up[:, :-1]) / dy
    gy = (lo[:, 1:] - lo[:, :-1]) / dy
    return fy, gy


def _march(diff: DiffusionModel, life: TransitionModel, spec: PolicySpec, grid: Grid, y=None,
           max_levels=None, save_times=None):
    x = grid.x
    dx = grid.dx
    t = grid.t
    nt = t.size - 1
    m = life.size
    if spec.n_states != m:
        raise DomainError("policy and transition model have different state counts")
    two_d = y is not None
    xs = x[:, None] if two_d else x
    ys = y[None, :] if two_d else 0.0
    shape = (x.size, y.size) if two_d else (x.size,)

    V = np.stack([evaluate_cashflow(spec, "terminal", i, t[-1], xs, ys) for i in range(m)])
    V = np.broadcast_to(V, (m,) + shape).copy()

    keep = _levels(t, max_levels, save_times)
    saved_idx = {k: n for n, k in enumerate(keep)}
    out = np.empty((m, len(keep)) + shape)
    out[:, saved_idx[nt]] = V

    dy = None
    if two_d:
        dy = y[1] - y[0]
        xpos = (x > 0)[:, None]

    for k in range(nt - 1, -1, -1):
        t_new, t_old = t[k], t[k + 1]
        h = t_old - t_new
        c = np.asarray(diff.q_drift(t_old, x), dtype=float) * np.ones_like(x)
        tau2 = np.asarray(diff.vol(t_old, x), dtype=float) ** 2 * np.ones_like(x)
        mu = life.rates(t_old)
        cc = c[:, None] if two_d else c
        tt = tau2[:, None] if two_d else tau2
        # central differencing is monotone while the cell Peclet number |c| dx / tau^2 <= 1;
        # boundary nodes drop diffusion (d2V/dx2 = 0) and use the one-sided difference
        central = np.abs(cc) * dx <= tt
        central[0] = central[-1] = False

        new = np.empty_like(V)
        for i in range(m):
            v = V[i]
            step = np.diff(v, axis=0) / dx
            fwd = np.concatenate([step, step[-1:]])
            bwd = np.concatenate([step[:1], step])
            d2 = np.zeros_like(v)
            d2[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / dx**2
            upwind = np.where(cc > 0, cc * fwd, cc * bwd)
            rhs = 0.5 * tt * d2 + np.where(central, 0.5 * cc * (fwd + bwd), upwind) - xs * v
            if two_d:
                fy, gy = _limited_dy(v, dy)
                rhs = rhs + xs * np.where(xpos, fy, gy)
            if spec.running[i] is not None:
                rhs = rhs + evaluate_cashflow(spec, "running", i, t_new, xs, ys)
            for j in range(m):
                if j == i or mu[i, j] == 0.0:
                    continue
                jump = V[j] - v
                if spec.transition.get((i, j)) is not None:
                    jump = jump + evaluate_cashflow(spec, "transition", (i, j), t_new, xs, ys)
                rhs = rhs + mu[i, j] * jump
            new[i] = v + h * rhs
        V = new
        if not np.all(np.isfinite(V)):
            bad = np.argwhere(~np.isfinite(V))[0]
            raise DivergenceError(t_new, float(x[bad[1]]))
        if k in saved_idx:
            out[:, saved_idx[k]] = V
    return t[keep], out


def solve_thiele_1d(model, life: TransitionModel, spec: PolicySpec, grid: Grid) -> ReserveSurface:
    """Reserves of every state on a ``(t, x)`` grid for policies that ignore ``y``."""
    if spec.uses_average:
        raise DomainError("policy depends on the rate average; use solve_thiele_2d")
    diff = _as_diffusion(model)
    _check_grid(diff, spec, grid)
    t, vals = _march(diff, life, spec, grid)
    return ReserveSurface(t, grid.x, vals, life.states, meta={"grid": grid, "scheme": "explicit-hybrid"})


def solve_thiele_2d(model, life: TransitionModel, spec: PolicySpec, grid2: Grid2,
                    max_levels: Optional[int] = 201, save_times=None) -> ReserveSurface:
    """Reserves on a ``(t, x, y)`` grid.

    Only ``save_times`` (plus both ends) are stored when given, otherwise at
    most ``max_levels`` evenly strided levels.
    """
    diff = _as_diffusion(model)
    _check_grid(diff, spec, grid2)
    t, vals = _march(diff, life, spec, grid2, y=grid2.y, max_levels=max_levels, save_times=save_times)
    return ReserveSurface(t, grid2.x, vals, life.states, y=grid2.y,
                          meta={"grid": grid2, "scheme": "explicit-hybrid"})


def solve_reinsurance(model, life: TransitionModel, params: ProductParams, grid: Grid, grid2: Grid2,
                      max_levels: Optional[int] = 201, save_times=None):
    """Two-stage reinsurance treaty.

    ``grid`` spans ``[T_hat, T]`` for the inner pension, ``grid2`` spans
    ``[0, T_hat]`` for the outer claim. The inner reserve at ``T_hat`` is
    carried to the outer rate axis with a monotone cubic interpolant.
    """
    if params.template != "reinsurance_treaty":
        raise DomainError("solve_reinsurance needs the reinsurance_treaty template")
    holder = {}

    def inner_value(x):
        return holder["interp"](x)

    inner_spec, outer_spec = make_product(params, inner_value=inner_value)
    if abs(grid.t0 - params.T_hat) > 1e-12:
        raise DomainError("inner grid must start at T_hat")
    inner = solve_thiele_1d(model, life, inner_spec, grid)
    at_retirement = inner.values[0, 0]
    pchip = PchipInterpolator(inner.x, at_retirement, extrapolate=True)
    holder["interp"] = lambda x: pchip(np.asarray(x, dtype=float))
    outer = solve_thiele_2d(model, life, outer_spec, grid2, max_levels=max_levels, save_times=save_times)
    return inner, outer


def _aligned_range(lo: float, hi: float, step: float, threshold=None):
    """Range covering ``[lo, hi]`` with nodes on ``threshold + (k + 1/2) step``.

    Placing a payoff discontinuity midway between nodes keeps node-sampled
    indicators second-order accurate. Without a threshold nodes are multiples
    of ``step``.
    """
    if threshold is None or not isinstance(threshold, (int, float)) or not math.isfinite(threshold):
        return snapped_range(lo, hi, step)
    origin = threshold - 0.5 * step
    n_lo = math.floor((lo - origin) / step + 1e-9)
    n_hi = math.ceil((hi - origin) / step - 1e-9)
    return origin + n_lo * step, origin + n_hi * step


# the explicit march is first order in time; this cap keeps that error below
# the spatial one on typical 1-d rate grids
DEFAULT_MAX_DT = 1.0 / 400


def _steps_per_year(max_dt: float, safety: float) -> int:
    return max(1, int(math.ceil(1.0 / (safety * max_dt) - 1e-12)))


def _finish_dt(grid: Grid, model, dt, safety: float, max_dt=None, align=None) -> Grid:
    if dt is not None:
        return grid.with_(dt=float(dt))
    n = _steps_per_year(max_stable_dt(model, grid), safety)
    if max_dt is not None:
        n = max(n, int(math.ceil(1.0 / max_dt - 1e-12)))
    if align:
        per = round(1.0 / align)
        if per < 1 or abs(per * align - 1.0) > 1e-9:
            raise DomainError(f"alignment period {align} is not 1/N year")
        n = per * math.ceil(n / per)
    span = grid.T - grid.t0
    steps = span * n
    if abs(steps - round(steps)) > 1e-9:
        raise DomainError(f"horizon {span} is not a whole number of steps of 1/{n} year; set dt explicitly")
    return grid.with_(dt=1.0 / n)


def build_grid(model, t0: float, T: float, dx: float, dt=None, x_range=None, width: float = 8.0,
               x_threshold=None, safety: float = 0.95, max_dt=DEFAULT_MAX_DT, align=None) -> Grid:
    """Rate grid around the long-run level with an automatic ``dt``.

    ``dt`` defaults to the largest step ``1/N`` year that is within ``safety``
    times the stability bound, no larger than ``max_dt``, and (if given) an
    integer fraction of ``align``. Whole-year breakpoints are then nodes.
    """
    lo, hi = x_range if x_range is not None else default_rate_range(model, width)
    lo, hi = _aligned_range(lo, hi, dx, x_threshold)
    grid = Grid(t0, T, 1.0, lo, hi, dx)
    return _finish_dt(grid, model, dt, safety, max_dt, align)


def build_grid2(model, t0: float, T: float, dx: float, dy: float, y_range, dt=None, x_range=None,
                width: float = 8.0, x_threshold=None, y_threshold=None, safety: float = 0.95,
                max_dt=None, align=None) -> Grid2:
    lo, hi = x_range if x_range is not None else default_rate_range(model, width)
    lo, hi = _aligned_range(lo, hi, dx, x_threshold)
    ylo, yhi = _aligned_range(y_range[0], y_range[1], dy, y_threshold)
    grid = Grid2(t0, T, 1.0, lo, hi, dx, ylo, yhi, dy)
    return _finish_dt(grid, model, dt, safety, max_dt, align)


def default_average_range(model: VasicekModel, t0: float, T: float, width: float = 6.0):
    """Range of the rate integral at ``T`` started from ``r0`` at ``t0``: mean +/- ``width`` sd,
    extended to include 0."""
    from .shortrate import conditional_moments

    m = conditional_moments(model, T - t0, model.r0)
    sd = math.sqrt(float(m.var_rbar))
    mid = float(m.mu_rbar)
    return min(0.0, mid - width * sd), mid + width * sd
