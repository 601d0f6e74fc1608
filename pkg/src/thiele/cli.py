"""Command-line front end.

    thiele premium   --config run.toml
    thiele surface   --config run.toml --method pde|closedform [--out surface.csv]
    thiele mc-check  --config run.toml [--seed N]
    thiele mean-diff --config run.toml [--out curve.csv]

Exit codes: 0 success/PASS, 1 validation FAIL, 2 config error, 3 unsupported
method/product combination.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import closedform as cf
from .config import RunConfig
from .errors import ConfigError, DomainError, ProductError, StabilityError, ThieleError
from .lifestate import TransitionModel
from .montecarlo import mc_reserve, surface_spotcheck
from .pdesolver import (
    ReserveSurface,
    build_grid,
    build_grid2,
    default_average_range,
    snap_distance,
    solve_reinsurance,
    solve_thiele_1d,
    solve_thiele_2d,
)
from .policy import ProductParams, make_product
from .shortrate import Unbounded

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_UNSUPPORTED = 0, 1, 2, 3

CLOSED_FORM = ("endowment_reduction", "pension_bonus", "binary_average_endowment",
               "rate_cap", "rate_floor", "caplet", "floorlet")
RATE_THRESHOLD = ("endowment_reduction", "pension_bonus", "rate_cap", "rate_floor", "caplet", "floorlet")


class Unsupported(ThieleError):
    pass


def fmt(v: float) -> str:
    """Shortest round-trip decimal."""
    return repr(float(v))


def _rule(cfg: RunConfig) -> cf.QuadratureRule:
    return cf.QuadratureRule(cfg.quadrature.scheme, cfg.quadrature.panels_per_year)


def _priced(cfg: RunConfig, params: ProductParams, solve: bool) -> ProductParams:
    if not solve:
        return params
    quote = cf.solve_premium(params, cfg.mortality_law(), cfg.vasicek(), y0=cfg.model.y0,
                             rule=_rule(cfg), valuation=cfg.product.pension_valuation)
    return params.with_(premium=quote.premium)


def product_with_premium(cfg: RunConfig) -> ProductParams:
    params = cfg.product_params()
    if cfg.solve_premium and params.template not in cf.PREMIUM_TEMPLATES:
        raise ConfigError(f"template {params.template!r} has no premium to solve")
    return _priced(cfg, params, cfg.solve_premium)


def _x_range(cfg: RunConfig):
    g = cfg.grid
    if (g.x_min is None) != (g.x_max is None):
        raise ConfigError("[grid] needs both x_min and x_max or neither")
    return None if g.x_min is None else (g.x_min, g.x_max)


def _y_range(cfg: RunConfig, t0: float, T: float):
    g = cfg.grid
    if (g.y_min is None) != (g.y_max is None):
        raise ConfigError("[grid] needs both y_min and y_max or neither")
    if g.y_min is not None:
        return g.y_min, g.y_max
    lo, hi = default_average_range(cfg.vasicek(), t0, T)
    y0 = cfg.model.y0
    return min(lo + y0, y0 - 0.05), hi + y0 + 0.05


def _finite(k):
    return None if isinstance(k, Unbounded) else k


def grids_for(cfg: RunConfig, params: ProductParams):
    """``(grid, grid2)`` for the product; either may be None."""
    model = cfg.vasicek()
    g = cfg.grid
    align = g.align_threshold
    xth = _finite(params.K) if (align and params.template in RATE_THRESHOLD) else None
    if params.template == "reinsurance_treaty":
        # shared rate axis so the inner reserve needs no interpolation between stages
        inner = build_grid(model, params.T_hat, params.T, g.dx, g.dt, _x_range(cfg), g.width)
        yth = _finite(params.K) * params.T_hat if (align and _finite(params.K) is not None) else None
        outer = build_grid2(model, 0.0, params.T_hat, g.dx, g.dy, _y_range(cfg, 0.0, params.T_hat), g.dt,
                            (inner.x_min, inner.x_max), g.width, None, yth, align=g.output_dt)
        return inner, outer
    if params.template == "binary_average_endowment":
        yth = _finite(params.K) * params.T if (align and _finite(params.K) is not None) else None
        return None, build_grid2(model, 0.0, params.T, g.dx, g.dy, _y_range(cfg, 0.0, params.T), g.dt,
                                 _x_range(cfg), g.width, None, yth, align=g.output_dt)
    return build_grid(model, 0.0, params.T, g.dx, g.dt, _x_range(cfg), g.width, xth,
                      align=g.output_dt), None


def pde_surfaces(cfg: RunConfig, params: ProductParams):
    """``{label: (surface, spec)}`` solved by finite differences."""
    model = cfg.vasicek()
    life = TransitionModel.two_state(cfg.mortality_law())
    grid, grid2 = grids_for(cfg, params)
    for gr in (grid, grid2):
        if gr is not None and not gr.contains_rate(model.r0):
            raise ConfigError(f"rate grid [{gr.x_min}, {gr.x_max}] does not contain r0={model.r0}")
    save = None
    if grid2 is not None and cfg.grid.output_dt:
        save = np.arange(grid2.t0, grid2.T + 0.5 * cfg.grid.output_dt, cfg.grid.output_dt)
        save = save[save <= grid2.T + 1e-9]
    if params.template == "reinsurance_treaty":
        inner, outer = solve_reinsurance(model, life, params, grid, grid2, save_times=save)
        pchip_x = inner.x
        at_ret = inner.values[0, 0]
        inner_spec, outer_spec = make_product(params, inner_value=lambda x: np.interp(x, pchip_x, at_ret))
        return {"inner": (inner, inner_spec), "": (outer, outer_spec)}
    spec = make_product(params)
    if spec.uses_average:
        return {"": (solve_thiele_2d(model, life, spec, grid2, save_times=save), spec)}
    return {"": (solve_thiele_1d(model, life, spec, grid), spec)}


def closedform_surface(cfg: RunConfig, params: ProductParams) -> ReserveSurface:
    if params.template not in CLOSED_FORM:
        raise Unsupported(f"no closed form for template {params.template!r}")
    model, life, rule = cfg.vasicek(), cfg.mortality_law(), _rule(cfg)
    grid, grid2 = grids_for(cfg, params)
    step = cfg.grid.output_dt or (grid or grid2).dt
    n = int(round(params.T / step))
    if abs(n * step - params.T) > 1e-9:
        raise ConfigError("[grid].output_dt must divide the horizon")
    t = np.linspace(0.0, params.T, n + 1)
    if grid2 is not None:
        x, y = grid2.x, grid2.y
        vals = np.stack([cf.reserve(params, life, model, tk, x[:, None], y[None, :], rule,
                                    cfg.product.pension_valuation) for tk in t])
    else:
        x, y = grid.x, None
        vals = np.stack([np.asarray(cf.reserve(params, life, model, tk, x, 0.0, rule,
                                               cfg.product.pension_valuation)) for tk in t])
    values = np.stack([vals, np.zeros_like(vals)])
    return ReserveSurface(t, x, values, ("alive", "dead"), y=y, meta={"method": "closedform"})


def _thin(surface: ReserveSurface, output_dt):
    if not output_dt:
        return surface
    t = surface.t
    want = np.arange(t[0], t[-1] + 0.5 * output_dt, output_dt)
    idx = sorted({int(np.argmin(np.abs(t - w))) for w in want} | {0, t.size - 1})
    idx = [i for i in idx if any(abs(t[i] - w) < 1e-9 for w in want) or i in (0, t.size - 1)]
    return ReserveSurface(t[idx], surface.x, surface.values[:, idx], surface.states, surface.y, surface.meta)


def write_surface(surface: ReserveSurface, out: Path, label: str = "") -> list:
    """One CSV per state with header ``t,x[,y],state,value``, row-major over the grid."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    written = []
    for i, state in enumerate(surface.states):
        suffix = f"_{label}" if label else ""
        path = out.with_name(f"{out.stem}{suffix}_{state}{out.suffix or '.csv'}")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if surface.is_2d:
                w.writerow(["t", "x", "y", "state", "value"])
                for k, tk in enumerate(surface.t):
                    for m, xm in enumerate(surface.x):
                        for n, yn in enumerate(surface.y):
                            w.writerow([fmt(tk), fmt(xm), fmt(yn), state, fmt(surface.values[i, k, m, n])])
            else:
                w.writerow(["t", "x", "state", "value"])
                for k, tk in enumerate(surface.t):
                    for m, xm in enumerate(surface.x):
                        w.writerow([fmt(tk), fmt(xm), state, fmt(surface.values[i, k, m])])
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# subcommands

def cmd_premium(cfg: RunConfig, args) -> int:
    params = cfg.product_params()
    if params.template not in cf.PREMIUM_TEMPLATES:
        raise Unsupported(f"template {params.template!r} has no premium leg")
    model, life = cfg.vasicek(), cfg.mortality_law()
    report = {"template": params.template}
    legs = [("", params)]
    if params.rho:
        legs.append(("baseline_", cfg.baseline_params()))
    for prefix, p in legs:
        quote = cf.solve_premium(p, life, model, y0=cfg.model.y0, rule=_rule(cfg),
                                 valuation=cfg.product.pension_valuation)
        report[prefix + "rho"] = p.rho
        report[prefix + "premium"] = quote.premium
        report[prefix + "benefit_value"] = quote.benefit_value
        report[prefix + "annuity_value"] = quote.annuity_value
    for k, v in report.items():
        print(f"{k} = {v if isinstance(v, str) else fmt(v)}")
    out = args.out or cfg.output.report
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_surface(cfg: RunConfig, args) -> int:
    params = product_with_premium(cfg)
    out = Path(args.out or cfg.output.surface)
    if args.method == "closedform":
        surfaces = {"": closedform_surface(cfg, params)}
    else:
        surfaces = {label: s for label, (s, _) in pde_surfaces(cfg, params).items()}
    for label, surface in surfaces.items():
        surface = _thin(surface, cfg.grid.output_dt)
        for path in write_surface(surface, out, label):
            print(f"wrote {path}")
        snap = snap_distance(surface.x, _finite(params.K)) if params.template in RATE_THRESHOLD else 0.0
        print(f"nodes t={surface.t.size} x={surface.x.size}" + (f" y={surface.y.size}" if surface.is_2d else "")
              + f" strike_snap={fmt(snap)}")
    if params.premium:
        print(f"premium = {fmt(params.premium)}")
    return EXIT_OK


def _default_nodes(surface: ReserveSurface, r0: float, y0: float):
    T = surface.t[-1]
    t0 = surface.t[0]
    ts = [t0, t0 + 0.25 * (T - t0), t0 + 0.5 * (T - t0)]
    xs = [r0, r0 + 0.01]
    nodes = [(ts[0], xs[0]), (ts[1], xs[0]), (ts[2], xs[0]), (ts[0], xs[1]), (ts[1], xs[1])]
    if surface.is_2d:
        return [(t, x, y0) for t, x in nodes]
    return nodes


def cmd_mc_check(cfg: RunConfig, args) -> int:
    params = product_with_premium(cfg)
    model = cfg.vasicek()
    life = TransitionModel.two_state(cfg.mortality_law())
    surface, spec = pde_surfaces(cfg, params)[""]
    if params.template == "reinsurance_treaty":
        # the oracle prices the inner pension in closed form, not from the PDE inner stage
        law, rule = cfg.mortality_law(), _rule(cfg)
        _, spec = make_product(params, inner_value=lambda x: cf.pension_value(
            params.P, params.T_hat, params.T, law, model, params.T_hat, x, rule))
    if cfg.mc.bias:
        surface = surface.scaled(1.0 + cfg.mc.bias)
    nodes = [tuple(n) for n in cfg.mc.nodes] or _default_nodes(surface, model.r0, cfg.model.y0)
    seed = args.seed if args.seed is not None else cfg.mc.seed
    report = surface_spotcheck(model, life, spec, surface, nodes, cfg.mc.dt, cfg.mc.paths, seed,
                               threshold=cfg.mc.threshold)
    for line in report.lines():
        print(line)
    verdict = "PASS" if report.passed else "FAIL"
    print(f"max|z| = {report.max_abs_z:.3f} threshold = {report.threshold:g} -> {verdict}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_mean_diff(cfg: RunConfig, args) -> int:
    params = cfg.product_params()
    if params.template not in ("endowment_reduction", "pension_bonus"):
        raise Unsupported(f"mean-diff is defined for endowment_reduction and pension_bonus, not {params.template!r}")
    base = cfg.baseline_params()
    params = _priced(cfg, params, cfg.solve_premium)
    base = _priced(cfg, base, cfg.baseline_solves_premium())
    md = cfg.mean_diff
    n = int(round(params.T / md.t_step))
    if abs(n * md.t_step - params.T) > 1e-9:
        raise ConfigError("[mean_diff].t_step must divide the horizon")
    t = np.linspace(0.0, params.T, n + 1)
    seed = args.seed if args.seed is not None else md.seed
    mean, err = cf.mean_reserve_difference(params, base, cfg.mortality_law(), cfg.vasicek(), t, md.paths, seed,
                                           _rule(cfg), cfg.product.pension_valuation)
    out = Path(args.out or cfg.output.mean_diff)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean_diff", "stderr"])
        for row in zip(t, mean, err):
            w.writerow([fmt(v) for v in row])
    print(f"premium = {fmt(params.premium)} baseline_premium = {fmt(base.premium)}")
    k = int(np.argmax(mean))
    print(f"wrote {out}; max mean_diff = {fmt(mean[k])} at t = {fmt(t[k])}")
    return EXIT_OK


COMMANDS = {
    "premium": cmd_premium,
    "surface": cmd_surface,
    "mc-check": cmd_mc_check,
    "mean-diff": cmd_mean_diff,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thiele", description="Interest-rate linked life insurance reserves")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default=None, help="output path (overrides [output])")
        p.add_argument("--seed", type=int, default=None, help="override the Monte Carlo seed")
        if name == "surface":
            p.add_argument("--method", choices=("pde", "closedform"), default="pde")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        return COMMANDS[args.command](cfg, args)
    except Unsupported as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ConfigError, ProductError, DomainError, StabilityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
