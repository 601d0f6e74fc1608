"""Strict TOML run configuration."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from typing import Optional

import tomli
import tomli_w

from .errors import ConfigError, ThieleError
from .lifestate import GompertzMakeham
from .policy import TEMPLATES, ProductParams
from .shortrate import VasicekModel


@dataclass
class ModelSection:
    a: float
    b: float
    sigma: float
    gamma: float = 0.0
    r0: float = 0.03
    y0: float = 0.0


@dataclass
class MortalitySection:
    alpha0: float
    alpha1: float
    alpha2: float
    entry_age: float = 0.0


@dataclass
class ProductSection:
    template: str
    T: float
    E: float = 0.0
    E1: float = 0.0
    E2: float = 0.0
    P: float = 0.0
    K: object = 0.04
    rho: float = 0.0
    premium: object = 0.0
    T_hat: Optional[float] = None
    premium_gated: bool = False
    pension_valuation: str = "standard"


@dataclass
class GridSection:
    dx: float = 0.0025
    dt: Optional[float] = None
    x_min: Optional[float] = None
    x_max: Optional[float] = None
    width: float = 8.0
    dy: float = 0.01
    y_min: Optional[float] = None
    y_max: Optional[float] = None
    output_dt: Optional[float] = None
    align_threshold: bool = True


@dataclass
class QuadratureSection:
    scheme: str = "simpson"
    panels_per_year: int = 32


@dataclass
class McSection:
    paths: int = 100_000
    seed: int = 0
    dt: float = 0.05
    nodes: list = field(default_factory=list)
    threshold: float = 3.0
    bias: float = 0.0


@dataclass
class MeanDiffSection:
    t_step: float = 0.25
    paths: int = 10_000
    seed: int = 0


@dataclass
class OutputSection:
    surface: str = "surface.csv"
    mean_diff: str = "mean_diff.csv"
    report: Optional[str] = None


SECTIONS = {
    "model": (ModelSection, True),
    "mortality": (MortalitySection, True),
    "product": (ProductSection, True),
    "baseline": (None, False),
    "grid": (GridSection, False),
    "quadrature": (QuadratureSection, False),
    "mc": (McSection, False),
    "mean_diff": (MeanDiffSection, False),
    "output": (OutputSection, False),
}

_PRODUCT_KEYS = {f.name for f in fields(ProductSection)}


def _build(cls, table: dict, where: str):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(table) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    missing = [n for n, f in known.items()
               if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING and n not in table]
    if missing:
        raise ConfigError(f"missing key(s) in [{where}]: {', '.join(missing)}")
    for k, v in table.items():
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError(f"[{where}].{k} must be finite")
    return cls(**table)


@dataclass
class RunConfig:
    model: ModelSection
    mortality: MortalitySection
    product: ProductSection
    baseline: dict = field(default_factory=dict)
    grid: GridSection = field(default_factory=GridSection)
    quadrature: QuadratureSection = field(default_factory=QuadratureSection)
    mc: McSection = field(default_factory=McSection)
    mean_diff: MeanDiffSection = field(default_factory=MeanDiffSection)
    output: OutputSection = field(default_factory=OutputSection)

    # -- construction -----------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        unknown = sorted(set(data) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
        kw = {}
        for name, (section_cls, required) in SECTIONS.items():
            if name not in data:
                if required:
                    raise ConfigError(f"missing section [{name}]")
                continue
            if section_cls is None:
                table = data[name]
                if not isinstance(table, dict):
                    raise ConfigError(f"[{name}] must be a table")
                bad = sorted(set(table) - (_PRODUCT_KEYS - {"template"}))
                if bad:
                    raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(bad)}")
                kw[name] = dict(table)
            else:
                kw[name] = _build(section_cls, data[name], name)
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"TOML syntax error: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, "rb") as fh:
                text = fh.read().decode("utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_toml(text)

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            value = getattr(self, name)
            table = dict(value) if isinstance(value, dict) else dataclasses.asdict(value)
            table = {k: v for k, v in table.items() if v is not None}
            if table or name in ("model", "mortality", "product"):
                out[name] = table
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    # -- typed views ------------------------------------------------------
    def validate(self):
        try:
            self.vasicek()
            self.mortality_law()
            self.product_params()
            if self.baseline:
                self.baseline_params()
        except ThieleError as exc:
            raise ConfigError(str(exc)) from exc
        except TypeError as exc:
            raise ConfigError(f"bad value type: {exc}") from exc
        if self.product.pension_valuation not in ("standard", "retirement"):
            raise ConfigError("[product].pension_valuation must be 'standard' or 'retirement'")
        if isinstance(self.product.premium, str) and self.product.premium != "solve":
            raise ConfigError("[product].premium must be a number or \"solve\"")
        g = self.grid
        for name in ("dx", "dy"):
            if getattr(g, name) <= 0:
                raise ConfigError(f"[grid].{name} must be positive")
        if g.dt is not None and g.dt <= 0:
            raise ConfigError("[grid].dt must be positive")
        if self.mc.paths < 2 or self.mean_diff.paths < 2:
            raise ConfigError("Monte Carlo path counts must be >= 2")
        if self.mc.dt <= 0 or self.mean_diff.t_step <= 0:
            raise ConfigError("Monte Carlo time steps must be positive")
        for node in self.mc.nodes:
            if not isinstance(node, list) or len(node) not in (2, 3):
                raise ConfigError("[mc].nodes entries must be [t, x] or [t, x, y]")
        if self.quadrature.scheme not in ("simpson", "trapezoid") or self.quadrature.panels_per_year < 2:
            raise ConfigError("[quadrature] needs scheme simpson|trapezoid and panels_per_year >= 2")

    def vasicek(self) -> VasicekModel:
        m = self.model
        return VasicekModel(a=float(m.a), b=float(m.b), sigma=float(m.sigma), gamma=float(m.gamma), r0=float(m.r0))

    def mortality_law(self) -> GompertzMakeham:
        m = self.mortality
        return GompertzMakeham(float(m.alpha0), float(m.alpha1), float(m.alpha2), float(m.entry_age))

    def _params(self, overrides: dict) -> ProductParams:
        p = dataclasses.asdict(self.product)
        p.update(overrides)
        p.pop("pension_valuation")
        premium = p["premium"]
        p["premium"] = 0.0 if premium == "solve" else float(premium)
        if p["template"] not in TEMPLATES:
            raise ConfigError(f"[product].template {p['template']!r} is not one of {', '.join(TEMPLATES)}")
        return ProductParams(**p)

    def product_params(self) -> ProductParams:
        return self._params({})

    def baseline_params(self) -> ProductParams:
        overrides = {"rho": 0.0, **self.baseline}
        return self._params(overrides)

    @property
    def solve_premium(self) -> bool:
        return self.product.premium == "solve"

    def baseline_solves_premium(self) -> bool:
        return self.baseline.get("premium", self.product.premium) == "solve"
