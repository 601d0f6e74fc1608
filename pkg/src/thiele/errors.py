"""Exception hierarchy shared by the library and the CLI."""


class ThieleError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ThieleError, ValueError):
    """An argument lies outside the domain of an operation (e.g. s > t, h < 0)."""


class RateEvaluationError(ThieleError, ArithmeticError):
    """A transition-rate function returned a negative or non-finite value."""


class StabilityError(ThieleError):
    """The explicit finite-difference step violates the CFL bound."""

    def __init__(self, dt, max_dt):
        super().__init__(f"dt={dt:g} exceeds the maximum stable step {max_dt:g}")
        self.dt = dt
        self.max_dt = max_dt


class DivergenceError(ThieleError, ArithmeticError):
    """A non-finite value appeared while marching the PDE."""

    def __init__(self, t, x):
        super().__init__(f"non-finite reserve at t={t:g}, x={x:g}")
        self.t = t
        self.x = x


class ProductError(ThieleError, ValueError):
    """Invalid product template or inconsistent product parameters."""


class DegenerateProductError(ProductError):
    """A premium cannot be solved because the premium annuity vanishes."""


class ConfigError(ThieleError, ValueError):
    """A run configuration is missing sections, has unknown keys or bad values."""
