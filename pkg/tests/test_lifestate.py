import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from thiele.errors import DomainError, RateEvaluationError
from thiele.lifestate import (
    REFERENCE_MORTALITY,
    GompertzMakeham,
    TransitionModel,
    mortality_rate,
    survival_probability,
    transition_path,
    transition_probabilities,
)

A0, A1, A2 = REFERENCE_MORTALITY


def test_constant_rate_survival():
    tm = TransitionModel.constant(("alive", "dead"), [[0, 0.01], [0, 0]])
    p = transition_probabilities(tm, 0.0, 10.0)
    assert abs(p[0, 0] - math.exp(-0.1)) < 1e-7
    assert p[1, 1] == 1.0


def test_same_time_is_identity(life):
    assert np.array_equal(transition_probabilities(life, 3.0, 3.0), np.eye(2))


def test_gompertz_against_adaptive_quadrature(life):
    sh = math.exp(A2 * 30.0)
    hazard, _ = quad(lambda u: A0 + A1 * sh * math.exp(A2 * u), 0.0, 10.0, epsabs=1e-13, epsrel=1e-13)
    ref = math.exp(-hazard)
    assert abs(transition_probabilities(life, 0.0, 10.0)[0, 0] - ref) < 1e-10


def test_survival_closed_form_examples(mortality):
    flat = GompertzMakeham(0.02, 0.0, 0.3)
    assert survival_probability(flat, 0.0, 5.0) == pytest.approx(math.exp(-0.1), abs=1e-15)
    assert survival_probability(mortality, 7.0, 7.0) == 1.0
    no_growth = GompertzMakeham(0.01, 0.005, 0.0)
    assert survival_probability(no_growth, 1.0, 3.0) == pytest.approx(math.exp(-0.03), abs=1e-15)


def test_survival_matches_rk4_at_forty(mortality, life):
    rk4 = transition_probabilities(life, 0.0, 40.0, steps=400)[0, 0]
    assert abs(survival_probability(mortality, 0.0, 40.0) - rk4) < 1e-7


def test_survival_rejects_reversed_times(mortality):
    with pytest.raises(DomainError):
        survival_probability(mortality, 5.0, 4.0)


def test_mortality_rate_examples():
    law = GompertzMakeham(*REFERENCE_MORTALITY)
    assert mortality_rate(law, 0.0) == pytest.approx(1.27780137e-3, abs=1e-15)
    assert mortality_rate(law, 40.0) == pytest.approx(A0 + A1 * math.exp(5.087412), rel=1e-12)
    assert np.all(mortality_rate(GompertzMakeham(0.004, 0.0, 0.1), np.linspace(0, 90, 7)) == 0.004)


def test_entry_age_shift(mortality):
    base = GompertzMakeham(*REFERENCE_MORTALITY)
    assert mortality_rate(mortality, 12.0) == pytest.approx(mortality_rate(base, 42.0), rel=1e-14)
    assert survival_probability(mortality, 0.0, 10.0) == pytest.approx(
        survival_probability(base, 30.0, 40.0), rel=1e-13)


def test_reversed_interval_rejected(life):
    with pytest.raises(DomainError):
        transition_probabilities(life, 2.0, 1.0)
    with pytest.raises(DomainError):
        transition_probabilities(life, 0.0, 1.0, steps=0)


def test_invalid_rates_raise():
    bad = TransitionModel(("a", "b"), lambda t: np.array([[0.0, np.nan], [0.0, 0.0]]))
    with pytest.raises(RateEvaluationError):
        transition_probabilities(bad, 0.0, 1.0)
    neg = TransitionModel(("a", "b"), lambda t: np.array([[0.0, -0.1], [0.0, 0.0]]))
    with pytest.raises(RateEvaluationError):
        neg.rates(0.0)
    leaky = TransitionModel(("a", "b"), lambda t: np.array([[0.0, 0.1], [0.2, 0.0]]), absorbing=(False, True))
    with pytest.raises(RateEvaluationError):
        leaky.rates(0.0)


def test_rk4_fourth_order(life, mortality):
    exact = survival_probability(mortality, 0.0, 60.0)
    errs = [abs(transition_probabilities(life, 0.0, 60.0, steps=n)[0, 0] - exact) for n in (16, 32, 64)]
    for coarse, fine in zip(errs, errs[1:]):
        assert 12.0 < coarse / fine < 20.0


def test_transition_path_matches_pointwise(life):
    times = [0.5, 1.0, 4.0, 10.0]
    path = transition_path(life, 0.0, times, steps_per_year=400)
    for k, u in enumerate(times):
        assert np.allclose(path[k], transition_probabilities(life, 0.0, u, steps=int(400 * u)), atol=1e-12)


def _random_model(seed, m):
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.0, 0.3, (m, m))
    slope = rng.uniform(0.0, 0.05, (m, m))
    phase = rng.uniform(0, 2 * np.pi, (m, m))
    base[-1] = 0.0
    slope[-1] = 0.0

    def intensity(t):
        return base + slope * (1.0 + np.sin(t + phase))

    return TransitionModel(tuple(f"s{i}" for i in range(m)), intensity,
                           absorbing=(False,) * (m - 1) + (True,))


@given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 5),
       s=st.floats(0, 5), du=st.floats(0, 5), dt=st.floats(0, 5))
def test_chapman_kolmogorov(seed, m, s, du, dt):
    tm = _random_model(seed, m)
    u, t = s + du, s + du + dt
    n = lambda a, b: max(1, int(math.ceil(40 * (b - a))))
    lhs = transition_probabilities(tm, s, t, steps=n(s, t))
    rhs = transition_probabilities(tm, s, u, steps=n(s, u)) @ transition_probabilities(tm, u, t, steps=n(u, t))
    assert np.max(np.abs(lhs - rhs)) < 1e-7


@given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 6), s=st.floats(0, 20), h=st.floats(0, 30),
       steps=st.integers(1, 300))
def test_rows_stochastic(seed, m, s, h, steps):
    p = transition_probabilities(_random_model(seed, m), s, s + h, steps=max(steps, int(2 * h) + 1))
    assert np.max(np.abs(p.sum(axis=1) - 1.0)) < 1e-9
    assert p.min() >= 0.0 and p.max() <= 1.0


@given(s=st.floats(0, 50), a=st.floats(0, 40), b=st.floats(0, 40))
def test_survival_nonincreasing(life, s, a, b):
    lo, hi = sorted((a, b))
    p_lo = transition_probabilities(life, s, s + lo, steps=200)[0, 0]
    p_hi = transition_probabilities(life, s, s + hi, steps=200)[0, 0]
    assert p_hi <= p_lo + 1e-15
