import math

import numpy as np
import pytest
from scipy.integrate import quad

from thiele.closedform import endowment_reduction_reserve
from thiele.lifestate import survival_probability
from thiele.montecarlo import mc_reserve, pathwise_values, surface_spotcheck
from thiele.pdesolver import Grid, build_grid, solve_thiele_1d
from thiele.policy import ProductParams, make_product, zero_policy
from thiele.shortrate import VasicekModel

ENDOW = ProductParams("endowment_reduction", E=100000.0, K=0.04, rho=0.2, T=10.0, premium=9092.40)


def test_zero_policy(model, life):
    est = mc_reserve(model, life, zero_policy(), 0.0, 0.03, n_paths=1000, seed=1)
    assert est.mean == 0.0 and est.stderr == 0.0


def test_deterministic_rates_match_quadrature(mortality, life):
    # the rate rises through K, so the premium reduction switches on mid-contract
    m = VasicekModel(a=0.3, b=0.07, sigma=0.0, r0=0.01)
    rate = lambda s: 0.07 + (0.01 - 0.07) * math.exp(-0.3 * s)
    disc = lambda s: math.exp(-(0.07 * s + (0.01 - 0.07) * (1 - math.exp(-0.3 * s)) / 0.3))
    cross = math.log((0.07 - 0.01) / (0.07 - 0.04)) / 0.3
    g = lambda s: -9092.40 * (1 - 0.2 * (rate(s) >= 0.04))
    run = quad(lambda s: survival_probability(mortality, 0, s) * disc(s) * g(s), 0, 10, points=[cross],
               epsabs=1e-9)[0]
    ref = run + 100000.0 * survival_probability(mortality, 0, 10) * disc(10)
    est = mc_reserve(m, life, make_product(ENDOW), 0.0, 0.01, dt=0.001, n_paths=2, seed=0)
    assert est.stderr == 0.0
    assert abs(est.mean - ref) < 2.0


def test_fair_premium_gives_zero_reserve(model, life):
    est = mc_reserve(model, life, make_product(ENDOW), 0.0, 0.03, 0.0, dt=0.0125, n_paths=100_000, seed=2)
    assert abs(est.mean) <= 3 * est.stderr


def test_determinism(model, life):
    spec = make_product(ENDOW)
    a = mc_reserve(model, life, spec, 1.0, 0.03, dt=0.1, n_paths=5000, seed=8)
    b = mc_reserve(model, life, spec, 1.0, 0.03, dt=0.1, n_paths=5000, seed=8)
    assert a == b
    assert mc_reserve(model, life, spec, 1.0, 0.03, dt=0.1, n_paths=5000, seed=9) != a


def test_stderr_scaling(model, life):
    spec = make_product(ENDOW.with_(rho=0.0))
    se = {n: mc_reserve(model, life, spec, 0.0, 0.03, dt=0.5, n_paths=n, seed=4).stderr for n in (1000, 10_000, 100_000)}
    for small, big in ((1000, 10_000), (10_000, 100_000)):
        ratio = se[small] / se[big]
        assert abs(ratio / math.sqrt(big / small) - 1.0) < 0.2


def test_mortality_factors_out_of_terminal_payoffs(model, life, no_mortality, mortality):
    spec = make_product(ProductParams("caplet", E=1e5, K=0.03, T=10.0))
    with_life = pathwise_values(model, life, spec, 0.0, 0.03, 0.0, 0.25, 3000, 6)
    without = pathwise_values(model, no_mortality, spec, 0.0, 0.03, 0.0, 0.25, 3000, 6)
    p = survival_probability(mortality, 0.0, 10.0)
    assert np.allclose(with_life, p * without, rtol=1e-6, atol=0.0)


def test_against_closed_form_grid(model, life, mortality):
    for t, x in ((0.0, 0.0), (4.0, 0.05), (8.0, 0.03)):
        est = mc_reserve(model, life, make_product(ENDOW), t, x, dt=0.0125, n_paths=40_000, seed=int(10 * t))
        ref = endowment_reduction_reserve(ENDOW, mortality, model, t, x)
        assert abs(est.mean - ref) <= 3 * est.stderr


def test_euler_fallback_close_to_exact(model, life):
    spec = make_product(ENDOW.with_(rho=0.0))
    exact = mc_reserve(model, life, spec, 0.0, 0.03, dt=0.05, n_paths=20_000, seed=5)
    euler = mc_reserve(model.as_diffusion(), life, spec, 0.0, 0.03, dt=0.05, n_paths=20_000, seed=5)
    assert abs(exact.mean - euler.mean) < 4 * math.hypot(exact.stderr, euler.stderr) + 5.0


def test_spotcheck_zero_policy(model, life):
    g = Grid(0.0, 10.0, 0.1, -0.5, 0.5, 1.0 / 12.0)
    surf = solve_thiele_1d(model, life, zero_policy(), g)
    rep = surface_spotcheck(model, life, zero_policy(), surf, [(0.0, 0.03), (5.0, 0.0)], n_paths=100, seed=0)
    assert np.all(rep.z == 0.0) and rep.passed


@pytest.fixture(scope="module")
def plain_surface(model, life):
    spec = make_product(ENDOW.with_(rho=0.0))
    return spec, solve_thiele_1d(model, life, spec, build_grid(model, 0.0, 10.0, 0.0025))


NODES = [(0.0, 0.03), (2.0, 0.01), (5.0, 0.03), (7.0, 0.05), (9.0, 0.02)]


def test_spotcheck_plain_endowment(model, life, plain_surface):
    spec, surf = plain_surface
    rep = surface_spotcheck(model, life, spec, surf, NODES, dt=0.1, n_paths=100_000, seed=20)
    assert rep.passed, list(rep.lines())


def test_spotcheck_detects_corruption(model, life, plain_surface):
    spec, surf = plain_surface
    rep = surface_spotcheck(model, life, spec, surf.scaled(1.1), NODES, dt=0.1, n_paths=100_000, seed=20)
    assert rep.max_abs_z > 3 and not rep.passed
