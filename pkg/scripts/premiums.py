"""Fair yearly premiums of the three premium-paying products, with and without the rate feature."""
from thiele.closedform import solve_premium
from thiele.lifestate import reference_mortality
from thiele.policy import ProductParams
from thiele.shortrate import reference_vasicek


def main():
    model, law = reference_vasicek(), reference_mortality()
    endow = ProductParams("endowment_reduction", E=100000.0, K=0.04, rho=0.2, T=10.0)
    pension = ProductParams("pension_bonus", P=20000.0, K=0.04, rho=0.2, T=90.0, T_hat=40.0)
    binary = ProductParams("binary_average_endowment", E1=150000.0, E2=100000.0, K=0.04, T=10.0)
    rows = [
        ("endowment, rho=0", endow.with_(rho=0.0), {}),
        ("endowment, rho=0.2", endow, {}),
        ("pension, rho=0", pension.with_(rho=0.0), {"valuation": "retirement"}),
        ("pension, rho=0.2", pension, {"valuation": "retirement"}),
        ("binary average endowment", binary, {"y0": model.r0}),
    ]
    for label, params, kw in rows:
        q = solve_premium(params, law, model, **kw)
        print(f"{label:28s} premium {q.premium:10.2f}  benefits {q.benefit_value:11.2f}  annuity {q.annuity_value:.5f}")


if __name__ == "__main__":
    main()
