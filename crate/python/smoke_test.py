"""Smoke test for the sntail Python module."""

import json
import math

import sntail


def main():
    p = sntail.Parameters(1.0, 2.0, 0.3)
    t = sntail.tail_dependence(p)
    print(f"case={t.case} kappa={t.kappa:.6f} tau1={t.lambda_l.tau1:.6g} tau2={t.lambda_l.tau2:.6g}")
    assert t.case == "5"
    assert t.kappa > 1.0

    f = sntail.dcopula_rv(p)
    exact, _, _ = sntail.log_dcdu_exact(p, -300.0)
    gap = exact - f.eval(-300.0)
    print(f"log dC/du at u=e^-300: exact={exact:.6f} asym={f.eval(-300.0):.6f}")
    assert abs(gap) < 0.05

    x = sntail.sn_quantile(-50.0, 1.5)
    assert abs(sntail.sn_log_cdf(x, 1.5) + 50.0) < 1e-8

    theta, tau2, _, _ = sntail.empirical_exponent_fit(p, [-40.0 * k for k in range(1, 11)])
    print(f"fit theta={theta:.6f} (asym {f.theta:.6f})")
    assert abs(theta - f.theta) < 0.05

    r = json.loads(sntail.analyze_json(sntail.Parameters(1.0, 1.0, 0.5)))
    assert math.isclose(r["theta"], 4 / 3, rel_tol=1e-12)

    try:
        sntail.Parameters(0.0, 0.0, 1.5)
    except ValueError as e:
        print(f"rejected: {e}")
    else:
        raise AssertionError("invalid rho accepted")
    print("ok")


if __name__ == "__main__":
    main()
