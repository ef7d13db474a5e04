"""Evaluate Riemann-Liouville operators three ways and compare with the power rule."""
from fracsym.fracop import FracSpec, rl_power_sum, rl_quadrature, rl_series
from fracsym.parse import parse
from fracsym.special import gamma, recip_gamma

x = 1.5
for q in (0, 1, 2):
    for p in (0.5, 1.5, -0.5):
        f = parse(f"x^{q}")
        spec = FracSpec.single("x", p)
        exact = gamma(q + 1) * recip_gamma(q - p + 1) * x ** (q - p)
        series = rl_series(f, spec, {"x": x}).value
        quad = rl_quadrature(f, spec, {"x": x})
        print(f"q={q} p={p:+.1f}  exact={exact:.12f}  series={series:.12f}  quadrature={quad:.12f}")

# a non-polynomial function: the series reports its own tail estimate
f = parse("exp(x/2)*cos(x)")
res = rl_series(f, FracSpec.single("x", 0.5), {"x": x})
print("RL^0.5 exp(x/2)cos(x):", res.value, "converged:", res.converged)
print("quadrature oracle:    ", rl_quadrature(f, FracSpec.single("x", 0.5), {"x": x}))
print("power sum of x^1/2 + x^3:", rl_power_sum(parse("x^(1/2) + x^3"), FracSpec.single("x", 0.5), {"x": x}))
