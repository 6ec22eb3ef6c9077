"""Smoke test for the robustlrt Python bindings.

Build and install first:
    pip install maturin
    pip install --no-build-isolation ./crates/python
"""

import math

import robustlrt as rl

mixture = "mixture(0.5*gaussian(-2,1)+0.5*gaussian(2,1))"
f0 = rl.Density.parse(mixture)
f1 = rl.Density.parse(f"shift({mixture},1)")
assert abs(f1(1.0) - f0(0.0)) < 1e-15

sol = rl.solve(f0, f1, alpha=4.0, eps0=0.02, eps1=0.03)
l_l, l_u = sol.thresholds
print(f"thresholds l_l={l_l:.6f} l_u={l_u:.6f} residual={sol.residual_norm:.2e}")
assert abs(l_l - 0.605) < 1e-3 and abs(l_u - 1.618) < 1e-3
assert sol.rule(sol.thresholds[0]) == 0.0 and sol.rule(sol.thresholds[1]) == 1.0
assert all(0.0 <= d <= 1.0 for d in sol.delta_hat)

y, g0 = sol.y, sol.g0_hat
mass = sum(0.5 * (y[i + 1] - y[i]) * (g0[i] + g0[i + 1]) for i in range(len(y) - 1))
assert abs(mass - 1.0) < 1e-9, mass

lf = sol.errors()
mc = sol.monte_carlo(200_000, 42)
print(lf)
print(mc, mc.half_widths)
assert lf.method == "quadrature" and mc.method == "monte_carlo"
assert mc.p_error < lf.p_error

feasible, margin, _ = rl.validate_eps(f0, f1, 4.0, 0.02, 0.03)
assert feasible and margin > 0

a = rl.hellinger_root_a(0.2, 0.1)
assert abs(rl.hellinger_other_eps(a, 0.2) - 0.1) < 1e-9
assert abs(rl.hellinger_eps_max(math.exp(-0.5)) - (4 - 2 * math.sqrt(2 * (1 + math.exp(-0.5))))) < 1e-15

try:
    rl.solve(f0, f1, alpha=0.5, eps0=1.0, eps1=1.0)
except rl.InfeasibleError as err:
    print("infeasible as expected:", err)
else:
    raise AssertionError("expected InfeasibleError")

try:
    rl.solve(f0, f1, alpha=1.0, eps0=0.1, eps1=0.1)
except rl.RobustLrtError:
    pass
else:
    raise AssertionError("expected guard band error")

print("smoke test passed")
