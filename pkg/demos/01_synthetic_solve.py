"""Solve one synthetic sparse instance and watch the projected problem converge.

Each checkpoint solves the small reduced problem on the current Krylov basis;
the KKT residual is read off the reduced quantities without touching H.
"""

from qmpo import gen_synthetic, gpi_solve, solve

problem = gen_synthetic(n=2000, l=10, density=0.05, seed=7)
report = solve(problem)

print(f"{'k':>4} {'f':>22} {'kkt':>10}")
for c in report.history:
    print(f"{c.k:>4} {c.f:>22.15f} {c.kkt:>10.2e}")
print(f"stopped: {report.termination} after {report.steps} blocks "
      f"({report.basis_dim} basis vectors, {report.wall_ms:.0f} ms)")

# the power-iteration baseline works on the full n x l problem
gpi = gpi_solve(problem)
print(f"lanczos f = {report.unscaled_objective:.10f}  kkt = {report.unscaled_kkt:.1e}")
print(f"gpi     f = {gpi.unscaled_objective:.10f}  kkt = {gpi.unscaled_kkt:.1e}  "
      f"({gpi.steps} iterations)")
