"""Compare measured subspace error against the a priori Krylov envelopes.

The literal envelope uses polynomial degree k for the well-conditioned
columns.  A block Krylov space of k blocks only holds polynomials of degree
k-1 in H, so at small k the measured error can sit above it.  The
degree-corrected envelope accounts for that and holds throughout.
"""

from qmpo import certify, gen_synthetic

cert = certify(gen_synthetic(60, 2, 0.1, seed=3), restarts=5, seed=3)
eps = cert.measured["eps"]
lit = cert.bounds["eps"]
deg = cert.bounds["eps_krylov_degree"]

print(f"I columns: {cert.classification['I']}  J columns: {cert.classification['J']}")
print(f"{'k':>3} {'measured':>10} {'literal':>10} {'degree':>10}")
for k, e, a, b, v in zip(cert.k, eps, lit, deg, cert.verdicts["eps"]):
    flag = "  <- above literal" if v == "fail" else ""
    print(f"{k:>3} {e:>10.2e} {a:>10.2e} {b:>10.2e}{flag}")

counts = cert.counts()
print(f"pass {counts['pass']}  fail {counts['fail']}  skipped {counts['skipped']}")
print("failing checks:", sorted({name for name, _ in cert.failures}) or "none")
