"""Empirical light cone of the XX chain against the closed-form locality bound.

Evolves a single-site sigma_z in the Heisenberg picture and tabulates
||[tau_x alpha_t(A), B]|| over a (separation, time) grid.  Every pre-wrap
point must sit below the group-velocity bound; the bound is famously loose,
so the interesting structure is in the empirical column: exponentially small
norms outside the cone, rapid growth as the front arrives.
"""


import nesslab as nl
from nesslab.models import PAULI_Z

N_SITES = 10
X_VALUES = [3, 4]  # the bound needs |x| > d1 + d2 = 2
T_VALUES = [0.0, 0.25, 0.5, 0.75, 1.0]

phi, _ = nl.build_xx_model()
chain = nl.ChainConfig(N_SITES, 2)
sz = nl.LocalOperator((0,), PAULI_Z, hermitian=True)

print(f"XX chain, {N_SITES} sites; A = B = sigma_z, V(Phi) = {nl.lr_velocity(phi):.1f}")
rows = nl.lr_scan(phi, sz, sz, X_VALUES, T_VALUES, chain)

print(f"\n{'x':>3} {'t':>6} {'empirical':>12} {'bound':>12}")
for r in rows:
    if r.excluded:
        print(f"{r.x:>3} {r.t:>6.2f} {'(wrapped)':>12} {r.bound:>12.3e}")
        continue
    marker = "" if r.empirical <= r.bound else "  VIOLATION"
    print(f"{r.x:>3} {r.t:>6.2f} {r.empirical:>12.3e} {r.bound:>12.3e}{marker}")

violations = sum(1 for r in rows if not r.excluded and r.empirical > r.bound)
print(f"\nviolations: {violations} (the bound certifies a finite group velocity)")
