"""Observability of eigenfunctions on a union of equidistributed balls.

One ball of radius delta sits inside each cell of the G-lattice; the
observation set is their union.  For eigenfunctions (and spectral-projector
samples) of the assembled operator, the mass fraction captured by the
observation set must clear an explicit lower bound that does not depend on
the cube side, survives random shifts of the balls within their cells, and
degrades polynomially as delta shrinks.

Run:  python demos/03_equidistribution_benchmark.py
"""

from uclab.verifier import L_independence, TrialConfig, run_trial

print("=" * 70)
print("Records for one configuration (d=2, periodic, potential bound 1)")
print("=" * 70)
tc = TrialConfig(d=2, bc="periodic", L_over_G=3, norm_V=1.0,
                 delta_over_G=0.25, seed=0)
for rec in run_trial(tc):
    print(f"kind={rec.psi_kind:<17} energy={rec.energy:+.4f} "
          f"ratio={rec.ratio:.4f}")
    print(f"    log bound = {rec.log_bound:.4e}  margin = {rec.margin:.4f} "
          f"(positive = bound cleared)")
    print(f"    residual term delta^2 G^2 |zeta|^2 = {rec.zeta_term:.3e} "
          f"(dominates: {rec.zeta_dominates})")

print()
print("=" * 70)
print("Shift stability: five random ball placements, same model")
print("=" * 70)
print(f"{'seed':>5} {'ratio':>10} {'margin > 0':>11}")
for seed in range(5):
    tc = TrialConfig(d=1, bc="dirichlet", L_over_G=5, norm_V=0.0,
                     delta_over_G=0.125, seed=seed)
    rec = run_trial(tc)[0]
    print(f"{seed:>5} {rec.ratio:>10.5f} {str(rec.margin > 0):>11}")

print()
print("=" * 70)
print("The bound does not move with the cube side (scale-free)")
print("=" * 70)
tc = TrialConfig(d=1, bc="dirichlet", L_over_G=3, norm_V=0.0,
                 delta_over_G=0.25, seed=0, h_per_G=16)
out = L_independence(tc, (3, 5, 7))
print(f"log bound per L in (3,5,7): {[f'{b:.6e}' for b in out['log_bounds']]}")
print(f"spread = {out['bound_spread']} (identical), "
      f"min measured margin = {out['min_margin']:.4f}")
