"""Mirror extensions: continuing a Dirichlet problem past its cube.

A Dirichlet solution continues to the neighboring cubes by odd reflection;
the coefficients follow parity rules that keep the extended function a
solution of the same differential inequality.  Diagonal and tangential
entries reflect evenly, mixed entries oddly (they vanish on the faces, which
is exactly the Dirichlet compatibility condition), and the drift component
normal to the face flips sign with the orientation.

Run:  python demos/05_reflections_and_extensions.py
"""

import math

import numpy as np

from uclab.discretization import (
    apply_operator,
    assemble,
    extend_dirichlet_reflection,
    extend_periodic,
    residual_inequality_check,
)
from uclab.fields import CoefficientField, synthesize_dir_cross_field
from uclab.geometry import CubeDomain, tiling_identity_defect
from uclab.spectral import eigensolve

L, h = 3.0, 1 / 16

print("=" * 70)
print("1d: the first Dirichlet mode extends to a globally smooth sine")
print("=" * 70)
dom = CubeDomain(1, L, h, "dirichlet")
x = dom.centers_1d()
psi = np.sin(math.pi * (x + L / 2) / L)
fld = CoefficientField(
    dom, np.ones(dom.shape + (1, 1)), np.zeros(dom.shape + (1,)),
    np.zeros(dom.shape), np.zeros(dom.shape), 1.0, 0.0,
)
ext = extend_dirichlet_reflection(psi, fld)
x3 = ext.domain.centers_1d()
err = np.abs(ext.psi - np.sin(math.pi * (x3 + L / 2) / L)).max()
print(f"extension vs global sine: max deviation = {err:.2e}")

print()
print("=" * 70)
print("2d: mixed coefficients survive the reflection with their spectrum")
print("=" * 70)
dom2 = CubeDomain(2, L, 1 / 16, "dirichlet")
fld2 = synthesize_dir_cross_field(3, dom2, theta1=1.5)
H = assemble(fld2)
sl = eigensolve(H, count=1)
psi2 = sl.grid_vector(0)
lam = float(sl.eigenvalues[0])
zeta = H.apply(psi2) - lam * psi2
ext2 = extend_dirichlet_reflection(psi2, fld2, zeta=np.abs(zeta))
sym = np.abs(ext2.A - np.swapaxes(ext2.A, -1, -2)).max()
print(f"off-diagonal magnitude in the base block : "
      f"{np.abs(fld2.A[..., 0, 1]).max():.4f}")
print(f"extended matrix symmetry defect          : {sym}")
op_ext = apply_operator(ext2.A, None, None, ext2.V, ext2.psi, dom2.h)
viol = residual_inequality_check(ext2.psi, lam, ext2.zeta, op_ext,
                                 interior_margin=2)
print(f"differential-inequality violation on the extension interior: "
      f"{viol:.3e}  (<= 0 means preserved)")

print()
print("=" * 70)
print("Resummation identity on periodic extensions")
print("=" * 70)
domp = CubeDomain(1, 5.0, 1 / 8, "periodic")
rng = np.random.default_rng(1)
base = rng.standard_normal(domp.shape)
fldp = CoefficientField(
    domp, np.ones(domp.shape + (1, 1)), np.zeros(domp.shape + (1,)),
    np.zeros(domp.shape), np.zeros(domp.shape), 1.0, 0.0,
)
extp = extend_periodic(base, fldp)
for T in (2, 3, 7):
    defect = tiling_identity_defect(extp.psi, T, 5, 1 / 8)
    print(f"window side T={T}: relative resummation defect = {defect:.2e}")
print()
print("Summing the T-window masses over all integer sites returns exactly")
print("T^d times the base-cube mass -- the bookkeeping identity behind the")
print("dominating/weak site decomposition.")
