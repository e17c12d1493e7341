"""Solve the first example once and look at what crosses the interface.

The mortar constraint makes the discrete normal fluxes agree in the multiplier
space, and the Darcy divergence equals the projected source cell by cell.

Run: python3 demos/interface_balance.py
"""
import numpy as np

from wgmfem.mesh import build_mesh
from wgmfem.system import apply_boundary_data, assemble, solve
from wgmfem.verification import case_one, error_norms
from wgmfem.wg_stokes import DegreeProfile

case = case_one()
system = apply_boundary_data(assemble(build_mesh(case.domain, 5), DegreeProfile.default(1),
                                      case.coefficients, case.data()))
sol = solve(system)
disc = sol.disc
print(sol.report.to_json())

# mortar rows of the assembled matrix applied to the computed velocities
rows = system.matrix[disc.block("lambda")]
mismatch = rows[:, disc.block("u_s")] @ sol.u_s + rows[:, disc.block("u_d")] @ sol.u_d
print(f"largest mortar residual: {np.abs(mismatch).max():.2e}")

q = np.array([[1 / 3, 1 / 3]])
print(f"largest |div u_dh| at Darcy centroids (source is zero): {np.abs(disc.darcy.eval_div(sol.u_d, q)).max():.2e}")
print(f"mean-pressure multiplier: {sol.block('m')[0]:.2e}")

for name, err in error_norms(sol, case).items():
    print(f"  e_{name:4s} {err:.4e}")
