"""Why the Darcy columns of the P1 table for the first example depend on the interpolant.

Against the BDM interpolant the discrete Darcy velocity is superclose and its
divergence is exact (the source vanishes). Against the vertex Lagrange
interpolant the divergence error is a plain O(h) quantity.

Run: python3 demos/darcy_interpolant_comparison.py
"""
import numpy as np

from wgmfem.verification import case_one, convergence_study

case = case_one()
nodal = []


def lagrange_div_error(level, sol, errs):
    da = sol.disc.darcy
    g = da.geo
    vals = np.asarray(case.u_d(g.verts[..., 0], g.verts[..., 1])).transpose(1, 2, 0)
    grads = np.stack([-g.Binv[:, 0] - g.Binv[:, 1], g.Binv[:, 0], g.Binv[:, 1]], axis=1)
    div_lagr = np.einsum("tid,tid->t", vals, grads)
    div_h = da.eval_div(sol.u_d, np.array([[1 / 3, 1 / 3]]))[:, 0]
    nodal.append(np.sqrt(np.sum(np.abs(g.detB) / 2 * (div_lagr - div_h) ** 2)))


table = convergence_study(case, 1, range(3, 7), on_level=lagrange_div_error)
print("level   ||Pi u_d - u_dh||  k     ||div(u_d - u_dh)||   ||div(I u_d - u_dh)||  k")
for i, level in enumerate(table.levels):
    ud, div = table.errors["ud"][i], table.errors["div"][i]
    k_ud = table.orders("ud")[i]
    k_nod = np.log2(nodal[i - 1] / nodal[i]) if i else np.nan
    print(f"{level:5d}   {ud:.4e}       {k_ud:4.2f}  {div:.2e}             {nodal[i]:.4e}            {k_nod:4.2f}")
