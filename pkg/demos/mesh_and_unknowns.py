"""Walk the refinement hierarchy of the first example and count unknowns per block.

Run: python3 demos/mesh_and_unknowns.py
"""
from wgmfem.mesh import EdgeTag, build_mesh
from wgmfem.system import Discretization
from wgmfem.verification import case_one, predicted_ndof
from wgmfem.wg_stokes import DegreeProfile

case = case_one()
profile = DegreeProfile.default(2)

print("level  triangles  edges  interface  h_stokes   total unknowns")
for level in range(1, 7):
    mesh = build_mesh(case.domain, level)
    n_iface = len(mesh.edge_ids(EdgeTag.INTERFACE))
    n = predicted_ndof(mesh, profile)
    print(f"{level:5d}  {mesh.n_triangles:9d}  {mesh.n_edges:5d}  {n_iface:9d}  {mesh.h_s:.4f}  {n:15d}")

# the block layout of one discretization, in solver order
disc = Discretization(build_mesh(case.domain, 4), profile, case.coefficients)
for name, size in disc.block_sizes.items():
    print(f"  {name:7s} {size}")
print("sum", sum(disc.block_sizes.values()), "=", disc.ndof)
