"""BDM_k mixed element for the Darcy velocity with discontinuous P_{k-1} pressure.

Degrees of freedom of a BDM_k field ``v`` on a triangle:

* per edge ``e`` and Legendre index c: ``(1/|e|) int_e v . n_e chi_c ds`` with
  ``n_e`` the global edge normal (canonical tangent rotated clockwise),
  so the normal trace on ``e`` is exactly ``sum_c dof_c chi_c``;
* interior moments against the Nedelec space ``[P_{k-2}]^2 + (-y, x) P~_{k-2}``.

The physical basis is a signed, scaled contravariant Piola transform of the
reference dual basis.
"""
from functools import cached_property

import numpy as np

from . import basis as bq
from .errors import InvalidCoefficient, InvalidProfile, UnsupportedDegree
from .mesh import EdgeTag, Region


class ReferenceBDM:
    """Dual basis of BDM_k on the reference triangle.

    ``coef[m, j]`` expands dual function j in the vector basis
    ``[phi_a e_x for a] + [phi_a e_y for a]`` built from the orthonormal P_k basis.
    """

    def __init__(self, k):
        if k < 1:
            raise UnsupportedDegree(f"BDM degree must be >= 1, got {k}")
        self.k = k
        self.n = bq.dim_p(k)
        self.n_edge = k + 1
        self.n_interior = 2 * self.n - 3 * self.n_edge
        self.ndof = 2 * self.n
        self.scalar = bq.TriangleBasis(k)
        self.dof_matrix = self._functionals()
        self.coef = np.linalg.solve(self.dof_matrix, np.eye(self.ndof))

    def _interior_test(self, pts):
        """Nedelec test functions at points, shape (n_interior, 2, npts)."""
        k = self.k
        if k < 2:
            return np.zeros((0, 2, len(pts)))
        q = bq.TriangleBasis(k - 2).eval(pts)
        nq = len(q)
        out = [np.stack([q[a], 0 * q[a]]) for a in range(nq)]
        out += [np.stack([0 * q[a], q[a]]) for a in range(nq)]
        x, y = pts[:, 0] - 1.0 / 3.0, pts[:, 1] - 1.0 / 3.0
        for j in range(k - 1):
            mono = x ** (k - 2 - j) * y**j
            out.append(np.stack([-y * mono, x * mono]))
        return np.array(out)

    def _vector_basis(self, pts):
        phi = self.scalar.eval(pts)
        z = np.zeros_like(phi)
        return np.concatenate([np.stack([phi, z], axis=1), np.stack([z, phi], axis=1)])  # (ndof, 2, npts)

    def _functionals(self):
        k = self.k
        qe = bq.quad_interval(2 * k + 2)
        t = qe.points[:, 0]
        chi = bq.EdgeBasis(k).eval(t)
        rows = []
        for l in range(3):
            vb = self._vector_basis(bq.ref_edge_points(l, t))
            vn = np.einsum("mdq,d->mq", vb, bq.REF_NORMALS[l])
            rows.append(np.einsum("cq,mq,q->cm", chi, vn, qe.weights))
        qt = bq.quad_triangle(2 * k)
        vb = self._vector_basis(qt.points)
        test = self._interior_test(qt.points)
        rows.append(np.einsum("jdq,mdq,q->jm", test, vb, qt.weights))
        D = np.vstack(rows)
        assert D.shape == (self.ndof, self.ndof)
        return D

    def check_unisolvent(self, tol=1e-10):
        """Return the condition number of the DOF matrix; raise if not unisolvent."""
        cond = np.linalg.cond(self.dof_matrix)
        if not np.isfinite(cond) or cond > 1.0 / tol:
            raise InvalidProfile(f"BDM_{self.k} functionals not unisolvent (cond {cond:.2e})")
        return cond

    def eval(self, pts):
        """Dual basis values, shape (ndof, 2, npts)."""
        return np.einsum("mj,mdq->jdq", self.coef, self._vector_basis(pts))

    def div(self, pts):
        g = self.scalar.grad(pts)  # (2, n, npts)
        dv = np.concatenate([g[0], g[1]])  # (ndof, npts)
        return self.coef.T @ dv

    def interior_moments(self, vals, qt):
        """Interior functionals of a reference vector field sampled at ``qt`` points."""
        test = self._interior_test(qt.points)
        return np.einsum("jdq,...dq,q->...j", test, vals, qt.weights)

    @cached_property
    def mass(self):
        """``M[m, n, a, b] = int phi_a,m phi_b,n`` on the reference triangle."""
        qt = bq.quad_triangle(2 * self.k)
        v = self.eval(qt.points)
        return np.einsum("amq,bnq,q->mnab", v, v, qt.weights)

    def div_moments(self, kp):
        """``D[q, a] = int div phi_a psi_q`` against the P_kp orthonormal basis."""
        qt = bq.quad_triangle(2 * self.k)
        return np.einsum("aq,bq,q->ba", self.div(qt.points), bq.TriangleBasis(kp).eval(qt.points), qt.weights)


class BDMSpace:
    """BDM_k x P_{k-1} on the Darcy triangles of a mesh.

    Global velocity DOFs: Darcy edges (interior, Gamma_d and interface) times
    (k + 1), then interior DOFs cell by cell.
    """

    def __init__(self, mesh, profile, kappa=1.0):
        profile.validate()
        if not np.all(np.asarray(kappa) > 0):
            raise InvalidCoefficient(f"permeability must be positive, got {kappa}")
        self.mesh = mesh
        self.profile = profile
        self.kappa = float(kappa)
        k = profile.alpha_d
        self.ref = ReferenceBDM(k)
        self.k = k
        self.nb = k + 1
        self.ni = self.ref.n_interior
        self.np = bq.dim_p(profile.gamma_d)

        self.cells = mesh.triangle_ids(Region.DARCY)
        self.edges = mesh.edge_ids(EdgeTag.DARCY_INTERIOR, EdgeTag.GAMMA_D, EdgeTag.INTERFACE)
        self.edge_index = -np.ones(mesh.n_edges, dtype=np.int64)
        self.edge_index[self.edges] = np.arange(len(self.edges))
        self.geo = bq.triangle_geometry(mesh.vertices[mesh.triangles[self.cells]])
        self.flips = mesh.tri_edge_signs[self.cells] < 0
        self.cell_edges = self.edge_index[mesh.tri_edges[self.cells]]
        assert np.all(self.cell_edges >= 0)

        self.n_edge_dofs = self.nb * len(self.edges)
        self.ndof = self.n_edge_dofs + self.ni * len(self.cells)
        self.n_pressure = self.np * len(self.cells)

    @property
    def n_cells(self):
        return len(self.cells)

    @cached_property
    def edge_normals(self):
        """Global normals of Darcy edges: canonical tangent rotated clockwise."""
        e = self.mesh.edges[self.edges]
        t = self.mesh.vertices[e[:, 1]] - self.mesh.vertices[e[:, 0]]
        return np.stack([t[:, 1], -t[:, 0]], axis=-1) / np.linalg.norm(t, axis=-1)[:, None]

    def edge_dofs(self, edge_local):
        edge_local = np.asarray(edge_local)
        return edge_local[:, None] * self.nb + np.arange(self.nb)[None, :]

    @cached_property
    def local_dofs(self):
        nc = self.n_cells
        edge = self.edge_dofs(self.cell_edges.ravel()).reshape(nc, 3 * self.nb)
        interior = self.n_edge_dofs + np.arange(nc)[:, None] * self.ni + np.arange(self.ni)[None, :]
        return np.hstack([edge, interior])

    @cached_property
    def pressure_dofs(self):
        return np.arange(self.n_cells)[:, None] * self.np + np.arange(self.np)[None, :]

    @cached_property
    def dirichlet_dofs(self):
        ids = self.edge_index[self.mesh.edge_ids(EdgeTag.GAMMA_D)]
        return self.edge_dofs(ids).ravel()

    @cached_property
    def weights(self):
        """Per-cell scaling ``omega`` of the Piola-mapped reference dual basis, (ncells, ndof_local)."""
        nc = self.n_cells
        w = np.ones((nc, self.ref.ndof))
        c = np.arange(self.nb)
        for l in range(3):
            n_out = self.geo.normals[:, l]
            n_glob = self.edge_normals[self.cell_edges[:, l]]
            sigma = np.sign(np.einsum("ti,ti->t", n_out, n_glob))
            parity = np.where(self.flips[:, l, None], (-1.0) ** c[None, :], 1.0)
            scale = self.geo.edge_lengths[:, l] / bq.REF_EDGE_LENGTHS[l]
            w[:, l * self.nb : (l + 1) * self.nb] = (sigma * scale)[:, None] * parity
        return w

    @cached_property
    def local_blocks(self):
        """(A, B) per cell: ``kappa^-1 (u, v)`` and ``-(div v, q)``."""
        BtB = np.einsum("tmi,tmj->tij", self.geo.B, self.geo.B)
        M = self.ref.mass
        w = self.weights
        A = np.einsum("tmn,mnab->tab", BtB, M) / np.abs(self.geo.detB)[:, None, None]
        A *= w[:, :, None] * w[:, None, :] / self.kappa
        # Piola divergence: div Phi = (omega / detB) divhat; moments pick up |detB|
        sgn = np.sign(self.geo.detB)
        D = self.ref.div_moments(self.profile.gamma_d)
        B = -sgn[:, None, None] * D[None] * w[:, None, :]
        return A, B

    def eval(self, vec, ref_pts):
        """Physical values at reference points of every cell, shape (ncells, 2, npts)."""
        loc = vec[self.local_dofs] * self.weights
        hat = self.ref.eval(ref_pts)  # (ndof, 2, npts)
        dhat = np.einsum("ta,amq->tmq", loc, hat)
        return np.einsum("tim,tmq->tiq", self.geo.B, dhat) / self.geo.detB[:, None, None]

    def eval_div(self, vec, ref_pts):
        loc = vec[self.local_dofs] * self.weights
        return np.einsum("ta,aq->tq", loc, self.ref.div(ref_pts)) / self.geo.detB[:, None]

    def edge_moments(self, u, edge_local, degree=None):
        """Normal moments ``(1/|e|) int_e u . n_e chi_c`` on the given Darcy edges."""
        if degree is None:
            degree = 2 * self.k + 6
        edge_local = np.asarray(edge_local)
        ends = self.mesh.vertices[self.mesh.edges[self.edges[edge_local]]]
        q = bq.quad_interval(min(degree, bq.MAX_QUAD_DEGREE))
        s = q.points[:, 0]
        p = ends[:, 0, None, :] + s[None, :, None] * (ends[:, 1] - ends[:, 0])[:, None, :]
        vals = np.asarray(u(p[..., 0], p[..., 1]), dtype=float)  # (2, ne, nq)
        un = np.einsum("ieq,ei->eq", vals, self.edge_normals[edge_local])
        return np.einsum("eq,cq,q->ec", un, bq.EdgeBasis(self.k).eval(s), q.weights)

    def interpolate(self, u, degree=None):
        """Canonical BDM interpolant of a vector field ``u(x, y) -> (2, ...)``."""
        if degree is None:
            degree = 2 * self.k + 6
        vec = np.empty(self.ndof)
        vec[: self.n_edge_dofs] = self.edge_moments(u, np.arange(len(self.edges)), degree).ravel()
        if self.ni:
            qt = bq.quad_triangle(min(degree, bq.MAX_QUAD_DEGREE))
            x, y = self.geo.map(qt.points)
            vals = np.asarray(u(x, y), dtype=float)  # (2, nc, nq)
            # contravariant pullback: vhat = det B  B^-1 v
            pulled = np.einsum("t,tmi,itq->tmq", self.geo.detB, self.geo.Binv, vals)
            vec[self.n_edge_dofs :] = self.ref.interior_moments(pulled, qt).ravel()
        return vec

    def project_pressure(self, p, degree=None):
        if degree is None:
            degree = 2 * self.k + 6
        return bq.l2_project_cell(p, self.profile.gamma_d, self.geo.verts, degree).ravel()


def interpolate_hdiv(space, u, degree=None):
    return space.interpolate(u, degree)
