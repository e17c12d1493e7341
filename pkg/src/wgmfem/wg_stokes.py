"""Weak Galerkin space for the Stokes velocity and pressure.

A weak velocity on a Stokes triangle is a pair ``{v0, vb}``: ``v0`` in
[P_alpha_s]^2 inside the cell and ``vb`` in [P_beta]^2 on each edge, with
``vb`` single valued across edges.  The weak gradient lands in
[P_beta]^{2x2} and the weak divergence in P_gamma_s (the pressure space).

All per-cell operators are built batched over the Stokes triangles and
cached on the space.  Local vector DOFs use the layout::

    [v0_x (n0), v0_y (n0), e0_x, e0_y, e1_x, e1_y, e2_x, e2_y]   (nb each edge block)
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import basis as bq
from .errors import InvalidProfile
from .mesh import EdgeTag, Region


@dataclass(frozen=True)
class DegreeProfile:
    """Polynomial degrees of all discrete spaces.

    ``alpha_s``/``beta``/``gamma_s``: Stokes interior velocity, edge velocity
    and pressure.  ``alpha_d``/``gamma_d``: Darcy velocity and pressure.
    """

    alpha_s: int
    beta: int
    gamma_s: int
    alpha_d: int
    gamma_d: int
    family: str = "BDM"

    @classmethod
    def default(cls, k):
        """P_k WG elements coupled with BDM_k: (k, k, k-1, k, k-1)."""
        return cls(k, k, k - 1, k, k - 1)

    def validate(self):
        a, b, g, ad, gd = self.alpha_s, self.beta, self.gamma_s, self.alpha_d, self.gamma_d
        if min(a, b, g, ad, gd) < 0:
            raise InvalidProfile(f"negative degree in {self}")
        if not (b - 1 <= g <= b <= a <= b + 1):
            raise InvalidProfile(f"need beta-1 <= gamma_s <= beta <= alpha_s <= beta+1, got {self}")
        if a > g + 1:
            raise InvalidProfile(f"need alpha_s <= gamma_s + 1, got {self}")
        if b < 1:
            raise InvalidProfile(f"need beta >= 1, got {self}")
        if not (ad - 1 <= gd <= ad):
            raise InvalidProfile(f"need alpha_d - 1 <= gamma_d <= alpha_d, got {self}")
        if self.family != "BDM":
            raise InvalidProfile(f"unsupported Darcy family {self.family!r}")
        if gd != ad - 1:
            # BDM_k has divergence exactly P_{k-1}; a larger pressure space
            # breaks the div-inclusion assumption's counterpart (surjectivity)
            raise InvalidProfile(f"BDM_{ad} pairs with gamma_d = {ad - 1}, got {gd}")
        return self

    @property
    def max_degree(self):
        return max(self.alpha_s, self.beta, self.alpha_d)


def _edge_param(t, flipped):
    return 1.0 - t if flipped else t


class WGStokesSpace:
    """WG velocity/pressure space on the Stokes triangles of a mesh."""

    def __init__(self, mesh, profile, nu=1.0):
        profile.validate()
        self.mesh = mesh
        self.profile = profile
        self.nu = float(nu)
        a, b, g = profile.alpha_s, profile.beta, profile.gamma_s
        self.n0 = bq.dim_p(a)
        self.nb = b + 1
        self.ngrad = bq.dim_p(b)
        self.np = bq.dim_p(g)
        self.nloc = 2 * self.n0 + 6 * self.nb

        self.cells = mesh.triangle_ids(Region.STOKES)
        self.edges = mesh.edge_ids(EdgeTag.STOKES_INTERIOR, EdgeTag.GAMMA_S, EdgeTag.INTERFACE)
        self.edge_index = -np.ones(mesh.n_edges, dtype=np.int64)
        self.edge_index[self.edges] = np.arange(len(self.edges))
        self.geo = bq.triangle_geometry(mesh.vertices[mesh.triangles[self.cells]])
        self.flips = mesh.tri_edge_signs[self.cells] < 0  # (nc, 3)
        self.cell_edges = self.edge_index[mesh.tri_edges[self.cells]]  # (nc, 3)
        assert np.all(self.cell_edges >= 0)

        self.n_interior = 2 * self.n0 * len(self.cells)
        self.n_edge_dofs = 2 * self.nb * len(self.edges)
        self.ndof = self.n_interior + self.n_edge_dofs
        self.n_pressure = self.np * len(self.cells)
        self.quad_degree = 2 * profile.max_degree + 4

    # -- numbering -------------------------------------------------------
    @property
    def n_cells(self):
        return len(self.cells)

    def edge_dofs(self, edge_local):
        """Global velocity DOFs of Stokes edges (local edge indices), shape (n, 2, nb)."""
        edge_local = np.asarray(edge_local)
        base = self.n_interior + edge_local * 2 * self.nb
        return base[:, None, None] + np.arange(2)[None, :, None] * self.nb + np.arange(self.nb)[None, None, :]

    @cached_property
    def local_dofs(self):
        """Global velocity DOF of each local slot, shape (ncells, nloc)."""
        nc = self.n_cells
        interior = np.arange(nc)[:, None] * 2 * self.n0 + np.arange(2 * self.n0)[None, :]
        edge = self.edge_dofs(self.cell_edges.ravel()).reshape(nc, 3 * 2 * self.nb)
        return np.hstack([interior, edge])

    @cached_property
    def pressure_dofs(self):
        return np.arange(self.n_cells)[:, None] * self.np + np.arange(self.np)[None, :]

    @cached_property
    def dirichlet_dofs(self):
        ids = self.edge_index[self.mesh.edge_ids(EdgeTag.GAMMA_S)]
        return self.edge_dofs(ids).ravel()

    def scalar_slots(self, comp):
        """Vector-local slots carrying component ``comp`` in the scalar layout [w0, e0, e1, e2]."""
        interior = comp * self.n0 + np.arange(self.n0)
        edges = [2 * self.n0 + l * 2 * self.nb + comp * self.nb + np.arange(self.nb) for l in range(3)]
        return np.concatenate([interior, *edges])

    def edge_slots(self, l, comp):
        return 2 * self.n0 + l * 2 * self.nb + comp * self.nb + np.arange(self.nb)

    # -- reference data --------------------------------------------------
    @cached_property
    def _ref(self):
        a, b = self.profile.alpha_s, self.profile.beta
        qt = bq.quad_triangle(min(a + b + 2, bq.MAX_QUAD_DEGREE))
        phi0 = bq.TriangleBasis(a).eval(qt.points)  # interior trial basis
        dpsi = bq.TriangleBasis(b).grad(qt.points)  # (2, ngrad, nq)
        # R[m][b, a] = int phi_a d_m psi_b
        R = np.einsum("aq,mbq,q->mba", phi0, dpsi, qt.weights)
        qe = bq.quad_interval(min(a + b + 2, bq.MAX_QUAD_DEGREE))
        t = qe.points[:, 0]
        chi = bq.EdgeBasis(b)
        trace_psi = np.empty((3, 2, self.nb, self.ngrad))
        trace_phi = np.empty((3, 2, self.nb, self.n0))
        for l in range(3):
            pts = bq.ref_edge_points(l, t)
            psi_e = bq.TriangleBasis(b).eval(pts)
            phi_e = bq.TriangleBasis(a).eval(pts)
            for f in (0, 1):
                c = chi.eval(_edge_param(t, f))
                trace_psi[l, f] = np.einsum("cq,bq,q->cb", c, psi_e, qe.weights)
                trace_phi[l, f] = np.einsum("cq,aq,q->ca", c, phi_e, qe.weights)
        return R, trace_psi, trace_phi

    # -- weak operators --------------------------------------------------
    @cached_property
    def scalar_weak_derivative(self):
        """``W[j]`` maps scalar local DOFs [w0, e0, e1, e2] to moments of d_{w,j} w against P_beta.

        Shape (2, ncells, ngrad, n0 + 3 nb).  Dividing by |det B| gives the
        coefficients of the weak partial derivative.
        """
        R, trace_psi, _ = self._ref
        geo = self.geo
        nc = self.n_cells
        W = np.zeros((2, nc, self.ngrad, self.n0 + 3 * self.nb))
        absdet = np.abs(geo.detB)
        # -(w0, d_j psi): d_j psi = sum_m Binv[m, j] dhat_m psi
        W[:, :, :, : self.n0] = -np.einsum("t,tmj,mba->jtba", absdet, geo.Binv, R)
        for l in range(3):
            tp = trace_psi[l][self.flips[:, l].astype(int)]  # (nc, nb, ngrad)
            scale = geo.edge_lengths[:, l, None] * geo.normals[:, l, :]  # (nc, 2)
            cols = slice(self.n0 + l * self.nb, self.n0 + (l + 1) * self.nb)
            W[:, :, :, cols] = np.einsum("tj,tcb->jtbc", scale, tp)
        return W

    @cached_property
    def weak_gradient(self):
        """Coefficients of (grad_w v)_{ij} = d_{w,j} v_i in P_beta: shape (ncells, 2, 2, ngrad, nloc)."""
        W = self.scalar_weak_derivative / np.abs(self.geo.detB)[None, :, None, None]
        G = np.zeros((self.n_cells, 2, 2, self.ngrad, self.nloc))
        for i in range(2):
            slots = self.scalar_slots(i)
            for j in range(2):
                G[:, i, j][..., slots] = W[j]
        return G

    @cached_property
    def weak_divergence(self):
        """Coefficients of div_w v in P_gamma_s: shape (ncells, np, nloc)."""
        G = self.weak_gradient
        return G[:, 0, 0, : self.np] + G[:, 1, 1, : self.np]

    @cached_property
    def weak_strain(self):
        G = self.weak_gradient
        return 0.5 * (G + G.transpose(0, 2, 1, 3, 4))

    def trace_projection(self, l):
        """Q_b of the interior trace on local edge ``l``: (ncells, nb, n0) Legendre coefficients."""
        _, _, trace_phi = self._ref
        return trace_phi[l][self.flips[:, l].astype(int)]

    @cached_property
    def local_blocks(self):
        """(A, S, B) per cell: strain energy, stabilizer and -(div_w v, q)."""
        absdet = np.abs(self.geo.detB)
        D = self.weak_strain
        A = 2.0 * self.nu * np.einsum("t,tijbm,tijbn->tmn", absdet, D, D)

        S = np.zeros((self.n_cells, self.nloc, self.nloc))
        for l in range(3):
            T = self.trace_projection(l)
            for i in range(2):
                P = np.zeros((self.n_cells, self.nb, self.nloc))
                P[:, :, i * self.n0 : (i + 1) * self.n0] = T
                P[:, :, self.edge_slots(l, i)] -= np.eye(self.nb)
                w = self.geo.edge_lengths[:, l] / self.geo.diam
                S += np.einsum("t,tcm,tcn->tmn", w, P, P)

        B = -absdet[:, None, None] * self.weak_divergence
        return A, S, B

    # -- fields ------------------------------------------------------------
    def project(self, u, degree=None):
        """Q_h u = {Q_0 u, Q_b u} as a global velocity vector."""
        if degree is None:
            degree = 2 * self.profile.max_degree + 6
        interior = bq.l2_project_cell(u, self.profile.alpha_s, self.geo.verts, degree)  # (2, nc, n0)
        ends = self.mesh.vertices[self.mesh.edges[self.edges]]
        edge = bq.l2_project_edge(u, self.profile.beta, ends, degree)  # (2, ne, nb)
        vec = np.empty(self.ndof)
        vec[: self.n_interior] = interior.transpose(1, 0, 2).ravel()
        vec[self.n_interior :] = edge.transpose(1, 0, 2).ravel()
        return vec

    def project_pressure(self, p, degree=None):
        if degree is None:
            degree = 2 * self.profile.max_degree + 6
        return bq.l2_project_cell(p, self.profile.gamma_s, self.geo.verts, degree).ravel()

    def interior_coefficients(self, vec):
        """(ncells, 2, n0) interior coefficients of a global velocity vector."""
        return vec[: self.n_interior].reshape(self.n_cells, 2, self.n0)

    def edge_coefficients(self, vec):
        return vec[self.n_interior :].reshape(len(self.edges), 2, self.nb)

    def gather(self, vec):
        return vec[self.local_dofs]


@dataclass
class WeakField:
    """A discrete WG velocity: global coefficient vector over a :class:`WGStokesSpace`."""

    space: WGStokesSpace
    vector: np.ndarray

    @property
    def interior(self):
        return self.space.interior_coefficients(self.vector)

    @property
    def boundary(self):
        return self.space.edge_coefficients(self.vector)


def stokes_energy_norm(space, vec, bjs=1.0):
    """Discrete energy norm of a WG velocity evaluated by quadrature.

    ``(2 nu ||D_w v||^2 + sum_T h_T^-1 ||Q_b v0 - vb||^2_{dT} + bjs ||vb . tau||^2_Gamma)^(1/2)``.
    The integrals are evaluated pointwise from the weak strain and traces, not
    from the assembled matrices.
    """
    if isinstance(vec, WeakField):
        vec = vec.vector
    prof = space.profile
    geo = space.geo
    loc = space.gather(vec)  # (nc, nloc)

    qt = bq.quad_triangle(min(2 * prof.beta + 2, bq.MAX_QUAD_DEGREE))
    psi = bq.TriangleBasis(prof.beta).eval(qt.points)
    Dc = np.einsum("tijbm,tm->tijb", space.weak_strain, loc)
    Dq = np.einsum("tijb,bq->tijq", Dc, psi)
    strain = 2.0 * space.nu * np.einsum("t,tijq,q->", np.abs(geo.detB), Dq**2, qt.weights)

    qe = bq.quad_interval(min(2 * max(prof.alpha_s, prof.beta) + 2, bq.MAX_QUAD_DEGREE))
    t = qe.points[:, 0]
    chi = bq.EdgeBasis(prof.beta)
    phi0 = bq.TriangleBasis(prof.alpha_s)
    v0 = loc[:, : 2 * space.n0].reshape(-1, 2, space.n0)
    stab = 0.0
    for l in range(3):
        phi_e = phi0.eval(bq.ref_edge_points(l, t))  # (n0, nq), local parameter t
        v0_q = np.einsum("tia,aq->tiq", v0, phi_e)
        for f in (0, 1):
            sel = space.flips[:, l] == bool(f)
            if not np.any(sel):
                continue
            c = chi.eval(_edge_param(t, f))  # chi at canonical parameter
            qb = np.einsum("tiq,cq,q->tic", v0_q[sel], c, qe.weights)
            vb = loc[sel][:, np.r_[space.edge_slots(l, 0), space.edge_slots(l, 1)]].reshape(-1, 2, space.nb)
            diff = np.einsum("tic,cq->tiq", qb - vb, c)
            w = geo.edge_lengths[sel, l] / geo.diam[sel]
            stab += np.einsum("t,tiq,q->", w, diff**2, qe.weights)

    iface = space.mesh.edge_ids(EdgeTag.INTERFACE)
    interface = 0.0
    if bjs != 0.0 and len(iface):
        e = space.mesh.edges[iface]
        tang = space.mesh.vertices[e[:, 1]] - space.mesh.vertices[e[:, 0]]
        length = np.linalg.norm(tang, axis=-1)
        tang = tang / length[:, None]
        vb = space.edge_coefficients(vec)[space.edge_index[iface]]  # (ni, 2, nb)
        vt = np.einsum("ei,eic->ec", tang, vb)
        vals = np.einsum("ec,cq->eq", vt, chi.eval(t))
        interface = bjs * np.einsum("e,eq,q->", length, vals**2, qe.weights)
    return float(np.sqrt(strain + stab + interface))
