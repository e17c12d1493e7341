"""Interface operators: Lagrange multiplier space, mortar coupling and the BJS term.

The multiplier lives on the Darcy-side trace of the interface in
discontinuous P_{alpha_d}, Legendre expanded in each edge's canonical
parameter.  Coupling integrals run over the common refinement of the two
trace meshes (``mesh.interface_segments``), which reduces to whole edges for
matching triangulations.
"""
import numpy as np
import scipy.sparse as sp

from . import basis as bq
from .errors import InvalidCoefficient, InvalidDomain
from .mesh import EdgeTag, interface_segments


class MultiplierSpace:
    def __init__(self, mesh, degree):
        self.mesh = mesh
        self.degree = degree
        self.nb = degree + 1
        self.edges = mesh.edge_ids(EdgeTag.INTERFACE)
        if len(self.edges) == 0:
            raise InvalidDomain("mesh has no interface edges")
        self.edge_index = -np.ones(mesh.n_edges, dtype=np.int64)
        self.edge_index[self.edges] = np.arange(len(self.edges))
        self.ndof = self.nb * len(self.edges)

    def dofs(self, edge_local):
        edge_local = np.asarray(edge_local)
        return edge_local[:, None] * self.nb + np.arange(self.nb)[None, :]


def _segment_points(seg, q):
    t = q.points[:, 0]
    s_s = seg.stokes_param[:, :1] + t[None, :] * (seg.stokes_param[:, 1:] - seg.stokes_param[:, :1])
    s_d = seg.darcy_param[:, :1] + t[None, :] * (seg.darcy_param[:, 1:] - seg.darcy_param[:, :1])
    return s_s, s_d


def mortar_matrix(mesh, mult, stokes, darcy, segments=None):
    """Sparse ``(C_s, C_d)`` with ``C_s v = <eta, vb . n>`` and ``C_d w = <eta, w . n>``.

    ``n`` points from the Stokes region into the Darcy region.  The
    constraint row of the coupled system is ``C_s u_s - C_d u_d = 0``.
    """
    if segments is None:
        segments = interface_segments(mesh)
    if len(segments.lengths) == 0:
        raise InvalidDomain("empty interface")
    deg = mult.degree + max(stokes.profile.beta, darcy.k)
    q = bq.quad_interval(min(deg + 2, bq.MAX_QUAD_DEGREE))
    s_s, s_d = _segment_points(segments, q)
    L = segments.lengths
    nseg, nq = s_s.shape
    eta = bq.EdgeBasis(mult.degree).eval(s_d.ravel()).reshape(mult.nb, nseg, nq)
    chi_s = bq.EdgeBasis(stokes.profile.beta).eval(s_s.ravel()).reshape(stokes.nb, nseg, nq)
    chi_d = bq.EdgeBasis(darcy.k).eval(s_d.ravel()).reshape(darcy.nb, nseg, nq)
    normal = mesh.interface_normal(segments.darcy_edge)  # (nseg, 2)

    rows = mult.dofs(mult.edge_index[segments.darcy_edge])  # (nseg, nb_m)

    vals_s = np.einsum("s,csq,dsq,q->scd", L, eta, chi_s, q.weights)  # (nseg, m, nbs)
    cols_s = stokes.edge_dofs(stokes.edge_index[segments.stokes_edge])  # (nseg, 2, nbs)
    Vs = vals_s[:, :, None, :] * normal[:, None, :, None]
    Rs = np.broadcast_to(rows[:, :, None, None], Vs.shape)
    Cs = np.broadcast_to(cols_s[:, None, :, :], Vs.shape)
    C_s = sp.coo_matrix((Vs.ravel(), (Rs.ravel(), Cs.ravel())), shape=(mult.ndof, stokes.ndof)).tocsr()

    dl = darcy.edge_index[segments.darcy_edge]
    orient = np.einsum("si,si->s", darcy.edge_normals[dl], normal)
    vals_d = np.einsum("s,s,csq,dsq,q->scd", orient, L, eta, chi_d, q.weights)
    cols_d = darcy.edge_dofs(dl)
    Rd = np.broadcast_to(rows[:, :, None], vals_d.shape)
    Cd = np.broadcast_to(cols_d[:, None, :], vals_d.shape)
    C_d = sp.coo_matrix((vals_d.ravel(), (Rd.ravel(), Cd.ravel())), shape=(mult.ndof, darcy.ndof)).tocsr()
    return C_s, C_d


def bjs_matrix(mesh, stokes, bjs):
    """``bjs * <vb . tau, wb . tau>_Gamma`` on the Stokes edge DOFs."""
    if bjs < 0:
        raise InvalidCoefficient(f"BJS coefficient must be non-negative, got {bjs}")
    ids = mesh.edge_ids(EdgeTag.INTERFACE)
    if len(ids) == 0:
        raise InvalidDomain("mesh has no interface edges")
    e = mesh.edges[ids]
    tang = mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]]
    length = np.linalg.norm(tang, axis=-1)
    tang = tang / length[:, None]
    nb = stokes.nb
    q = bq.quad_interval(2 * stokes.profile.beta)
    chi = bq.EdgeBasis(stokes.profile.beta).eval(q.points[:, 0])
    mass = np.einsum("cq,dq,q->cd", chi, chi, q.weights)
    vals = bjs * np.einsum("e,ei,ej,cd->eicjd", length, tang, tang, mass)
    dofs = stokes.edge_dofs(stokes.edge_index[ids])  # (ne, 2, nb)
    R = np.broadcast_to(dofs[:, :, :, None, None], vals.shape)
    C = np.broadcast_to(dofs[:, None, None, :, :], vals.shape)
    return sp.coo_matrix((vals.ravel(), (R.ravel(), C.ravel())), shape=(stokes.ndof, stokes.ndof)).tocsr()


def project_to_multiplier(f, mult, degree=None):
    """L2 projection of a scalar interface field onto the multiplier space."""
    ends = mult.mesh.vertices[mult.mesh.edges[mult.edges]]
    return bq.l2_project_edge(f, mult.degree, ends, degree).ravel()
