from math import factorial

import numpy as np
import pytest

from wgmfem import basis as bq
from wgmfem.errors import InvalidCoefficient, UnsupportedDegree
from wgmfem.mesh import EdgeTag, build_mesh
from wgmfem.mfem_darcy import BDMSpace, ReferenceBDM, interpolate_hdiv
from wgmfem.verification import case_one, case_two
from wgmfem.wg_stokes import DegreeProfile

EX1 = case_one().domain
EX2 = case_two().domain


def space(k, level=2, dom=EX2, kappa=1.0):
    return BDMSpace(build_mesh(dom, level), DegreeProfile.default(k), kappa)


def test_lowest_order_element_has_only_edge_dofs():
    ref = ReferenceBDM(1)
    assert ref.ndof == 6 and ref.n_interior == 0 and ref.n_edge == 2


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_dual_basis(k):
    ref = ReferenceBDM(k)
    assert ref.ndof == (k + 1) * (k + 2)
    assert np.abs(ref.dof_matrix @ ref.coef - np.eye(ref.ndof)).max() < 1e-11
    assert ref.check_unisolvent() < 1e10
    # functionals applied to the evaluated dual basis give the identity
    qe = bq.quad_interval(2 * k + 2)
    t = qe.points[:, 0]
    rows = []
    for l in range(3):
        vn = np.einsum("jdq,d->jq", ref.eval(bq.ref_edge_points(l, t)), bq.REF_NORMALS[l])
        rows.append(np.einsum("cq,jq,q->cj", bq.EdgeBasis(k).eval(t), vn, qe.weights))
    qt = bq.quad_triangle(2 * k)
    rows.append(ref.interior_moments(ref.eval(qt.points), qt).T)
    assert np.abs(np.vstack(rows) - np.eye(ref.ndof)).max() < 1e-11


def test_degree_zero_is_rejected():
    with pytest.raises(UnsupportedDegree):
        ReferenceBDM(0)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_divergence_lies_in_lower_degree(k):
    ref = ReferenceBDM(k)
    qt = bq.quad_triangle(2 * k)
    d = ref.div(qt.points)
    psi = bq.TriangleBasis(k - 1).eval(qt.points)
    coef = np.einsum("jq,aq,q->ja", d, psi, qt.weights)
    assert np.abs(d - coef @ psi).max() < 1e-10 * max(1.0, np.abs(d).max())


@pytest.mark.parametrize("k", [1, 2, 3])
def test_normal_trace_on_each_edge_has_degree_k(k):
    ref = ReferenceBDM(k)
    t = np.linspace(0, 1, k + 6)
    for l in range(3):
        vn = np.einsum("jdq,d->jq", ref.eval(bq.ref_edge_points(l, t)), bq.REF_NORMALS[l])
        fit = np.polynomial.polynomial.polyfit(t, vn.T, k)
        assert np.allclose(np.polynomial.polynomial.polyval(t, fit), vn, atol=1e-10)


def monomial_coefficients(vals, pts, k):
    exps = [(a, d - a) for d in range(k + 1) for a in range(d + 1)]
    V = np.array([pts[:, 0] ** a * pts[:, 1] ** b for a, b in exps]).T
    return np.linalg.lstsq(V, vals.T, rcond=None)[0].T, exps


def test_reference_mass_against_closed_form_moments():
    ref = ReferenceBDM(1)
    pts = np.random.default_rng(0).random((20, 2)) * 0.5
    vals = ref.eval(pts)  # (6, 2, 20)
    c, exps = monomial_coefficients(vals.reshape(-1, len(pts)), pts, 1)
    c = c.reshape(6, 2, -1)
    mono = np.array([[factorial(a1 + a2) * factorial(b1 + b2) / factorial(a1 + a2 + b1 + b2 + 2)
                      for (a2, b2) in exps] for (a1, b1) in exps])
    exact = np.einsum("imp,jmq,pq->ij", c, c, mono)
    M = ref.mass
    assert np.abs(M[0, 0] + M[1, 1] - exact).max() < 1e-12


def physical_basis(sp_, t, pts):
    """Values of the global basis functions local to cell ``t``, shape (nloc, 2, npts)."""
    out = []
    for g in sp_.local_dofs[t]:
        v = np.zeros(sp_.ndof)
        v[g] = 1.0
        out.append(sp_.eval(v, pts)[t])
    return np.array(out)


@pytest.mark.parametrize("k", [1, 2])
def test_local_mass_matches_quadrature(k):
    sp_ = space(k, level=1, dom=EX1)
    A, _ = sp_.local_blocks
    q = bq.quad_triangle(2 * k)
    for t in range(sp_.n_cells):
        phi = physical_basis(sp_, t, q.points)
        M = abs(sp_.geo.detB[t]) * np.einsum("adq,bdq,q->ab", phi, phi, q.weights)
        assert np.allclose(A[t], M, atol=1e-12 * np.abs(M).max())
        assert np.linalg.eigvalsh(A[t]).min() > 0


def test_permeability_scaling():
    A1, B1 = space(2).local_blocks
    A3, B3 = space(2, kappa=3.0).local_blocks
    assert np.allclose(A3, A1 / 3.0, rtol=1e-15, atol=0)
    assert np.array_equal(B1, B3)
    for bad in (0.0, -1.0):
        with pytest.raises(InvalidCoefficient):
            space(1, kappa=bad)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_divergence_block_against_boundary_flux(k):
    sp_ = space(k, level=2)
    _, B = sp_.local_blocks
    qe = bq.quad_interval(2 * k)
    s = qe.points[:, 0]
    phi0 = np.sqrt(2.0)
    for t in range(sp_.n_cells):
        flux = np.zeros(sp_.ref.ndof)
        for l in range(3):
            vals = physical_basis(sp_, t, bq.ref_edge_points(l, s))
            vn = np.einsum("adq,d->aq", vals, sp_.geo.normals[t, l])
            flux += sp_.geo.edge_lengths[t, l] * vn @ qe.weights
        assert np.allclose(B[t, 0] / phi0, -flux, atol=1e-12)


def random_field(rng, degree):
    c = rng.normal(size=(2, degree + 1, degree + 1))
    w = rng.normal(size=2)

    def u(x, y):
        base = np.array([sum(c[i, a, b] * x**a * y**b for a in range(degree + 1) for b in range(degree + 1 - a))
                         for i in range(2)])
        return base + np.array([np.sin(w[0] * x + y), np.cos(x - w[1] * y)])

    def div(x, y):
        dx = sum(c[0, a, b] * a * x ** max(a - 1, 0) * y**b for a in range(1, degree + 1) for b in range(degree + 1 - a))
        dy = sum(c[1, a, b] * b * x**a * y ** max(b - 1, 0) for a in range(degree + 1) for b in range(1, degree + 1 - a))
        return dx + dy + w[0] * np.cos(w[0] * x + y) + w[1] * np.sin(x - w[1] * y)

    return u, div


@pytest.fixture(scope="module")
def level2_spaces():
    m = build_mesh(EX2, 2)
    return {k: BDMSpace(m, DegreeProfile.default(k)) for k in (1, 2, 3, 4)}


def cell_edge_moments(sp_, vec_or_field, t_quad):
    """``int_e (v . n_e) chi_c`` on every (cell, local edge) with v from a vector or a callable."""
    s = t_quad.points[:, 0]
    chi = bq.EdgeBasis(sp_.k)
    out = np.zeros((sp_.n_cells, 3, sp_.nb))
    for l in range(3):
        pts = bq.ref_edge_points(l, s)
        if callable(vec_or_field):
            x, y = sp_.geo.map(pts)
            vals = np.asarray(vec_or_field(x, y)).transpose(1, 0, 2)
        else:
            vals = sp_.eval(vec_or_field, pts)
        n = sp_.edge_normals[sp_.cell_edges[:, l]]
        vn = np.einsum("tiq,ti->tq", vals, n)
        for f in (0, 1):
            sel = sp_.flips[:, l] == bool(f)
            c = chi.eval(1 - s if f else s)
            out[sel, l] = np.einsum("tq,cq,q->tc", vn[sel], c, t_quad.weights) * sp_.geo.edge_lengths[sel, l, None]
    return out


def test_interpolant_moment_properties(level2_spaces):
    rng = np.random.default_rng(99)
    worst_div = worst_edge = 0.0
    qe = bq.quad_interval(20)
    for trial in range(200):
        k = 1 + trial % 4
        sp_ = level2_spaces[k]
        u, div = random_field(rng, k + 2)
        v = interpolate_hdiv(sp_, u, 20)
        q = bq.quad_triangle(20)
        x, y = sp_.geo.map(q.points)
        diff = sp_.eval_div(v, q.points) - div(x, y)
        psi = bq.TriangleBasis(sp_.profile.gamma_d).eval(q.points)
        worst_div = max(worst_div, np.abs(np.einsum("tq,aq,q->ta", diff, psi, q.weights)).max())
        mom = cell_edge_moments(sp_, v, qe) - cell_edge_moments(sp_, u, qe)
        worst_edge = max(worst_edge, np.abs(mom).max())
    assert worst_div <= 1e-10
    assert worst_edge <= 1e-10


@pytest.mark.parametrize("k", [1, 2, 3])
def test_interpolant_reproduces_discrete_fields(level2_spaces, k):
    sp_ = level2_spaces[k]
    rng = np.random.default_rng(k)
    c = rng.normal(size=(2, k + 1, k + 1))

    def u(x, y):
        return np.array([sum(c[i, a, b] * x**a * y**b for a in range(k + 1) for b in range(k + 1 - a))
                         for i in range(2)])

    v = sp_.interpolate(u)
    q = bq.quad_triangle(6)
    x, y = sp_.geo.map(q.points)
    assert np.allclose(sp_.eval(v, q.points), u(x, y).transpose(1, 0, 2), atol=1e-11)
    # a second pass changes nothing
    assert np.allclose(sp_.interpolate(u), v, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_normal_trace_continuity(level2_spaces, k):
    sp_ = level2_spaces[k]
    m = sp_.mesh
    v = np.random.default_rng(4).normal(size=sp_.ndof)
    s = np.linspace(0.05, 0.95, 7)
    worst = 0.0
    for e in m.edge_ids(EdgeTag.DARCY_INTERIOR):
        a, b = m.vertices[m.edges[e]]
        pts = a + s[:, None] * (b - a)
        n = sp_.edge_normals[sp_.edge_index[e]]
        vals = []
        for t in m.edge_tris[e]:
            ct = np.flatnonzero(sp_.cells == t)[0]
            ref = (pts - sp_.geo.verts[ct, 0]) @ sp_.geo.Binv[ct].T
            vals.append(sp_.eval(v, ref)[ct].T @ n)
        worst = max(worst, np.abs(vals[0] - vals[1]).max())
    assert worst <= 1e-12


@pytest.mark.parametrize("k", [1, 2])
def test_interpolation_error_order(k):
    u = case_one().u_d
    errs = []
    q = bq.quad_triangle(2 * k + 6)
    for level in (3, 4, 5):
        sp_ = space(k, level, EX1)
        x, y = sp_.geo.map(q.points)
        d = sp_.eval(sp_.interpolate(u), q.points) - u(x, y).transpose(1, 0, 2)
        errs.append(np.sqrt(np.einsum("tiq,q,t->", d**2, q.weights, np.abs(sp_.geo.detB))))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert abs(orders[-1] - (k + 1)) < 0.1


def test_dof_layout():
    sp_ = space(2, level=3)
    assert sp_.ndof == sp_.nb * len(sp_.edges) + sp_.ni * sp_.n_cells
    assert np.array_equal(np.unique(sp_.local_dofs[:, 3 * sp_.nb :]), np.arange(sp_.n_edge_dofs, sp_.ndof))
    assert len(sp_.dirichlet_dofs) == sp_.nb * len(sp_.mesh.edge_ids(EdgeTag.GAMMA_D))
