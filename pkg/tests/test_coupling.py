import numpy as np
import pytest

from wgmfem import basis as bq
from wgmfem.coupling import MultiplierSpace, bjs_matrix, mortar_matrix, project_to_multiplier
from wgmfem.errors import InvalidCoefficient, InvalidDomain
from wgmfem.mesh import EdgeTag, Mesh, build_mesh
from wgmfem.mfem_darcy import BDMSpace
from wgmfem.verification import case_one
from wgmfem.wg_stokes import DegreeProfile, WGStokesSpace, stokes_energy_norm

EX1 = case_one().domain


def spaces(k=1, level=2, profile=None):
    m = build_mesh(EX1, level)
    p = profile or DegreeProfile.default(k)
    return m, WGStokesSpace(m, p), BDMSpace(m, p), MultiplierSpace(m, p.alpha_d)


def test_multiplier_dimension():
    for k in (1, 2, 3):
        for level in (1, 3):
            m, _, _, mult = spaces(k, level)
            assert mult.ndof == (k + 1) * len(m.edge_ids(EdgeTag.INTERFACE))


def stokes_only_mesh():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return Mesh(v, np.array([[0, 1, 2]]), np.array([0]))


def test_empty_interface():
    m = stokes_only_mesh()
    with pytest.raises(InvalidDomain):
        MultiplierSpace(m, 1)
    with pytest.raises(InvalidDomain):
        bjs_matrix(m, WGStokesSpace(m, DegreeProfile.default(1)), 1.0)


def test_bjs_zero_and_negative():
    m, st, _, _ = spaces()
    assert np.abs(bjs_matrix(m, st, 0.0).data).max(initial=0.0) == 0.0
    with pytest.raises(InvalidCoefficient):
        bjs_matrix(m, st, -0.1)


def test_bjs_unit_slip_gives_interface_length():
    m, st, _, _ = spaces(2)
    v = st.project(lambda x, y: np.array([1.0 + 0 * x, 0 * y]))
    assert v @ bjs_matrix(m, st, 1.0) @ v == pytest.approx(np.pi, rel=1e-13)
    assert v @ bjs_matrix(m, st, 2.0) @ v == pytest.approx(2 * np.pi, rel=1e-13)


def test_bjs_term_matches_energy_norm():
    rng = np.random.default_rng(1)
    m, st, _, _ = spaces(2)
    A_i = bjs_matrix(m, st, 1.7)
    for _ in range(5):
        v = rng.normal(size=st.ndof)
        third = stokes_energy_norm(st, v, 1.7) ** 2 - stokes_energy_norm(st, v, 0.0) ** 2
        assert v @ A_i @ v == pytest.approx(third, rel=1e-9)


def test_bjs_symmetric_psd_and_local():
    m, st, _, _ = spaces(2)
    A = bjs_matrix(m, st, 1.0).toarray()
    assert np.abs(A - A.T).max() < 1e-15
    assert np.linalg.eigvalsh(A).min() > -1e-12
    iface = st.edge_dofs(st.edge_index[m.edge_ids(EdgeTag.INTERFACE)]).ravel()
    outside = np.setdiff1d(np.arange(st.ndof), iface)
    assert np.abs(A[outside]).max() == 0 and np.abs(A[:, outside]).max() == 0
    # normal-only fields on a horizontal interface carry no slip energy
    v = st.project(lambda x, y: np.array([0 * x, np.cos(x) + y]))
    assert np.abs(A @ v).max() < 1e-14


def test_mortar_vanishes_for_matching_normal_traces():
    for k in (1, 2, 3):
        m, st, da, mult = spaces(k)
        C_s, C_d = mortar_matrix(m, mult, st, da)
        u = lambda x, y: np.array([np.sin(x) * y + 1, np.cos(x) * np.exp(y)])
        r = C_s @ st.project(u) - C_d @ da.interpolate(u)
        assert np.abs(r).max() < 1e-12


def test_mortar_rank_at_level_two():
    m, st, da, mult = spaces(1)
    C_s, C_d = mortar_matrix(m, mult, st, da)
    for C in (C_s, C_d):
        assert np.linalg.matrix_rank(C.toarray()) == mult.ndof
    C = np.hstack([C_s.toarray(), -C_d.toarray()])
    assert np.linalg.matrix_rank(C) == mult.ndof


def test_mortar_row_sum_with_unit_darcy_flux():
    m, st, da, mult = spaces(2)
    C_s, C_d = mortar_matrix(m, mult, st, da)
    v_d = da.interpolate(lambda x, y: np.array([0 * x, -1.0 + 0 * y]))  # u . n = 1 on Gamma
    r = C_s @ np.zeros(st.ndof) - C_d @ v_d
    eta_one = np.zeros(mult.ndof)
    eta_one[mult.dofs(np.arange(len(mult.edges)))[:, 0]] = 1.0  # chi_0 = 1
    assert eta_one @ r == pytest.approx(-np.pi, rel=1e-13)


def test_mortar_uses_stokes_to_darcy_normal():
    m, st, da, mult = spaces(1, level=1)
    C_s, _ = mortar_matrix(m, mult, st, da)
    v = st.project(lambda x, y: np.array([0 * x, 1.0 + 0 * y]))  # points up, away from Darcy
    assert C_s[0] @ v == pytest.approx(-np.pi, rel=1e-13)


def test_project_to_multiplier():
    m, _, _, mult = spaces(1, level=1)
    c = np.array([0.4, -1.1])
    ends = m.vertices[m.edges[mult.edges]]

    def g(x, y):
        s = (x - ends[0, 0, 0]) / (ends[0, 1, 0] - ends[0, 0, 0])
        return np.tensordot(c, bq.EdgeBasis(1).eval(s.ravel()), 1).reshape(np.shape(x))

    assert np.allclose(project_to_multiplier(g, mult), c, atol=1e-13)
    # odd about the midpoint: no constant part
    odd = project_to_multiplier(lambda x, y: (x - np.pi / 2) ** 3, mult)
    assert abs(odd[0]) < 1e-13


def test_multiplier_projection_order():
    errs = []
    q = bq.quad_interval(12)
    for level in (3, 4, 5, 6):
        m = build_mesh(EX1, level)
        mult = MultiplierSpace(m, 1)
        c = project_to_multiplier(lambda x, y: np.sin(x), mult).reshape(-1, 2)
        ends = m.vertices[m.edges[mult.edges]]
        s = q.points[:, 0]
        x = ends[:, 0, 0, None] + s[None] * (ends[:, 1, 0] - ends[:, 0, 0])[:, None]
        d = np.sin(x) - c @ bq.EdgeBasis(1).eval(s)
        L = np.linalg.norm(ends[:, 1] - ends[:, 0], axis=-1)
        errs.append(np.sqrt(np.einsum("e,eq,q->", L, d**2, q.weights)))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(orders - 2) < 0.05)
