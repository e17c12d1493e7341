"""Global numbering, assembly and direct solution of the coupled saddle-point system.

Unknown blocks, in order::

    u_s (WG interior, then WG edges) | u_d (BDM edges, then interior) | p_s | p_d | lambda | m

``m`` is a single multiplier enforcing a zero global pressure mean.  The matrix
is symmetric indefinite::

    [ A_s+S+A_i    0     B_s^T    0     C_s^T   0  ]
    [    0        A_d     0     B_d^T  -C_d^T   0  ]
    [   B_s        0      0       0      0     e_s ]
    [    0        B_d     0       0      0     e_d ]
    [   C_s      -C_d     0       0      0      0  ]
    [    0         0     e_s^T  e_d^T    0      0  ]

Dirichlet DOFs (Stokes edges on Gamma_s, BDM edges on Gamma_d) are kept in
the matrix and eliminated symmetrically at solve time.
"""
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import basis as bq
from .coupling import MultiplierSpace, bjs_matrix, mortar_matrix
from .errors import IncompleteCase, InvalidCoefficient, SingularSystem
from .mesh import EdgeTag
from .mfem_darcy import BDMSpace
from .wg_stokes import WGStokesSpace

BLOCKS = ("u_s", "u_d", "p_s", "p_d", "lambda", "m")


@dataclass(frozen=True)
class CaseCoefficients:
    nu: float = 1.0
    bjs: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidCoefficient(f"viscosity must be positive, got {self.nu}")
        if not self.kappa > 0:
            raise InvalidCoefficient(f"permeability must be positive, got {self.kappa}")
        if not self.bjs >= 0:
            raise InvalidCoefficient(f"BJS coefficient must be non-negative, got {self.bjs}")


@dataclass
class ProblemData:
    """Loads and boundary data as callables ``f(x, y)``; vectors return shape (2, ...)."""

    f_s: object = None
    f_d: object = None
    g_s: object = None  # velocity on Gamma_s
    g_d: object = None  # velocity whose normal component is imposed on Gamma_d

    @classmethod
    def homogeneous(cls, f_s=None, f_d=None):
        zero = lambda x, y: np.zeros((2,) + np.shape(x))
        return cls(f_s=f_s, f_d=f_d, g_s=zero, g_d=zero)


class Discretization:
    """All discrete spaces on one mesh plus the global DOF offset table."""

    def __init__(self, mesh, profile, coefficients=None):
        profile.validate()
        self.mesh = mesh
        self.profile = profile
        self.coefficients = coefficients or CaseCoefficients()
        c = self.coefficients
        self.stokes = WGStokesSpace(mesh, profile, c.nu)
        self.darcy = BDMSpace(mesh, profile, c.kappa)
        self.mult = MultiplierSpace(mesh, profile.alpha_d)
        sizes = [self.stokes.ndof, self.darcy.ndof, self.stokes.n_pressure, self.darcy.n_pressure, self.mult.ndof, 1]
        starts = np.concatenate([[0], np.cumsum(sizes)])
        self.offsets = {b: (int(starts[i]), int(starts[i + 1])) for i, b in enumerate(BLOCKS)}
        self.ndof = int(starts[-1])

    def block(self, name):
        a, b = self.offsets[name]
        return slice(a, b)

    @property
    def block_sizes(self):
        return {b: hi - lo for b, (lo, hi) in self.offsets.items()}

    @property
    def fixed_dofs(self):
        s = self.stokes.dirichlet_dofs + self.offsets["u_s"][0]
        d = self.darcy.dirichlet_dofs + self.offsets["u_d"][0]
        return np.concatenate([s, d])

    def pressure_mean_row(self):
        """Weights ``e`` with ``e . p = int_Omega p`` over the (p_s, p_d) blocks."""
        # int_T phi_a = delta_a0 |det B| / sqrt(2) for the orthonormal reference basis
        rows = []
        for space in (self.stokes, self.darcy):
            w = np.zeros((space.n_cells, space.np))
            w[:, 0] = np.abs(space.geo.detB) / np.sqrt(2.0)
            rows.append(w.ravel())
        return np.concatenate(rows)


def _scatter(local, rows, cols, shape):
    R = np.broadcast_to(rows[:, :, None], local.shape)
    C = np.broadcast_to(cols[:, None, :], local.shape)
    return sp.coo_matrix((local.ravel(), (R.ravel(), C.ravel())), shape=shape).tocsr()


def _stokes_load(space, f, degree):
    """``(f, v_0)`` moments on the interior Stokes DOFs."""
    out = np.zeros(space.ndof)
    if f is None:
        return out
    mom = bq.l2_project_cell(f, space.profile.alpha_s, space.geo.verts, degree)  # (2, nc, n0)
    mom = mom * np.abs(space.geo.detB)[None, :, None]
    out[: space.n_interior] = mom.transpose(1, 0, 2).ravel()
    return out


def _darcy_load(space, f, degree):
    if f is None:
        return np.zeros(space.n_pressure)
    mom = bq.l2_project_cell(f, space.profile.gamma_d, space.geo.verts, degree)
    return (mom * np.abs(space.geo.detB)[:, None]).ravel()


@dataclass
class CoupledSystem:
    disc: Discretization
    matrix: sp.csr_matrix
    rhs: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    data: ProblemData = None
    extras: dict = field(default_factory=dict)

    @property
    def offsets(self):
        return self.disc.offsets

    @property
    def free(self):
        mask = np.ones(self.disc.ndof, dtype=bool)
        mask[self.fixed] = False
        return np.flatnonzero(mask)

    def reduced(self):
        """Free-DOF matrix and right-hand side after lifting the Dirichlet values."""
        free = self.free
        K = self.matrix
        Kff = K[free][:, free]
        lift = K[free][:, self.fixed] @ self.fixed_values
        return Kff, self.rhs[free] - lift


def assemble(mesh, profile, coefficients=None, data=None):
    """Assemble the coupled matrix and load vector; boundary values start at zero."""
    disc = Discretization(mesh, profile, coefficients)
    data = data or ProblemData()
    st, da, mu = disc.stokes, disc.darcy, disc.mult
    coef = disc.coefficients
    N = disc.ndof
    degree = 2 * profile.max_degree + 4

    A_s, S_s, B_s = st.local_blocks
    K_s = _scatter(A_s + S_s, st.local_dofs, st.local_dofs, (st.ndof, st.ndof))
    K_s = K_s + bjs_matrix(mesh, st, coef.bjs)
    Bs = _scatter(B_s, st.pressure_dofs, st.local_dofs, (st.n_pressure, st.ndof))

    A_d, B_d = da.local_blocks
    K_d = _scatter(A_d, da.local_dofs, da.local_dofs, (da.ndof, da.ndof))
    Bd = _scatter(B_d, da.pressure_dofs, da.local_dofs, (da.n_pressure, da.ndof))

    C_s, C_d = mortar_matrix(mesh, mu, st, da)
    e = sp.csr_matrix(disc.pressure_mean_row()[:, None])
    e_s, e_d = e[: st.n_pressure], e[st.n_pressure :]

    Z = None
    K = sp.bmat(
        [
            [K_s, Z, Bs.T, Z, C_s.T, Z],
            [Z, K_d, Z, Bd.T, -C_d.T, Z],
            [Bs, Z, Z, Z, Z, e_s],
            [Z, Bd, Z, Z, Z, e_d],
            [C_s, -C_d, Z, Z, Z, Z],
            [Z, Z, e_s.T, e_d.T, Z, Z],
        ],
        format="csr",
    )
    # bmat needs explicit shapes when a whole block row/column is empty
    assert K.shape == (N, N)

    rhs = np.zeros(N)
    rhs[disc.block("u_s")] = _stokes_load(st, data.f_s, degree)
    rhs[disc.block("p_d")] = -_darcy_load(da, data.f_d, degree)
    fixed = disc.fixed_dofs
    return CoupledSystem(disc, K, rhs, fixed, np.zeros(len(fixed)), data)


def apply_boundary_data(system, data=None):
    """Set Dirichlet values: Q_b(g_s) on Gamma_s edges, normal moments of g_d on Gamma_d edges."""
    data = data or system.data
    if data is None or data.g_s is None or data.g_d is None:
        raise IncompleteCase("boundary data needs both g_s (Gamma_s velocity) and g_d (Gamma_d flux)")
    disc = system.disc
    st, da = disc.stokes, disc.darcy
    mesh = disc.mesh
    degree = 2 * disc.profile.max_degree + 6
    gs_ids = st.edge_index[mesh.edge_ids(EdgeTag.GAMMA_S)]
    ends = mesh.vertices[mesh.edges[st.edges[gs_ids]]]
    qb = bq.l2_project_edge(data.g_s, st.profile.beta, ends, degree)  # (2, ne, nb)
    vals_s = qb.transpose(1, 0, 2).ravel()  # matches edge_dofs(ids) ordering

    gd_ids = da.edge_index[mesh.edge_ids(EdgeTag.GAMMA_D)]
    vals_d = da.edge_moments(data.g_d, gd_ids, degree).ravel()
    return replace(system, fixed_values=np.concatenate([vals_s, vals_d]), data=data)


@dataclass
class SolveReport:
    block_sizes: dict
    n_free: int
    nnz_matrix: int
    nnz_factor: int
    refinement_steps: int
    residual: float
    wall_time: float
    tolerance: float = 1e-10

    def to_json(self, timing=True):
        out = {
            "block_sizes": self.block_sizes,
            "n_free": self.n_free,
            "nnz_matrix": self.nnz_matrix,
            "nnz_factor": self.nnz_factor,
            "refinement_steps": self.refinement_steps,
            "relative_residual": self.residual,
            "wall_time": self.wall_time,
            "tolerance": self.tolerance,
        }
        if not timing:
            del out["wall_time"]  # keeps dumps reproducible
        return json.dumps(out)

    @property
    def ok(self):
        return self.residual <= self.tolerance


@dataclass
class Solution:
    disc: Discretization
    x: np.ndarray
    report: SolveReport

    def block(self, name):
        return self.x[self.disc.block(name)]

    @property
    def u_s(self):
        return self.block("u_s")

    @property
    def u_d(self):
        return self.block("u_d")

    @property
    def p_s(self):
        return self.block("p_s")

    @property
    def p_d(self):
        return self.block("p_d")

    @property
    def multiplier(self):
        return self.block("lambda")

    def write(self, path):
        """Per-DOF coefficients with block labels, then the report as one JSON line."""
        with open(path, "w") as fh:
            for name in BLOCKS:
                lo, hi = self.disc.offsets[name]
                for i in range(lo, hi):
                    fh.write(f"{name} {i - lo} {self.x[i]:.17g}\n")
            fh.write("report " + self.report.to_json(timing=False) + "\n")


class _CondensedLU:
    """LU of a matrix whose leading block is block diagonal (cell-local WG interiors).

    The leading block is eliminated cell by cell and only the Schur complement
    is factorized.  ``solve`` applies the exact inverse of the full matrix.
    """

    def __init__(self, K, n_int, block):
        self.n = n_int
        nc = n_int // block
        K = K.tocsr()
        sub = K[:n_int, :n_int].tocoo()
        cell = sub.row // block
        if np.any(cell != sub.col // block):
            raise SingularSystem("interior block couples different cells")
        dense = np.zeros((nc, block, block))
        dense[cell, sub.row % block, sub.col % block] = sub.data
        try:
            inv = np.linalg.inv(dense)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"singular cell block: {exc}") from exc
        r = np.repeat(np.arange(n_int).reshape(nc, block), block, axis=1).ravel()
        c = np.tile(np.arange(n_int).reshape(nc, block), (1, block)).ravel()
        self.Kii_inv = sp.csr_matrix((inv.ravel(), (r, c)), shape=(n_int, n_int))
        self.Kir = K[:n_int, n_int:]
        self.Kri = K[n_int:, :n_int]
        schur = (K[n_int:, n_int:] - self.Kri @ (self.Kii_inv @ self.Kir)).tocsc()
        schur.eliminate_zeros()
        self.schur_nnz = schur.nnz
        try:
            self.lu = spla.splu(schur, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularSystem(f"factorization failed: {exc}") from exc
        d = np.abs(self.lu.U.diagonal())
        if not np.all(np.isfinite(d)) or d.min() <= 1e-14 * d.max():
            raise SingularSystem("zero pivot in LU factorization")
        self.factor_nnz = int(self.lu.L.nnz + self.lu.U.nnz)

    def solve(self, b):
        bi, br = b[: self.n], b[self.n :]
        t = self.Kii_inv @ bi
        xr = self.lu.solve(br - self.Kri @ t)
        xi = t - self.Kii_inv @ (self.Kir @ xr)
        return np.concatenate([xi, xr])


def solve(system, tol=1e-10, max_refine=4):
    """Direct solve of the reduced system with iterative refinement.

    WG interior unknowns are condensed out per cell, the Schur complement is
    factorized by SuperLU with partial pivoting (COLAMD ordering), and the
    residual of the full system drives up to ``max_refine`` refinement steps.
    """
    t0 = time.perf_counter()
    Kff, bf = system.reduced()
    st = system.disc.stokes
    # interior Stokes DOFs come first and are never Dirichlet
    lu = _CondensedLU(Kff, st.n_interior, 2 * st.n0)

    x = np.zeros(system.disc.ndof)
    x[system.fixed] = system.fixed_values
    free = system.free
    K = system.matrix
    bnorm = np.linalg.norm(bf)
    y = lu.solve(bf)
    steps = 0

    def residual(y):
        x[free] = y
        r = (system.rhs - K @ x)[free]
        return r, np.linalg.norm(r) / (bnorm if bnorm > 0 else 1.0)

    r, rel = residual(y)
    while rel > 0.1 * tol and steps < max_refine and bnorm > 0:
        y = y + lu.solve(r)
        steps += 1
        r, rel = residual(y)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution")
    report = SolveReport(
        block_sizes=system.disc.block_sizes,
        n_free=len(free),
        nnz_matrix=int(Kff.nnz),
        nnz_factor=lu.factor_nnz,
        refinement_steps=steps,
        residual=float(rel),
        wall_time=time.perf_counter() - t0,
        tolerance=tol,
    )
    return Solution(system.disc, x.copy(), report)
