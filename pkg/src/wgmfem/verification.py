"""Manufactured solutions, discrete error norms and convergence studies."""
import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import basis as bq
from .coupling import bjs_matrix
from .errors import BudgetExceeded, SingularSystem
from .mesh import DomainSpec, EdgeTag, build_mesh
from .system import CaseCoefficients, ProblemData, _scatter, apply_boundary_data, assemble, solve
from .wg_stokes import DegreeProfile

COLUMNS = ("u0", "utb", "ps", "ud", "div", "pd")
ROUNDOFF_FLOOR = 1e-13  # errors below this carry no rate information


@dataclass
class ManufacturedCase:
    """Exact Stokes-Darcy fields ``f(x, y)`` with the load computed for the given viscosity."""

    name: str
    domain: DomainSpec
    u_s: object
    p_s: object
    u_d: object
    p_d: object
    f_s: object
    f_d: object
    grad_u_s: object  # (2, 2, ...) with [i, j] = d_j u_i
    coefficients: CaseCoefficients = field(default_factory=CaseCoefficients)

    def data(self):
        return ProblemData(f_s=self.f_s, f_d=self.f_d, g_s=self.u_s, g_d=self.u_d)

    def interface_residual(self, x):
        """Mass, normal-stress and BJS residuals at interface points ``x`` (along the shared edge)."""
        c = self.coefficients
        a, b = self.domain.shared_edge()
        t = (b - a) / np.linalg.norm(b - a)
        n = np.array([t[1], -t[0]])
        # Darcy side lies on the n side
        dx0, dx1, dy0, dy1 = self.domain.darcy_rect
        centre = np.array([0.5 * (dx0 + dx1), 0.5 * (dy0 + dy1)])
        if np.dot(centre - a, n) < 0:
            n = -n
        pts = a[:, None] + np.outer(b - a, x)
        X, Y = pts
        G = self.grad_u_s(X, Y)
        D = 0.5 * (G + G.transpose(1, 0, 2))
        T = 2 * c.nu * D - self.p_s(X, Y) * np.eye(2)[:, :, None]
        Tn = np.einsum("ijq,j->iq", T, n)
        us, ud = self.u_s(X, Y), self.u_d(X, Y)
        mass = np.einsum("iq,i->q", us - ud, n)
        normal = -np.einsum("iq,i->q", Tn, n) - self.p_d(X, Y)
        slip = -np.einsum("iq,i->q", Tn, t) - c.bjs * np.einsum("iq,i->q", us, t)
        return mass, normal, slip


def case_one(nu=0.5, bjs=1.0, kappa=1.0):
    """Trigonometric/exponential fields on (0, pi)^2 over (0, pi) x (-pi, 0)."""
    coef = CaseCoefficients(nu, bjs, kappa)

    def u_s(x, y):
        return np.array([2 * np.sin(y) * np.cos(y) * np.cos(x), (np.sin(y) ** 2 - 2) * np.sin(x)])

    def grad_u_s(x, y):
        return np.array(
            [
                [-np.sin(2 * y) * np.sin(x), 2 * np.cos(2 * y) * np.cos(x)],
                [(np.sin(y) ** 2 - 2) * np.cos(x), np.sin(2 * y) * np.sin(x)],
            ]
        )

    def p_s(x, y):
        return np.sin(x) * np.sin(y)

    def f_s(x, y):
        # -nu Lap u + grad p, u divergence free
        lap1 = -5 * np.sin(2 * y) * np.cos(x)
        lap2 = np.sin(x) * (2 - np.sin(y) ** 2 + 2 * np.cos(2 * y))
        return np.array(
            [-nu * lap1 + np.cos(x) * np.sin(y), -nu * lap2 + np.sin(x) * np.cos(y)]
        )

    def p_d(x, y):
        return (np.exp(y) - np.exp(-y)) * np.sin(x)

    def u_d(x, y):
        return kappa * np.array([-(np.exp(y) - np.exp(-y)) * np.cos(x), -(np.exp(y) + np.exp(-y)) * np.sin(x)])

    def f_d(x, y):
        return np.zeros_like(x)

    dom = DomainSpec((0.0, np.pi, 0.0, np.pi), (0.0, np.pi, -np.pi, 0.0))
    return ManufacturedCase("example1", dom, u_s, p_s, u_d, p_d, f_s, f_d, grad_u_s, coef)


def case_two(nu=1.0, bjs=1.0, kappa=1.0):
    """Polynomial-trigonometric fields on (0, 1) x (1, 2) over (0, 1)^2."""
    coef = CaseCoefficients(nu, bjs, kappa)
    pi = np.pi

    def u_s(x, y):
        return np.array([-np.cos(pi * x) * np.sin(pi * y), np.sin(pi * x) * np.cos(pi * y)])

    def grad_u_s(x, y):
        return np.array(
            [
                [pi * np.sin(pi * x) * np.sin(pi * y), -pi * np.cos(pi * x) * np.cos(pi * y)],
                [pi * np.cos(pi * x) * np.cos(pi * y), -pi * np.sin(pi * x) * np.sin(pi * y)],
            ]
        )

    def p_s(x, y):
        return np.sin(pi * x) + 0 * y

    def f_s(x, y):
        return 2 * nu * pi**2 * u_s(x, y) + np.array([pi * np.cos(pi * x), 0 * y])

    def p_d(x, y):
        return y * np.sin(pi * x)

    def u_d(x, y):
        return kappa * np.array([-y * pi * np.cos(pi * x), -np.sin(pi * x)])

    def f_d(x, y):
        return kappa * y * pi**2 * np.sin(pi * x)

    dom = DomainSpec((0.0, 1.0, 1.0, 2.0), (0.0, 1.0, 0.0, 1.0))
    return ManufacturedCase("example2", dom, u_s, p_s, u_d, p_d, f_s, f_d, grad_u_s, coef)


def get_case(example, **coefficients):
    return {1: case_one, 2: case_two}[int(example)](**coefficients)


def _integrate(space, f, degree):
    q = bq.quad_triangle(min(degree, bq.MAX_QUAD_DEGREE))
    x, y = space.geo.map(q.points)
    return float(np.einsum("tq,q,t->", np.asarray(f(x, y)) + 0 * x, q.weights, np.abs(space.geo.detB)))


def error_norms(solution, case):
    """The six table errors for a solved system.

    Pressures are shifted by one global constant so the discrete mean over
    the whole domain equals the exact one before comparison.
    """
    disc = solution.disc
    st, da = disc.stokes, disc.darcy
    prof = disc.profile
    deg = 2 * prof.max_degree + 6

    quh = st.project(case.u_s, deg)
    diff = quh - solution.u_s
    d0 = st.interior_coefficients(diff)  # orthonormal: L2 norm is |detB|-weighted coefficient norm
    e_u0 = np.sqrt(np.einsum("t,tia->", np.abs(st.geo.detB), d0**2))

    K = _stokes_operator(disc)
    e_utb = np.sqrt(max(float(diff @ (K @ diff)), 0.0))

    exact_mean = _integrate(st, case.p_s, deg) + _integrate(da, case.p_d, deg)
    e = disc.pressure_mean_row()
    ph = np.concatenate([solution.p_s, solution.p_d])
    area = np.abs(st.geo.detB).sum() / 2 + np.abs(da.geo.detB).sum() / 2
    shift = (exact_mean - e @ ph) / area
    # phi_0 = sqrt(2), so the constant c has coefficient c / sqrt(2)
    ps = solution.p_s.reshape(st.n_cells, st.np).copy()
    pd = solution.p_d.reshape(da.n_cells, da.np).copy()
    ps[:, 0] += shift / np.sqrt(2.0)
    pd[:, 0] += shift / np.sqrt(2.0)
    rps = st.project_pressure(case.p_s, deg).reshape(ps.shape)
    e_ps = np.sqrt(np.einsum("t,ta->", np.abs(st.geo.detB), (rps - ps) ** 2))
    rpd = da.project_pressure(case.p_d, deg).reshape(pd.shape)
    e_pd = np.sqrt(np.einsum("t,ta->", np.abs(da.geo.detB), (rpd - pd) ** 2))

    q = bq.quad_triangle(min(deg, bq.MAX_QUAD_DEGREE))
    dv = da.eval(da.interpolate(case.u_d, deg) - solution.u_d, q.points)
    e_ud = np.sqrt(np.einsum("tiq,q,t->", dv**2, q.weights, np.abs(da.geo.detB)))
    x, y = da.geo.map(q.points)
    ddiv = case.f_d(x, y) - da.eval_div(solution.u_d, q.points)
    e_div = np.sqrt(np.einsum("tq,q,t->", ddiv**2, q.weights, np.abs(da.geo.detB)))
    return dict(u0=e_u0, utb=e_utb, ps=e_ps, ud=e_ud, div=e_div, pd=e_pd)


def _stokes_operator(disc):
    st = disc.stokes
    A, S, _ = st.local_blocks
    K = _scatter(A + S, st.local_dofs, st.local_dofs, (st.ndof, st.ndof))
    return K + bjs_matrix(disc.mesh, st, disc.coefficients.bjs)


@dataclass
class ConvergenceTable:
    levels: list
    errors: dict  # column -> list of errors
    reports: list = field(default_factory=list)
    ndofs: list = field(default_factory=list)

    def orders(self, col):
        e = np.asarray(self.errors[col], dtype=float)
        out = [np.nan]
        for a, b in zip(e[:-1], e[1:]):
            out.append(np.log2(a / b) if min(a, b) > ROUNDOFF_FLOOR else np.nan)
        return out

    def finest_orders(self):
        return {c: self.orders(c)[-1] for c in COLUMNS}

    def rows(self):
        orders = {c: self.orders(c) for c in COLUMNS}
        for i, lev in enumerate(self.levels):
            yield lev, [(self.errors[c][i], orders[c][i]) for c in COLUMNS]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level"] + [f"{p}_{c}" for c in COLUMNS for p in ("e", "k")])
        for lev, vals in self.rows():
            row = [lev]
            for e, k in vals:
                row += [f"{e:.6e}", "" if np.isnan(k) else f"{k:.4f}"]
            w.writerow(row)
        return buf.getvalue()

    def to_markdown(self):
        head = "| level | " + " | ".join(f"e_{c} | k" for c in COLUMNS) + " |"
        sep = "|" + "---|" * (1 + 2 * len(COLUMNS))
        lines = [head, sep]
        for lev, vals in self.rows():
            cells = [f"{e:.4E} | {'' if np.isnan(k) else f'{k:.1f}'}" for e, k in vals]
            lines.append(f"| {lev} | " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def predicted_ndof(mesh, profile):
    """Total unknowns from entity counts and space dimensions."""
    n_s = len(mesh.triangle_ids(0))
    n_d = len(mesh.triangle_ids(1))
    e_s = len(mesh.edge_ids(EdgeTag.STOKES_INTERIOR, EdgeTag.GAMMA_S, EdgeTag.INTERFACE))
    e_d = len(mesh.edge_ids(EdgeTag.DARCY_INTERIOR, EdgeTag.GAMMA_D, EdgeTag.INTERFACE))
    e_i = len(mesh.edge_ids(EdgeTag.INTERFACE))
    k = profile.alpha_d
    wg = 2 * bq.dim_p(profile.alpha_s) * n_s + 2 * (profile.beta + 1) * e_s
    bdm = (k + 1) * e_d + (2 * bq.dim_p(k) - 3 * (k + 1)) * n_d
    return wg + bdm + bq.dim_p(profile.gamma_s) * n_s + bq.dim_p(profile.gamma_d) * n_d + (k + 1) * e_i + 1


def solve_case(case, profile, level, dof_budget=None):
    mesh = build_mesh(case.domain, level)
    if dof_budget is not None:
        n = predicted_ndof(mesh, profile)
        if n > dof_budget:
            raise BudgetExceeded(level, n, dof_budget)
    system = assemble(mesh, profile, case.coefficients, case.data())
    system = apply_boundary_data(system)
    return solve(system)


def convergence_study(case, profile, levels, dof_budget=None, on_level=None):
    """Solve on each level and collect the error table.

    The DOF budget is checked for every level before any solve starts.
    """
    if isinstance(profile, int):
        profile = DegreeProfile.default(profile)
    levels = list(levels)
    if dof_budget is not None:
        for lev in levels:
            n = predicted_ndof(build_mesh(case.domain, lev), profile)
            if n > dof_budget:
                raise BudgetExceeded(lev, n, dof_budget)
    table = ConvergenceTable(levels, {c: [] for c in COLUMNS})
    for lev in levels:
        try:
            sol = solve_case(case, profile, lev)
        except SingularSystem as exc:
            raise SingularSystem(f"level {lev}: {exc}") from exc
        errs = error_norms(sol, case)
        for c in COLUMNS:
            table.errors[c].append(errs[c])
        table.reports.append(sol.report)
        table.ndofs.append(sol.disc.ndof)
        if on_level is not None:
            on_level(lev, sol, errs)
    return table
