"""Quadrature rules, orthonormal polynomial bases and L2 projections.

Cell bases live on the reference triangle {x, y >= 0, x + y <= 1} and are
pulled back to physical triangles through the affine map
``x = B xhat + c``.  The reference basis is orthonormal, so the physical
mass matrix of any triangle is ``|det B| * I``.

Edge bases are orthonormal Legendre polynomials in the arc-length
parameter ``s`` in [0, 1] running along the edge's canonical direction
(lower vertex index to higher), which gives ``int_e chi_c chi_d = |e| delta``.
"""
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import mpmath
import numpy as np
from numpy.polynomial import legendre
from scipy import special

from .errors import DegenerateElement, UnsupportedDegree

MAX_QUAD_DEGREE = 20


def dim_p(k):
    """Dimension of P_k in two variables."""
    if k < 0:
        return 0
    return (k + 1) * (k + 2) // 2


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray  # (npts, dim)
    weights: np.ndarray  # (npts,)
    degree: int


@lru_cache(maxsize=None)
def quad_triangle(d):
    """Collapsed Gauss-Jacobi rule on the reference triangle exact to degree ``d``.

    The rule is a Stroud conical product, so all weights are positive and all
    points are interior.  Degrees above ``MAX_QUAD_DEGREE`` raise
    :class:`UnsupportedDegree`.
    """
    if not 0 <= d <= MAX_QUAD_DEGREE:
        raise UnsupportedDegree(f"triangle quadrature degree {d} not in [0, {MAX_QUAD_DEGREE}]")
    n = max(1, (d + 2) // 2)
    # u-direction carries the (1 - u) Jacobian of the Duffy map
    su, wu = special.roots_jacobi(n, 1.0, 0.0)
    sv, wv = legendre.leggauss(n)
    u = 0.5 * (1.0 + su)
    v = 0.5 * (1.0 + sv)
    wu = wu / 4.0
    wv = wv / 2.0
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = uu
    y = (1.0 - uu) * vv
    w = np.outer(wu, wv)
    pts = np.column_stack([x.ravel(), y.ravel()])
    return QuadRule(pts, w.ravel(), d)


@lru_cache(maxsize=None)
def quad_interval(d):
    """Gauss-Legendre rule on [0, 1] exact to degree ``d``."""
    if not 0 <= d <= MAX_QUAD_DEGREE:
        raise UnsupportedDegree(f"interval quadrature degree {d} not in [0, {MAX_QUAD_DEGREE}]")
    n = max(1, (d + 2) // 2)
    s, w = legendre.leggauss(n)
    return QuadRule(0.5 * (1.0 + s)[:, None], 0.5 * w, d)


def _exponents(k):
    return [(deg - j, j) for deg in range(k + 1) for j in range(deg + 1)]


def _centered_moment(p, q):
    """Exact int over the reference triangle of (x - 1/3)^p (y - 1/3)^q."""
    third = Fraction(1, 3)
    total = Fraction(0)
    for i in range(p + 1):
        ci = comb(p, i) * (-third) ** (p - i)
        for j in range(q + 1):
            cj = comb(q, j) * (-third) ** (q - j)
            total += ci * cj * Fraction(factorial(i) * factorial(j), factorial(i + j + 2))
    return total


@lru_cache(maxsize=None)
def _orthonormal_coefficients(k):
    exps = _exponents(k)
    n = len(exps)
    with mpmath.workdps(60):
        gram = mpmath.matrix(n, n)
        for i, (a, b) in enumerate(exps):
            for j, (c, d) in enumerate(exps):
                m = _centered_moment(a + c, b + d)
                gram[i, j] = mpmath.mpf(m.numerator) / m.denominator
        chol = mpmath.cholesky(gram)
        inv = mpmath.inverse(chol)
        coef = np.array([[float(inv[i, j]) for j in range(n)] for i in range(n)])
    return coef, np.array(exps)


class TriangleBasis:
    """Orthonormal basis of P_k on the reference triangle.

    Built by Gram-Schmidt (exact rational moments, Cholesky in extended
    precision) on monomials centred at the reference centroid.  The ordering
    is hierarchical: the first ``dim_p(j)`` functions span P_j.
    """

    def __init__(self, k):
        if k < 0:
            raise UnsupportedDegree(f"negative polynomial degree {k}")
        self.k = k
        self.dim = dim_p(k)
        self.coef, self.exps = _orthonormal_coefficients(k)

    def _powers(self, z):
        out = [np.ones_like(z)]
        for _ in range(self.k):
            out.append(out[-1] * z)
        return out

    def eval(self, pts):
        """Values, shape (dim, npts)."""
        X = self._powers(pts[:, 0] - 1.0 / 3.0)
        Y = self._powers(pts[:, 1] - 1.0 / 3.0)
        mono = np.array([X[a] * Y[b] for a, b in self.exps])
        return self.coef @ mono

    def grad(self, pts):
        """Reference gradients, shape (2, dim, npts)."""
        X = self._powers(pts[:, 0] - 1.0 / 3.0)
        Y = self._powers(pts[:, 1] - 1.0 / 3.0)
        zero = np.zeros(len(pts))
        dx = np.array([a * X[a - 1] * Y[b] if a else zero for a, b in self.exps])
        dy = np.array([b * X[a] * Y[b - 1] if b else zero for a, b in self.exps])
        return np.array([self.coef @ dx, self.coef @ dy])


class EdgeBasis:
    """Orthonormal Legendre basis of P_k on the unit parameter interval."""

    def __init__(self, k):
        if k < 0:
            raise UnsupportedDegree(f"negative polynomial degree {k}")
        self.k = k
        self.dim = k + 1
        self._scale = np.sqrt(2.0 * np.arange(k + 1) + 1.0)

    def eval(self, s):
        """Values at parameters ``s`` in [0, 1], shape (dim, npts)."""
        s = np.asarray(s, dtype=float).ravel()
        return (legendre.legvander(2.0 * s - 1.0, self.k) * self._scale).T


# Reference triangle data: local edge l runs from vertex l to vertex l+1.
REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
REF_EDGE_LENGTHS = np.array([1.0, np.sqrt(2.0), 1.0])
REF_NORMALS = np.array([[0.0, -1.0], [1.0, 1.0] / np.sqrt(2.0), [-1.0, 0.0]])


def ref_edge_points(l, t):
    """Reference-triangle points on local edge ``l`` at local parameters ``t``."""
    a = REF_VERTICES[l]
    b = REF_VERTICES[(l + 1) % 3]
    t = np.asarray(t).ravel()
    return a[None, :] + t[:, None] * (b - a)[None, :]


@dataclass
class TriangleGeometry:
    """Affine maps of a batch of triangles, all arrays leading with the triangle axis."""

    verts: np.ndarray  # (nt, 3, 2)
    B: np.ndarray  # (nt, 2, 2) columns v1 - v0, v2 - v0
    Binv: np.ndarray  # (nt, 2, 2)
    detB: np.ndarray  # (nt,)
    edge_lengths: np.ndarray  # (nt, 3)
    normals: np.ndarray  # (nt, 3, 2) outward unit normals of local edges
    diam: np.ndarray  # (nt,)

    @property
    def area(self):
        return 0.5 * np.abs(self.detB)

    def map(self, ref_pts):
        """Physical coordinates of reference points, shape (nt, npts) each for x and y."""
        p = self.verts[:, 0, :][:, None, :] + np.einsum("tij,qj->tqi", self.B, ref_pts)
        return p[..., 0], p[..., 1]


def triangle_geometry(verts):
    verts = np.asarray(verts, dtype=float)
    if verts.ndim == 2:
        verts = verts[None]
    e1 = verts[:, 1] - verts[:, 0]
    e2 = verts[:, 2] - verts[:, 0]
    B = np.stack([e1, e2], axis=-1)
    detB = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
    edges = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 1], verts[:, 0] - verts[:, 2]], axis=1)
    lengths = np.linalg.norm(edges, axis=-1)
    diam = lengths.max(axis=1)
    if np.any(np.abs(detB) <= 1e-13 * np.maximum(diam, 1e-300) ** 2):
        raise DegenerateElement("triangle with (near) zero area")
    Binv = np.empty_like(B)
    Binv[:, 0, 0] = B[:, 1, 1] / detB
    Binv[:, 1, 1] = B[:, 0, 0] / detB
    Binv[:, 0, 1] = -B[:, 0, 1] / detB
    Binv[:, 1, 0] = -B[:, 1, 0] / detB
    orient = np.sign(detB)[:, None, None]
    normals = orient * np.stack([edges[..., 1], -edges[..., 0]], axis=-1) / lengths[..., None]
    return TriangleGeometry(verts, B, Binv, detB, lengths, normals, diam)


def _field_components(vals, npts_shape):
    vals = np.asarray(vals, dtype=float)
    if vals.shape == ():
        vals = np.full(npts_shape, float(vals))
    return vals


def l2_project_cell(f, k, verts, degree=None):
    """L2 projection of ``f`` onto P_k on each triangle.

    ``f(x, y)`` may return a scalar field or stacked components with leading
    axes (e.g. shape (2, ...) for vectors).  ``verts`` is (3, 2) or (nt, 3, 2).
    Returns coefficients of the pulled-back orthonormal basis with shape
    (*components, nt, dim_p(k)).  Mass matrices are ``|det B| I`` so the
    projection is a moment computation.
    """
    geo = triangle_geometry(verts)
    if degree is None:
        degree = 2 * k + 6
    q = quad_triangle(min(degree, MAX_QUAD_DEGREE))
    phi = TriangleBasis(k).eval(q.points)
    x, y = geo.map(q.points)
    vals = _field_components(f(x, y), x.shape)
    # |detB| cancels between the moment and the mass matrix
    return np.einsum("...tq,q,aq->...ta", vals, q.weights, phi)


def l2_project_edge(f, k, ends, degree=None):
    """L2 projection of ``f`` onto P_k on each edge.

    ``ends`` is (2, 2) or (ne, 2, 2) holding start and end points in the
    canonical direction.  Returns (*components, ne, k + 1) Legendre
    coefficients.
    """
    ends = np.asarray(ends, dtype=float)
    if ends.ndim == 2:
        ends = ends[None]
    length = np.linalg.norm(ends[:, 1] - ends[:, 0], axis=-1)
    if np.any(length <= 0.0):
        raise DegenerateElement("zero-length edge")
    if degree is None:
        degree = 2 * k + 6
    q = quad_interval(min(degree, MAX_QUAD_DEGREE))
    s = q.points[:, 0]
    chi = EdgeBasis(k).eval(s)
    p = ends[:, 0, None, :] + s[None, :, None] * (ends[:, 1] - ends[:, 0])[:, None, :]
    vals = _field_components(f(p[..., 0], p[..., 1]), p[..., 0].shape)
    return np.einsum("...eq,q,cq->...ec", vals, q.weights, chi)


def eval_cell(coef, k, ref_pts):
    """Evaluate pulled-back basis expansions at reference points.

    ``coef`` has shape (..., nt, dim_p(k)); result (..., nt, npts).
    """
    phi = TriangleBasis(k).eval(ref_pts)
    return np.einsum("...ta,aq->...tq", coef, phi)
