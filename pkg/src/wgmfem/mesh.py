"""Two-region triangulations: a Stokes rectangle stacked on a Darcy rectangle.

Edges are stored as sorted vertex pairs, so an edge's canonical direction
always runs from its lower vertex index to its higher one.  Every edge and
cell basis that lives on an edge is parametrised along that direction.
"""
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import InvalidDomain


class Region(IntEnum):
    STOKES = 0
    DARCY = 1


class EdgeTag(IntEnum):
    STOKES_INTERIOR = 0
    DARCY_INTERIOR = 1
    GAMMA_S = 2
    GAMMA_D = 3
    INTERFACE = 4


@dataclass(frozen=True)
class DomainSpec:
    """Axis-aligned rectangles ``(x0, x1, y0, y1)`` sharing one full edge."""

    stokes_rect: tuple
    darcy_rect: tuple

    def shared_edge(self):
        """The common edge as a pair of points, or raise :class:`InvalidDomain`."""
        sx0, sx1, sy0, sy1 = map(float, self.stokes_rect)
        dx0, dx1, dy0, dy1 = map(float, self.darcy_rect)
        if not (sx1 > sx0 and sy1 > sy0 and dx1 > dx0 and dy1 > dy0):
            raise InvalidDomain("rectangles must have positive area")
        if (sx0, sx1) == (dx0, dx1) and (sy0 == dy1 or sy1 == dy0):
            y = sy0 if sy0 == dy1 else sy1
            return np.array([[sx0, y], [sx1, y]])
        if (sy0, sy1) == (dy0, dy1) and (sx0 == dx1 or sx1 == dx0):
            x = sx0 if sx0 == dx1 else sx1
            return np.array([[x, sy0], [x, sy1]])
        raise InvalidDomain("rectangles do not share a full edge")


# Edge (a, b) of triangle (v0, v1, v2) for local index l is (v_l, v_{l+1}).
_LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), counter-clockwise
    regions: np.ndarray  # (nt,) Region values
    level: int = 1
    edges: np.ndarray = field(init=False)  # (ne, 2) sorted pairs
    edge_tags: np.ndarray = field(init=False)  # (ne,)
    tri_edges: np.ndarray = field(init=False)  # (nt, 3)
    tri_edge_signs: np.ndarray = field(init=False)  # (nt, 3): +1 if local direction is canonical
    edge_tris: np.ndarray = field(init=False)  # (ne, 2), -1 padded

    def __post_init__(self):
        tris = self.triangles
        nt = len(tris)
        local = tris[:, _LOCAL_EDGES]  # (nt, 3, 2)
        pairs = np.sort(local, axis=-1).reshape(-1, 2)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.reshape(nt, 3)
        signs = np.where(local[..., 0] < local[..., 1], 1, -1)

        ne = len(edges)
        edge_tris = -np.ones((ne, 2), dtype=np.int64)
        count = np.zeros(ne, dtype=np.int64)
        for t in range(nt):
            for e in inverse[t]:
                if count[e] >= 2:
                    raise InvalidDomain(f"edge {e} shared by more than two triangles")
                edge_tris[e, count[e]] = t
                count[e] += 1

        tags = np.empty(ne, dtype=np.int64)
        r0 = self.regions[edge_tris[:, 0]]
        two = count == 2
        r1 = np.where(two, self.regions[np.maximum(edge_tris[:, 1], 0)], -1)
        tags[two & (r0 == r1) & (r0 == Region.STOKES)] = EdgeTag.STOKES_INTERIOR
        tags[two & (r0 == r1) & (r0 == Region.DARCY)] = EdgeTag.DARCY_INTERIOR
        tags[two & (r0 != r1)] = EdgeTag.INTERFACE
        tags[~two & (r0 == Region.STOKES)] = EdgeTag.GAMMA_S
        tags[~two & (r0 == Region.DARCY)] = EdgeTag.GAMMA_D
        # Interface edges list the Stokes triangle first.
        swap = two & (r0 != r1) & (r0 == Region.DARCY)
        edge_tris[swap] = edge_tris[swap][:, ::-1]

        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "edge_tags", tags)
        object.__setattr__(self, "tri_edges", inverse)
        object.__setattr__(self, "tri_edge_signs", signs)
        object.__setattr__(self, "edge_tris", edge_tris)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    def triangle_ids(self, region):
        return np.flatnonzero(self.regions == region)

    def edge_ids(self, *tags):
        return np.flatnonzero(np.isin(self.edge_tags, tags))

    def edge_lengths(self, ids=None):
        e = self.edges if ids is None else self.edges[ids]
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=-1)

    def diameters(self, ids=None):
        tris = self.triangles if ids is None else self.triangles[ids]
        p = self.vertices[tris]
        return np.linalg.norm(p[:, [1, 2, 0]] - p, axis=-1).max(axis=1)

    @property
    def h_s(self):
        return self.diameters(self.triangle_ids(Region.STOKES)).max()

    @property
    def h_d(self):
        return self.diameters(self.triangle_ids(Region.DARCY)).max()

    def signed_areas(self):
        p = self.vertices[self.triangles]
        a = p[:, 1] - p[:, 0]
        b = p[:, 2] - p[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def interface_normal(self, ids=None):
        """Unit normals of interface edges pointing from the Stokes side into Darcy."""
        if ids is None:
            ids = self.edge_ids(EdgeTag.INTERFACE)
        e = self.edges[ids]
        t = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        n = np.stack([t[:, 1], -t[:, 0]], axis=-1) / np.linalg.norm(t, axis=-1)[:, None]
        centroid = self.vertices[self.triangles[self.edge_tris[ids, 0]]].mean(axis=1)
        mid = 0.5 * (self.vertices[e[:, 0]] + self.vertices[e[:, 1]])
        flip = np.einsum("ij,ij->i", n, centroid - mid) > 0
        n[flip] *= -1
        return n

    def check(self):
        """Raise AssertionError if any structural invariant fails."""
        assert np.all(self.signed_areas() > 0), "non-positive triangle orientation"
        ntri = (self.edge_tris >= 0).sum(axis=1)
        interior = np.isin(self.edge_tags, [EdgeTag.STOKES_INTERIOR, EdgeTag.DARCY_INTERIOR, EdgeTag.INTERFACE])
        assert np.all(ntri[interior] == 2) and np.all(ntri[~interior] == 1)
        iface = self.edge_ids(EdgeTag.INTERFACE)
        assert np.all(self.regions[self.edge_tris[iface, 0]] == Region.STOKES)
        assert np.all(self.regions[self.edge_tris[iface, 1]] == Region.DARCY)
        # Euler characteristic of a disc, counting the outer face
        assert self.n_vertices - self.n_edges + self.n_triangles + 1 == 2
        return True


def _rect_triangles(corner_ids):
    sw, se, ne, nw = corner_ids
    return [(sw, se, nw), (se, ne, nw)]


def build_initial_mesh(spec):
    """Level-1 mesh: each rectangle cut by its north-west to south-east diagonal."""
    spec.shared_edge()
    verts = []
    index = {}

    def vid(p):
        key = (float(p[0]), float(p[1]))
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    tris, regs = [], []
    for region, rect in ((Region.STOKES, spec.stokes_rect), (Region.DARCY, spec.darcy_rect)):
        x0, x1, y0, y1 = map(float, rect)
        ids = [vid(p) for p in ((x0, y0), (x1, y0), (x1, y1), (x0, y1))]
        for t in _rect_triangles(ids):
            tris.append(t)
            regs.append(region)
    return Mesh(np.array(verts, dtype=float), np.array(tris, dtype=np.int64), np.array(regs, dtype=np.int64), level=1)


def refine(m):
    """Uniform red refinement: every triangle split into four via edge midpoints."""
    nv = m.n_vertices
    mid = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
    vertices = np.vstack([m.vertices, mid])
    t = m.triangles
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    mab = nv + m.tri_edges[:, 0]
    mbc = nv + m.tri_edges[:, 1]
    mca = nv + m.tri_edges[:, 2]
    children = np.stack(
        [
            np.stack([a, mab, mca], axis=1),
            np.stack([mab, b, mbc], axis=1),
            np.stack([mca, mbc, c], axis=1),
            np.stack([mab, mbc, mca], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)
    regions = np.repeat(m.regions, 4)
    return Mesh(vertices, children, regions, level=m.level + 1)


def build_mesh(spec, level):
    m = build_initial_mesh(spec)
    for _ in range(level - 1):
        m = refine(m)
    return m


def entities(m, what):
    """Sorted index array of triangles (``Region``) or edges (``EdgeTag``)."""
    if isinstance(what, Region):
        return m.triangle_ids(what)
    if isinstance(what, EdgeTag):
        return m.edge_ids(what)
    raise TypeError(f"filter must be a Region or EdgeTag, got {what!r}")


@dataclass(frozen=True)
class InterfaceSegments:
    """Common refinement of the Stokes-side and Darcy-side interface trace meshes.

    Each segment records the edge it lies on from either side and the
    canonical-parameter interval it covers on that edge.  For matching meshes
    every segment is a whole interface edge.
    """

    stokes_edge: np.ndarray
    darcy_edge: np.ndarray
    stokes_param: np.ndarray  # (nseg, 2)
    darcy_param: np.ndarray  # (nseg, 2)
    start: np.ndarray  # (nseg, 2) point coordinates
    end: np.ndarray  # (nseg, 2)

    @property
    def lengths(self):
        return np.linalg.norm(self.end - self.start, axis=-1)


def interface_segments(m):
    ids = m.edge_ids(EdgeTag.INTERFACE)
    e = m.edges[ids]
    unit = np.tile([0.0, 1.0], (len(ids), 1))
    return InterfaceSegments(ids, ids, unit, unit.copy(), m.vertices[e[:, 0]], m.vertices[e[:, 1]])


def write_mesh(m, path):
    """Plain-text dump: ``v x y`` / ``t i j k region`` / ``e i j tag`` lines."""
    with open(path, "w") as fh:
        for x, y in m.vertices:
            fh.write(f"v {x:.17g} {y:.17g}\n")
        for (i, j, k), r in zip(m.triangles, m.regions):
            fh.write(f"t {i} {j} {k} {Region(r).name}\n")
        for (i, j), tag in zip(m.edges, m.edge_tags):
            fh.write(f"e {i} {j} {EdgeTag(tag).name}\n")
