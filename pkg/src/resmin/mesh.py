"""Conforming simplicial meshes in 2D/3D with bisection refinement.

Cells are stored as ordered vertex tuples together with a tag k in
{1, ..., d} that designates the refinement edge (v0, vk), following
Maubach's ordered-bisection scheme.  Bisecting a cell inserts the
midpoint of the refinement edge and produces two children whose tags
are k-1 (or d when k = 1), which reproduces newest-vertex bisection in
2D and its tetrahedral generalization in 3D.  Conformity is enforced
by a worklist closure: whenever an edge acquires a midpoint, every
live cell containing that edge is queued for bisection until no cell
has a hanging node.
"""

from collections import deque
from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Optional

import numpy as np

__all__ = [
    "MeshError",
    "Face",
    "SimplicialMesh",
    "build_structured_mesh",
    "extract_skeleton",
    "bisect_refine",
    "cell_geometry",
    "dump_mesh",
]

# Hard cap on closure sweeps inside one refinement call; a legitimate
# cascade settles long before this, so hitting it signals broken
# refinement-edge bookkeeping.
_MAX_CLOSURE_PASSES = 2000

_FACTORIAL = {1: 1.0, 2: 2.0, 3: 6.0}


class MeshError(Exception):
    """Invalid mesh topology or geometry."""


@dataclass(frozen=True)
class Face:
    """A (d-1)-simplex of the skeleton.

    ``normal`` points from ``plus_cell`` to ``minus_cell`` for interior
    faces and outward for boundary faces (``minus_cell is None``).
    """

    vertices: tuple
    plus_cell: int
    minus_cell: Optional[int]
    normal: np.ndarray
    measure: float

    @property
    def is_boundary(self) -> bool:
        return self.minus_cell is None


class SimplicialMesh:
    """Conforming triangulation of a polytope by simplices.

    Parameters
    ----------
    vertices : (nv, d) array of vertex coordinates, d in {2, 3}.
    cells : (nc, d+1) int array of ordered vertex tuples.
    tags : (nc,) int array in {1..d}; refinement edge of cell c is
        (cells[c, 0], cells[c, tags[c]]).  Defaults to longest-edge
        initialization.
    generation : refinement level counter.
    ancestors : (nc,) int array mapping each cell to the cell of the
        mesh this one was refined from (identity for a root mesh).

    Instances are immutable after construction; refinement returns a
    new mesh.
    """

    def __init__(self, vertices, cells, tags=None, *, generation=0,
                 ancestors=None, validate=True):
        self.vertices = np.asarray(vertices, dtype=float)
        self.cells = np.asarray(cells, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] not in (2, 3):
            raise MeshError("vertices must be an (nv, d) array with d in {2, 3}")
        self.dim = self.vertices.shape[1]
        if self.cells.ndim != 2 or self.cells.shape[1] != self.dim + 1:
            raise MeshError("cells must be an (nc, d+1) index array")
        if tags is None:
            tags = _longest_edge_tags(self.vertices, self.cells)
        self.tags = np.asarray(tags, dtype=np.int64)
        self.generation = int(generation)
        if ancestors is None:
            ancestors = np.arange(self.n_cells, dtype=np.int64)
        self.ancestors = np.asarray(ancestors, dtype=np.int64)
        self.interior_faces: list[Face] = []
        self.boundary_faces: list[Face] = []
        self._cache: dict = {}
        self._geometry()
        if validate:
            self.interior_faces, self.boundary_faces = _build_skeleton(self)

    # -- basic queries -------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def refinement_edge(self, c: int) -> tuple:
        return (int(self.cells[c, 0]), int(self.cells[c, self.tags[c]]))

    def cell_coords(self, c: int) -> np.ndarray:
        return self.vertices[self.cells[c]]

    def _geometry(self):
        """Precompute volumes, diameters and centroids for all cells."""
        coords = self.vertices[self.cells]          # (nc, d+1, d)
        edges = coords[:, 1:, :] - coords[:, :1, :]  # (nc, d, d)
        det = np.linalg.det(edges)
        self.volumes = np.abs(det) / _FACTORIAL[self.dim]
        if np.any(self.volumes <= 0.0):
            bad = int(np.argmin(self.volumes))
            raise MeshError(f"degenerate cell {bad} with zero volume")
        diffs = coords[:, :, None, :] - coords[:, None, :, :]
        self.diameters = np.sqrt((diffs ** 2).sum(-1)).max(axis=(1, 2))
        self.centroids = coords.mean(axis=1)

    def total_volume(self) -> float:
        return float(self.volumes.sum())


# ---------------------------------------------------------------------------
# construction


def _longest_edge_tags(vertices, cells):
    """Reorder each cell in place so its longest edge is (v0, vd); tag = d.

    Ties are broken by the sorted global index pair, so the choice is
    deterministic.
    """
    cells = np.asarray(cells)
    d = vertices.shape[1]
    tags = np.full(cells.shape[0], d, dtype=np.int64)
    for c in range(cells.shape[0]):
        verts = [int(v) for v in cells[c]]
        best = None
        for i, j in combinations(range(d + 1), 2):
            a, b = verts[i], verts[j]
            length = float(np.linalg.norm(vertices[a] - vertices[b]))
            key = (-length, min(a, b), max(a, b))
            if best is None or key < best[0]:
                best = (key, i, j)
        _, i, j = best
        rest = [verts[k] for k in range(d + 1) if k not in (i, j)]
        cells[c] = [verts[i]] + rest + [verts[j]]
    return tags


def build_structured_mesh(dim: int, n: int) -> SimplicialMesh:
    """Uniform simplicial mesh of the unit square/cube with n cells per axis.

    2D: each grid square is split by its lower-left to upper-right
    diagonal.  3D: each grid cube is split into the six Kuhn simplices
    ordered along the main diagonal.  Refinement edges are the longest
    edges (the diagonals).
    """
    if n < 1:
        raise MeshError("n must be >= 1")
    if dim == 2:
        return _structured_2d(n)
    if dim == 3:
        return _structured_3d(n)
    raise MeshError(f"unsupported dimension {dim}")


def _structured_2d(n):
    xs = np.linspace(0.0, 1.0, n + 1)
    xg, yg = np.meshgrid(xs, xs, indexing="ij")
    vertices = np.column_stack([xg.ravel(order="F"), yg.ravel(order="F")])

    def vid(i, j):
        return j * (n + 1) + i

    cells, tags = [], []
    for j in range(n):
        for i in range(n):
            ll, lr = vid(i, j), vid(i + 1, j)
            ul, ur = vid(i, j + 1), vid(i + 1, j + 1)
            # refinement edge (v0, v2) = diagonal ll-ur
            cells.append((ll, lr, ur))
            tags.append(2)
            cells.append((ll, ul, ur))
            tags.append(2)
    return SimplicialMesh(vertices, np.array(cells), np.array(tags))


def _structured_3d(n):
    xs = np.linspace(0.0, 1.0, n + 1)
    vertices = np.array([(x, y, z) for z in xs for y in xs for x in xs])

    def vid(i, j, k):
        return (k * (n + 1) + j) * (n + 1) + i

    steps = {0: (1, 0, 0), 1: (0, 1, 0), 2: (0, 0, 1)}
    cells, tags = [], []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                for perm in sorted(permutations((0, 1, 2))):
                    node = np.array((i, j, k))
                    path = [tuple(node)]
                    for axis in perm:
                        node = node + steps[axis]
                        path.append(tuple(node))
                    # Kuhn simplex along the cube diagonal; refinement
                    # edge (v0, v3) is that diagonal.
                    cells.append(tuple(vid(*p) for p in path))
                    tags.append(3)
    return SimplicialMesh(vertices, np.array(cells), np.array(tags))


# ---------------------------------------------------------------------------
# skeleton


def _face_normal(coords, dim):
    """Unit normal and measure of a (d-1)-simplex given its coordinates."""
    if dim == 2:
        t = coords[1] - coords[0]
        length = float(np.linalg.norm(t))
        normal = np.array([t[1], -t[0]]) / length
        return normal, length
    cr = np.cross(coords[1] - coords[0], coords[2] - coords[0])
    doubled = float(np.linalg.norm(cr))
    return cr / doubled, 0.5 * doubled


def extract_skeleton(mesh: SimplicialMesh):
    """Split the mesh skeleton into oriented interior and boundary faces.

    Raises MeshError when some facet is shared by more than two cells
    (non-conforming input).
    """
    return _build_skeleton(mesh)


def _build_skeleton(mesh):
    d = mesh.dim
    incidence: dict = {}
    for c in range(mesh.n_cells):
        verts = mesh.cells[c]
        for omit in range(d + 1):
            facet = tuple(sorted(int(v) for k, v in enumerate(verts) if k != omit))
            incidence.setdefault(facet, []).append(c)

    interior, boundary = [], []
    for facet, cs in incidence.items():
        if len(cs) > 2:
            raise MeshError(f"non-conforming mesh: facet {facet} shared by {len(cs)} cells")
        coords = mesh.vertices[list(facet)]
        normal, measure = _face_normal(coords, d)
        if len(cs) == 2:
            plus, minus = min(cs), max(cs)
            direction = mesh.centroids[minus] - mesh.centroids[plus]
            if float(normal @ direction) < 0.0:
                normal = -normal
            interior.append(Face(facet, plus, minus, normal, measure))
        else:
            (cell,) = cs
            direction = coords.mean(axis=0) - mesh.centroids[cell]
            if float(normal @ direction) < 0.0:
                normal = -normal
            boundary.append(Face(facet, cell, None, normal, measure))
    return interior, boundary


# ---------------------------------------------------------------------------
# refinement


def _edge_key(a, b):
    return (a, b) if a < b else (b, a)


def bisect_refine(mesh: SimplicialMesh, marked) -> SimplicialMesh:
    """Bisect every marked cell and close the mesh back to conformity.

    Children split their parent exactly; the returned mesh carries an
    ``ancestors`` array pointing back into ``mesh``.  An empty marking
    returns ``mesh`` unchanged.
    """
    marked = sorted(int(c) for c in set(marked))
    if not marked:
        return mesh
    if marked[0] < 0 or marked[-1] >= mesh.n_cells:
        raise MeshError("marked set contains invalid cell indices")

    d = mesh.dim
    verts = [tuple(v) for v in mesh.vertices]
    cells = [tuple(int(v) for v in mesh.cells[c]) for c in range(mesh.n_cells)]
    tags = list(mesh.tags)
    roots = list(range(mesh.n_cells))
    alive = [True] * mesh.n_cells
    # vertex -> set of live cells, for locating the cells around an edge
    vertex_cells: dict = {}
    for c, cell in enumerate(cells):
        for v in cell:
            vertex_cells.setdefault(v, set()).add(c)

    midpoint: dict = {}
    queue = deque(marked)
    splits = 0
    budget = _MAX_CLOSURE_PASSES * max(len(marked), mesh.n_cells)

    def hanging(cell):
        return any(
            _edge_key(a, b) in midpoint for a, b in combinations(cell, 2)
        )

    while queue:
        c = queue.popleft()
        if not alive[c]:
            continue
        cell, tag = cells[c], tags[c]
        edge = _edge_key(cell[0], cell[tag])
        mid = midpoint.get(edge)
        if mid is None:
            mid = len(verts)
            verts.append(tuple(0.5 * (np.asarray(verts[edge[0]]) + np.asarray(verts[edge[1]]))))
            midpoint[edge] = mid
            # the new midpoint hangs on every other live cell containing the edge
            for other in sorted(vertex_cells[edge[0]] & vertex_cells[edge[1]]):
                if other != c and alive[other]:
                    queue.append(other)
        child_tag = tag - 1 if tag > 1 else d
        child_a = cell[:tag] + (mid,) + cell[tag + 1:]
        child_b = cell[1:tag + 1] + (mid,) + cell[tag + 1:]
        alive[c] = False
        for v in cell:
            vertex_cells[v].discard(c)
        for child in (child_a, child_b):
            idx = len(cells)
            cells.append(child)
            tags.append(child_tag)
            roots.append(roots[c])
            alive.append(True)
            for v in child:
                vertex_cells.setdefault(v, set()).add(idx)
            if hanging(child):
                queue.append(idx)
        splits += 1
        if splits > budget:
            raise MeshError("conformity closure did not terminate "
                            "(refinement-edge bookkeeping bug)")

    keep = [c for c in range(len(cells)) if alive[c]]
    new_cells = np.array([cells[c] for c in keep], dtype=np.int64)
    new_tags = np.array([tags[c] for c in keep], dtype=np.int64)
    ancestors = np.array([roots[c] for c in keep], dtype=np.int64)
    refined = SimplicialMesh(
        np.asarray(verts, dtype=float), new_cells, new_tags,
        generation=mesh.generation + 1, ancestors=ancestors,
    )
    if not np.isclose(refined.total_volume(), mesh.total_volume(),
                      rtol=1e-12, atol=0.0):
        raise MeshError("refinement lost volume")
    return refined


# ---------------------------------------------------------------------------
# per-cell geometry


def cell_geometry(mesh: SimplicialMesh, c: int):
    """Diameter (longest edge), volume and outward unit face normals of a cell."""
    if not 0 <= c < mesh.n_cells:
        raise MeshError(f"invalid cell index {c}")
    coords = mesh.cell_coords(c)
    d = mesh.dim
    volume = float(mesh.volumes[c])
    h = float(mesh.diameters[c])
    normals = np.empty((d + 1, d))
    centroid = mesh.centroids[c]
    for omit in range(d + 1):
        face = np.delete(coords, omit, axis=0)
        normal, _ = _face_normal(face, d)
        if float(normal @ (face.mean(axis=0) - centroid)) < 0.0:
            normal = -normal
        normals[omit] = normal
    return h, volume, normals


# ---------------------------------------------------------------------------
# I/O


def dump_mesh(mesh: SimplicialMesh, path):
    """Plain-text dump: 'dim nv nc' header, vertex rows, cell rows."""
    lines = [f"{mesh.dim} {mesh.n_vertices} {mesh.n_cells}"]
    for v in mesh.vertices:
        lines.append(" ".join(f"{x:.17g}" for x in v))
    for cell in mesh.cells:
        lines.append(" ".join(str(int(v)) for v in cell))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
