"""Polynomial spaces on simplicial meshes: broken and H1-conforming
Lagrange elements of degree 1 or 2, simplex quadrature, and tabulated
per-cell / per-face data shared by assembly and error evaluation.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .mesh import SimplicialMesh

__all__ = [
    "SpaceError",
    "QuadratureRule",
    "FunctionSpace",
    "quadrature_for",
    "build_space",
    "eval_basis",
    "embedding_matrix",
    "interpolate",
]

LOCAL_EDGES = {
    2: ((0, 1), (0, 2), (1, 2)),
    3: ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)),
}

REFERENCE_MEASURE = {1: 1.0, 2: 0.5, 3: 1.0 / 6.0}

MAX_QUAD_DEGREE = 10


class SpaceError(Exception):
    """Unsupported space or quadrature request."""


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Positive-weight rule on the reference simplex.

    ``points`` holds barycentric coordinates, shape (nq, dim+1);
    ``weights`` sum to the reference simplex measure.
    """

    dim: int
    degree: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def cartesian(self) -> np.ndarray:
        """Reference coordinates, shape (nq, dim)."""
        return self.points[:, 1:]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def _interval01(nodes, weights):
    return 0.5 * (nodes + 1.0), 0.5 * weights


def quadrature_for(degree_needed: int, dim: int) -> QuadratureRule:
    """Conical-product Gauss rule exact to ``degree_needed`` on the
    reference simplex of dimension ``dim``.

    Built from Gauss-Jacobi factors, so all weights are positive at any
    degree (unlike e.g. Grundmann-Moller rules).
    """
    if not 1 <= dim <= 3:
        raise SpaceError(f"unsupported dimension {dim}")
    if not 0 <= degree_needed <= MAX_QUAD_DEGREE:
        raise SpaceError(f"quadrature degree {degree_needed} out of range")
    n = max(1, (degree_needed + 2) // 2)  # 2n-1 >= degree
    gl_x, gl_w = _interval01(*roots_legendre(n))
    if dim == 1:
        cart = gl_x[:, None]
        weights = gl_w
    elif dim == 2:
        # x = xi, y = eta (1 - xi); Jacobian (1 - xi) absorbed in GJ(1,0)
        j1_x, j1_w = _interval01(*roots_jacobi(n, 1.0, 0.0))
        j1_w = j1_w / 2.0  # account for mapping the weight (1-t) to [0,1]
        xi = np.repeat(j1_x, n)
        eta = np.tile(gl_x, n)
        cart = np.column_stack([xi, eta * (1.0 - xi)])
        weights = np.repeat(j1_w, n) * np.tile(gl_w, n)
    else:
        j2_x, j2_w = _interval01(*roots_jacobi(n, 2.0, 0.0))
        j2_w = j2_w / 4.0
        j1_x, j1_w = _interval01(*roots_jacobi(n, 1.0, 0.0))
        j1_w = j1_w / 2.0
        xi = np.repeat(j2_x, n * n)
        eta = np.tile(np.repeat(j1_x, n), n)
        zeta = np.tile(gl_x, n * n)
        x = xi
        y = eta * (1.0 - xi)
        z = zeta * (1.0 - xi) * (1.0 - eta)
        cart = np.column_stack([x, y, z])
        weights = (
            np.repeat(j2_w, n * n) * np.tile(np.repeat(j1_w, n), n) * np.tile(gl_w, n * n)
        )
    bary = np.column_stack([1.0 - cart.sum(axis=1), cart])
    return QuadratureRule(dim, degree_needed, bary, weights)


# ---------------------------------------------------------------------------
# reference basis


def n_local_dofs(dim: int, degree: int) -> int:
    if degree == 1:
        return dim + 1
    if degree == 2:
        return dim + 1 + len(LOCAL_EDGES[dim])
    raise SpaceError(f"unsupported degree {degree}")


def reference_basis(dim: int, degree: int, points: np.ndarray):
    """Values and reference gradients of the local Lagrange basis.

    ``points`` are cartesian reference coordinates, shape (nq, dim).
    Returns (values (nq, nloc), grads (nq, nloc, dim)).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    nq = points.shape[0]
    lam = np.column_stack([1.0 - points.sum(axis=1), points])  # (nq, dim+1)
    grad_lam = np.vstack([-np.ones(dim), np.eye(dim)])         # (dim+1, dim)
    if degree == 1:
        values = lam
        grads = np.broadcast_to(grad_lam, (nq, dim + 1, dim)).copy()
        return values, grads
    if degree != 2:
        raise SpaceError(f"unsupported degree {degree}")
    nloc = n_local_dofs(dim, 2)
    values = np.empty((nq, nloc))
    grads = np.empty((nq, nloc, dim))
    for i in range(dim + 1):
        values[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i, :] = (4.0 * lam[:, i] - 1.0)[:, None] * grad_lam[i]
    for k, (i, j) in enumerate(LOCAL_EDGES[dim]):
        values[:, dim + 1 + k] = 4.0 * lam[:, i] * lam[:, j]
        grads[:, dim + 1 + k, :] = 4.0 * (
            lam[:, i][:, None] * grad_lam[j] + lam[:, j][:, None] * grad_lam[i]
        )
    return values, grads


def local_node_barycentric(dim: int, degree: int) -> np.ndarray:
    """Barycentric coordinates of the local interpolation nodes."""
    verts = np.eye(dim + 1)
    if degree == 1:
        return verts
    mids = np.array([0.5 * (verts[i] + verts[j]) for i, j in LOCAL_EDGES[dim]])
    return np.vstack([verts, mids])


# ---------------------------------------------------------------------------
# function spaces


class FunctionSpace:
    """DOF layout of a broken or conforming P^p space on a mesh.

    ``dof_map`` has shape (n_cells, n_local); row c lists the global
    DOFs of cell c in local node order (vertices first, then edges for
    p = 2).
    """

    def __init__(self, mesh: SimplicialMesh, kind: str, degree: int):
        if kind not in ("broken", "conforming"):
            raise SpaceError(f"unknown space kind {kind!r}")
        if degree not in (1, 2):
            raise SpaceError(f"unsupported degree {degree}")
        self.mesh = mesh
        self.kind = kind
        self.degree = degree
        self.n_local = n_local_dofs(mesh.dim, degree)
        if kind == "broken":
            self.n_dofs = mesh.n_cells * self.n_local
            self.dof_map = np.arange(self.n_dofs, dtype=np.int64).reshape(
                mesh.n_cells, self.n_local
            )
        else:
            self.dof_map, self.n_dofs = _conforming_dof_map(mesh, degree)
        self._node_coords = None

    @property
    def node_coords(self) -> np.ndarray:
        """Coordinates of the global interpolation nodes, (n_dofs, d)."""
        if self._node_coords is None:
            mesh = self.mesh
            bary = local_node_barycentric(mesh.dim, self.degree)
            coords = np.einsum("li,cid->cld", bary, mesh.vertices[mesh.cells])
            out = np.empty((self.n_dofs, mesh.dim))
            out[self.dof_map.ravel()] = coords.reshape(-1, mesh.dim)
            self._node_coords = out
        return self._node_coords


def _conforming_dof_map(mesh, degree):
    nv = mesh.n_vertices
    dof_map = np.empty((mesh.n_cells, n_local_dofs(mesh.dim, degree)), dtype=np.int64)
    dof_map[:, : mesh.dim + 1] = mesh.cells
    if degree == 1:
        return dof_map, nv
    edge_ids: dict = {}
    for c in range(mesh.n_cells):
        cell = mesh.cells[c]
        for k, (i, j) in enumerate(LOCAL_EDGES[mesh.dim]):
            key = (min(cell[i], cell[j]), max(cell[i], cell[j]))
            rank = edge_ids.setdefault(key, len(edge_ids))
            dof_map[c, mesh.dim + 1 + k] = nv + rank
    return dof_map, nv + len(edge_ids)


def build_space(mesh: SimplicialMesh, kind: str, degree: int) -> FunctionSpace:
    return FunctionSpace(mesh, kind, degree)


def eval_basis(space: FunctionSpace, cell: int, points: np.ndarray):
    """Local basis values and physical gradients at reference points."""
    values, grads_ref = reference_basis(space.mesh.dim, space.degree, points)
    batch = cell_batch(space.mesh, space.degree, degree_needed=None)
    grads = np.einsum("qld,de->qle", grads_ref, batch.inv_jac_t[cell].T)
    # inv_jac_t[cell] is J^{-T}; grad_phys = grad_ref @ J^{-1}
    return values, grads


def embedding_matrix(conforming: FunctionSpace, broken: FunctionSpace):
    """Sparse E with broken_coeffs = E @ conforming_coeffs."""
    from scipy.sparse import coo_matrix

    _check_compatible(conforming, broken)
    rows = broken.dof_map.ravel()
    cols = conforming.dof_map.ravel()
    data = np.ones(rows.size)
    return coo_matrix(
        (data, (rows, cols)), shape=(broken.n_dofs, conforming.n_dofs)
    ).tocsr()


def _check_compatible(conforming, broken):
    if conforming.kind != "conforming" or broken.kind != "broken":
        raise SpaceError("expected a (conforming, broken) space pair")
    if conforming.mesh is not broken.mesh or conforming.degree != broken.degree:
        raise SpaceError("spaces live on different meshes or degrees")


def interpolate(space: FunctionSpace, fn) -> np.ndarray:
    """Nodal interpolation: coefficients are point values of ``fn``."""
    return np.asarray(fn(space.node_coords), dtype=float)


# ---------------------------------------------------------------------------
# tabulated batches (cached on the mesh, which is immutable)


class CellBatch:
    """Geometry and basis tables at one volume quadrature rule."""

    def __init__(self, mesh, degree, rule):
        self.rule = rule
        coords = mesh.vertices[mesh.cells]                  # (nc, d+1, d)
        jac = (coords[:, 1:, :] - coords[:, :1, :]).transpose(0, 2, 1)
        self.jac = jac                                      # (nc, d, d)
        self.absdet = np.abs(np.linalg.det(jac))
        inv_jac = np.linalg.inv(jac)
        self.inv_jac = inv_jac                              # (nc, d, d)
        self.inv_jac_t = inv_jac.transpose(0, 2, 1)
        self.phi, grads_ref = reference_basis(mesh.dim, degree, rule.cartesian)
        # physical gradients: (nc, nq, nloc, d)
        self.grad_phys = np.einsum("qld,ced->cqle", grads_ref, inv_jac)
        self.points = np.einsum("qi,cid->cqd", rule.points, coords)
        self.wdet = rule.weights[None, :] * self.absdet[:, None]


class FaceBatch:
    """Face quadrature tables with one-sided basis traces.

    For boundary batches only the plus side is populated.
    """

    def __init__(self, mesh, degree, rule, faces, cell_batch):
        self.rule = rule
        self.faces = faces
        nf = len(faces)
        d = mesh.dim
        nq = rule.n_points
        self.normals = np.array([f.normal for f in faces]).reshape(nf, d)
        self.measures = np.array([f.measure for f in faces])
        self.scale = self.measures / REFERENCE_MEASURE[d - 1]
        self.plus_cells = np.array([f.plus_cell for f in faces], dtype=np.int64)
        face_coords = mesh.vertices[np.array([f.vertices for f in faces], dtype=np.int64)]
        self.points = np.einsum("qi,fid->fqd", rule.points, face_coords)  # (nf, nq, d)
        self.phi_plus = _trace_basis(mesh, degree, cell_batch, self.plus_cells, self.points)
        if faces and faces[0].minus_cell is not None:
            self.minus_cells = np.array([f.minus_cell for f in faces], dtype=np.int64)
            self.phi_minus = _trace_basis(
                mesh, degree, cell_batch, self.minus_cells, self.points
            )
        else:
            self.minus_cells = None
            self.phi_minus = None
        self.w = rule.weights[None, :] * self.scale[:, None]  # (nf, nq)
        self.nq = nq


def _trace_basis(mesh, degree, cbatch, cells, points):
    """Basis values of the given cells at physical points on their faces."""
    v0 = mesh.vertices[mesh.cells[cells, 0]]          # (nf, d)
    ref = np.einsum("fde,fqe->fqd", cbatch.inv_jac[cells], points - v0[:, None, :])
    nf, nq, d = ref.shape
    values, _ = reference_basis(mesh.dim, degree, ref.reshape(-1, d))
    return values.reshape(nf, nq, -1)


def cell_batch(mesh, degree, degree_needed) -> CellBatch:
    """Cached CellBatch; ``degree_needed=None`` means geometry only
    (a minimal degree-1 rule is used for the tables)."""
    qdeg = 1 if degree_needed is None else degree_needed
    key = ("cell", degree, qdeg)
    if key not in mesh._cache:
        rule = quadrature_for(qdeg, mesh.dim)
        mesh._cache[key] = CellBatch(mesh, degree, rule)
    return mesh._cache[key]


def face_batch(mesh, degree, degree_needed, which) -> FaceBatch:
    key = ("face", degree, degree_needed, which)
    if key not in mesh._cache:
        rule = quadrature_for(degree_needed, mesh.dim - 1)
        faces = mesh.interior_faces if which == "interior" else mesh.boundary_faces
        cbatch = cell_batch(mesh, degree, degree_needed=None)
        mesh._cache[key] = FaceBatch(mesh, degree, rule, faces, cbatch)
    return mesh._cache[key]


# ---------------------------------------------------------------------------
# discrete function evaluation on batches


def local_coeffs(space, coeffs):
    return np.asarray(coeffs)[space.dof_map]  # (nc, nloc)


def eval_on_cells(space, coeffs, batch):
    """Point values on the volume quadrature grid, (nc, nq)."""
    return np.einsum("cl,ql->cq", local_coeffs(space, coeffs), batch.phi)


def eval_grad_on_cells(space, coeffs, batch):
    """Gradients on the volume quadrature grid, (nc, nq, d)."""
    return np.einsum("cl,cqld->cqd", local_coeffs(space, coeffs), batch.grad_phys)


def eval_on_faces(space, coeffs, fbatch, side):
    """One-sided point values on a face quadrature grid, (nf, nq)."""
    if side == "plus":
        cells, phi = fbatch.plus_cells, fbatch.phi_plus
    else:
        cells, phi = fbatch.minus_cells, fbatch.phi_minus
    lc = np.asarray(coeffs)[space.dof_map[cells]]  # (nf, nloc)
    return np.einsum("fl,fql->fq", lc, phi)
