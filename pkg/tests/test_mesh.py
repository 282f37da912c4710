import itertools

import numpy as np
import pytest

from resmin.mesh import (
    MeshError,
    SimplicialMesh,
    bisect_refine,
    build_structured_mesh,
    cell_geometry,
    dump_mesh,
    extract_skeleton,
)


def reference_triangle():
    return SimplicialMesh(
        np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        np.array([[0, 1, 2]]),
    )


def audit_conformity(mesh):
    """Exhaustive face-incidence audit: every interior face has exactly
    two incident cells, every boundary face one, and boundary faces of
    the unit domain lie on a domain plane."""
    counts = {}
    for c in range(mesh.n_cells):
        verts = mesh.cells[c]
        for omit in range(mesh.dim + 1):
            facet = tuple(sorted(int(v) for k, v in enumerate(verts) if k != omit))
            counts[facet] = counts.get(facet, 0) + 1
    interior = {f.vertices for f in mesh.interior_faces}
    boundary = {f.vertices for f in mesh.boundary_faces}
    for facet, cnt in counts.items():
        assert cnt in (1, 2)
        if cnt == 2:
            assert facet in interior
        else:
            assert facet in boundary
            coords = mesh.vertices[list(facet)]
            on_plane = any(
                np.allclose(coords[:, axis], val, atol=1e-12)
                for axis in range(mesh.dim)
                for val in (0.0, 1.0)
            )
            assert on_plane, f"boundary facet {facet} not on the domain boundary"


# ---------------------------------------------------------------------------
# structured construction


def test_unit_square_n1_counts():
    mesh = build_structured_mesh(2, 1)
    assert mesh.n_cells == 2
    assert len(mesh.interior_faces) == 1
    assert len(mesh.boundary_faces) == 4


def test_unit_square_n2_area():
    mesh = build_structured_mesh(2, 2)
    assert mesh.n_cells == 8
    assert mesh.total_volume() == pytest.approx(1.0, rel=1e-14)


def test_unit_cube_n1_volume():
    mesh = build_structured_mesh(3, 1)
    assert mesh.n_cells == 6
    # independent oracle: sum of signed volumes by direct determinants
    vols = []
    for c in range(mesh.n_cells):
        coords = mesh.cell_coords(c)
        vols.append(abs(np.linalg.det(coords[1:] - coords[0])) / 6.0)
    assert sum(vols) == pytest.approx(1.0, rel=1e-14)
    assert mesh.total_volume() == pytest.approx(1.0, rel=1e-14)


def test_rejects_n0():
    with pytest.raises(MeshError):
        build_structured_mesh(2, 0)


def test_positive_volumes_and_refinement_edge_is_longest():
    for dim, n in ((2, 3), (3, 2)):
        mesh = build_structured_mesh(dim, n)
        assert np.all(mesh.volumes > 0.0)
        for c in range(mesh.n_cells):
            a, b = mesh.refinement_edge(c)
            ref_len = np.linalg.norm(mesh.vertices[a] - mesh.vertices[b])
            assert ref_len == pytest.approx(mesh.diameters[c], rel=1e-14)


# ---------------------------------------------------------------------------
# skeleton


def test_skeleton_n1_diagonal_normal():
    mesh = build_structured_mesh(2, 1)
    (face,) = mesh.interior_faces
    expected = np.array([1.0, -1.0]) / np.sqrt(2.0)
    assert np.allclose(face.normal, expected) or np.allclose(face.normal, -expected)
    assert face.measure == pytest.approx(np.sqrt(2.0), rel=1e-14)


def test_skeleton_n2_counts_by_enumeration():
    mesh = build_structured_mesh(2, 2)
    # oracle: enumerate all cell pairs sharing d vertices
    shared = set()
    for a, b in itertools.combinations(range(mesh.n_cells), 2):
        common = set(mesh.cells[a]) & set(mesh.cells[b])
        if len(common) == 2:
            shared.add(tuple(sorted(common)))
    assert len(mesh.interior_faces) == len(shared) == 8
    assert len(mesh.boundary_faces) == 8


def test_skeleton_single_cell():
    mesh = reference_triangle()
    assert mesh.interior_faces == []
    assert len(mesh.boundary_faces) == 3


def test_skeleton_orientation_rule():
    for mesh in (build_structured_mesh(2, 3), build_structured_mesh(3, 2)):
        for face in mesh.interior_faces:
            assert face.plus_cell < face.minus_cell
            gap = mesh.centroids[face.minus_cell] - mesh.centroids[face.plus_cell]
            assert float(face.normal @ gap) > 0.0
            assert np.linalg.norm(face.normal) == pytest.approx(1.0, abs=1e-14)
        for face in mesh.boundary_faces:
            assert face.minus_cell is None
            mid = mesh.vertices[list(face.vertices)].mean(axis=0)
            assert float(face.normal @ (mid - mesh.centroids[face.plus_cell])) > 0.0


def test_skeleton_detects_nonconforming():
    # three triangles sharing the same edge (0, 1)
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, -1.0]])
    cells = np.array([[0, 1, 2], [0, 1, 3], [0, 1, 4]])
    mesh = SimplicialMesh(vertices, cells, validate=False)
    with pytest.raises(MeshError):
        extract_skeleton(mesh)


# ---------------------------------------------------------------------------
# refinement


def test_bisect_mark_both():
    mesh = build_structured_mesh(2, 1)
    fine = bisect_refine(mesh, {0, 1})
    assert fine.n_cells == 4
    assert fine.generation == 1
    audit_conformity(fine)


def test_bisect_mark_one_closure():
    mesh = build_structured_mesh(2, 1)
    fine = bisect_refine(mesh, {0})
    assert fine.n_cells >= 3
    audit_conformity(fine)


def test_bisect_empty_marking():
    mesh = build_structured_mesh(2, 2)
    assert bisect_refine(mesh, set()) is mesh


def test_children_partition_parent():
    for dim in (2, 3):
        mesh = build_structured_mesh(dim, 2)
        fine = bisect_refine(mesh, {0, 3})
        child_volume = np.zeros(mesh.n_cells)
        np.add.at(child_volume, fine.ancestors, fine.volumes)
        assert np.allclose(child_volume, mesh.volumes, rtol=1e-12)


def test_volume_conservation_cascade():
    rng = np.random.default_rng(7)
    for dim in (2, 3):
        mesh = build_structured_mesh(dim, 2)
        for _ in range(6):
            marked = rng.choice(mesh.n_cells, size=max(1, mesh.n_cells // 5),
                                replace=False)
            mesh = bisect_refine(mesh, marked)
            audit_conformity(mesh)
            assert mesh.total_volume() == pytest.approx(1.0, rel=1e-12)


def test_marked_cells_are_gone():
    mesh = build_structured_mesh(2, 2)
    marked = {1, 4}
    fine = bisect_refine(mesh, marked)
    # every marked cell was bisected at least once: it has >= 2 children
    for c in marked:
        assert np.count_nonzero(fine.ancestors == c) >= 2


def test_invalid_marking_rejected():
    mesh = build_structured_mesh(2, 1)
    with pytest.raises(MeshError):
        bisect_refine(mesh, {5})


def test_shape_regularity_cascade():
    """Inradius/diameter ratio stays above a fixed floor over a ten-level
    cascade of local bisections (finitely many similarity classes)."""
    floors = {2: 0.12, 3: 0.02}
    for dim in (2, 3):
        mesh = build_structured_mesh(dim, 2)
        worst = np.inf
        target = np.full(dim, 0.31)
        for _ in range(10):
            dist = np.linalg.norm(mesh.centroids - target, axis=1)
            marked = np.argsort(dist)[: max(1, mesh.n_cells // 10)]
            mesh = bisect_refine(mesh, marked)
            worst = min(worst, float(np.min(_inradius(mesh) / mesh.diameters)))
        assert worst > floors[dim]


def _inradius(mesh):
    # r = d * volume / surface area, per cell
    areas = np.zeros(mesh.n_cells)
    coords = mesh.vertices[mesh.cells]
    d = mesh.dim
    for omit in range(d + 1):
        face = np.delete(coords, omit, axis=1)
        if d == 2:
            areas += np.linalg.norm(face[:, 1] - face[:, 0], axis=1)
        else:
            cr = np.cross(face[:, 1] - face[:, 0], face[:, 2] - face[:, 0])
            areas += 0.5 * np.linalg.norm(cr, axis=1)
    return d * mesh.volumes / areas


# ---------------------------------------------------------------------------
# per-cell geometry


def test_cell_geometry_reference_triangle():
    mesh = reference_triangle()
    h, vol, normals = cell_geometry(mesh, 0)
    assert h == pytest.approx(np.sqrt(2.0), rel=1e-14)
    assert vol == pytest.approx(0.5, rel=1e-14)
    assert normals.shape == (3, 2)
    for n in normals:
        assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-14)


def test_cell_geometry_scaling():
    mesh = SimplicialMesh(
        2.0 * np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        np.array([[0, 1, 2]]),
    )
    h, vol, _ = cell_geometry(mesh, 0)
    assert h == pytest.approx(2.0 * np.sqrt(2.0), rel=1e-14)
    assert vol == pytest.approx(4.0 * 0.5, rel=1e-14)


def test_cell_geometry_kuhn_tet():
    mesh = SimplicialMesh(
        np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 1.0]]),
        np.array([[0, 1, 2, 3]]),
    )
    _, vol, _ = cell_geometry(mesh, 0)
    assert vol == pytest.approx(1.0 / 6.0, rel=1e-14)


def test_cell_geometry_bad_index():
    with pytest.raises(MeshError):
        cell_geometry(reference_triangle(), 3)


def test_degenerate_cell_reported():
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(MeshError):
        SimplicialMesh(vertices, np.array([[0, 1, 2]]))


# ---------------------------------------------------------------------------
# dump


def test_dump_format(tmp_path):
    mesh = build_structured_mesh(2, 1)
    path = tmp_path / "mesh.txt"
    dump_mesh(mesh, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "2 4 2"
    assert len(lines) == 1 + mesh.n_vertices + mesh.n_cells
    coords = np.array([[float(x) for x in ln.split()] for ln in lines[1:5]])
    assert np.allclose(coords, mesh.vertices)
