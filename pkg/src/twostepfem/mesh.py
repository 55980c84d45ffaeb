"""Structured tetrahedral box meshes with entity tables and region/boundary tags.

A box is divided into a regular lattice and every lattice cell is split into
six tetrahedra (Kuhn subdivision, all sharing the main diagonal), which keeps
faces between neighboring lattice cells conforming.  Edges carry a global
orientation from the lower to the higher node index, so incidence signs are
reproducible.  The mesh is immutable after construction and safe to share
across threads.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

# Local edges of a tetrahedron as pairs of local vertex slots.
LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

# Axis orderings of the Kuhn subdivision.  Each permutation (a, b, c) yields
# the tet (corner, corner+e_a, corner+e_a+e_b, main diagonal corner); odd
# permutations get their middle vertices swapped for positive volume.
_KUHN_PERMS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))
_PERM_PARITY = (1, -1, -1, 1, 1, -1)

PATCH_NAMES = ("xlo", "xhi", "ylo", "yhi", "zlo", "zhi")


class MeshError(ValueError):
    """Invalid mesh construction input."""


@dataclass(frozen=True)
class RegionBox:
    """Axis-aligned box assigning a region id to the cells it contains."""

    region: int
    lo: tuple
    hi: tuple


@dataclass(frozen=True)
class RegionSpec:
    """Region layout: later boxes win; uncovered cells get region 0."""

    boxes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))


@dataclass(frozen=True)
class BoundaryCondition:
    """Dirichlet patch assignment; everything else is homogeneous Neumann.

    scalar_patches maps a boundary patch name to a waveform id ("ground" is
    the built-in zero waveform).  vector_patches lists patches where the
    tangential vector potential is constrained to zero.
    """

    scalar_patches: dict = field(default_factory=dict)
    vector_patches: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "vector_patches", tuple(self.vector_patches))


@dataclass(frozen=True)
class Mesh:
    """Tetrahedral box mesh with entity tables.

    node_coords : (n_nodes, 3) float, meters
    edges       : (n_edges, 2) int, node pairs with edges[:, 0] < edges[:, 1]
    cells       : (n_cells, 4) int, positively oriented tetrahedra
    cell_edges  : (n_cells, 6) int, global edge id per LOCAL_EDGES slot
    cell_edge_signs : (n_cells, 6) int, +1 where the local slot direction
                      matches the global low->high orientation
    cell_region : (n_cells,) int region tags
    boundary_faces : patch name -> (m, 3) sorted node triples
    """

    node_coords: np.ndarray
    edges: np.ndarray
    cells: np.ndarray
    cell_edges: np.ndarray
    cell_edge_signs: np.ndarray
    cell_region: np.ndarray
    boundary_faces: dict
    extent: tuple
    divisions: tuple

    @property
    def n_nodes(self):
        return self.node_coords.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    def cell_volumes(self):
        """Signed tet volumes; positive for a valid mesh."""
        x = self.node_coords[self.cells]
        d = x[:, 1:, :] - x[:, :1, :]
        return np.linalg.det(d) / 6.0


def _node_id(ix, iy, iz, nx, ny):
    return ix + (nx + 1) * (iy + (ny + 1) * iz)


def build_box_mesh(extent, divisions, regions=None):
    """Mesh the box [0, extent] with a Kuhn-subdivided lattice.

    Parameters
    ----------
    extent : three positive side lengths in meters.
    divisions : three positive lattice cell counts.
    regions : optional RegionSpec; box faces must lie on lattice planes.

    Returns
    -------
    Mesh with boundary patches named xlo/xhi/ylo/yhi/zlo/zhi.
    """
    extent = tuple(float(v) for v in extent)
    divisions = tuple(int(v) for v in divisions)
    if len(extent) != 3 or len(divisions) != 3:
        raise MeshError("extent and divisions must have three entries")
    if any(v <= 0 for v in extent):
        raise MeshError(f"extent must be positive, got {extent}")
    if any(n < 1 for n in divisions):
        raise MeshError(f"divisions must be >= 1, got {divisions}")

    nx, ny, nz = divisions
    axes = [np.linspace(0.0, extent[k], divisions[k] + 1) for k in range(3)]
    zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    node_coords = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    # Lattice cell corners, one row per (ix, iy, iz) in x-fastest order.
    ix, iy, iz = np.meshgrid(
        np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
    )
    ix = ix.ravel(order="F")
    iy = iy.ravel(order="F")
    iz = iz.ravel(order="F")
    # corner[dx, dy, dz] for the 8 corners of every lattice cell
    corner = {}
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                corner[(dx, dy, dz)] = _node_id(ix + dx, iy + dy, iz + dz, nx, ny)

    cells = np.empty((len(ix) * 6, 4), dtype=np.int64)
    for t, perm in enumerate(_KUHN_PERMS):
        offs = [(0, 0, 0)]
        cur = [0, 0, 0]
        for axis in perm:
            cur = list(cur)
            cur[axis] = 1
            offs.append(tuple(cur))
        verts = [corner[o] for o in offs]
        if _PERM_PARITY[t] < 0:
            verts[1], verts[2] = verts[2], verts[1]
        cells[t::6] = np.column_stack(verts)

    vols = _tet_volumes(node_coords, cells)
    assert np.all(vols > 0.0), "Kuhn subdivision produced a flipped tet"

    edges, cell_edges, cell_edge_signs = _edge_tables(cells)
    cell_region = _assign_regions(node_coords, cells, extent, divisions, regions)
    boundary_faces = _boundary_patches(node_coords, cells, extent)

    mesh = Mesh(
        node_coords=node_coords,
        edges=edges,
        cells=cells,
        cell_edges=cell_edges,
        cell_edge_signs=cell_edge_signs,
        cell_region=cell_region,
        boundary_faces=boundary_faces,
        extent=extent,
        divisions=divisions,
    )
    for arr in (node_coords, edges, cells, cell_edges, cell_edge_signs, cell_region):
        arr.setflags(write=False)
    return mesh


def _tet_volumes(coords, cells):
    x = coords[cells]
    d = x[:, 1:, :] - x[:, :1, :]
    return np.linalg.det(d) / 6.0


def _edge_tables(cells):
    n_cells = cells.shape[0]
    pairs = np.empty((n_cells, 6, 2), dtype=np.int64)
    for s, (a, b) in enumerate(LOCAL_EDGES):
        pairs[:, s, 0] = cells[:, a]
        pairs[:, s, 1] = cells[:, b]
    signs = np.where(pairs[:, :, 0] < pairs[:, :, 1], 1, -1).astype(np.int8)
    lo = pairs.min(axis=2)
    hi = pairs.max(axis=2)
    flat = np.column_stack([lo.ravel(), hi.ravel()])
    edges, inverse = np.unique(flat, axis=0, return_inverse=True)
    cell_edges = inverse.reshape(n_cells, 6)
    return edges, cell_edges, signs


def _assign_regions(coords, cells, extent, divisions, regions):
    cell_region = np.zeros(cells.shape[0], dtype=np.int64)
    if regions is None:
        return cell_region
    centroids = coords[cells].mean(axis=1)
    h = [extent[k] / divisions[k] for k in range(3)]
    for box in regions.boxes:
        lo = np.asarray(box.lo, dtype=float)
        hi = np.asarray(box.hi, dtype=float)
        if np.any(lo >= hi):
            raise MeshError(f"region box {box.region} has empty extent {box.lo}..{box.hi}")
        for k in range(3):
            if lo[k] < -1e-12 or hi[k] > extent[k] * (1 + 1e-12):
                raise MeshError(f"region box {box.region} exceeds mesh extent on axis {k}")
            for val in (lo[k], hi[k]):
                snap = round(val / h[k]) * h[k]
                if abs(val - snap) > 1e-9 * max(h[k], 1.0):
                    raise MeshError(
                        f"region box {box.region} face at {val} on axis {k} "
                        f"is not on a lattice plane (spacing {h[k]})"
                    )
        inside = np.all((centroids >= lo) & (centroids <= hi), axis=1)
        cell_region[inside] = box.region
    return cell_region


def _face_table(cells):
    """All sorted node triples with multiplicity (4 per tet)."""
    n_cells = cells.shape[0]
    combos = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
    faces = np.empty((n_cells * 4, 3), dtype=np.int64)
    for i, c in enumerate(combos):
        faces[i::4] = cells[:, c]
    faces.sort(axis=1)
    return faces


def _boundary_patches(coords, cells, extent):
    faces = _face_table(cells)
    uniq, counts = np.unique(faces, axis=0, return_counts=True)
    bnd = uniq[counts == 1]
    patches = {}
    planes = [
        ("xlo", 0, 0.0), ("xhi", 0, extent[0]),
        ("ylo", 1, 0.0), ("yhi", 1, extent[1]),
        ("zlo", 2, 0.0), ("zhi", 2, extent[2]),
    ]
    assigned = np.zeros(len(bnd), dtype=bool)
    for name, axis, value in planes:
        tol = 1e-9 * max(extent[axis], 1.0)
        on = np.abs(coords[bnd, axis] - value).max(axis=1) <= tol
        patches[name] = bnd[on]
        assigned |= on
    assert assigned.all(), "boundary face off every box plane"
    return patches


def topological_gradient(mesh):
    """Signed edge-node incidence: row of edge (i -> j) is -1 at i, +1 at j."""
    ne = mesh.n_edges
    rows = np.repeat(np.arange(ne), 2)
    cols = mesh.edges.ravel()
    vals = np.tile(np.array([-1.0, 1.0]), ne)
    return sp.csr_matrix((vals, (rows, cols)), shape=(ne, mesh.n_nodes))


@dataclass(frozen=True)
class DofClassification:
    """Free/constrained entity sets in ascending entity order."""

    free_nodes: np.ndarray
    dirichlet_nodes: np.ndarray
    node_waveform: dict          # waveform id -> node ids
    free_edges: np.ndarray
    constrained_edges: np.ndarray


def classify_dofs(mesh, bc):
    """Split nodes and edges into free unknowns and Dirichlet-constrained sets.

    Scalar Dirichlet constrains every node of the patch faces.  Vector
    Dirichlet constrains every edge lying in a patch face.  Orderings are
    ascending entity index, so the classification is deterministic.
    """
    for name in list(bc.scalar_patches) + list(bc.vector_patches):
        if name not in mesh.boundary_faces:
            raise MeshError(f"unknown boundary patch {name!r}")

    node_waveform = {}
    claimed = {}
    for name, wave in bc.scalar_patches.items():
        nodes = np.unique(mesh.boundary_faces[name])
        for n in nodes:
            if claimed.get(n, wave) != wave:
                raise MeshError(
                    f"node {n} lies on scalar patches with different waveforms"
                )
            claimed[n] = wave
        node_waveform.setdefault(wave, []).append(nodes)
    node_waveform = {
        w: np.unique(np.concatenate(parts)) for w, parts in node_waveform.items()
    }

    dirichlet_nodes = (
        np.unique(np.concatenate(list(node_waveform.values())))
        if node_waveform
        else np.empty(0, dtype=np.int64)
    )
    free_nodes = np.setdiff1d(np.arange(mesh.n_nodes), dirichlet_nodes)

    edge_lookup = {tuple(e): i for i, e in enumerate(mesh.edges)}
    constrained = set()
    for name in bc.vector_patches:
        for tri in mesh.boundary_faces[name]:
            a, b, c = int(tri[0]), int(tri[1]), int(tri[2])
            for pair in ((a, b), (a, c), (b, c)):
                constrained.add(edge_lookup[pair])
    constrained_edges = np.array(sorted(constrained), dtype=np.int64)
    free_edges = np.setdiff1d(np.arange(mesh.n_edges), constrained_edges)

    if free_nodes.size == 0:
        raise MeshError("no free scalar nodes left after Dirichlet elimination")
    if free_edges.size == 0:
        raise MeshError("no free edges left after Dirichlet elimination")
    return DofClassification(
        free_nodes=free_nodes,
        dirichlet_nodes=dirichlet_nodes,
        node_waveform=node_waveform,
        free_edges=free_edges,
        constrained_edges=constrained_edges,
    )


def define_boundary_patch(mesh, name, lo, hi):
    """New mesh with an extra named patch: boundary faces inside [lo, hi].

    The box is closed; a face belongs to the patch when all three of its
    nodes lie inside.  Useful for electrodes covering part of a box side.
    """
    from dataclasses import replace

    if name in mesh.boundary_faces:
        raise MeshError(f"patch {name!r} already exists")
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    tol = 1e-9 * max(max(mesh.extent), 1.0)
    all_faces = np.unique(
        np.concatenate([f for f in mesh.boundary_faces.values() if len(f)]), axis=0
    )
    pts = mesh.node_coords[all_faces]          # (m, 3, 3)
    inside = np.all((pts >= lo - tol) & (pts <= hi + tol), axis=(1, 2))
    faces = all_faces[inside]
    if len(faces) == 0:
        raise MeshError(f"patch {name!r} selects no boundary faces")
    patches = dict(mesh.boundary_faces)
    patches[name] = faces
    return replace(mesh, boundary_faces=patches)


def dump_entity_tables(mesh, directory):
    """Debug CSV dump of the node/edge/cell tables."""
    import os

    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "nodes.csv"), "w", encoding="utf-8") as f:
        f.write("node,x,y,z\n")
        for i, p in enumerate(mesh.node_coords):
            f.write(f"{i},{p[0]:.17g},{p[1]:.17g},{p[2]:.17g}\n")
    with open(os.path.join(directory, "edges.csv"), "w", encoding="utf-8") as f:
        f.write("edge,node_lo,node_hi\n")
        for i, e in enumerate(mesh.edges):
            f.write(f"{i},{e[0]},{e[1]}\n")
    with open(os.path.join(directory, "cells.csv"), "w", encoding="utf-8") as f:
        f.write("cell,n0,n1,n2,n3,region\n")
        for i, (c, r) in enumerate(zip(mesh.cells, mesh.cell_region)):
            f.write(f"{i},{c[0]},{c[1]},{c[2]},{c[3]},{r}\n")
