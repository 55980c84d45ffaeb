import numpy as np
import pytest

from twostepfem import mesh as msh


def make_single_tet(coords=None):
    """A hand-built one-tet Mesh (positively oriented)."""
    if coords is None:
        coords = np.array(
            [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        )
    coords = np.asarray(coords, dtype=float)
    cells = np.array([[0, 1, 2, 3]])
    edges, cell_edges, signs = msh._edge_tables(cells)
    return msh.Mesh(
        node_coords=coords,
        edges=edges,
        cells=cells,
        cell_edges=cell_edges,
        cell_edge_signs=signs,
        cell_region=np.zeros(1, dtype=np.int64),
        boundary_faces={},
        extent=(1.0, 1.0, 1.0),
        divisions=(1, 1, 1),
    )


@pytest.fixture
def single_tet():
    return make_single_tet()


@pytest.fixture
def unit_cube():
    return msh.build_box_mesh((1.0, 1.0, 1.0), (1, 1, 1))


@pytest.fixture
def box222():
    return msh.build_box_mesh((1.0, 1.0, 1.0), (2, 2, 2))
