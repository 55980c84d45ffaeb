import numpy as np
import pytest

from twostepfem import assembly as asm
from twostepfem.mesh import _face_table
from twostepfem.scenario import (
    PRESETS,
    ScenarioError,
    academic_scenario,
    coil_scenario,
    parse_scenario,
)

MINIMAL = """
mesh:
  extent: [1.0, 1.0, 1.0]
  divisions: [2, 2, 2]
materials:
  0: {sigma: 1.0, epsilon_r: 1.0}
boundary:
  scalar: {zlo: ground, zhi: drive}
source:
  amplitude: 1.0
  frequency: 50.0
time:
  dt: 0.001
  steps: 4
"""


class TestParsing:
    def test_minimal_document_defaults(self):
        sc = parse_scenario(MINIMAL)
        assert sc.stepper.beta == 0.25
        assert sc.stepper.gamma == 0.5
        assert sc.stepper.stabilized is True
        assert sc.thermal.enabled is False
        assert sc.dt == 0.001 and sc.n_steps == 4
        ops = sc.build_operators()
        assert ops.free_nodes.size > 0

    def test_missing_mesh_named(self):
        doc = MINIMAL.replace("mesh:", "notmesh:")
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(doc)
        assert any("mesh" in e for e in exc.value.errors)

    def test_unknown_keys_rejected(self):
        doc = MINIMAL + "\nstepper:\n  beta: 0.25\n  typo_key: 1\n"
        with pytest.raises(ScenarioError, match="typo_key"):
            parse_scenario(doc)

    def test_all_errors_collected(self):
        doc = """
mesh:
  extent: [1.0, 1.0]
  divisions: [2, 2, 0]
materials:
  0: {sigma: -1.0}
boundary:
  scalar: {nowhere: drive}
source:
  frequency: -5.0
time:
  dt: -1.0
"""
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(doc)
        text = " ".join(exc.value.errors)
        for frag in ("extent", "divisions", "sigma", "nowhere", "frequency", "dt"):
            assert frag in text
        assert len(exc.value.errors) >= 5

    def test_epsilon_both_forms_rejected(self):
        doc = MINIMAL.replace(
            "{sigma: 1.0, epsilon_r: 1.0}",
            "{sigma: 1.0, epsilon_r: 1.0, epsilon: 8.8e-12}",
        )
        with pytest.raises(ScenarioError, match="epsilon"):
            parse_scenario(doc)

    def test_not_yaml(self):
        with pytest.raises(ScenarioError, match="YAML"):
            parse_scenario("a: [unclosed")

    def test_custom_patch(self):
        doc = """
mesh:
  extent: [1.0, 1.0, 1.0]
  divisions: [2, 2, 2]
materials:
  0: {sigma: 1.0, epsilon_r: 1.0}
boundary:
  patches:
    spot: {lo: [0.0, 0.0, 0.0], hi: [0.0, 0.5, 0.5]}
  scalar: {spot: drive, zhi: ground}
source:
  amplitude: 2.0
  frequency: 10.0
time:
  dt: 0.01
  steps: 2
"""
        sc = parse_scenario(doc)
        mesh = sc.build_mesh()
        assert "spot" in mesh.boundary_faces
        assert len(mesh.boundary_faces["spot"]) == 2  # quarter face, two tris

    def test_preset_document(self):
        sc = parse_scenario("preset: academic-bars")
        assert sc.name == "academic-bars"
        with pytest.raises(ScenarioError, match="no other"):
            parse_scenario("preset: academic-bars\nname: x")
        with pytest.raises(ScenarioError, match="unknown preset"):
            parse_scenario("preset: nope")

    def test_overrides(self):
        sc = parse_scenario(MINIMAL).with_overrides(dt=0.5, n_steps=9, stabilized=False)
        assert sc.dt == 0.5 and sc.n_steps == 9
        assert sc.stepper.stabilized is False


class TestAcademicPreset:
    def test_paper_parameters(self):
        sc = academic_scenario()
        assert sc.amplitude == 1.0
        assert sc.frequency == 150.0
        assert sc.dt == pytest.approx(0.333e-3, rel=2e-3)  # 20 points per period
        assert sc.n_steps == 40  # two periods
        assert sc.extent == (0.22, 0.22, 0.22)

    def test_exact_geometry_at_11(self):
        sc = academic_scenario()
        mesh = sc.build_mesh()
        # bar column: one 2 cm lattice cell wide, conductor along full z
        assert int(np.sum(sc.materials.cells(mesh, "sigma") > 0)) == 66
        centers = mesh.node_coords[mesh.cells].mean(axis=1)
        bar = (
            (centers[:, 0] > 0.10) & (centers[:, 0] < 0.12)
            & (centers[:, 1] > 0.10) & (centers[:, 1] < 0.12)
        )
        sig = sc.materials.cells(mesh, "sigma")
        assert np.all(sig[bar] > 0.0)
        assert np.all(sig[~bar] == 0.0)
        mid = bar & (centers[:, 2] > 0.10) & (centers[:, 2] < 0.12)
        assert np.all(sig[mid] == 1.0)   # center bar
        assert np.all(sig[bar & ~mid] == 5.0)  # outer bars

    def test_materials_per_legend(self):
        sc = academic_scenario()
        eps0 = asm.VACUUM_PERMITTIVITY
        assert sc.materials.epsilon[0] == pytest.approx(5 * eps0)
        assert sc.materials.epsilon[1] == pytest.approx(eps0)
        assert sc.materials.sigma[2] == 5.0 and sc.materials.sigma[3] == 1.0

    def test_boundary_conditions(self):
        sc = academic_scenario()
        assert sc.bc.scalar_patches == {"zlo": "ground", "zhi": "drive"}
        assert set(sc.bc.vector_patches) == {"xlo", "xhi", "ylo", "yhi", "zlo", "zhi"}

    @pytest.mark.parametrize("nd", [2, 3, 4, 5, 6])
    def test_coarse_meshes_build(self, nd):
        sc = academic_scenario(divisions=(nd,) * 3)
        mesh = sc.build_mesh()
        sig = sc.materials.cells(mesh, "sigma")
        assert np.any(sig > 0) and np.any(sig == 0)
        # conduction path present along z in the bar column
        ops = sc.build_operators(mesh)
        assert ops.free_nodes.size > 0


class TestCoilPreset:
    def test_dimensions(self):
        sc = coil_scenario()
        assert sc.extent == (0.045, 0.051, 0.009)
        assert sc.materials.sigma[1] == 6e7
        assert sc.bc.vector_patches == ()  # natural magnetic BCs

    def test_thermal_variant(self):
        sc = PRESETS["planar-coil-thermal"]()
        assert sc.amplitude == 50.0
        assert sc.dt == pytest.approx(0.134e-3)
        assert sc.n_steps == 50
        assert sc.thermal.enabled

    def test_spiral_connected_and_grounded(self):
        sc = coil_scenario()
        mesh = sc.build_mesh()
        sig = sc.materials.cells(mesh, "sigma")
        hot = np.flatnonzero(sig > 0)
        # face-adjacency union-find over the conducting cells
        faces = _face_table(mesh.cells).reshape(mesh.n_cells, 4, 3)
        owner = {}
        parent = {int(c): int(c) for c in hot}

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        hotset = set(int(c) for c in hot)
        for c in hot:
            for f in faces[c]:
                key = tuple(int(v) for v in f)
                other = owner.get(key)
                if other is None:
                    owner[key] = int(c)
                elif other in hotset:
                    parent[find(int(c))] = find(other)
        roots = {find(int(c)) for c in hot}
        assert len(roots) == 1  # one connected spiral

        # both electrodes sit on conductor nodes
        hot_nodes = set(np.unique(mesh.cells[hot]).tolist())
        for patch in ("feed", "return"):
            patch_nodes = set(np.unique(mesh.boundary_faces[patch]).tolist())
            assert patch_nodes <= hot_nodes

    def test_turn_separation(self):
        # neighboring turns stay one air cell apart except at the joints:
        # conductor cells per xy column are never adjacent across the gap rows
        sc = coil_scenario()
        mesh = sc.build_mesh()
        sig = sc.materials.cells(mesh, "sigma")
        centers = mesh.node_coords[mesh.cells].mean(axis=1)
        h = 0.003
        mid = (centers[:, 2] > h) & (centers[:, 2] < 2 * h)
        cols = set()
        for c in np.flatnonzero((sig > 0) & mid):
            cols.add((int(centers[c, 0] // h), int(centers[c, 1] // h)))
        # gap cells between outer and middle turn on the y = 2 row
        for ix in range(2, 11):
            assert (ix, 2) not in cols
