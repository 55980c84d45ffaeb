import math

import numpy as np
import pytest

from twostepfem import assembly as asm
from twostepfem import freqdomain as fd
from twostepfem import gauge, stabilization as stab
from twostepfem import timestepping as ts
from twostepfem.linsolve import NumericallySingularError
from twostepfem.mesh import (
    BoundaryCondition,
    RegionBox,
    RegionSpec,
    build_box_mesh,
    topological_gradient,
)
from .test_stabilization import conductor_box

EPS0 = asm.VACUUM_PERMITTIVITY
NU0 = 1.0 / asm.VACUUM_PERMEABILITY


def _drive_ops(sigma_by_region, eps_by_region, regions=None, divisions=(2, 2, 2),
               extent=(1.0, 1.0, 1.0)):
    m = build_box_mesh(extent, divisions, regions=regions)
    mats = asm.MaterialSpec(
        sigma=sigma_by_region,
        epsilon=eps_by_region,
        nu={r: NU0 for r in eps_by_region},
    )
    bc = BoundaryCondition(scalar_patches={"zlo": "ground", "zhi": "drive"})
    return asm.AssembledOperators(m, mats, bc)


class TestEqsFreq:
    def test_dc_conduction_is_real(self):
        # real unit drive phasor + real matrix at w = 0: solution stays real
        ops = _drive_ops({0: 3.0}, {0: EPS0})
        src = asm.SourceSpec(waveforms={"drive": asm.ConstantWaveform(1.0)})
        u = fd.solve_eqs_freq(ops, src, omega=0.0)
        assert np.abs(u.imag).max() <= 1e-12
        drive = ops.dofs.node_waveform["drive"]
        assert np.allclose(u[drive], 1.0, atol=1e-15)
        # DC conduction through a uniform conductor: linear ramp in z
        z = ops.mesh.node_coords[:, 2]
        assert np.abs(u.real - z).max() < 1e-12

    def test_zero_drive(self):
        ops = _drive_ops({0: 3.0}, {0: EPS0})
        src = asm.SourceSpec(waveforms={"drive": asm.SineWaveform(0.0, 50.0)})
        u = fd.solve_eqs_freq(ops, src, omega=2.0 * math.pi * 50.0)
        assert np.abs(u).max() == 0.0

    def test_series_stack_voltage_divider(self):
        # two slabs in series along z: interface phasor from the admittances
        regions = RegionSpec(boxes=[RegionBox(1, (0, 0, 0), (1.0, 1.0, 1.0))])
        ops = _drive_ops(
            {0: 1.0, 1: 2.0},
            {0: 2e-3, 1: 1e-3},
            regions=regions,
            divisions=(1, 1, 2),
            extent=(1.0, 1.0, 2.0),
        )
        omega = 100.0
        src = asm.SourceSpec(waveforms={"drive": asm.SineWaveform(1.0, 50.0)})
        u = fd.solve_eqs_freq(ops, src, omega)
        kap1 = 2.0 + 1j * omega * 1e-3  # lower slab (region 1)
        kap2 = 1.0 + 1j * omega * 2e-3
        expected_mid = -1j * kap2 / (kap1 + kap2)
        z = ops.mesh.node_coords[:, 2]
        mid = np.abs(z - 1.0) < 1e-12
        assert np.abs(u[mid] - expected_mid).max() < 1e-12

    def test_singular_at_dc_with_air_reported(self):
        # an air slab with interior nodes: K_sigma alone is singular
        regions = RegionSpec(boxes=[RegionBox(1, (0, 0, 0), (1.0, 1.0, 0.25))])
        ops = _drive_ops(
            {0: 0.0, 1: 1.0}, {0: EPS0, 1: EPS0},
            regions=regions, divisions=(2, 2, 4),
        )
        src = asm.SourceSpec(waveforms={"drive": asm.SineWaveform(1.0, 50.0)})
        with pytest.raises(NumericallySingularError):
            fd.solve_eqs_freq(ops, src, omega=0.0)

    def test_conjugation_symmetry(self):
        # real drive phasor: real operators map w -> -w to the conjugate
        ops = _drive_ops({0: 2.0}, {0: 1e-3})
        src = asm.SourceSpec(waveforms={"drive": asm.ConstantWaveform(1.0)})
        up = fd.solve_eqs_freq(ops, src, omega=80.0)
        um = fd.solve_eqs_freq(ops, src, omega=-80.0)
        assert np.abs(um - np.conj(up)).max() < 1e-12 * np.abs(up).max()


@pytest.fixture(scope="module")
def setup():
    ops, split = conductor_box()
    config = stab.StabilizationConfig.from_operators(ops)
    cons = stab.assemble_constraint_matrices(ops, split, config)
    return ops, split, cons


class TestMqsFreq:
    def test_zero_sources(self, setup):
        ops, split, cons = setup
        u0 = np.zeros(ops.mesh.n_nodes, dtype=complex)
        a = fd.solve_mqs_freq_stabilized(ops, split, cons, 2.0 * math.pi * 150, u0)
        assert np.abs(a).max() == 0.0

    def test_static_matches_treegauge_curl(self, setup):
        ops, split, cons = setup
        rng = np.random.default_rng(4)
        k_ff = ops.ee(ops.k_nu)
        a_star = rng.standard_normal(ops.free_edges.size)
        js_free = k_ff @ a_star  # compatible by construction
        js_full = np.zeros(ops.mesh.n_edges)
        js_full[ops.dofs.free_edges] = js_free

        a_fd = fd.solve_mqs_freq_stabilized(
            ops, split, cons, 0.0, np.zeros(ops.mesh.n_nodes, dtype=complex),
            js_hat=js_full,
        )
        gt_f = topological_gradient(ops.mesh)[ops.dofs.free_edges][
            :, :
        ]
        a_ms = gauge.solve_magnetostatic_treegauge(k_ff, js_free, split)
        c_fd = asm.curl_per_cell(ops.mesh, ops.embed_edges(a_fd.real))
        c_ms = asm.curl_per_cell(ops.mesh, ops.embed_edges(a_ms))
        scale = max(np.abs(c_ms).max(), 1.0)
        assert np.abs(c_fd - c_ms).max() <= 1e-8 * scale
        assert np.abs(a_fd.imag).max() <= 1e-12 * max(np.abs(a_fd.real).max(), 1.0)

    def test_conjugation_symmetry(self, setup):
        ops, split, cons = setup
        src = asm.SourceSpec(waveforms={"drive": asm.ConstantWaveform(1.0)})
        omega = 2.0 * math.pi * 150.0
        up = fd.solve_eqs_freq(ops, src, omega)
        um = fd.solve_eqs_freq(ops, src, -omega)
        ap = fd.solve_mqs_freq_stabilized(ops, split, cons, omega, up)
        am = fd.solve_mqs_freq_stabilized(ops, split, cons, -omega, um)
        assert np.abs(am - np.conj(ap)).max() < 1e-9 * np.abs(ap).max()

    def test_static_consistency_with_time_domain_matrix(self, setup):
        # w = 0 frequency system == 1/dt = 0 stabilized update matrix
        ops, split, cons = setup
        params = ts.NewmarkParams(dt=math.inf)
        a_td = stab.assemble_stabilized_update_matrix(ops, split, cons, params)
        k = ops.ee(ops.k_nu)
        a_perm, _, nr = gauge.permute_system(k.tocsr(), None, split)
        import scipy.sparse as sp

        a_fd = sp.vstack(
            [a_perm[:nr], cons.d_tilde[:, split.perm].tocsr()], format="csr"
        )
        diff = np.abs((a_td - a_fd).toarray()).max()
        assert diff <= 1e-13 * np.abs(a_td.toarray()).max()


class TestReconstruction:
    def test_phase_convention(self):
        f = 150.0
        w = 2.0 * math.pi * f
        phasor = np.array([-1j])  # unit-amplitude sine
        assert fd.reconstruct_time(phasor, w, 0.0)[0] == pytest.approx(0.0, abs=1e-15)
        assert fd.reconstruct_time(phasor, w, 1.0 / (4 * f))[0] == pytest.approx(1.0)

    def test_electrode_voltage_round_trip(self):
        ops = _drive_ops({0: 2.0}, {0: 1e-3})
        f = 150.0
        src = asm.SourceSpec(waveforms={"drive": asm.SineWaveform(1.0, f)})
        w = 2.0 * math.pi * f
        u_hat = fd.solve_eqs_freq(ops, src, w)
        drive = ops.dofs.node_waveform["drive"]
        for t in np.linspace(0.0, 2.0 / f, 29):
            v = fd.reconstruct_time(u_hat[drive], w, t)
            assert np.abs(v - math.sin(w * t)).max() < 1e-12


class TestErrorMetric:
    def _mass(self, n):
        import scipy.sparse as sp

        return sp.eye(n, format="csr")

    def test_identical_fields(self):
        rng = np.random.default_rng(0)
        e = rng.standard_normal((5, 7))
        err = fd.relative_l2_error(e, e, self._mass(7))
        assert np.abs(err).max() == 0.0

    def test_zero_reference_rejected(self):
        e = np.ones((3, 4))
        with pytest.raises(ValueError, match="reference"):
            fd.relative_l2_error(e, np.zeros_like(e), self._mass(4))

    def test_doubled_field_bounded_by_one(self):
        rng = np.random.default_rng(1)
        ref = rng.standard_normal((6, 5))
        err = fd.relative_l2_error(2.0 * ref, ref, self._mass(5))
        den = (ref * ref).sum(axis=1)
        expected = np.sqrt(den / den.max())
        assert np.allclose(err, expected, rtol=1e-12)
        assert err.max() <= 1.0 + 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            fd.relative_l2_error(np.ones((2, 3)), np.ones((3, 3)), self._mass(3))
