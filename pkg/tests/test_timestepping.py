import math

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from twostepfem import assembly as asm
from twostepfem import timestepping as ts
from twostepfem.linsolve import factor
from twostepfem.mesh import BoundaryCondition, build_box_mesh


def _scalar(v):
    return sp.csr_matrix(np.array([[float(v)]]))


def _state1(a=0.0, adot=0.0, addot=0.0):
    return ts.TransientState(
        u=np.zeros(1),
        u_prev=np.zeros(1),
        a=np.array([a]),
        a_dot=np.array([adot]),
        a_ddot=np.array([addot]),
    )


class TestNewmarkParams:
    def test_defaults(self):
        p = ts.NewmarkParams(dt=2.0)
        assert p.beta == 0.25 and p.gamma == 0.5

    def test_validation(self):
        with pytest.raises(ValueError):
            ts.NewmarkParams(beta=0.0, dt=1.0)
        with pytest.raises(ValueError):
            ts.NewmarkParams(gamma=1.5, dt=1.0)
        with pytest.raises(ValueError):
            ts.NewmarkParams(dt=-1.0)

    def test_static_limit_coefficients(self):
        p = ts.NewmarkParams(dt=math.inf)
        assert p.coeff_msigma == 0.0
        assert p.coeff_meps == 0.0


class TestTrapezoidal:
    def test_scalar_surrogate(self):
        # k_sigma = k_eps = 1, dt = 1, no source: (2 + 1) u1 = (2 - 1) u0
        u1 = ts.trapezoidal_step(
            _scalar(1.0), _scalar(1.0), np.array([1.0]), 1.0, np.zeros(1), np.zeros(1)
        )
        assert np.isclose(u1[0], 1.0 / 3.0, rtol=1e-14)

    def test_sigma_zero_keeps_state(self, box222):
        mats = asm.MaterialSpec(sigma={0: 0.0}, epsilon={0: 2.0}, nu={0: 1.0})
        bc = BoundaryCondition(scalar_patches={"zlo": "ground"})
        ops = asm.AssembledOperators(box222, mats, bc)
        src = asm.SourceSpec(waveforms={})
        rng = np.random.default_rng(0)
        u = ops.embed_nodes(rng.standard_normal(ops.free_nodes.size))
        u1 = ts.eqs_step(ops, src, u, 0.0, 1e-3)
        assert np.abs(u1 - u).max() < 1e-12 * np.abs(u).max()

    def test_rc_decay_convergence(self):
        # u' = -u, u(0) = 1: halving dt cuts the end-time error ~4x
        t_end = 1.0
        errors = []
        for n in (16, 32, 64):
            dt = t_end / n
            u = np.array([1.0])
            for _ in range(n):
                u = ts.trapezoidal_step(
                    _scalar(1.0), _scalar(1.0), u, dt, np.zeros(1), np.zeros(1)
                )
            errors.append(abs(u[0] - math.exp(-t_end)))
        r1 = errors[0] / errors[1]
        r2 = errors[1] / errors[2]
        assert 3.6 < r1 < 4.4
        assert 3.6 < r2 < 4.4


class TestUpdateMatrix:
    def test_coefficients_dt1(self, box222):
        mats = asm.MaterialSpec(sigma={0: 2.0}, epsilon={0: 3.0}, nu={0: 1.5})
        ops = asm.AssembledOperators(box222, mats, BoundaryCondition())
        p = ts.NewmarkParams(dt=1.0)
        a = ts.assemble_update_matrix(ops, p)
        ref = (
            ops.ee(ops.k_nu) + 2.0 * ops.ee(ops.m_sigma) + 4.0 * ops.ee(ops.m_eps)
        )
        assert np.abs((a - ref).toarray()).max() < 1e-13 * np.abs(ref.toarray()).max()

    def test_scalar_surrogate_value(self):
        # K=1, Msig=1, Meps=1, dt=0.5: 1 + 4 + 16 = 21
        p = ts.NewmarkParams(dt=0.5)
        val = 1.0 + p.coeff_msigma * 1.0 + p.coeff_meps * 1.0
        assert val == 21.0

    def test_static_limit_singular(self, box222):
        mats = asm.MaterialSpec(sigma={0: 1.0}, epsilon={0: 1.0}, nu={0: 1.0})
        ops = asm.AssembledOperators(box222, mats, BoundaryCondition())
        a = ts.assemble_update_matrix(ops, ts.NewmarkParams(dt=math.inf)).toarray()
        sv = np.linalg.svd(a, compute_uv=False)
        assert sv[-1] <= 1e-12 * sv[0]  # gradient kernel survives


class TestJConsistent:
    def _ops(self, box222):
        mats = asm.MaterialSpec(sigma={0: 2.0}, epsilon={0: 1.0}, nu={0: 1.0})
        bc = BoundaryCondition(scalar_patches={"zlo": "ground", "zhi": "drive"})
        return asm.AssembledOperators(box222, mats, bc)

    def test_constant_u(self, box222):
        ops = self._ops(box222)
        rng = np.random.default_rng(1)
        u = rng.standard_normal(box222.n_nodes)
        js = rng.standard_normal(box222.n_edges)
        j = ts.compute_j_np1(ops, u, u, js, 1e-3)
        ref = (js - ops.g_sigma @ u)[ops.free_edges]
        assert np.abs(j - ref).max() < 1e-13 * max(np.abs(ref).max(), 1.0)

    def test_central_difference_exact_for_linear(self, box222):
        # u(t) = t * w: (u_{n+1} - u_{n-1}) / (2 dt) equals w exactly
        ops = self._ops(box222)
        rng = np.random.default_rng(2)
        w = rng.standard_normal(box222.n_nodes)
        dt = 0.25
        tn = 1.0
        u_np1 = (tn + dt) * w
        u_nm1 = (tn - dt) * w
        j = ts.compute_j_np1(ops, u_np1, u_nm1, np.zeros(box222.n_edges), dt)
        ref = (-(ops.g_sigma @ u_np1) - ops.g_eps @ w)[ops.free_edges]
        assert np.abs(j - ref).max() < 1e-12 * np.abs(ref).max()


class TestNewmark:
    def test_zero_stays_zero(self):
        p = ts.NewmarkParams(dt=0.1)
        a_up = _scalar(1.0 + p.coeff_msigma + p.coeff_meps)
        st = ts.newmark_step(
            _state1(), np.zeros(1), p, factor(a_up), _scalar(1.0), _scalar(1.0)
        )
        assert st.a[0] == 0.0 and st.a_dot[0] == 0.0 and st.a_ddot[0] == 0.0
        assert st.step == 1

    def test_constant_solution_exact(self):
        # K a = j constant in time: the state must not move
        k, a0 = 3.0, 2.0
        p = ts.NewmarkParams(dt=0.5)
        a_up = _scalar(k + p.coeff_msigma * 1.0 + p.coeff_meps * 1.0)
        st = _state1(a=a0)
        j = np.array([k * a0])
        fac = factor(a_up)
        for _ in range(5):
            st = ts.newmark_step(st, j, p, fac, _scalar(1.0), _scalar(1.0))
        assert abs(st.a[0] - a0) < 1e-12
        assert abs(st.a_dot[0]) < 1e-12

    def test_energy_conservation_undamped(self):
        # (a_dot^2 + omega^2 a^2)/2 is preserved to roundoff per step
        omega = 3.0
        p = ts.NewmarkParams(dt=0.05)
        a_up = _scalar(omega**2 + p.coeff_meps)
        fac = factor(a_up)
        st = _state1(a=1.0, adot=0.0, addot=-(omega**2))
        e0 = 0.5 * (st.a_dot[0] ** 2 + omega**2 * st.a[0] ** 2)
        emin = emax = e0
        for _ in range(10_000):
            st = ts.newmark_step(st, np.zeros(1), p, fac, _scalar(0.0), _scalar(1.0))
            e = 0.5 * (st.a_dot[0] ** 2 + omega**2 * st.a[0] ** 2)
            emin, emax = min(emin, e), max(emax, e)
        assert (emax - emin) / e0 < 1e-10

    def test_damped_second_order_convergence(self):
        # oscillator a'' + c a' + k a = 0 against a matrix-exponential oracle
        c, k = 1.0, 4.0
        t_end = 2.0
        sys = np.array([[0.0, 1.0], [-k, -c]])

        def exact(t):
            return scipy.linalg.expm(sys * t) @ np.array([1.0, 0.0])

        errors = []
        for n in (32, 64, 128, 256):
            dt = t_end / n
            p = ts.NewmarkParams(dt=dt)
            a_up = _scalar(k + p.coeff_msigma * c + p.coeff_meps)
            fac = factor(a_up)
            st = _state1(a=1.0, adot=0.0, addot=-k)
            for _ in range(n):
                st = ts.newmark_step(st, np.zeros(1), p, fac, _scalar(c), _scalar(1.0))
            errors.append(abs(st.a[0] - exact(t_end)[0]))
        slopes = [
            math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)
        ]
        assert all(1.9 < s < 2.1 for s in slopes)

    def test_kinematic_identity_random(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            beta = rng.uniform(0.2, 0.5)
            gamma = rng.uniform(0.3, 0.9)
            dt = 10.0 ** rng.uniform(-3, 1)
            p = ts.NewmarkParams(beta=beta, gamma=gamma, dt=dt)
            st = _state1(*rng.standard_normal(3))
            a_np1 = rng.standard_normal(1)
            a_dot, a_ddot = ts.newmark_kinematics(a_np1, st, p)
            ref = (
                (gamma / (beta * dt)) * (a_np1 - st.a)
                + (1.0 - gamma / beta) * st.a_dot
                + dt * (1.0 - gamma / (2.0 * beta)) * st.a_ddot
            )
            scale = max(abs(ref[0]), 1.0)
            assert abs(a_dot[0] - ref[0]) < 1e-12 * scale

    def test_history_weights_match_rhs(self):
        # the sigma-weighted history in the rhs uses exactly these weights
        p = ts.NewmarkParams(dt=0.3)
        st = _state1(1.0, -2.0, 0.5)
        wa, wv, wacc = ts.newmark_history_weights(p)
        rhs = ts.newmark_rhs(_scalar(1.0), _scalar(0.0), st, np.zeros(1), p)
        assert np.isclose(
            rhs[0], wa * st.a[0] + wv * st.a_dot[0] + wacc * st.a_ddot[0], rtol=1e-14
        )


class TestInitialAcceleration:
    def test_zero_start(self, box222):
        mats = asm.MaterialSpec(sigma={0: 1.0}, epsilon={0: 1.0}, nu={0: 1.0})
        ops = asm.AssembledOperators(box222, mats, BoundaryCondition())
        n = ops.free_edges.size
        a0 = ts.initial_acceleration(ops, np.zeros(n), np.zeros(n), np.zeros(n))
        assert np.all(a0 == 0.0)

    def test_consistent_start(self, box222):
        mats = asm.MaterialSpec(sigma={0: 1.0}, epsilon={0: 1.0}, nu={0: 1.0})
        ops = asm.AssembledOperators(box222, mats, BoundaryCondition())
        rng = np.random.default_rng(3)
        n = ops.free_edges.size
        a, adot = rng.standard_normal(n), rng.standard_normal(n)
        j = rng.standard_normal(n)
        addot = ts.initial_acceleration(ops, a, adot, j)
        res = ops.ee(ops.m_eps) @ addot - (
            j - ops.ee(ops.k_nu) @ a - ops.ee(ops.m_sigma) @ adot
        )
        assert np.abs(res).max() < 1e-9 * np.abs(j).max()
