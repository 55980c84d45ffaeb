"""Time integration of the two semi-discrete systems.

The first-order electroquasistatic system

    K_sigma u + K_eps du/dt = s(t)

is advanced with the trapezoidal rule,

    (2/dt K_eps + K_sigma) u_{n+1} = (2/dt K_eps - K_sigma) u_n
                                     + s(t_{n+1}) + s(t_n),

where s carries the impressed charge rate and the Dirichlet lift of the
electrode drive evaluated from the waveform and its analytic derivative.
The second-order system

    K_nu a + M_sigma da/dt + M_eps d2a/dt2 = j(t)

is advanced with the Newmark-beta scheme (defaults beta = 1/4, gamma = 1/2,
the average-acceleration variant).  One linear solve against a prefactored
update matrix

    K_nu + gamma/(dt beta) M_sigma + 1/(dt^2 beta) M_eps

produces a_{n+1}; the two derivative updates are explicit.  Passing
dt = inf assembles the static-limit matrix (the mass coefficients vanish),
which is singular for the unstabilized formulation.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import assembly
from .linsolve import check_residual, factor


@dataclass(frozen=True)
class NewmarkParams:
    beta: float = 0.25
    gamma: float = 0.5
    dt: float = 1.0

    def __post_init__(self):
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive (inf selects the static limit)")

    @property
    def coeff_msigma(self):
        return self.gamma / (self.dt * self.beta)

    @property
    def coeff_meps(self):
        return 1.0 / (self.dt * self.dt * self.beta) if math.isfinite(self.dt) else 0.0


@dataclass
class TransientState:
    """State carried between steps: scalar DOFs u and vector DOFs a.

    u, u_prev are full nodal vectors (Dirichlet values embedded); a and its
    derivatives live on the free edges.
    """

    u: np.ndarray
    u_prev: np.ndarray
    a: np.ndarray
    a_dot: np.ndarray
    a_ddot: np.ndarray
    step: int = 0
    time: float = 0.0

    @classmethod
    def zeros(cls, n_nodes, n_free_edges):
        z = np.zeros
        return cls(
            u=z(n_nodes), u_prev=z(n_nodes),
            a=z(n_free_edges), a_dot=z(n_free_edges), a_ddot=z(n_free_edges),
        )


def eqs_system_matrix(ops, dt):
    """(2/dt) K_eps + K_sigma on the free nodes; SPD for finite dt."""
    return (2.0 / dt) * ops.nn(ops.k_eps) + ops.nn(ops.k_sigma)


def trapezoidal_step(k_sigma_ff, k_eps_ff, u_free, dt, s_now, s_next, fac=None):
    """Core trapezoidal update; sources evaluated at both time levels."""
    lhs = (2.0 / dt) * k_eps_ff + k_sigma_ff
    if fac is None:
        fac = factor(lhs)
    rhs = ((2.0 / dt) * k_eps_ff - k_sigma_ff) @ u_free + s_now + s_next
    u_next = fac.solve(rhs)
    check_residual(lhs, u_next, rhs)
    return u_next


def eqs_step(ops, sources, u_full, t, dt, fac=None):
    """One trapezoidal step of the scalar-potential system.

    Returns the full nodal vector at t + dt with the Dirichlet values of
    the new time embedded.  A prefactored system matrix can be passed to
    amortize the factorization over the sweep.
    """
    fn = ops.dofs.free_nodes
    s_now, _ = assembly.assemble_sources(ops, sources, t)
    s_next, _ = assembly.assemble_sources(ops, sources, t + dt)
    u_free = trapezoidal_step(
        ops.nn(ops.k_sigma), ops.nn(ops.k_eps), u_full[fn], dt, s_now, s_next, fac
    )
    return ops.embed_nodes(u_free, ops.dirichlet_values(sources, t + dt))


def assemble_update_matrix(ops, params):
    """Newmark update matrix on the free edges (dt = inf gives K_nu)."""
    a = ops.ee(ops.k_nu).copy()
    c1 = params.coeff_msigma
    c2 = params.coeff_meps
    if c1 != 0.0:
        a = a + c1 * ops.ee(ops.m_sigma)
    if c2 != 0.0:
        a = a + c2 * ops.ee(ops.m_eps)
    return a.tocsr()


def compute_j_np1(ops, u_np1, u_nm1, js_full, dt):
    """Right-hand-side current for the step ending at t_{n+1}.

    j = j_s - G_eps (u_{n+1} - u_{n-1}) / (2 dt) - G_sigma u_{n+1},
    using full nodal vectors; the central difference stands in for du/dt.
    Returned on the free edges.
    """
    j = js_full - ops.g_sigma @ u_np1
    if math.isfinite(dt):
        j = j - ops.g_eps @ ((u_np1 - u_nm1) / (2.0 * dt))
    return j[ops.dofs.free_edges]


def newmark_rhs(m_sigma_ff, m_eps_ff, state, j_np1, params):
    """Effective load of the Newmark solve (history terms plus j_{n+1})."""
    b, g, dt = params.beta, params.gamma, params.dt
    eps_part = (
        state.a / (dt * dt * b)
        + state.a_dot / (dt * b)
        + state.a_ddot * (1.0 - 2.0 * b) / (2.0 * b)
    )
    sig_part = (
        state.a * (g / (b * dt))
        + state.a_dot * (g / b - 1.0)
        + state.a_ddot * (g / (2.0 * b) - 1.0) * dt
    )
    return j_np1 + m_eps_ff @ eps_part + m_sigma_ff @ sig_part


def newmark_history_weights(params):
    """Coefficients (w_a, w_adot, w_addot) of the conductive history term.

    The same combination of the old state multiplies M_sigma in the plain
    right-hand side and the constraint-row matrix in the stabilized one.
    """
    b, g, dt = params.beta, params.gamma, params.dt
    return g / (b * dt), g / b - 1.0, (g / (2.0 * b) - 1.0) * dt


def newmark_kinematics(a_np1, state, params):
    """Acceleration and velocity updates after the linear solve."""
    b, g, dt = params.beta, params.gamma, params.dt
    a_ddot = (
        (a_np1 - state.a - dt * state.a_dot) / (dt * dt * b)
        - state.a_ddot * (1.0 - 2.0 * b) / (2.0 * b)
    )
    a_dot = state.a_dot + (1.0 - g) * dt * state.a_ddot + g * dt * a_ddot
    return a_dot, a_ddot


def newmark_step(state, j_np1, params, fac, m_sigma_ff, m_eps_ff):
    """One Newmark step against a prefactored update matrix."""
    rhs = newmark_rhs(m_sigma_ff, m_eps_ff, state, j_np1, params)
    a_np1 = fac.solve(rhs)
    a_dot, a_ddot = newmark_kinematics(a_np1, state, params)
    return replace(
        state,
        a=a_np1,
        a_dot=a_dot,
        a_ddot=a_ddot,
        step=state.step + 1,
        time=state.time + params.dt,
    )


def initial_acceleration(ops, a0, a0_dot, j0):
    """Consistent start: M_eps a'' = j - K_nu a - M_sigma a' at t = 0."""
    rhs = j0 - ops.ee(ops.k_nu) @ a0 - ops.ee(ops.m_sigma) @ a0_dot
    if not np.any(rhs):
        return np.zeros_like(a0)
    return factor(ops.ee(ops.m_eps)).solve(rhs)
