"""Frequency-domain two-step solver used as a cross-validation reference.

Phasor convention throughout: x(t) = Re(x_hat e^{i w t}), so the sinusoidal
drive amplitude u sin(2 pi f t) enters as the phasor -i u.  The complex
material kappa = sigma + i w eps never needs to be formed explicitly; the
assembled real matrices combine as K_sigma + i w K_eps and friends.

The vector-potential solve reuses the divergence-constraint stabilization:
the tree-indexed rows of K_nu + i w M_sigma - w^2 M_eps are replaced by
Dt + i w Dh, the frequency image of the time-integrated constraint under
d/dt -> i w.  At w = 0 this matrix coincides with the static limit of the
stabilized time-domain update matrix.
"""

import numpy as np
import scipy.sparse as sp

from .gauge import permute_system
from .linsolve import check_residual, factor, finalize


class FrequencyDomainError(RuntimeError):
    pass


def complex_kappa(ops, omega):
    """kappa = sigma + i w eps per cell."""
    return ops.sigma_cells + 1j * omega * ops.eps_cells


def solve_eqs_freq(ops, sources, omega, charge_rate_phasor=None):
    """Electroquasistatic phasor solve with the electrode-drive lift.

    Returns the full complex nodal vector; the Dirichlet entries carry the
    drive phasors.  `charge_rate_phasor` is the phasor of the impressed
    charge rate integrals (defaults to zero).
    """
    fn = ops.dofs.free_nodes
    dn = ops.dofs.dirichlet_nodes
    k = ops.nn(ops.k_sigma) + 1j * omega * ops.nn(ops.k_eps)
    u_d = ops.dirichlet_phasors(sources)
    rhs = np.zeros(fn.size, dtype=complex)
    if charge_rate_phasor is not None:
        rhs = rhs + np.asarray(charge_rate_phasor)[fn]
    if dn.size:
        lift = ops.node_lift(ops.k_sigma) + 1j * omega * ops.node_lift(ops.k_eps)
        rhs = rhs - lift @ u_d[dn]
    fac = factor(k.tocsc())
    u_f = fac.solve(rhs)
    check_residual(k, u_f, rhs)
    u = u_d.astype(complex)
    u[fn] = u_f
    return u


def solve_mqs_freq_stabilized(ops, split, constraints, omega, u_hat, js_hat=None):
    """Stabilized vector-potential phasor solve.

    The cotree rows keep the plain complex system
        (K_nu + i w M_sigma - w^2 M_eps) a = j_s - (G_sigma + i w G_eps) u,
    the tree rows enforce (Dt + i w Dh) a = 0.  Returns the full free-edge
    phasor vector in ascending edge order.
    """
    fe = ops.dofs.free_edges
    j = -(ops.g_sigma @ u_hat) - 1j * omega * (ops.g_eps @ u_hat)
    if js_hat is not None:
        j = j + np.asarray(js_hat)
    j = j[fe]

    k = (
        ops.ee(ops.k_nu)
        + 1j * omega * ops.ee(ops.m_sigma)
        - omega**2 * ops.ee(ops.m_eps)
    )
    a_perm, j_perm, nr = permute_system(k.tocsr(), j, split)
    d_rows = (constraints.d_tilde + 1j * omega * constraints.d_hat)[:, split.perm]
    system = finalize(sp.vstack([a_perm[:nr], d_rows.tocsr()], format="csr"))
    rhs = np.concatenate([j_perm[:nr], np.zeros(split.n_tree, dtype=complex)])

    fac = factor(system.tocsc())
    x_perm = fac.solve(rhs)
    a = x_perm[split.inverse_perm()]

    # R rows of the original complex equation must hold
    res = np.linalg.norm((k @ a - j)[split.perm][:nr])
    ref = max(np.linalg.norm(j), 1e-30)
    if res > 1e-9 * ref:
        raise FrequencyDomainError(
            f"cotree residual {res:.3e} above 1e-9 * ||j|| = {1e-9 * ref:.3e}"
        )
    return a


def reconstruct_time(phasor, omega, t):
    """Single-frequency inverse transform: Re(x e^{i w t})."""
    return np.real(np.asarray(phasor) * np.exp(1j * omega * t))


def electric_field_edges(g_top, u_full, a_dot_full):
    """Edge DOFs of E = -grad(phi) - dA/dt from full nodal/edge vectors."""
    return -(g_top @ u_full) - a_dot_full


def relative_l2_error(e_td, e_ref, mass, times=None):
    """Relative L2 error series between two edge-field time series.

    Both inputs are (n_times, n_edges) arrays sampled on the same grid; the
    denominator is the maximum reference energy over the whole grid.  A
    reference that vanishes everywhere is rejected.
    """
    e_td = np.asarray(e_td, dtype=float)
    e_ref = np.asarray(e_ref, dtype=float)
    if e_td.shape != e_ref.shape:
        raise ValueError("field series shapes differ")
    diff = e_td - e_ref
    num = np.einsum("te,te->t", diff, (mass @ diff.T).T)
    den = np.einsum("te,te->t", e_ref, (mass @ e_ref.T).T)
    den_max = den.max()
    if den_max <= 0.0:
        raise ValueError("reference field vanishes on the whole grid")
    return np.sqrt(np.maximum(num, 0.0) / den_max)
