"""Divergence-constraint stabilization of the vector-potential update.

The curl-curl operator is singular on discrete gradient fields, so the
update matrix degenerates as dt grows.  The cure: pick one constraint row
per tree edge (through the tree-edge/child-node bijection of the gauge
split) and overwrite the tree-indexed rows of the update matrix with the
time-integrated charge-conservation constraint

    Dt a + Dh (da/dt) = 0,

assembled in integrated-by-parts weak form.  With lowest-order edge
elements the in-cell divergence of the basis vanishes identically, so the
strong weighted divergence degenerates; the weak pairing against nodal
test functions (rows of the transposed gradient coupling, sign flipped)
carries the same content under the homogeneous boundary conditions.

Row classes follow the material support of the test node: nodes touching a
conducting cell pair the sigma-weighted row in Dt with the eps-weighted
row in Dh; purely nonconducting nodes get the eps-weighted row scaled by

    lambda = (max sigma + sigma_art) / max eps,

in Dt and a zero row in Dh.  Inserting the Newmark velocity update into
the constraint turns it into the replaced tree rows of the system matrix
plus a history load, so the discrete constraint holds at every accepted
step by construction.

The stabilized matrix is unsymmetric; solve it with a general sparse LU.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .gauge import permute_system
from .linsolve import finalize
from .timestepping import newmark_history_weights, newmark_kinematics, newmark_rhs


class StabilizationError(RuntimeError):
    """Constraint rows inconsistent with the gauge split."""


def lambda_scaling(sigma_cells, eps_cells, sigma_art=1e-6):
    """Conditioning scale for the nonconducting constraint rows."""
    return (float(np.max(sigma_cells)) + sigma_art) / float(np.max(eps_cells))


def conducting_nodes(mesh, sigma_cells):
    """True for nodes with at least one incident conducting cell."""
    flag = np.zeros(mesh.n_nodes, dtype=bool)
    hot = np.asarray(sigma_cells) > 0.0
    flag[np.unique(mesh.cells[hot])] = True
    return flag


@dataclass(frozen=True)
class StabilizationConfig:
    lam: float
    sigma_art: float
    node_conducting: np.ndarray  # bool per mesh node

    @classmethod
    def from_operators(cls, ops, sigma_art=1e-6):
        return cls(
            lam=lambda_scaling(ops.sigma_cells, ops.eps_cells, sigma_art),
            sigma_art=sigma_art,
            node_conducting=conducting_nodes(ops.mesh, ops.sigma_cells),
        )


@dataclass(frozen=True)
class ConstraintMatrices:
    """Constraint rows over the free edges, aligned with the tree block.

    d_tilde : rows multiplying a
    d_hat   : rows multiplying da/dt (zero on nonconducting rows)
    Row k belongs to the child node of split.tree_edges[k]; columns are in
    ascending free-edge order.
    """

    d_tilde: sp.csr_matrix
    d_hat: sp.csr_matrix
    nodes: np.ndarray


def assemble_constraint_matrices(ops, split, config):
    """One weak-divergence row per tree edge, classed by material support."""
    nodes = split.child_node
    if nodes.size != split.n_tree:
        raise StabilizationError("constraint rows must match the tree size")
    fe = ops.dofs.free_edges

    # rows of G(*)^T for the constraint nodes = columns of G(*)
    g_sig_rows = ops.g_sigma[fe][:, nodes].T.tocsr()
    g_eps_rows = ops.g_eps[fe][:, nodes].T.tocsr()

    hot = config.node_conducting[nodes]
    sel_c = sp.diags(hot.astype(float))
    sel_a = sp.diags((~hot).astype(float))
    d_tilde = -(sel_c @ g_sig_rows + config.lam * (sel_a @ g_eps_rows))
    d_hat = -(sel_c @ g_eps_rows)
    return ConstraintMatrices(
        d_tilde=finalize(d_tilde), d_hat=finalize(d_hat), nodes=nodes
    )


def assemble_stabilized_update_matrix(ops, split, constraints, params, update_ff=None):
    """Update matrix in [R; T] ordering with the tree rows replaced.

    The R rows are taken verbatim from the permuted plain update matrix, so
    they stay bit-identical to the original; the T rows become
    Dt + gamma/(dt beta) Dh with no 1/dt^2 contribution, which keeps every
    entry finite in the static limit 1/dt = 0.
    """
    from .timestepping import assemble_update_matrix

    if constraints.d_tilde.shape != (split.n_tree, split.perm.size):
        raise StabilizationError(
            f"constraint block {constraints.d_tilde.shape} does not match "
            f"{split.n_tree} tree rows over {split.perm.size} free edges"
        )
    if update_ff is None:
        update_ff = assemble_update_matrix(ops, params)
    a_perm, _, nr = permute_system(update_ff, None, split)
    d_rows = constraints.d_tilde + params.coeff_msigma * constraints.d_hat
    d_rows = d_rows[:, split.perm].tocsr()
    return finalize(sp.vstack([a_perm[:nr], d_rows], format="csr"))


def assemble_stabilized_rhs(ops, split, constraints, state, j_np1, params):
    """Right-hand side in [R; T] ordering.

    R rows keep the plain Newmark load; T rows carry the constraint history
    (the conductive history weights applied to Dh), i.e. the plain load
    with M_sigma -> Dh, M_eps -> 0 and no current term.
    """
    plain = newmark_rhs(
        ops.ee(ops.m_sigma), ops.ee(ops.m_eps), state, j_np1, params
    )
    r_rows = plain[split.perm][: split.n_cotree]
    wa, wv, wacc = newmark_history_weights(params)
    t_rows = constraints.d_hat @ (
        wa * state.a + wv * state.a_dot + wacc * state.a_ddot
    )
    return np.concatenate([r_rows, t_rows])


def stabilized_newmark_step(ops, split, constraints, state, j_np1, params, fac):
    """One Newmark step against the prefactored stabilized matrix."""
    from dataclasses import replace

    rhs = assemble_stabilized_rhs(ops, split, constraints, state, j_np1, params)
    a_perm = fac.solve(rhs)
    a_np1 = a_perm[split.inverse_perm()]
    a_dot, a_ddot = newmark_kinematics(a_np1, state, params)
    return replace(
        state,
        a=a_np1,
        a_dot=a_dot,
        a_ddot=a_ddot,
        step=state.step + 1,
        time=state.time + params.dt,
    )


def constraint_residual(constraints, a, a_dot):
    """||Dt a + Dh da/dt|| against the preservation bound scale."""
    res = np.linalg.norm(constraints.d_tilde @ a + constraints.d_hat @ a_dot)
    scale = max(
        1.0, sp.linalg.norm(constraints.d_tilde) * np.linalg.norm(a)
    )
    return res, scale
