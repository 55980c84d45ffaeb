"""Weak-form operators for lowest-order nodal and edge (Whitney) elements.

All integrals are exact closed forms for piecewise-constant materials:

    nodal stiffness   K(*)_ab = * V  grad(l_a) . grad(l_b)
    edge mass         M(*)_ef = * int w_e . w_f dV
    gradient coupling G(*)_ea = * (V/4) (grad(l_q) - grad(l_p)) . grad(l_a)
    curl stiffness    K(nu)_ef = nu V (2 grad(l_p) x grad(l_q)) . (...)

with l_a the barycentric coordinates and w_e = l_p grad(l_q) - l_q grad(l_p)
the Whitney function of the edge oriented from the globally lower node p to
the higher node q.  Edge mass uses int l_a l_b dV = V (1 + delta_ab) / 20.

Matrices are assembled over all entities; Dirichlet handling restricts to
free DOFs and lifts known columns to the right-hand side, keeping the
reduced systems symmetric.  Assembly is a scatter-add over cells and its
result is independent of cell order up to roundoff.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linsolve import finalize
from .mesh import LOCAL_EDGES, classify_dofs

VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m
VACUUM_PERMEABILITY = 4.0e-7 * math.pi  # H/m


class MaterialError(ValueError):
    """Material values violating the model assumptions."""


@dataclass(frozen=True)
class MaterialSpec:
    """Per-region conductivity, permittivity and reluctivity.

    sigma   : region -> S/m, >= 0 (conductors only)
    epsilon : region -> F/m, > 0 everywhere
    nu      : region -> 1/(H m), > 0 everywhere
    thermal : optional region -> (sigma0, alpha, T_ref) conductivity law
    """

    sigma: dict
    epsilon: dict
    nu: dict
    thermal: dict = field(default_factory=dict)

    def __post_init__(self):
        for r, v in self.epsilon.items():
            if v <= 0.0:
                raise MaterialError(f"epsilon must be positive in region {r}")
        for r, v in self.nu.items():
            if v <= 0.0:
                raise MaterialError(f"nu must be positive in region {r}")
        for r, v in self.sigma.items():
            if v < 0.0:
                raise MaterialError(f"sigma must be nonnegative in region {r}")

    def cells(self, mesh, which):
        """Per-cell coefficient array for 'sigma', 'epsilon' or 'nu'."""
        table = getattr(self, which)
        regions = np.unique(mesh.cell_region)
        missing = [int(r) for r in regions if int(r) not in table]
        if missing:
            raise MaterialError(f"{which} missing for regions {missing}")
        out = np.empty(mesh.n_cells)
        for r in regions:
            out[mesh.cell_region == r] = table[int(r)]
        return out


@dataclass(frozen=True)
class CellGeometry:
    """Per-cell barycentric gradients and derived quantities."""

    volume: np.ndarray      # (C,)
    grads: np.ndarray       # (C, 4, 3) gradients of barycentric coordinates
    gram: np.ndarray        # (C, 4, 4) grads . grads
    p_loc: np.ndarray       # (C, 6) local slot of the lower global node
    q_loc: np.ndarray       # (C, 6) local slot of the higher global node


def cell_geometry(mesh):
    coords = mesh.node_coords[mesh.cells]            # (C, 4, 3)
    m4 = np.concatenate([np.ones_like(coords[:, :, :1]), coords], axis=2)
    vol = np.linalg.det(m4) / 6.0
    inv = np.linalg.inv(m4)
    grads = np.transpose(inv[:, 1:4, :], (0, 2, 1))  # grads[c, a] = d l_a / dx
    gram = np.einsum("cik,cjk->cij", grads, grads)

    a_loc = np.array([e[0] for e in LOCAL_EDGES])
    b_loc = np.array([e[1] for e in LOCAL_EDGES])
    na = mesh.cells[:, a_loc]
    nb = mesh.cells[:, b_loc]
    asc = na < nb
    p_loc = np.where(asc, a_loc, b_loc)
    q_loc = np.where(asc, b_loc, a_loc)
    return CellGeometry(volume=vol, grads=grads, gram=gram, p_loc=p_loc, q_loc=q_loc)


def _as_cell_coeff(mesh, coeff):
    if np.isscalar(coeff):
        return np.full(mesh.n_cells, float(coeff))
    coeff = np.asarray(coeff, dtype=float)
    if coeff.shape != (mesh.n_cells,):
        raise ValueError("per-cell coefficient has wrong length")
    return coeff


def _scatter(rows, cols, vals, shape):
    a = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    return finalize(a)


def assemble_stiff_grad(mesh, coeff, geom=None):
    """Nodal stiffness with a piecewise-constant weight (sigma or epsilon)."""
    geom = geom or cell_geometry(mesh)
    c = _as_cell_coeff(mesh, coeff)
    k_loc = (c * geom.volume)[:, None, None] * geom.gram
    rows = np.broadcast_to(mesh.cells[:, :, None], k_loc.shape)
    cols = np.broadcast_to(mesh.cells[:, None, :], k_loc.shape)
    return _scatter(rows, cols, k_loc, (mesh.n_nodes, mesh.n_nodes))


def assemble_mass_curl(mesh, coeff, geom=None):
    """Edge mass matrix with a piecewise-constant weight."""
    geom = geom or cell_geometry(mesh)
    c = _as_cell_coeff(mesh, coeff)
    p, q = geom.p_loc, geom.q_loc
    gg = geom.gram
    ci = np.arange(mesh.n_cells)[:, None, None]

    def dot(u, v):
        return gg[ci, u[:, :, None], v[:, None, :]]

    def same(u, v):
        return (u[:, :, None] == v[:, None, :]).astype(float)

    m_loc = (
        dot(q, q) * (1.0 + same(p, p))
        - dot(q, p) * (1.0 + same(p, q))
        - dot(p, q) * (1.0 + same(q, p))
        + dot(p, p) * (1.0 + same(q, q))
    )
    m_loc *= (c * geom.volume / 20.0)[:, None, None]
    rows = np.broadcast_to(mesh.cell_edges[:, :, None], m_loc.shape)
    cols = np.broadcast_to(mesh.cell_edges[:, None, :], m_loc.shape)
    return _scatter(rows, cols, m_loc, (mesh.n_edges, mesh.n_edges))


def assemble_curlcurl(mesh, nu, geom=None):
    """Curl-curl stiffness; Whitney curls are constant per cell."""
    geom = geom or cell_geometry(mesh)
    c = _as_cell_coeff(mesh, nu)
    ci = np.arange(mesh.n_cells)[:, None]
    gp = geom.grads[ci, geom.p_loc]                  # (C, 6, 3)
    gq = geom.grads[ci, geom.q_loc]
    curls = 2.0 * np.cross(gp, gq)
    k_loc = np.einsum("cek,cfk->cef", curls, curls)
    k_loc *= (c * geom.volume)[:, None, None]
    rows = np.broadcast_to(mesh.cell_edges[:, :, None], k_loc.shape)
    cols = np.broadcast_to(mesh.cell_edges[:, None, :], k_loc.shape)
    return _scatter(rows, cols, k_loc, (mesh.n_edges, mesh.n_edges))


def assemble_grad_coupling(mesh, coeff, geom=None):
    """Edge-node coupling: weighted nodal gradients tested with edge functions.

    For lowest-order elements this equals assemble_mass_curl(coeff) applied
    to the topological gradient.
    """
    geom = geom or cell_geometry(mesh)
    c = _as_cell_coeff(mesh, coeff)
    ci = np.arange(mesh.n_cells)[:, None]
    gp = geom.grads[ci, geom.p_loc]
    gq = geom.grads[ci, geom.q_loc]
    g_loc = np.einsum("cek,cak->cea", gq - gp, geom.grads)
    g_loc *= (c * geom.volume / 4.0)[:, None, None]
    rows = np.broadcast_to(mesh.cell_edges[:, :, None], g_loc.shape)
    cols = np.broadcast_to(mesh.cells[:, None, :], g_loc.shape)
    return _scatter(rows, cols, g_loc, (mesh.n_edges, mesh.n_nodes))


@dataclass(frozen=True)
class SineWaveform:
    """V(t) = amplitude * sin(2 pi f t); phasor convention Re(x e^{i w t})."""

    amplitude: float
    frequency: float

    def __post_init__(self):
        if self.frequency <= 0.0:
            raise ValueError("sinusoidal drive needs f > 0")

    @property
    def omega(self):
        return 2.0 * math.pi * self.frequency

    def value(self, t):
        return self.amplitude * math.sin(self.omega * t)

    def rate(self, t):
        return self.amplitude * self.omega * math.cos(self.omega * t)

    def phasor(self):
        # sin(wt) = Re(-i e^{iwt})
        return -1j * self.amplitude


@dataclass(frozen=True)
class ConstantWaveform:
    value_const: float = 0.0

    def value(self, t):
        return self.value_const

    def rate(self, t):
        return 0.0

    def phasor(self):
        return complex(self.value_const)


@dataclass(frozen=True)
class SourceSpec:
    """Drive waveforms, impressed volume sources and the time grid.

    waveforms    : waveform id -> waveform ("ground" is implicitly zero)
    current_density : region -> (3,) constant impressed A/m^2
    charge_rate  : region -> constant d(rho_s)/dt in A/m^3
    dt, n_steps  : uniform grid t_n = n dt starting at 0
    """

    waveforms: dict = field(default_factory=dict)
    current_density: dict = field(default_factory=dict)
    charge_rate: dict = field(default_factory=dict)
    dt: float = 1.0
    n_steps: int = 0

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if "ground" not in self.waveforms:
            waves = dict(self.waveforms)
            waves["ground"] = ConstantWaveform(0.0)
            object.__setattr__(self, "waveforms", waves)

    def waveform(self, wave_id):
        try:
            return self.waveforms[wave_id]
        except KeyError:
            raise KeyError(f"unknown waveform id {wave_id!r}") from None

    def times(self):
        return self.dt * np.arange(self.n_steps + 1)


class AssembledOperators:
    """All weak-form matrices of one mesh/material/BC combination.

    Full-size matrices are kept alongside the free-DOF index sets; helpers
    produce the free-restricted blocks and the Dirichlet-lift columns.
    """

    def __init__(self, mesh, materials, bc, geom=None):
        self.mesh = mesh
        self.materials = materials
        self.bc = bc
        self.geom = geom or cell_geometry(mesh)
        self.dofs = classify_dofs(mesh, bc)

        self.sigma_cells = materials.cells(mesh, "sigma")
        self.eps_cells = materials.cells(mesh, "epsilon")
        self.nu_cells = materials.cells(mesh, "nu")

        from .mesh import topological_gradient

        self.g_top = topological_gradient(mesh)
        self.k_eps = assemble_stiff_grad(mesh, self.eps_cells, self.geom)
        self.m_eps = assemble_mass_curl(mesh, self.eps_cells, self.geom)
        self.g_eps = assemble_grad_coupling(mesh, self.eps_cells, self.geom)
        self.k_nu = assemble_curlcurl(mesh, self.nu_cells, self.geom)
        self._set_sigma_matrices()

    def _set_sigma_matrices(self):
        self.k_sigma = assemble_stiff_grad(self.mesh, self.sigma_cells, self.geom)
        self.m_sigma = assemble_mass_curl(self.mesh, self.sigma_cells, self.geom)
        self.g_sigma = assemble_grad_coupling(self.mesh, self.sigma_cells, self.geom)

    def refresh_sigma(self, sigma_cells):
        """Reassemble the conductivity-weighted matrices (thermal coupling).

        No-op when the values are unchanged, so linear runs keep a single
        assembly.
        """
        sigma_cells = np.asarray(sigma_cells, dtype=float)
        if np.array_equal(sigma_cells, self.sigma_cells):
            return False
        self.sigma_cells = sigma_cells
        self._set_sigma_matrices()
        return True

    # -- free-DOF restrictions -------------------------------------------

    @property
    def free_nodes(self):
        return self.dofs.free_nodes

    @property
    def free_edges(self):
        return self.dofs.free_edges

    def nn(self, a):
        """Free-node square restriction."""
        f = self.dofs.free_nodes
        return a[f][:, f].tocsr()

    def ee(self, a):
        """Free-edge square restriction."""
        f = self.dofs.free_edges
        return a[f][:, f].tocsr()

    def node_lift(self, a):
        """Columns of constrained nodes against free-node rows."""
        return a[self.dofs.free_nodes][:, self.dofs.dirichlet_nodes].tocsr()

    def embed_nodes(self, u_free, u_dirichlet_full=None):
        u = np.zeros(self.mesh.n_nodes, dtype=np.asarray(u_free).dtype)
        u[self.dofs.free_nodes] = u_free
        if u_dirichlet_full is not None:
            u[self.dofs.dirichlet_nodes] = u_dirichlet_full[self.dofs.dirichlet_nodes]
        return u

    def embed_edges(self, a_free):
        a = np.zeros(self.mesh.n_edges, dtype=np.asarray(a_free).dtype)
        a[self.dofs.free_edges] = a_free
        return a

    # -- sources and Dirichlet data ---------------------------------------

    def dirichlet_values(self, sources, t, rate=False):
        """Full nodal vector of prescribed scalar-potential values at t."""
        u = np.zeros(self.mesh.n_nodes)
        for wave_id, nodes in self.dofs.node_waveform.items():
            w = sources.waveform(wave_id)
            u[nodes] = w.rate(t) if rate else w.value(t)
        return u

    def dirichlet_phasors(self, sources):
        u = np.zeros(self.mesh.n_nodes, dtype=complex)
        for wave_id, nodes in self.dofs.node_waveform.items():
            u[nodes] = sources.waveform(wave_id).phasor()
        return u

    def charge_rate_vector(self, sources):
        """Nodal integrals of the impressed charge rate (time independent)."""
        q = np.zeros(self.mesh.n_nodes)
        if sources.charge_rate:
            rate = np.zeros(self.mesh.n_cells)
            for region, val in sources.charge_rate.items():
                rate[self.mesh.cell_region == region] = val
            contrib = rate * self.geom.volume / 4.0
            np.add.at(q, self.mesh.cells.ravel(),
                      np.repeat(contrib, 4))
        return q

    def current_vector(self, sources):
        """Edge integrals of the impressed current density (time independent)."""
        j = np.zeros(self.mesh.n_edges)
        if sources.current_density:
            js = np.zeros((self.mesh.n_cells, 3))
            for region, vec in sources.current_density.items():
                js[self.mesh.cell_region == region] = np.asarray(vec, dtype=float)
            ci = np.arange(self.mesh.n_cells)[:, None]
            gp = self.geom.grads[ci, self.geom.p_loc]
            gq = self.geom.grads[ci, self.geom.q_loc]
            contrib = np.einsum("cek,ck->ce", gq - gp, js)
            contrib *= (self.geom.volume / 4.0)[:, None]
            np.add.at(j, self.mesh.cell_edges.ravel(), contrib.ravel())
        return j


def assemble_sources(ops, sources, t):
    """Time-t source data for both steps.

    Returns the electroquasistatic right-hand side on free nodes (impressed
    charge rate plus the Dirichlet lift of the electrode drive and its time
    derivative) and the full impressed-current edge vector.
    """
    fn = ops.dofs.free_nodes
    dn = ops.dofs.dirichlet_nodes
    rhs = ops.charge_rate_vector(sources)[fn]
    if dn.size:
        u_d = ops.dirichlet_values(sources, t)[dn]
        ud_rate = ops.dirichlet_values(sources, t, rate=True)[dn]
        rhs = rhs - ops.node_lift(ops.k_sigma) @ u_d - ops.node_lift(ops.k_eps) @ ud_rate
    return rhs, ops.current_vector(sources)


# -- per-cell field evaluation (post-processing) ---------------------------

def curl_per_cell(mesh, edge_vec, geom=None):
    """B = curl A, constant on each cell, from a full edge DOF vector."""
    geom = geom or cell_geometry(mesh)
    ci = np.arange(mesh.n_cells)[:, None]
    gp = geom.grads[ci, geom.p_loc]
    gq = geom.grads[ci, geom.q_loc]
    curls = 2.0 * np.cross(gp, gq)                   # (C, 6, 3)
    coeff = np.asarray(edge_vec)[mesh.cell_edges]    # (C, 6)
    return np.einsum("ce,cek->ck", coeff, curls)


def grad_per_cell(mesh, node_vec, geom=None):
    """Gradient of a nodal field, constant on each cell."""
    geom = geom or cell_geometry(mesh)
    vals = np.asarray(node_vec)[mesh.cells]          # (C, 4)
    return np.einsum("ca,cak->ck", vals, geom.grads)


def edge_field_at_centroids(mesh, edge_vec, geom=None):
    """Whitney interpolation of an edge field at the cell barycenters."""
    geom = geom or cell_geometry(mesh)
    ci = np.arange(mesh.n_cells)[:, None]
    gp = geom.grads[ci, geom.p_loc]
    gq = geom.grads[ci, geom.q_loc]
    # all barycentric coordinates equal 1/4 at the centroid
    w = 0.25 * (gq - gp)                             # (C, 6, 3)
    coeff = np.asarray(edge_vec)[mesh.cell_edges]
    return np.einsum("ce,cek->ck", coeff, w)
