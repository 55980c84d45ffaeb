"""Run orchestration: transient sweeps, conditioning studies, FD validation.

A transient run executes the scalar-potential sweep and the vector-potential
correction over the same uniform grid.  For linear materials the two sweeps
are independent (the first could run to completion before the second); they
are interleaved here step by step so the staggered thermal coupling can
refresh the conductivity between steps without a second pass.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import assembly, freqdomain, gauge, stabilization, thermal, vtkio
from . import timestepping as ts
from .linsolve import (
    NumericallySingularError,
    SINGULARITY_RATIO,
    SolveAccuracyError,
    check_residual,
    condition_number,
    factor,
)
from .scenario import ScenarioError
from .vtkio import StepCsvWriter, write_csv, write_vtk


class SolverFailure(RuntimeError):
    """A step could not be completed; `last_good_step` ran to completion."""

    def __init__(self, message, last_good_step=-1):
        super().__init__(message)
        self.last_good_step = last_good_step


@dataclass
class RunSetup:
    """Everything assembled once per scenario."""

    scenario: object
    mesh: object
    ops: assembly.AssembledOperators
    sources: assembly.SourceSpec
    split: gauge.TreeCotreeSplit
    config: stabilization.StabilizationConfig
    constraints: stabilization.ConstraintMatrices
    params: ts.NewmarkParams


def prepare(scenario):
    mesh = scenario.build_mesh()
    ops = scenario.build_operators(mesh)
    sources = scenario.build_sources()
    roots = gauge.default_roots(mesh, ops.dofs)
    split = gauge.build_spanning_forest(mesh, ops.dofs.free_edges, roots)
    config = stabilization.StabilizationConfig.from_operators(ops)
    constraints = stabilization.assemble_constraint_matrices(ops, split, config)
    params = ts.NewmarkParams(
        beta=scenario.stepper.beta, gamma=scenario.stepper.gamma, dt=scenario.dt
    )
    return RunSetup(
        scenario=scenario,
        mesh=mesh,
        ops=ops,
        sources=sources,
        split=split,
        config=config,
        constraints=constraints,
        params=params,
    )


def _mqs_system(setup, stabilized):
    """Update matrix (plus permutation bookkeeping) and its factorization."""
    ops, split, cons, params = (
        setup.ops, setup.split, setup.constraints, setup.params,
    )
    plain = ts.assemble_update_matrix(ops, params)
    if stabilized:
        mat = stabilization.assemble_stabilized_update_matrix(
            ops, split, cons, params, update_ff=plain
        )
    else:
        mat = plain
    try:
        fac = factor(mat.tocsc())
    except NumericallySingularError as exc:
        raise SolverFailure(
            f"update matrix is numerically singular (dt = {params.dt:g}): {exc}",
            last_good_step=-1,
        ) from exc
    if not stabilized:
        # the unstabilized matrix degenerates as dt grows; refuse to step
        # once sigma_min falls below the singularity sentinel
        cond, smin, smax = condition_number(mat, mode="iterative")
        if not math.isfinite(cond):
            raise SolverFailure(
                f"unstabilized update matrix is numerically singular at "
                f"dt = {params.dt:g} (sigma_min {smin:.2e} below "
                f"{SINGULARITY_RATIO:g} * sigma_max {smax:.2e}); the "
                f"formulation breaks down for large time steps",
                last_good_step=-1,
            )
    return mat, fac


def _cell_fields(setup, u_full, a_full, adot_full):
    """Post-processing fields: B = curl A, D = eps grad phi, J = sigma E."""
    ops, mesh = setup.ops, setup.mesh
    grad_u = assembly.grad_per_cell(mesh, u_full, ops.geom)
    e_cell = -grad_u - assembly.edge_field_at_centroids(mesh, adot_full, ops.geom)
    return {
        "B": assembly.curl_per_cell(mesh, a_full, ops.geom),
        "D": ops.eps_cells[:, None] * grad_u,
        "J": ops.sigma_cells[:, None] * e_cell,
    }, e_cell


def _abs_current_integral(setup, e_cell):
    j_mag = np.linalg.norm(setup.ops.sigma_cells[:, None] * e_cell, axis=1)
    return float((j_mag * setup.ops.geom.volume).sum())


def run_transient(scenario, out_dir=None, stabilized=None, thermal_enabled=None):
    """Run a full transient and return the probe series plus a summary.

    Raises SolverFailure with the index of the last completed step when a
    linear solve breaks down.  With an output directory, probe rows land in
    probes.csv (thermal panels in thermal.csv), snapshots in step*.vtk and
    the summary in summary.csv.
    """
    if stabilized is not None or thermal_enabled is not None:
        from dataclasses import replace

        scenario = scenario.with_overrides(stabilized=stabilized)
        if thermal_enabled is not None:
            scenario = replace(
                scenario, thermal=replace(scenario.thermal, enabled=thermal_enabled)
            )
    if scenario.n_steps < 1:
        raise ScenarioError(["transient run needs time.steps >= 1"])

    setup = prepare(scenario)
    ops, split, params = setup.ops, setup.split, setup.params
    sources = setup.sources
    use_stab = scenario.stepper.stabilized
    thermal_on = scenario.thermal.enabled

    lump = None
    if thermal_on:
        t_opt = scenario.thermal
        lump = thermal.copper_lump(
            setup.mesh,
            t_opt.region,
            sigma0=t_opt.sigma0,
            alpha=t_opt.alpha,
            t_ref=t_opt.t_ref,
            heat_capacity=t_opt.heat_capacity,
        )

    def _eqs_system():
        k_eps = ops.nn(ops.k_eps)
        k_sig = ops.nn(ops.k_sigma)
        lhs = (2.0 / params.dt) * k_eps + k_sig
        rhs_mat = (2.0 / params.dt) * k_eps - k_sig
        return lhs, rhs_mat, factor(lhs.tocsc())

    mqs_mat, mqs_fac = _mqs_system(setup, use_stab)
    eqs_lhs, eqs_rhs_mat, eqs_fac = _eqs_system()

    state = ts.TransientState.zeros(setup.mesh.n_nodes, ops.free_edges.size)
    state.u = ops.embed_nodes(
        np.zeros(ops.free_nodes.size), ops.dirichlet_values(sources, 0.0)
    )
    state.u_prev = state.u.copy()

    writers = {}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        writers["probes"] = StepCsvWriter(
            os.path.join(out_dir, "probes.csv"),
            [
                "step", "t", "v_drive", "eqs_residual", "mqs_residual",
                "constraint_residual", "constraint_scale", "p_eqs",
                "j_abs_integral",
            ],
        )
        if thermal_on:
            writers["thermal"] = StepCsvWriter(
                os.path.join(out_dir, "thermal.csv"),
                ["step", "t", "v_drive", "temperature", "p_eqs", "sigma"],
            )

    n = scenario.n_steps
    series = {
        "t": np.zeros(n + 1),
        "v_drive": np.zeros(n + 1),
        "p_eqs": np.zeros(n + 1),
        "temperature": np.full(n + 1, lump.temperature if lump else np.nan),
        "sigma": np.full(
            n + 1, float(np.max(ops.sigma_cells)) if thermal_on else np.nan
        ),
        "j_abs_integral": np.zeros(n + 1),
        "constraint_residual": np.zeros(n + 1),
        "constraint_scale": np.ones(n + 1),
        "mqs_residual": np.zeros(n + 1),
        "eqs_residual": np.zeros(n + 1),
    }
    wave = sources.waveform("drive")
    _, e_cell = _cell_fields(setup, state.u, ops.embed_edges(state.a),
                             ops.embed_edges(state.a_dot))
    series["j_abs_integral"][0] = _abs_current_integral(setup, e_cell)

    last_good = -1
    try:
        for step in range(n):
            t_now = step * params.dt
            # scalar-potential step
            try:
                s_now, _ = assembly.assemble_sources(ops, sources, t_now)
                s_next, _ = assembly.assemble_sources(ops, sources, t_now + params.dt)
                rhs_eqs = eqs_rhs_mat @ state.u[ops.free_nodes] + s_now + s_next
                u_free = eqs_fac.solve(rhs_eqs)
                check_residual(eqs_lhs, u_free, rhs_eqs)
            except (NumericallySingularError, SolveAccuracyError) as exc:
                raise SolverFailure(str(exc), last_good_step=last_good) from exc
            eqs_res = float(np.linalg.norm(eqs_lhs @ u_free - rhs_eqs))
            u_next = ops.embed_nodes(
                u_free, ops.dirichlet_values(sources, t_now + params.dt)
            )

            # vector-potential correction step
            _, js_full = assembly.assemble_sources(ops, sources, t_now + params.dt)
            j_np1 = ts.compute_j_np1(ops, u_next, state.u_prev, js_full, params.dt)
            try:
                if use_stab:
                    rhs = stabilization.assemble_stabilized_rhs(
                        ops, split, setup.constraints, state, j_np1, params
                    )
                    sol = mqs_fac.solve(rhs)
                    check_residual(mqs_mat, sol, rhs)
                    a_np1 = sol[split.inverse_perm()]
                else:
                    rhs = ts.newmark_rhs(
                        ops.ee(ops.m_sigma), ops.ee(ops.m_eps), state, j_np1, params
                    )
                    sol = mqs_fac.solve(rhs)
                    check_residual(mqs_mat, sol, rhs)
                    a_np1 = sol
            except SolveAccuracyError as exc:
                raise SolverFailure(str(exc), last_good_step=last_good) from exc
            mqs_res = float(np.linalg.norm(mqs_mat @ sol - rhs))
            a_dot, a_ddot = ts.newmark_kinematics(a_np1, state, params)

            state.u_prev = state.u
            state.u = u_next
            state.a, state.a_dot, state.a_ddot = a_np1, a_dot, a_ddot
            state.step = step + 1
            state.time = (step + 1) * params.dt
            last_good = step + 1

            # probes
            res_c, scale_c = stabilization.constraint_residual(
                setup.constraints, state.a, state.a_dot
            )
            p_eqs = thermal.eqs_loss_power(ops, state.u)
            _, e_cell = _cell_fields(
                setup, state.u, ops.embed_edges(state.a), ops.embed_edges(state.a_dot)
            )
            j_l1 = _abs_current_integral(setup, e_cell)

            k = step + 1
            series["t"][k] = state.time
            series["v_drive"][k] = wave.value(state.time)
            series["p_eqs"][k] = p_eqs
            series["j_abs_integral"][k] = j_l1
            series["constraint_residual"][k] = res_c
            series["constraint_scale"][k] = scale_c
            series["mqs_residual"][k] = mqs_res
            series["eqs_residual"][k] = eqs_res

            # staggered thermal update feeding the next step
            if thermal_on:
                lump = thermal.thermal_step(lump, p_eqs, params.dt)
                sigma_new = thermal.sigma_of_temperature(lump, lump.temperature)
                series["temperature"][k] = lump.temperature
                series["sigma"][k] = sigma_new
                cells = np.where(
                    setup.mesh.cell_region == scenario.thermal.region,
                    sigma_new,
                    ops.sigma_cells,
                )
                if ops.refresh_sigma(cells):
                    setup.config = stabilization.StabilizationConfig.from_operators(
                        ops, setup.config.sigma_art
                    )
                    setup.constraints = stabilization.assemble_constraint_matrices(
                        ops, split, setup.config
                    )
                    mqs_mat, mqs_fac = _mqs_system(setup, use_stab)
                    eqs_lhs, eqs_rhs_mat, eqs_fac = _eqs_system()

            if "probes" in writers:
                writers["probes"].write_row(
                    [
                        k, state.time, series["v_drive"][k], eqs_res, mqs_res,
                        res_c, scale_c, p_eqs, j_l1,
                    ]
                )
            if "thermal" in writers:
                writers["thermal"].write_row(
                    [
                        k, state.time, series["v_drive"][k],
                        series["temperature"][k], p_eqs, series["sigma"][k],
                    ]
                )
            if (
                out_dir is not None
                and scenario.output.vtk_every > 0
                and k % scenario.output.vtk_every == 0
            ):
                fields, _ = _cell_fields(
                    setup, state.u, ops.embed_edges(state.a),
                    ops.embed_edges(state.a_dot),
                )
                selected = {
                    name: fields[name]
                    for name in scenario.output.fields
                    if name in fields
                }
                if "phi" in scenario.output.fields:
                    selected["phi"] = state.u
                write_vtk(
                    setup.mesh, selected, os.path.join(out_dir, f"step{k:05d}.vtk")
                )
    finally:
        for w in writers.values():
            w.close()

    summary = {
        "steps": n,
        "dt": params.dt,
        "stabilized": use_stab,
        "thermal": thermal_on,
        "max_constraint_residual": float(series["constraint_residual"].max()),
        "max_mqs_residual": float(series["mqs_residual"].max()),
        "final_temperature": float(series["temperature"][-1]),
        "final_sigma": float(series["sigma"][-1]),
    }
    if out_dir is not None:
        write_csv(
            os.path.join(out_dir, "summary.csv"),
            ["key", "value"],
            [(k, v) for k, v in summary.items()],
        )
    return TransientResult(scenario=scenario, series=series, summary=summary,
                           state=state, setup=setup, out_dir=out_dir)


@dataclass
class TransientResult:
    scenario: object
    series: dict
    summary: dict
    state: ts.TransientState
    setup: RunSetup
    out_dir: str = None


DEFAULT_SWEEP_DECADES = tuple(10.0 ** k for k in range(-10, 11))


def run_cond_sweep(scenario, dt_list=None, out_path=None, mode=None, dense_cap=6000):
    """Condition numbers of the plain and stabilized update matrices per dt.

    Returns rows (dt, cond_original, cond_stabilized, sigma_min_original);
    the symbolic static limit (dt = inf printed as `inf`) is appended
    unless already present.  An empty dt list yields an empty table.
    """
    setup = prepare(scenario)
    if dt_list is None:
        dt_list = DEFAULT_SWEEP_DECADES
    dt_list = list(dt_list)
    if dt_list and not any(math.isinf(d) for d in dt_list):
        dt_list.append(math.inf)
    if mode is None:
        mode = "dense" if setup.ops.free_edges.size <= dense_cap else "iterative"

    rows = []
    for dt in dt_list:
        params = ts.NewmarkParams(
            beta=scenario.stepper.beta, gamma=scenario.stepper.gamma, dt=dt
        )
        plain = ts.assemble_update_matrix(setup.ops, params)
        stab_mat = stabilization.assemble_stabilized_update_matrix(
            setup.ops, setup.split, setup.constraints, params, update_ff=plain
        )
        cond_o, smin_o, _ = condition_number(plain, mode=mode, dense_cap=dense_cap)
        cond_s, _, _ = condition_number(stab_mat, mode=mode, dense_cap=dense_cap)
        rows.append((float(dt), cond_o, cond_s, smin_o))

    if out_path is not None:
        write_csv(
            out_path,
            ["dt", "cond_original", "cond_stabilized", "sigma_min_original"],
            rows,
        )
    return rows


def run_fd_validation(scenario, steps_per_period=100, out_path=None):
    """Transient-vs-phasor cross check over one drive period.

    The transient starts from the phasor solution sampled at t = 0 and the
    relative L2 error of E = -grad(phi) - dA/dt is evaluated against the
    reconstructed phasor field at every step.  Returns (times, errors).
    """
    if steps_per_period < 1:
        raise ScenarioError(["validate-fd needs steps_per_period >= 1"])
    from dataclasses import replace

    period = 1.0 / scenario.frequency
    scenario = replace(
        scenario, dt=period / steps_per_period, n_steps=steps_per_period
    )
    setup = prepare(scenario)
    ops, split, params = setup.ops, setup.split, setup.params
    sources = setup.sources
    omega = 2.0 * math.pi * scenario.frequency
    g_top = ops.g_top

    # reference phasors
    u_hat = freqdomain.solve_eqs_freq(ops, sources, omega)
    a_hat_free = freqdomain.solve_mqs_freq_stabilized(
        ops, split, setup.constraints, omega, u_hat
    )
    a_hat = ops.embed_edges(a_hat_free)

    # initial conditions sampled from the phasor solution
    state = ts.TransientState.zeros(setup.mesh.n_nodes, ops.free_edges.size)
    state.u = freqdomain.reconstruct_time(u_hat, omega, 0.0)
    state.u_prev = freqdomain.reconstruct_time(u_hat, omega, -params.dt)
    state.a = freqdomain.reconstruct_time(a_hat_free, omega, 0.0)
    state.a_dot = freqdomain.reconstruct_time(1j * omega * a_hat_free, omega, 0.0)
    state.a_ddot = freqdomain.reconstruct_time(
        -(omega**2) * a_hat_free, omega, 0.0
    )

    mqs_mat, mqs_fac = _mqs_system(setup, True)
    eqs_fac = factor(ts.eqs_system_matrix(ops, params.dt).tocsc())

    n = scenario.n_steps
    e_td = np.zeros((n + 1, setup.mesh.n_edges))
    e_fd = np.zeros_like(e_td)
    e_td[0] = freqdomain.electric_field_edges(
        g_top, state.u, ops.embed_edges(state.a_dot)
    )
    e_fd[0] = e_td[0].copy()

    for step in range(n):
        t_now = step * params.dt
        u_next = ts.eqs_step(ops, sources, state.u, t_now, params.dt, eqs_fac)
        _, js_full = assembly.assemble_sources(ops, sources, t_now + params.dt)
        j_np1 = ts.compute_j_np1(ops, u_next, state.u_prev, js_full, params.dt)
        state_next = stabilization.stabilized_newmark_step(
            ops, split, setup.constraints, state, j_np1, params, mqs_fac
        )
        state_next.u_prev = state.u
        state_next.u = u_next
        state = state_next

        t_next = (step + 1) * params.dt
        e_td[step + 1] = freqdomain.electric_field_edges(
            g_top, state.u, ops.embed_edges(state.a_dot)
        )
        u_rec = freqdomain.reconstruct_time(u_hat, omega, t_next)
        adot_rec = ops.embed_edges(
            freqdomain.reconstruct_time(1j * omega * a_hat_free, omega, t_next)
        )
        e_fd[step + 1] = freqdomain.electric_field_edges(g_top, u_rec, adot_rec)

    mass = assembly.assemble_mass_curl(setup.mesh, 1.0, setup.ops.geom)
    errors = freqdomain.relative_l2_error(e_td, e_fd, mass)
    times = params.dt * np.arange(n + 1)
    if out_path is not None:
        write_csv(out_path, ["t", "rel_l2_error"], list(zip(times, errors)))
    return times, errors


def run_thermal(scenario, out_dir=None):
    return run_transient(scenario, out_dir=out_dir, thermal_enabled=True)
