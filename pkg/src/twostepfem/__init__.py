"""Stabilized two-step time-domain Maxwell solver on structured tet meshes.

The electroquasistatic scalar-potential step (trapezoidal rule) feeds the
full-Maxwell vector-potential correction step (Newmark-beta), whose update
matrix is kept nonsingular for arbitrarily large time steps by replacing
tree-indexed rows with time-integrated weak divergence constraints.
"""

from .assembly import (
    AssembledOperators,
    MaterialSpec,
    SineWaveform,
    SourceSpec,
    assemble_curlcurl,
    assemble_grad_coupling,
    assemble_mass_curl,
    assemble_sources,
    assemble_stiff_grad,
)
from .freqdomain import (
    reconstruct_time,
    relative_l2_error,
    solve_eqs_freq,
    solve_mqs_freq_stabilized,
)
from .gauge import (
    TreeCotreeSplit,
    build_spanning_forest,
    permute_system,
    solve_magnetostatic_treegauge,
)
from .linsolve import condition_number, factor, factor_solve
from .mesh import (
    BoundaryCondition,
    Mesh,
    RegionBox,
    RegionSpec,
    build_box_mesh,
    classify_dofs,
    topological_gradient,
)
from .runner import run_cond_sweep, run_fd_validation, run_thermal, run_transient
from .scenario import Scenario, academic_scenario, coil_scenario, parse_scenario
from .stabilization import (
    ConstraintMatrices,
    StabilizationConfig,
    assemble_constraint_matrices,
    assemble_stabilized_rhs,
    assemble_stabilized_update_matrix,
)
from .thermal import ThermalLump, eqs_loss_power, sigma_of_temperature, thermal_step
from .timestepping import (
    NewmarkParams,
    TransientState,
    assemble_update_matrix,
    compute_j_np1,
    eqs_step,
    newmark_step,
)
from .vtkio import write_vtk

__version__ = "0.1.0"
