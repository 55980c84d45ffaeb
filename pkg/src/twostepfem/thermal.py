"""Lumped electro-thermal coupling.

The conductor is treated as a single thermal mass heated adiabatically by
the scalar-potential losses: C_th dT/dt = P with explicit Euler updates
and the conductivity law

    sigma(T) = sigma0 / (1 + alpha (T - T_ref)),

refreshed once per time step (staggered coupling).  Heat conduction inside
the conductor is taken as instantaneous and no cooling is modeled, so the
temperature is nondecreasing whenever the losses are nonnegative.
"""

from dataclasses import dataclass, replace

# volumetric heat capacity of copper, J/(K m^3)
COPPER_VOLUMETRIC_HEAT_CAPACITY = 8960.0 * 385.0


class ThermalError(ValueError):
    pass


@dataclass(frozen=True)
class ThermalLump:
    """Single-mass thermal state of one conducting region."""

    temperature: float          # degC
    heat_capacity: float        # J/K
    sigma0: float               # S/m at T_ref
    alpha: float                # 1/K
    t_ref: float                # degC
    region: int

    def __post_init__(self):
        if self.heat_capacity <= 0.0:
            raise ThermalError("heat capacity must be positive")
        # alpha = 0 freezes the conductivity, which must reproduce the
        # linear solver path exactly
        if self.alpha < 0.0:
            raise ThermalError("temperature coefficient must be nonnegative")


def sigma_of_temperature(lump, temperature):
    """Conductivity law; rejects temperatures at or below the pole."""
    denom = 1.0 + lump.alpha * (temperature - lump.t_ref)
    if denom <= 0.0:
        raise ThermalError(
            f"temperature {temperature} at or below the conductivity pole "
            f"T_ref - 1/alpha = {lump.t_ref - 1.0 / lump.alpha}"
        )
    return lump.sigma0 / denom


def eqs_loss_power(ops, u_full):
    """Conduction losses of the scalar-potential field, u^T K_sigma u >= 0."""
    p = float(u_full @ (ops.k_sigma @ u_full))
    # quadratic form of a PSD matrix; clamp the roundoff tail
    return max(p, 0.0)


def thermal_step(lump, power, dt):
    """Adiabatic explicit Euler update of the lump temperature."""
    if power < 0.0:
        raise ThermalError("negative loss power")
    return replace(lump, temperature=lump.temperature + dt * power / lump.heat_capacity)


def copper_lump(mesh, region, sigma0, alpha, t_ref, t_initial=None,
                heat_capacity=None):
    """Lump for a meshed region, sized from the copper volumetric capacity."""
    if heat_capacity is None:
        volume = float(mesh.cell_volumes()[mesh.cell_region == region].sum())
        if volume <= 0.0:
            raise ThermalError(f"region {region} has no cells")
        heat_capacity = COPPER_VOLUMETRIC_HEAT_CAPACITY * volume
    return ThermalLump(
        temperature=t_ref if t_initial is None else t_initial,
        heat_capacity=heat_capacity,
        sigma0=sigma0,
        alpha=alpha,
        t_ref=t_ref,
        region=region,
    )
