"""Scenario configuration: YAML parsing, validation and built-in presets.

A scenario file is a strict key-value document; unknown keys anywhere are
rejected so typos surface immediately, and validation collects every error
before failing.  A document may instead consist of a single `preset` key
naming one of the built-in example setups.

Sections: mesh, regions, materials, boundary, source, time, stepper,
thermal, output (see `parse_scenario` for the fields).  Permittivity and
reluctivity accept either absolute values (`epsilon`, `nu`) or relative
ones (`epsilon_r`, `mu_r`).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from .assembly import (
    VACUUM_PERMEABILITY,
    VACUUM_PERMITTIVITY,
    AssembledOperators,
    MaterialSpec,
    SineWaveform,
    SourceSpec,
)
from .mesh import (
    BoundaryCondition,
    RegionBox,
    RegionSpec,
    build_box_mesh,
    define_boundary_patch,
)


class ScenarioError(ValueError):
    """Configuration rejected; `errors` lists every problem found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class StepperOptions:
    beta: float = 0.25
    gamma: float = 0.5
    stabilized: bool = True


@dataclass(frozen=True)
class ThermalOptions:
    enabled: bool = False
    region: int = 1
    sigma0: float = 6e7
    alpha: float = 3.93e-3
    t_ref: float = 20.0
    heat_capacity: float = None  # None: copper capacity times region volume


@dataclass(frozen=True)
class OutputOptions:
    vtk_every: int = 0
    fields: tuple = ("phi", "B", "D", "J")


@dataclass(frozen=True)
class Scenario:
    name: str
    extent: tuple
    divisions: tuple
    regions: RegionSpec
    extra_patches: dict          # name -> (lo, hi) boxes on the boundary
    materials: MaterialSpec
    bc: BoundaryCondition
    amplitude: float
    frequency: float
    dt: float
    n_steps: int
    stepper: StepperOptions = StepperOptions()
    thermal: ThermalOptions = ThermalOptions()
    output: OutputOptions = OutputOptions()

    def build_mesh(self):
        mesh = build_box_mesh(self.extent, self.divisions, self.regions)
        for name, (lo, hi) in self.extra_patches.items():
            mesh = define_boundary_patch(mesh, name, lo, hi)
        return mesh

    def build_operators(self, mesh=None):
        return AssembledOperators(mesh or self.build_mesh(), self.materials, self.bc)

    def build_sources(self):
        return SourceSpec(
            waveforms={"drive": SineWaveform(self.amplitude, self.frequency)},
            dt=self.dt,
            n_steps=self.n_steps,
        )

    def with_overrides(self, dt=None, n_steps=None, stabilized=None):
        out = self
        if dt is not None:
            out = replace(out, dt=float(dt))
        if n_steps is not None:
            out = replace(out, n_steps=int(n_steps))
        if stabilized is not None:
            out = replace(out, stepper=replace(out.stepper, stabilized=stabilized))
        return out


# ---------------------------------------------------------------------------
# strict parsing

_SECTIONS = (
    "name", "preset", "mesh", "regions", "materials", "boundary", "source",
    "time", "stepper", "thermal", "output",
)


def _check_keys(err, mapping, allowed, where):
    if not isinstance(mapping, dict):
        err.append(f"{where}: expected a mapping")
        return False
    for k in mapping:
        if k not in allowed:
            err.append(f"{where}: unknown key {k!r}")
    return True


def _vec3(err, value, where):
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        err.append(f"{where}: expected three numbers")
        return None
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        err.append(f"{where}: expected three numbers")
        return None


def parse_scenario(text):
    """Parse and fully validate a scenario document.

    Returns a Scenario or raises ScenarioError listing all problems.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError([f"not valid YAML: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ScenarioError(["document must be a mapping"])

    if "preset" in doc:
        extra = sorted(set(doc) - {"preset"})
        if extra:
            raise ScenarioError(
                [f"preset documents allow no other sections, found {extra}"]
            )
        name = doc["preset"]
        if name not in PRESETS:
            raise ScenarioError(
                [f"unknown preset {name!r}; available: {sorted(PRESETS)}"]
            )
        return PRESETS[name]()

    err = []
    _check_keys(err, doc, _SECTIONS, "document")

    for required in ("mesh", "materials", "boundary", "source", "time"):
        if required not in doc:
            err.append(f"missing section {required!r}")
    if err:
        raise ScenarioError(err)

    mesh_sec = doc["mesh"]
    extent = divisions = None
    if _check_keys(err, mesh_sec, ("extent", "divisions"), "mesh"):
        extent = _vec3(err, mesh_sec.get("extent"), "mesh.extent")
        divisions = _vec3(err, mesh_sec.get("divisions"), "mesh.divisions")
        if divisions:
            divisions = tuple(int(d) for d in divisions)
            if any(d < 1 for d in divisions):
                err.append("mesh.divisions: every entry must be >= 1")
        if extent and any(v <= 0 for v in extent):
            err.append("mesh.extent: every entry must be positive")

    boxes = []
    for i, entry in enumerate(doc.get("regions", []) or []):
        where = f"regions[{i}]"
        if _check_keys(err, entry, ("region", "lo", "hi"), where):
            lo = _vec3(err, entry.get("lo"), f"{where}.lo")
            hi = _vec3(err, entry.get("hi"), f"{where}.hi")
            if lo and hi and "region" in entry:
                boxes.append(RegionBox(int(entry["region"]), lo, hi))
            elif "region" not in entry:
                err.append(f"{where}: missing region id")

    materials = None
    mat_sec = doc["materials"]
    if isinstance(mat_sec, dict):
        sigma, eps, nu = {}, {}, {}
        for rid, entry in mat_sec.items():
            where = f"materials[{rid}]"
            keys = ("sigma", "epsilon", "epsilon_r", "nu", "mu_r")
            if not _check_keys(err, entry, keys, where):
                continue
            try:
                r = int(rid)
            except (TypeError, ValueError):
                err.append(f"{where}: region id must be an integer")
                continue
            sigma[r] = float(entry.get("sigma", 0.0))
            if "epsilon" in entry and "epsilon_r" in entry:
                err.append(f"{where}: give epsilon or epsilon_r, not both")
            eps[r] = float(
                entry.get("epsilon", VACUUM_PERMITTIVITY * entry.get("epsilon_r", 1.0))
            )
            if "nu" in entry and "mu_r" in entry:
                err.append(f"{where}: give nu or mu_r, not both")
            nu[r] = float(
                entry.get("nu", 1.0 / (VACUUM_PERMEABILITY * entry.get("mu_r", 1.0)))
            )
        region_ids = {b.region for b in boxes} | {0}
        missing = sorted(region_ids - set(sigma))
        if missing:
            err.append(f"materials: no entry for regions {missing}")
        try:
            materials = MaterialSpec(sigma=sigma, epsilon=eps, nu=nu)
        except ValueError as exc:
            err.append(f"materials: {exc}")
    else:
        err.append("materials: expected a mapping of region id -> values")

    bnd = doc["boundary"]
    scalar, vector, extra_patches = {}, (), {}
    if _check_keys(err, bnd, ("scalar", "vector", "patches"), "boundary"):
        for pname, entry in (bnd.get("patches") or {}).items():
            where = f"boundary.patches[{pname}]"
            if _check_keys(err, entry, ("lo", "hi"), where):
                lo = _vec3(err, entry.get("lo"), f"{where}.lo")
                hi = _vec3(err, entry.get("hi"), f"{where}.hi")
                if lo and hi:
                    extra_patches[str(pname)] = (lo, hi)
        scalar = dict(bnd.get("scalar") or {})
        vector = tuple(bnd.get("vector") or ())
        known = set(("xlo", "xhi", "ylo", "yhi", "zlo", "zhi")) | set(extra_patches)
        for p in list(scalar) + list(vector):
            if p not in known:
                err.append(f"boundary: unknown patch {p!r}")
        for p, wave in scalar.items():
            if wave not in ("ground", "drive"):
                err.append(f"boundary.scalar[{p}]: unknown waveform {wave!r}")

    amplitude = frequency = None
    if _check_keys(err, doc["source"], ("waveform", "amplitude", "frequency"), "source"):
        if doc["source"].get("waveform", "sine") != "sine":
            err.append("source.waveform: only 'sine' is supported")
        try:
            amplitude = float(doc["source"].get("amplitude", 1.0))
            frequency = float(doc["source"].get("frequency", 0.0))
        except (TypeError, ValueError):
            err.append("source: amplitude/frequency must be numbers")
        if frequency is not None and frequency <= 0.0:
            err.append("source.frequency: must be positive")

    dt = n_steps = None
    if _check_keys(err, doc["time"], ("dt", "steps"), "time"):
        try:
            dt = float(doc["time"].get("dt", 0.0))
            n_steps = int(doc["time"].get("steps", 0))
        except (TypeError, ValueError):
            err.append("time: dt/steps must be numbers")
        if dt is not None and dt <= 0.0:
            err.append("time.dt: must be positive")
        if n_steps is not None and n_steps < 0:
            err.append("time.steps: must be nonnegative")

    stepper = StepperOptions()
    if "stepper" in doc and _check_keys(
        err, doc["stepper"], ("beta", "gamma", "stabilized"), "stepper"
    ):
        s = doc["stepper"]
        stepper = StepperOptions(
            beta=float(s.get("beta", 0.25)),
            gamma=float(s.get("gamma", 0.5)),
            stabilized=bool(s.get("stabilized", True)),
        )

    thermal = ThermalOptions()
    if "thermal" in doc and _check_keys(
        err,
        doc["thermal"],
        ("enabled", "region", "sigma0", "alpha", "t_ref", "heat_capacity"),
        "thermal",
    ):
        t = doc["thermal"]
        hc = t.get("heat_capacity")
        thermal = ThermalOptions(
            enabled=bool(t.get("enabled", False)),
            region=int(t.get("region", 1)),
            sigma0=float(t.get("sigma0", 6e7)),
            alpha=float(t.get("alpha", 3.93e-3)),
            t_ref=float(t.get("t_ref", 20.0)),
            heat_capacity=None if hc is None else float(hc),
        )

    output = OutputOptions()
    if "output" in doc and _check_keys(
        err, doc["output"], ("vtk_every", "fields"), "output"
    ):
        o = doc["output"]
        output = OutputOptions(
            vtk_every=int(o.get("vtk_every", 0)),
            fields=tuple(o.get("fields", ("phi", "B", "D", "J"))),
        )

    if err:
        raise ScenarioError(err)
    return Scenario(
        name=str(doc.get("name", "scenario")),
        extent=extent,
        divisions=divisions,
        regions=RegionSpec(boxes=boxes),
        extra_patches=extra_patches,
        materials=materials,
        bc=BoundaryCondition(scalar_patches=scalar, vector_patches=vector),
        amplitude=amplitude,
        frequency=frequency,
        dt=dt,
        n_steps=n_steps,
        stepper=stepper,
        thermal=thermal,
        output=output,
    )


def load_scenario(path):
    with open(path, "r", encoding="utf-8") as f:
        return parse_scenario(f.read())


# ---------------------------------------------------------------------------
# presets

ACADEMIC_EXTENT = 0.22      # m
ACADEMIC_BREAK_LO = 0.10    # bar cross-section and segment break, m
ACADEMIC_BREAK_HI = 0.12
COIL_FREQUENCY = 150.0      # Hz; one period = 6.67 ms


def _snap_breaks(n):
    """Lattice indices approximating the 10 cm / 12 cm breaks on n cells.

    The 2 cm band keeps its width (at least one cell) and is centered on
    the lattice; exact for n divisible by 11.
    """
    if n < 2:
        raise ScenarioError([f"academic preset needs >= 2 cells per axis, got {n}"])
    width = ACADEMIC_BREAK_HI - ACADEMIC_BREAK_LO
    band = max(1, round(width / ACADEMIC_EXTENT * n))
    lo = math.floor((n - band) / 2 + 0.5)
    lo = min(max(lo, 0), n - band)
    return lo, lo + band


def academic_scenario(divisions=(11, 11, 11), steps_per_period=20, periods=2,
                      amplitude=1.0):
    """Three conducting bars in a dielectric box, driven across two faces.

    The bar column runs along z between the electrode faces: two outer
    bars (sigma 5 S/m, eps_r 5) and a center bar (sigma 1 S/m, eps_r 1),
    surrounded by an air-gap slab (eps_r 1) at the center-bar height and
    dielectric (eps_r 5) elsewhere.  Material interfaces sit at 10 cm and
    12 cm; coarse meshes snap them to the nearest lattice planes.
    """
    divisions = tuple(int(d) for d in divisions)
    L = ACADEMIC_EXTENT
    h = [L / d for d in divisions]
    bx = _snap_breaks(divisions[0])
    by = _snap_breaks(divisions[1])
    bz = _snap_breaks(divisions[2])
    x0, x1 = bx[0] * h[0], bx[1] * h[0]
    y0, y1 = by[0] * h[1], by[1] * h[1]
    z0, z1 = bz[0] * h[2], bz[1] * h[2]

    candidates = [
        # air-gap slab at the center-bar height
        RegionBox(1, (0.0, 0.0, z0), (L, L, z1)),
        # outer bars along z inside the column
        RegionBox(2, (x0, y0, 0.0), (x1, y1, z0)),
        RegionBox(2, (x0, y0, z1), (x1, y1, L)),
        # center bar
        RegionBox(3, (x0, y0, z0), (x1, y1, z1)),
    ]
    # snapping on very coarse lattices can empty an outer segment
    boxes = [b for b in candidates if all(l < h for l, h in zip(b.lo, b.hi))]
    eps0 = VACUUM_PERMITTIVITY
    nu0 = 1.0 / VACUUM_PERMEABILITY
    materials = MaterialSpec(
        sigma={0: 0.0, 1: 0.0, 2: 5.0, 3: 1.0},
        epsilon={0: 5.0 * eps0, 1: 1.0 * eps0, 2: 5.0 * eps0, 3: 1.0 * eps0},
        nu={0: nu0, 1: nu0, 2: nu0, 3: nu0},
    )
    bc = BoundaryCondition(
        scalar_patches={"zlo": "ground", "zhi": "drive"},
        vector_patches=("xlo", "xhi", "ylo", "yhi", "zlo", "zhi"),
    )
    frequency = 150.0
    dt = 1.0 / (frequency * steps_per_period)
    return Scenario(
        name="academic-bars",
        extent=(L, L, L),
        divisions=divisions,
        regions=RegionSpec(boxes=boxes),
        extra_patches={},
        materials=materials,
        bc=bc,
        amplitude=amplitude,
        frequency=frequency,
        dt=dt,
        n_steps=steps_per_period * periods,
    )


# planar spiral segments in 3 mm cell indices: (ix0, ix1, iy0, iy1, iz0, iz1)
_COIL_CELL = 0.003
_COIL_SEGMENTS = (
    (0, 1, 1, 1, 1, 1),      # lead-in from the x = 0 electrode
    (1, 13, 1, 1, 1, 1),     # outer turn
    (13, 13, 1, 15, 1, 1),
    (1, 13, 15, 15, 1, 1),
    (1, 1, 3, 15, 1, 1),
    (1, 11, 3, 3, 1, 1),     # middle turn
    (11, 11, 3, 13, 1, 1),
    (3, 11, 13, 13, 1, 1),
    (3, 3, 5, 13, 1, 1),
    (3, 9, 5, 5, 1, 1),      # inner turn
    (9, 9, 5, 11, 1, 1),
    (5, 9, 11, 11, 1, 1),
    (5, 5, 7, 11, 1, 1),
    (5, 5, 7, 7, 2, 2),      # via up to the z = 9 mm electrode
)


def coil_scenario(refine=1, amplitude=1.0, thermal=False, dt=None, n_steps=None):
    """Planar three-turn spiral coil (copper, 3 mm x 3 mm cross-section).

    The spiral is a lattice-aligned rectangular approximation inside a
    45 mm x 51 mm x 9 mm air box.  One end reaches the x = 0 face (driven
    electrode), the other rises through a via to the z = 9 mm face
    (grounded electrode).  The vector potential keeps natural boundary
    conditions everywhere.
    """
    h = _COIL_CELL
    boxes = [
        RegionBox(
            1,
            (s[0] * h, s[2] * h, s[4] * h),
            ((s[1] + 1) * h, (s[3] + 1) * h, (s[5] + 1) * h),
        )
        for s in _COIL_SEGMENTS
    ]
    eps0 = VACUUM_PERMITTIVITY
    nu0 = 1.0 / VACUUM_PERMEABILITY
    materials = MaterialSpec(
        sigma={0: 0.0, 1: 6e7},
        epsilon={0: eps0, 1: eps0},
        nu={0: nu0, 1: nu0},
        thermal={1: (6e7, 3.93e-3, 20.0)},
    )
    extra_patches = {
        "feed": ((0.0, 1 * h, 1 * h), (0.0, 2 * h, 2 * h)),
        "return": ((5 * h, 7 * h, 3 * h), (6 * h, 8 * h, 3 * h)),
    }
    bc = BoundaryCondition(
        scalar_patches={"feed": "drive", "return": "ground"},
        vector_patches=(),
    )
    if dt is None:
        dt = 0.134e-3 if thermal else 1.0 / (COIL_FREQUENCY * 20.0)
    if n_steps is None:
        n_steps = 50 if thermal else 20
    return Scenario(
        name="planar-coil-thermal" if thermal else "planar-coil",
        extent=(0.045, 0.051, 0.009),
        divisions=(15 * refine, 17 * refine, 3 * refine),
        regions=RegionSpec(boxes=boxes),
        extra_patches=extra_patches,
        materials=materials,
        bc=bc,
        amplitude=amplitude,
        frequency=COIL_FREQUENCY,
        dt=dt,
        n_steps=n_steps,
        thermal=ThermalOptions(enabled=thermal, region=1),
    )


PRESETS = {
    "academic-bars": academic_scenario,
    "academic-mini": lambda: academic_scenario(divisions=(6, 6, 6)),
    "planar-coil": coil_scenario,
    "planar-coil-thermal": lambda: coil_scenario(amplitude=50.0, thermal=True),
}
