"""File formats: JSON configuration schemas, CSV field exports, legacy VTK.

All JSON documents carry ``"schema_version": 1``.  Floats are written with
``repr`` (shortest round-trip form), which makes every export byte-stable
for identical inputs.

Material file: ``{"schema_version": 1, "kind": <kind>, ...}`` with kind one of
``isotropic_coefficients`` (alpha/beta arrays), ``engineering`` (E, nu, h,
optional shear corrections), ``cosserat`` (mu, lambda, mu_c, L_c, a4..a7,
p, q, kappa, h), ``anisotropic`` (12x12 matrix H).

Loads file: optional entries ``f``, ``n_star`` (3-vectors or per-node
arrays), ``C_omega``, ``C_boundary`` (3x3 matrices or per-node arrays).
Boundary-only fields are masked to the free boundary when given as constants.

Boundary file: edge labels, mode, and the Dirichlet data ``y_star``
("reference", a constant displacement 3-vector, or a per-node array) and
``Q_star`` ("identity", a constant 3x3 rotation, or a per-node array).

Run config: grid geometry plus paths to the three files above, solver
settings, and output options.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constitutive import (
    AnisotropicQuadratic,
    CosseratParams,
    EngineeringParams,
    IsotropicCoefficients,
    from_engineering,
)
from .functional import BoundaryData, LoadSpec
from .kinematics import Configuration, PlateGrid, StrainField
from .so3 import log_so3, require_rotation
from .solver import ResidualReport, SolveReport, SolverSettings

SCHEMA_VERSION = 1

MATERIAL_KINDS = ("isotropic_coefficients", "engineering", "cosserat", "anisotropic")


class ConfigError(ValueError):
    """Malformed or inconsistent input file (CLI exit code 2)."""


def _fmt(x: float) -> str:
    return repr(float(x))


def _load_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as err:
        raise ConfigError(f"malformed JSON in {path}: {err}") from err
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {version}")
    return doc


def _require(doc: dict, key: str, path) -> object:
    if key not in doc:
        raise ConfigError(f"{path}: missing required key {key!r}")
    return doc[key]


def _as_float(doc: dict, key: str, path, default=None) -> float:
    if key not in doc:
        if default is None:
            raise ConfigError(f"{path}: missing required number {key!r}")
        return float(default)
    value = doc[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{path}: {key!r} must be a number")
    return float(value)


def _as_array(value, shape: tuple, path, key: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != shape:
        raise ConfigError(f"{path}: {key!r} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{path}: {key!r} has non-finite entries")
    return arr


# ----------------------------------------------------------------------------
# material files


def load_material(path):
    """Parse a material file; returns one of the four parameter containers."""
    doc = _load_json(path)
    kind = _require(doc, "kind", path)
    if kind not in MATERIAL_KINDS:
        raise ConfigError(f"{path}: unknown material kind {kind!r}")
    try:
        if kind == "isotropic_coefficients":
            alpha = _as_array(_require(doc, "alpha", path), (4,), path, "alpha")
            beta = _as_array(_require(doc, "beta", path), (4,), path, "beta")
            return IsotropicCoefficients(tuple(alpha), tuple(beta))
        if kind == "engineering":
            return EngineeringParams(
                young_modulus=_as_float(doc, "young_modulus", path),
                poisson_ratio=_as_float(doc, "poisson_ratio", path),
                thickness=_as_float(doc, "thickness", path),
                shear_correction=_as_float(doc, "shear_correction", path, 5.0 / 6.0),
                twist_correction=_as_float(doc, "twist_correction", path, 7.0 / 10.0),
            )
        if kind == "cosserat":
            return CosseratParams(
                mu=_as_float(doc, "mu", path),
                lam=_as_float(doc, "lambda", path),
                mu_c=_as_float(doc, "mu_c", path),
                internal_length=_as_float(doc, "internal_length", path),
                a4=_as_float(doc, "a4", path, 0.0),
                a5=_as_float(doc, "a5", path, 1.0),
                a6=_as_float(doc, "a6", path, 1.0),
                a7=_as_float(doc, "a7", path, 0.0),
                p=_as_float(doc, "p", path, 1.0),
                q=_as_float(doc, "q", path, 0.0),
                kappa=_as_float(doc, "kappa", path, 1.0),
                thickness=_as_float(doc, "thickness", path),
            )
        H = _as_array(_require(doc, "matrix", path), (12, 12), path, "matrix")
        return AnisotropicQuadratic(H)
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"{path}: {err}") from err


def quadratic_material(material):
    """Material as stored -> quadratic material the solver understands."""
    if isinstance(material, EngineeringParams):
        return from_engineering(material)
    if isinstance(material, CosseratParams):
        raise ConfigError(
            "cosserat materials drive the equivalence audit; convert with "
            "identify_coefficients (p = 1, a4 = 0) to use them in a solve"
        )
    return material


# ----------------------------------------------------------------------------
# loads and boundary files


def _field_from_spec(value, grid: PlateGrid, tail: tuple, path, key: str, mask=None) -> np.ndarray:
    """Constant-or-per-node field: a single value broadcast (to the masked
    nodes if a mask is given) or a full per-node array."""
    shape = (grid.nodes_x, grid.nodes_y)
    arr = np.asarray(value, dtype=float)
    if arr.shape == tail:
        out = np.zeros(shape + tail)
        if mask is None:
            out[...] = arr
        else:
            out[mask] = arr
        return out
    if arr.shape == shape + tail:
        if not np.all(np.isfinite(arr)):
            raise ConfigError(f"{path}: {key!r} has non-finite entries")
        return arr
    raise ConfigError(
        f"{path}: {key!r} must have shape {tail} (constant) or {shape + tail} (per node)"
    )


def load_loads(path, grid: PlateGrid) -> LoadSpec:
    doc = _load_json(path)
    loads = LoadSpec.zeros(grid)
    free_mask = grid.free_boundary_node_mask()
    if "f" in doc:
        loads.f = _field_from_spec(doc["f"], grid, (3,), path, "f")
    if "n_star" in doc:
        loads.n_star = _field_from_spec(doc["n_star"], grid, (3,), path, "n_star", mask=free_mask)
    if "C_omega" in doc:
        loads.C_omega = _field_from_spec(doc["C_omega"], grid, (3, 3), path, "C_omega")
    if "C_boundary" in doc:
        loads.C_boundary = _field_from_spec(
            doc["C_boundary"], grid, (3, 3), path, "C_boundary", mask=free_mask
        )
    try:
        loads.validate(grid)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from err
    return loads


def parse_edges(doc: dict, path) -> frozenset:
    edges = _require(doc, "edges", path)
    if not isinstance(edges, dict):
        raise ConfigError(f"{path}: 'edges' must map edge names to labels")
    dirichlet = set()
    for name, label in edges.items():
        if name not in ("left", "right", "bottom", "top"):
            raise ConfigError(f"{path}: unknown edge {name!r}")
        if label not in ("dirichlet", "free"):
            raise ConfigError(f"{path}: edge label must be 'dirichlet' or 'free', got {label!r}")
        if label == "dirichlet":
            dirichlet.add(name)
    return frozenset(dirichlet)


def load_boundary(path, grid: PlateGrid) -> BoundaryData:
    """Parse Dirichlet data; the grid must already carry the same edge labels."""
    doc = _load_json(path)
    labels = parse_edges(doc, path)
    if labels != grid.dirichlet_edges:
        raise ConfigError(
            f"{path}: edge labels {sorted(labels)} disagree with the grid "
            f"({sorted(grid.dirichlet_edges)})"
        )
    mode = doc.get("mode", "clamped")
    if mode not in ("clamped", "relaxed"):
        raise ConfigError(f"{path}: mode must be 'clamped' or 'relaxed'")

    y_spec = doc.get("y_star", "reference")
    x = grid.reference_positions()
    if isinstance(y_spec, str):
        if y_spec != "reference":
            raise ConfigError(f"{path}: y_star string form must be 'reference'")
        y_star = x.copy()
    else:
        arr = np.asarray(y_spec, dtype=float)
        if arr.shape == (3,):
            y_star = x + arr
        else:
            y_star = _as_array(arr, x.shape, path, "y_star")

    Q_star = None
    if mode == "clamped":
        q_spec = doc.get("Q_star", "identity")
        shape = (grid.nodes_x, grid.nodes_y, 3, 3)
        if isinstance(q_spec, str):
            if q_spec != "identity":
                raise ConfigError(f"{path}: Q_star string form must be 'identity'")
            Q_star = np.broadcast_to(np.eye(3), shape).copy()
        else:
            arr = np.asarray(q_spec, dtype=float)
            if arr.shape == (3, 3):
                arr = np.broadcast_to(arr, shape).copy()
            else:
                arr = _as_array(arr, shape, path, "Q_star")
            try:
                require_rotation(arr, what=f"{path}: Q_star")
            except ValueError as err:
                raise ConfigError(str(err)) from err
            Q_star = arr
    elif "Q_star" in doc:
        raise ConfigError(f"{path}: relaxed mode must not prescribe Q_star")

    bd = BoundaryData(mode=mode, y_star=y_star, Q_star=Q_star)
    try:
        bd.validate(grid)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from err
    return bd


# ----------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    grid: PlateGrid
    material_path: Path
    loads_path: Path
    boundary_path: Path
    settings: SolverSettings
    output_dir: Path
    write_vtk: bool
    verify: dict


def load_run_config(path) -> RunConfig:
    doc = _load_json(path)
    base = Path(path).parent

    grid_doc = _require(doc, "grid", path)
    lengths = _as_array(_require(grid_doc, "lengths", path), (2,), path, "grid.lengths")
    nodes = _require(grid_doc, "nodes", path)
    if (
        not isinstance(nodes, (list, tuple))
        or len(nodes) != 2
        or not all(isinstance(n, int) for n in nodes)
    ):
        raise ConfigError(f"{path}: grid.nodes must be two integers")
    thickness = _as_float(grid_doc, "thickness", path)

    boundary_path = base / str(_require(doc, "boundary", path))
    bdoc = _load_json(boundary_path)
    dirichlet = parse_edges(bdoc, boundary_path)

    try:
        grid = PlateGrid(
            length_x=float(lengths[0]),
            length_y=float(lengths[1]),
            nodes_x=nodes[0],
            nodes_y=nodes[1],
            thickness=thickness,
            dirichlet_edges=dirichlet,
        )
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from err

    sdoc = doc.get("solver", {})
    if not isinstance(sdoc, dict):
        raise ConfigError(f"{path}: 'solver' must be an object")
    settings = SolverSettings()
    for key in (
        "max_iterations",
        "grad_tolerance",
        "armijo_c",
        "backtrack_factor",
        "initial_step",
        "method",
        "seed",
        "use_diagonal_metric",
        "min_step",
    ):
        if key in sdoc:
            setattr(settings, key, sdoc[key])
    try:
        settings.validate()
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from err

    out_doc = doc.get("output", {})
    output_dir = base / str(out_doc.get("directory", "out"))
    write_vtk = bool(out_doc.get("vtk", True))

    verify = doc.get("verify", {})
    if not isinstance(verify, dict):
        raise ConfigError(f"{path}: 'verify' must be an object")

    return RunConfig(
        grid=grid,
        material_path=base / str(_require(doc, "material", path)),
        loads_path=base / str(_require(doc, "loads", path)),
        boundary_path=boundary_path,
        settings=settings,
        output_dir=output_dir,
        write_vtk=write_vtk,
        verify=verify,
    )


# ----------------------------------------------------------------------------
# CSV exports


def write_fields_csv(path, grid: PlateGrid, config: Configuration) -> None:
    """Node table: index, reference position, position, rotation entries."""
    x = grid.reference_positions()
    cols = ["i", "j", "x1", "x2", "y1", "y2", "y3"]
    cols += [f"Q{r}{c}" for r in (1, 2, 3) for c in (1, 2, 3)]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(grid.nodes_x):
            for j in range(grid.nodes_y):
                row = [str(i), str(j), _fmt(x[i, j, 0]), _fmt(x[i, j, 1])]
                row += [_fmt(v) for v in config.y[i, j]]
                row += [_fmt(v) for v in config.Q[i, j].reshape(9)]
                fh.write(",".join(row) + "\n")


def read_fields_csv(path, grid: PlateGrid) -> Configuration:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except Exception as err:
        raise ConfigError(f"{path}: cannot parse field CSV: {err}") from err
    expected = grid.nodes_x * grid.nodes_y
    if data.shape == ():
        data = data.reshape(1)
    if data.size != expected or data.dtype.names is None:
        raise ConfigError(f"{path}: expected {expected} node rows")
    needed = ["i", "j", "y1", "y2", "y3"] + [f"Q{r}{c}" for r in (1, 2, 3) for c in (1, 2, 3)]
    for name in needed:
        if name not in data.dtype.names:
            raise ConfigError(f"{path}: missing column {name!r}")
    y = np.zeros((grid.nodes_x, grid.nodes_y, 3))
    Q = np.zeros((grid.nodes_x, grid.nodes_y, 3, 3))
    ii = data["i"].astype(int)
    jj = data["j"].astype(int)
    if np.any(ii < 0) or np.any(ii >= grid.nodes_x) or np.any(jj < 0) or np.any(jj >= grid.nodes_y):
        raise ConfigError(f"{path}: node indices out of range")
    for axis, name in enumerate(("y1", "y2", "y3")):
        y[ii, jj, axis] = data[name]
    for r in range(3):
        for c in range(3):
            Q[ii, jj, r, c] = data[f"Q{r + 1}{c + 1}"]
    config = Configuration(y, Q)
    try:
        config.validate(grid, tol=1e-9)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from err
    return config


def write_strains_csv(path, grid: PlateGrid, strains: StrainField) -> None:
    """Cell table: index and the twelve strain components."""
    comps = [f"E{r}{c}" for c in (1, 2) for r in (1, 2, 3)]
    comps += [f"K{r}{c}" for c in (1, 2) for r in (1, 2, 3)]
    with open(path, "w") as fh:
        fh.write("i,j," + ",".join(comps) + "\n")
        for i in range(grid.cells_x):
            for j in range(grid.cells_y):
                row = [str(i), str(j)]
                row += [_fmt(strains.E[i, j, r, c]) for c in (0, 1) for r in (0, 1, 2)]
                row += [_fmt(strains.K[i, j, r, c]) for c in (0, 1) for r in (0, 1, 2)]
                fh.write(",".join(row) + "\n")


def write_energy_history_csv(path, report: SolveReport) -> None:
    with open(path, "w") as fh:
        fh.write("iteration,total,membrane,bending,load_potential,grad_norm,step\n")
        for row in report.history:
            it, total, mem, bend, load, grad, step = row
            fh.write(
                f"{it},{_fmt(total)},{_fmt(mem)},{_fmt(bend)},{_fmt(load)},"
                f"{_fmt(grad)},{_fmt(step)}\n"
            )


def solve_report_dict(report: SolveReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "converged": report.converged,
        "iterations": report.iterations,
        "final_grad_norm": report.final_grad_norm,
        "final_energy": {
            "membrane": report.final_breakdown.membrane,
            "bending": report.final_breakdown.bending,
            "load_potential": report.final_breakdown.load_potential,
            "total": report.final_breakdown.total,
        },
        "wall_time": report.wall_time,
        "message": report.message,
    }


def write_solve_report_json(path, report: SolveReport) -> None:
    with open(path, "w") as fh:
        json.dump(solve_report_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def residual_report_dict(rr: ResidualReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "force_max": rr.force_max,
        "force_l2": rr.force_l2,
        "moment_max": rr.moment_max,
        "moment_l2": rr.moment_l2,
    }


def write_residual_report_json(path, rr: ResidualReport) -> None:
    with open(path, "w") as fh:
        json.dump(residual_report_dict(rr), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ----------------------------------------------------------------------------
# legacy VTK structured grid (ASCII)


def write_vtk(path, grid: PlateGrid, config: Configuration) -> None:
    """Deformed surface as a legacy STRUCTURED_GRID with displacement vectors."""
    x = grid.reference_positions()
    u = config.y - x
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("plate6 deformed midsurface\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_GRID\n")
        fh.write(f"DIMENSIONS {grid.nodes_x} {grid.nodes_y} 1\n")
        n = grid.nodes_x * grid.nodes_y
        fh.write(f"POINTS {n} double\n")
        # VTK structured order: x index varies fastest
        for j in range(grid.nodes_y):
            for i in range(grid.nodes_x):
                fh.write(" ".join(_fmt(v) for v in config.y[i, j]) + "\n")
        fh.write(f"POINT_DATA {n}\n")
        fh.write("VECTORS displacement double\n")
        for j in range(grid.nodes_y):
            for i in range(grid.nodes_x):
                fh.write(" ".join(_fmt(v) for v in u[i, j]) + "\n")
        fh.write("VECTORS rotation_axis double\n")
        # principal rotation vector per node (safe below angle pi)
        for j in range(grid.nodes_y):
            for i in range(grid.nodes_x):
                try:
                    vec = log_so3(config.Q[i, j])
                except ValueError:
                    vec = np.full(3, np.nan)
                fh.write(" ".join(_fmt(v) for v in vec) + "\n")
