"""Discrete plate geometry and strain measures.

The reference midsurface is a rectangle discretized by a regular node
lattice.  A configuration is a translation field y (one 3-vector per node)
plus a rotation field Q (one 3x3 rotation per node).  Strains live on cells:

- deformation gradient F: columns are cell-centered difference quotients of y,
- strain tensor  E[i, a] = y,_a . d_i - delta_ia  (membrane + transverse shear),
- bending tensor K[:, a] = Qc^T omega_a, with omega_a the geodesic difference
  quotient of the rotation field along direction a,

where d_i = Qc e_i and Qc is the projected average of the four corner
rotations.  The geodesic difference log(Q_b Q_a^T)/h is exactly the axial
vector of a skew matrix and reproduces one-parameter rotation fields without
discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .so3 import exp_so3, hat, log_so3, mat_t, project_so3, require_rotation

EDGE_NAMES = ("left", "right", "bottom", "top")

# 3x2 slice of the identity, e1 (x) e1 + e2 (x) e2
IDENTITY_3X2 = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

# permutation symbol, used by the curvature <-> bending component map
_EPS = np.zeros((3, 3, 3))
_EPS[0, 1, 2] = _EPS[1, 2, 0] = _EPS[2, 0, 1] = 1.0
_EPS[0, 2, 1] = _EPS[2, 1, 0] = _EPS[1, 0, 2] = -1.0


@dataclass(frozen=True)
class PlateGrid:
    """Rectangular reference domain with a regular node lattice.

    Node (i, j) sits at (i*hx, j*hy, 0) for i < nodes_x, j < nodes_y.  Each of
    the four boundary edges is labeled Dirichlet or free; at least one edge
    must be Dirichlet.  ``thickness`` is geometric metadata (the material
    moduli already carry their own thickness where it enters the energy).
    """

    length_x: float
    length_y: float
    nodes_x: int
    nodes_y: int
    thickness: float
    dirichlet_edges: frozenset = field(default_factory=lambda: frozenset(EDGE_NAMES))

    def __post_init__(self):
        if not (self.length_x > 0 and self.length_y > 0 and self.thickness > 0):
            raise ValueError("PlateGrid: lengths and thickness must be positive")
        if self.nodes_x < 2 or self.nodes_y < 2:
            raise ValueError("PlateGrid: need at least 2 nodes per direction")
        edges = frozenset(self.dirichlet_edges)
        object.__setattr__(self, "dirichlet_edges", edges)
        if not edges:
            raise ValueError("PlateGrid: at least one edge must be Dirichlet")
        unknown = edges - set(EDGE_NAMES)
        if unknown:
            raise ValueError(f"PlateGrid: unknown edge labels {sorted(unknown)}")

    @property
    def hx(self) -> float:
        return self.length_x / (self.nodes_x - 1)

    @property
    def hy(self) -> float:
        return self.length_y / (self.nodes_y - 1)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def cells_x(self) -> int:
        return self.nodes_x - 1

    @property
    def cells_y(self) -> int:
        return self.nodes_y - 1

    @property
    def free_edges(self) -> frozenset:
        return frozenset(EDGE_NAMES) - self.dirichlet_edges

    def reference_positions(self) -> np.ndarray:
        """Node positions x of the flat reference surface, shape (nx, ny, 3)."""
        xs = np.arange(self.nodes_x) * self.hx
        ys = np.arange(self.nodes_y) * self.hy
        pos = np.zeros((self.nodes_x, self.nodes_y, 3))
        pos[..., 0] = xs[:, None]
        pos[..., 1] = ys[None, :]
        return pos

    def edge_node_mask(self, edge: str) -> np.ndarray:
        mask = np.zeros((self.nodes_x, self.nodes_y), dtype=bool)
        if edge == "left":
            mask[0, :] = True
        elif edge == "right":
            mask[-1, :] = True
        elif edge == "bottom":
            mask[:, 0] = True
        elif edge == "top":
            mask[:, -1] = True
        else:
            raise ValueError(f"unknown edge {edge!r}")
        return mask

    def dirichlet_node_mask(self) -> np.ndarray:
        mask = np.zeros((self.nodes_x, self.nodes_y), dtype=bool)
        for edge in self.dirichlet_edges:
            mask |= self.edge_node_mask(edge)
        return mask

    def free_boundary_node_mask(self) -> np.ndarray:
        mask = np.zeros((self.nodes_x, self.nodes_y), dtype=bool)
        for edge in self.free_edges:
            mask |= self.edge_node_mask(edge)
        return mask


@dataclass
class Configuration:
    """Per-node deformation: positions y (nx, ny, 3) and rotations Q (nx, ny, 3, 3)."""

    y: np.ndarray
    Q: np.ndarray

    def copy(self) -> "Configuration":
        return Configuration(self.y.copy(), self.Q.copy())

    def validate(self, grid: PlateGrid, tol: float = 1e-12) -> None:
        shape = (grid.nodes_x, grid.nodes_y)
        if self.y.shape != shape + (3,):
            raise ValueError(f"Configuration.y: expected shape {shape + (3,)}, got {self.y.shape}")
        if self.Q.shape != shape + (3, 3):
            raise ValueError(f"Configuration.Q: expected shape {shape + (3, 3)}, got {self.Q.shape}")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("Configuration.y: non-finite entries")
        require_rotation(self.Q, tol=tol, what="Configuration.Q")


def identity_configuration(grid: PlateGrid) -> Configuration:
    """Undeformed state: y = x, Q = identity everywhere."""
    Q = np.broadcast_to(np.eye(3), (grid.nodes_x, grid.nodes_y, 3, 3)).copy()
    return Configuration(grid.reference_positions(), Q)


@dataclass
class StrainField:
    """Cell arrays of the strain tensor E (dimensionless) and bending tensor K (1/length)."""

    E: np.ndarray  # (cells_x, cells_y, 3, 2)
    K: np.ndarray  # (cells_x, cells_y, 3, 2)


# ----------------------------------------------------------------------------
# batched cell quantities


def cell_deformation_gradients(grid: PlateGrid, y: np.ndarray) -> np.ndarray:
    """Cell-centered F = y,_a (x) e_a for all cells, shape (cx, cy, 3, 2).

    The derivative along direction a at the cell center is the average of the
    two opposing edge difference quotients (bilinear-consistent, second order).
    """
    hx, hy = grid.hx, grid.hy
    F = np.empty((grid.cells_x, grid.cells_y, 3, 2))
    F[..., 0] = (y[1:, :-1] - y[:-1, :-1] + y[1:, 1:] - y[:-1, 1:]) / (2.0 * hx)
    F[..., 1] = (y[:-1, 1:] - y[:-1, :-1] + y[1:, 1:] - y[1:, :-1]) / (2.0 * hy)
    return F


def cell_rotation_means(grid: PlateGrid, Q: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the four corner rotations per cell (not on SO(3))."""
    return 0.25 * (Q[:-1, :-1] + Q[1:, :-1] + Q[:-1, 1:] + Q[1:, 1:])


def cell_rotations(grid: PlateGrid, Q: np.ndarray) -> np.ndarray:
    """Projected average rotation per cell: project_so3 of the corner mean."""
    return project_so3(cell_rotation_means(grid, Q))


def edge_logs(grid: PlateGrid, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Geodesic increments log(Q_b Q_a^T) along lattice edges (not yet /h).

    Returns (v1, v2) with shapes (nx-1, ny, 3) and (nx, ny-1, 3).  A relative
    rotation with angle >= pi between adjacent nodes is reported as a
    mesh-resolution failure with the offending cell index.
    """
    try:
        v1 = log_so3(Q[1:, :] @ mat_t(Q[:-1, :]))
    except ValueError as err:
        raise ValueError(f"edge_logs: {err} on an x-edge; cell {_locate_bad_edge(Q, axis=0)}") from err
    try:
        v2 = log_so3(Q[:, 1:] @ mat_t(Q[:, :-1]))
    except ValueError as err:
        raise ValueError(f"edge_logs: {err} on a y-edge; cell {_locate_bad_edge(Q, axis=1)}") from err
    return v1, v2


def _locate_bad_edge(Q: np.ndarray, axis: int) -> tuple[int, int]:
    """Cell index of the first edge whose relative rotation reaches pi."""
    if axis == 0:
        R = Q[1:, :] @ mat_t(Q[:-1, :])
    else:
        R = Q[:, 1:] @ mat_t(Q[:, :-1])
    trace = R[..., 0, 0] + R[..., 1, 1] + R[..., 2, 2]
    bad = np.argwhere(trace <= -1.0 + 1e-9)
    i, j = (int(bad[0][0]), int(bad[0][1])) if len(bad) else (0, 0)
    ncx = Q.shape[0] - 1
    ncy = Q.shape[1] - 1
    return (min(i, ncx - 1), min(j, ncy - 1))


def cell_rotation_rates(grid: PlateGrid, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    """Spatial rotation-rate vectors omega_a = axl(Q,_a Q^T) per cell, (cx, cy, 3, 2).

    omega_a is the average of the two parallel geodesic edge quotients.
    """
    omega = np.empty((grid.cells_x, grid.cells_y, 3, 2))
    omega[..., 0] = (v1[:, :-1] + v1[:, 1:]) / (2.0 * grid.hx)
    omega[..., 1] = (v2[:-1, :] + v2[1:, :]) / (2.0 * grid.hy)
    return omega


def strain_field(grid: PlateGrid, config: Configuration) -> StrainField:
    """E and K on every cell (first failing cell is reported by index)."""
    F = cell_deformation_gradients(grid, config.y)
    Qc = cell_rotations(grid, config.Q)
    v1, v2 = edge_logs(grid, config.Q)
    omega = cell_rotation_rates(grid, v1, v2)
    QcT = mat_t(Qc)
    E = QcT @ F - IDENTITY_3X2
    K = QcT @ omega
    return StrainField(E=E, K=K)


# ----------------------------------------------------------------------------
# single-cell views (thin wrappers over the batched formulas)


def _cell_block(arr: np.ndarray, cell: tuple[int, int]) -> np.ndarray:
    i, j = cell
    return arr[i : i + 2, j : j + 2]


def _check_cell(grid: PlateGrid, cell: tuple[int, int]) -> None:
    i, j = cell
    if not (0 <= i < grid.cells_x and 0 <= j < grid.cells_y):
        raise IndexError(f"cell {cell} outside {(grid.cells_x, grid.cells_y)}")


def deformation_gradient(grid: PlateGrid, config: Configuration, cell: tuple[int, int]) -> np.ndarray:
    """Cell-centered deformation gradient, 3x2; columns (e1, e2) for y = x."""
    _check_cell(grid, cell)
    y = _cell_block(config.y, cell)
    F = np.empty((3, 2))
    F[:, 0] = (y[1, 0] - y[0, 0] + y[1, 1] - y[0, 1]) / (2.0 * grid.hx)
    F[:, 1] = (y[0, 1] - y[0, 0] + y[1, 1] - y[1, 0]) / (2.0 * grid.hy)
    return F


def cell_rotation(grid: PlateGrid, config: Configuration, cell: tuple[int, int]) -> np.ndarray:
    _check_cell(grid, cell)
    Q = _cell_block(config.Q, cell)
    return project_so3(0.25 * (Q[0, 0] + Q[1, 0] + Q[0, 1] + Q[1, 1]))


def strain_tensor(grid: PlateGrid, config: Configuration, cell: tuple[int, int]) -> np.ndarray:
    """E with components y,_a . d_i - delta_ia; zero when y,_a = d_a."""
    F = deformation_gradient(grid, config, cell)
    Qc = cell_rotation(grid, config, cell)
    return Qc.T @ F - IDENTITY_3X2


def _cell_rotation_rate(grid: PlateGrid, config: Configuration, cell: tuple[int, int]) -> np.ndarray:
    """omega_a columns for one cell (geodesic averages of the four edges)."""
    Q = _cell_block(config.Q, cell)
    omega = np.empty((3, 2))
    omega[:, 0] = (log_so3(Q[1, 0] @ Q[0, 0].T) + log_so3(Q[1, 1] @ Q[0, 1].T)) / (2.0 * grid.hx)
    omega[:, 1] = (log_so3(Q[0, 1] @ Q[0, 0].T) + log_so3(Q[1, 1] @ Q[1, 0].T)) / (2.0 * grid.hy)
    return omega


def bending_tensor(grid: PlateGrid, config: Configuration, cell: tuple[int, int]) -> np.ndarray:
    """K = Qc^T (omega_a (x) e_a); exact for one-parameter rotation fields."""
    _check_cell(grid, cell)
    try:
        omega = _cell_rotation_rate(grid, config, cell)
    except ValueError as err:
        raise ValueError(f"bending_tensor: cell {cell}: {err}") from err
    Qc = cell_rotation(grid, config, cell)
    return Qc.T @ omega


def curvature_third_order(grid: PlateGrid, config: Configuration, cell: tuple[int, int]) -> np.ndarray:
    """Third-order curvature slices C[i] with components C[i][j, a] = d_j . d_i,_a.

    Shape (3, 3, 2).  Uses the same discrete derivative as bending_tensor
    (d_i,_a = omega_a x d_i), which makes the antisymmetry C[i][j] = -C[j][i]
    and the zero diagonal exact.
    """
    _check_cell(grid, cell)
    try:
        omega = _cell_rotation_rate(grid, config, cell)
    except ValueError as err:
        raise ValueError(f"curvature_third_order: cell {cell}: {err}") from err
    Qc = cell_rotation(grid, config, cell)
    d = Qc.T  # d[i] = Qc e_i as rows
    out = np.empty((3, 3, 2))
    for a in range(2):
        rate = np.cross(omega[:, a], d)  # rows: d_i,_a
        out[..., a] = d @ rate.T  # [i, j] -> d_j . d_i,_a needs transpose below
    # out[i, j, a] currently holds d_i . d_j,_a; swap to match C[i][j, a] = d_j . d_i,_a
    return np.swapaxes(out, 0, 1)


def curvature_from_bending(K: np.ndarray) -> np.ndarray:
    """Component map from the bending tensor to the third-order curvature slices.

    The correspondence, established numerically on analytic rotation fields
    (see tests), is C[i][j, a] = eps_ijk K[k, a]: each bending component shows
    up twice with opposite signs and the diagonal slices vanish.
    """
    K = np.asarray(K, dtype=float)
    return np.einsum("ijk,...ka->...ija", _EPS, K)


def bending_from_curvature(C: np.ndarray) -> np.ndarray:
    """Inverse of curvature_from_bending: K[k, a] = 1/2 eps_ijk C[i][j, a]."""
    C = np.asarray(C, dtype=float)
    return 0.5 * np.einsum("ijk,...ija->...ka", _EPS, C)


# ----------------------------------------------------------------------------
# configuration transforms used by tests and the solver


def superpose_rigid_motion(config: Configuration, R: np.ndarray, c: np.ndarray) -> Configuration:
    """Left action (y, Q) -> (R y + c, R Q)."""
    y = np.einsum("ij,...j->...i", R, config.y) + np.asarray(c, dtype=float)
    Q = np.einsum("ij,...jk->...ik", R, config.Q)
    return Configuration(y, Q)


def refine_grid(grid: PlateGrid) -> PlateGrid:
    """Halve the mesh spacing (node counts 2n-1), keeping labels and geometry."""
    return PlateGrid(
        length_x=grid.length_x,
        length_y=grid.length_y,
        nodes_x=2 * grid.nodes_x - 1,
        nodes_y=2 * grid.nodes_y - 1,
        thickness=grid.thickness,
        dirichlet_edges=grid.dirichlet_edges,
    )


def prolong_configuration(coarse: PlateGrid, config: Configuration, fine: PlateGrid) -> Configuration:
    """Interpolate a configuration to the once-refined grid (warm starts).

    y is interpolated bilinearly; rotations by geodesic midpoints along edges
    and a projected mean at cell centers.
    """
    if (fine.nodes_x, fine.nodes_y) != (2 * coarse.nodes_x - 1, 2 * coarse.nodes_y - 1):
        raise ValueError("prolong_configuration: fine grid must be the once-refined coarse grid")
    y = np.zeros((fine.nodes_x, fine.nodes_y, 3))
    y[::2, ::2] = config.y
    y[1::2, ::2] = 0.5 * (config.y[:-1, :] + config.y[1:, :])
    y[::2, 1::2] = 0.5 * (config.y[:, :-1] + config.y[:, 1:])
    y[1::2, 1::2] = 0.25 * (
        config.y[:-1, :-1] + config.y[1:, :-1] + config.y[:-1, 1:] + config.y[1:, 1:]
    )
    Q = np.zeros((fine.nodes_x, fine.nodes_y, 3, 3))
    Qc = config.Q
    Q[::2, ::2] = Qc

    def _midpoint(Qa, Qb):
        return np.einsum(
            "...ij,...jk->...ik",
            exp_so3(0.5 * log_so3(np.einsum("...ij,...kj->...ik", Qb, Qa))),
            Qa,
        )

    Q[1::2, ::2] = _midpoint(Qc[:-1, :], Qc[1:, :])
    Q[::2, 1::2] = _midpoint(Qc[:, :-1], Qc[:, 1:])
    Q[1::2, 1::2] = project_so3(
        0.25 * (Qc[:-1, :-1] + Qc[1:, :-1] + Qc[:-1, 1:] + Qc[1:, 1:])
    )
    return Configuration(y, Q)
