"""Total potential energy, load potentials, boundary conditions, gradient.

The functional is

    I(y, Q) = sum_cells area * W(E, K)  -  Lambda(u, Q),

with the strain energy integrated by the midpoint rule (strains live at cell
centers) and the load potential by the trapezoid rule over nodes / boundary
edges.  The load potential is

    Lambda = int f . u  +  <C_omega, Q>  +  int_free n* . u  +  <C_bnd, Q>,

all linear: the rotation potentials are Frobenius pairings with prescribed
coupling tensors, which represents dead couple loads and is bounded on
SO(3)-valued fields since |Q|^2 = 3.

``energy_gradient`` returns the exact first variation of the discrete
functional: the partial derivative w.r.t. each node position, and per node
the left-trivialized rotation gradient g such that perturbing one node by
Q -> exp(t hat(w)) Q changes the energy at rate w . g.  Everything is closed
form: the chain rule runs through the geodesic edge differences (inverse left
Jacobian of the log) and through the projected corner average (differential
of the polar factor via a 3x3 Sylvester solve).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constitutive import QuadraticMaterial, energy_density, strain_stress
from .kinematics import (
    IDENTITY_3X2,
    Configuration,
    PlateGrid,
    cell_deformation_gradients,
    cell_rotation_means,
    cell_rotation_rates,
    edge_logs,
)
from .so3 import hat, mat_t, project_so3, require_rotation, skew_part_axial, solve3

_SMALL_ANGLE = 1e-4


# ----------------------------------------------------------------------------
# loads and boundary data


@dataclass
class LoadSpec:
    """Dead loads: surface force f, boundary traction n*, couple tensors.

    All fields are full node arrays; ``n_star`` and ``C_boundary`` must vanish
    off the free part of the boundary (they are line densities on it).
    """

    f: np.ndarray  # (nx, ny, 3), force / area
    n_star: np.ndarray  # (nx, ny, 3), force / length, free-boundary nodes only
    C_omega: np.ndarray  # (nx, ny, 3, 3), couple potential density over the domain
    C_boundary: np.ndarray  # (nx, ny, 3, 3), free-boundary nodes only

    @classmethod
    def zeros(cls, grid: PlateGrid) -> "LoadSpec":
        shape = (grid.nodes_x, grid.nodes_y)
        return cls(
            f=np.zeros(shape + (3,)),
            n_star=np.zeros(shape + (3,)),
            C_omega=np.zeros(shape + (3, 3)),
            C_boundary=np.zeros(shape + (3, 3)),
        )

    def validate(self, grid: PlateGrid) -> None:
        shape = (grid.nodes_x, grid.nodes_y)
        for name, arr, tail in (
            ("f", self.f, (3,)),
            ("n_star", self.n_star, (3,)),
            ("C_omega", self.C_omega, (3, 3)),
            ("C_boundary", self.C_boundary, (3, 3)),
        ):
            if arr.shape != shape + tail:
                raise ValueError(f"LoadSpec.{name}: expected shape {shape + tail}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"LoadSpec.{name}: non-finite entries")
        off_free = ~grid.free_boundary_node_mask()
        if np.any(self.n_star[off_free] != 0.0):
            raise ValueError("LoadSpec.n_star: nonzero off the free boundary")
        if np.any(self.C_boundary[off_free] != 0.0):
            raise ValueError("LoadSpec.C_boundary: nonzero off the free boundary")


@dataclass
class BoundaryData:
    """Dirichlet data: positions y*, and rotations Q* in clamped mode.

    ``mode`` is "clamped" (both y and Q prescribed on the Dirichlet edges) or
    "relaxed" (only y prescribed; every rotation stays free).
    """

    mode: str
    y_star: np.ndarray  # (nx, ny, 3); meaningful on Dirichlet nodes
    Q_star: np.ndarray | None = None  # (nx, ny, 3, 3); present iff clamped

    def validate(self, grid: PlateGrid) -> None:
        if self.mode not in ("clamped", "relaxed"):
            raise ValueError(f"BoundaryData.mode: unknown mode {self.mode!r}")
        shape = (grid.nodes_x, grid.nodes_y)
        if self.y_star.shape != shape + (3,) or not np.all(np.isfinite(self.y_star)):
            raise ValueError("BoundaryData.y_star: bad shape or non-finite entries")
        if self.mode == "clamped":
            if self.Q_star is None:
                raise ValueError("BoundaryData: clamped mode needs Q_star")
            if self.Q_star.shape != shape + (3, 3):
                raise ValueError("BoundaryData.Q_star: bad shape")
            dmask = grid.dirichlet_node_mask()
            require_rotation(self.Q_star[dmask], what="BoundaryData.Q_star")
        elif self.Q_star is not None:
            raise ValueError("BoundaryData: relaxed mode must not carry Q_star")

    @classmethod
    def reference(cls, grid: PlateGrid, mode: str = "clamped") -> "BoundaryData":
        """Boundary data that pins the reference state (y* = x, Q* = 1)."""
        y_star = grid.reference_positions()
        if mode == "clamped":
            Q_star = np.broadcast_to(np.eye(3), (grid.nodes_x, grid.nodes_y, 3, 3)).copy()
            return cls("clamped", y_star, Q_star)
        return cls("relaxed", y_star, None)


def apply_boundary(grid: PlateGrid, config: Configuration, bd: BoundaryData) -> Configuration:
    """Overwrite Dirichlet nodes with the prescribed data (idempotent)."""
    out = config.copy()
    dmask = grid.dirichlet_node_mask()
    out.y[dmask] = bd.y_star[dmask]
    if bd.mode == "clamped":
        out.Q[dmask] = bd.Q_star[dmask]
    return out


def fixed_dof_masks(grid: PlateGrid, bd: BoundaryData) -> tuple[np.ndarray, np.ndarray]:
    """(fixed positions, fixed rotations) node masks for the admissible set."""
    dmask = grid.dirichlet_node_mask()
    fixed_q = dmask if bd.mode == "clamped" else np.zeros_like(dmask)
    return dmask, fixed_q


# ----------------------------------------------------------------------------
# quadrature weights


def node_quadrature_weights(grid: PlateGrid) -> np.ndarray:
    """Tensor-product trapezoid weights for integrals over the domain."""
    cx = np.ones(grid.nodes_x)
    cx[0] = cx[-1] = 0.5
    cy = np.ones(grid.nodes_y)
    cy[0] = cy[-1] = 0.5
    return grid.cell_area * cx[:, None] * cy[None, :]


def boundary_quadrature_weights(grid: PlateGrid) -> np.ndarray:
    """Trapezoid weights for line integrals over the free part of the boundary.

    A corner shared by two free edges accumulates half-segment weights from
    both; a corner where a free edge meets a Dirichlet edge still carries the
    free edge's half segment (the segment belongs to the free boundary).
    """
    w = np.zeros((grid.nodes_x, grid.nodes_y))
    for edge in grid.free_edges:
        c = np.ones(grid.nodes_y if edge in ("left", "right") else grid.nodes_x)
        c[0] = c[-1] = 0.5
        if edge == "left":
            w[0, :] += grid.hy * c
        elif edge == "right":
            w[-1, :] += grid.hy * c
        elif edge == "bottom":
            w[:, 0] += grid.hx * c
        else:
            w[:, -1] += grid.hx * c
    return w


# ----------------------------------------------------------------------------
# energy


@dataclass
class EnergyBreakdown:
    membrane: float
    bending: float
    load_potential: float

    @property
    def total(self) -> float:
        return self.membrane + self.bending - self.load_potential


def internal_energy(grid: PlateGrid, config: Configuration, material: QuadraticMaterial):
    """Midpoint-rule strain energy, returned as (membrane, bending)."""
    F = cell_deformation_gradients(grid, config.y)
    Qc = project_so3(cell_rotation_means(grid, config.Q))
    v1, v2 = edge_logs(grid, config.Q)
    omega = cell_rotation_rates(grid, v1, v2)
    QcT = mat_t(Qc)
    E = QcT @ F - IDENTITY_3X2
    K = QcT @ omega
    wm, wb = energy_density(E, K, material)
    area = grid.cell_area
    return area * float(np.sum(wm)), area * float(np.sum(wb))


def load_potential(grid: PlateGrid, config: Configuration, loads: LoadSpec) -> float:
    """Trapezoid-rule load potential Lambda(u, Q) with u = y - x."""
    u = config.y - grid.reference_positions()
    wf = node_quadrature_weights(grid)
    wb = boundary_quadrature_weights(grid)
    value = float(np.sum(wf * np.einsum("...i,...i->...", loads.f, u)))
    value += float(np.sum(wb * np.einsum("...i,...i->...", loads.n_star, u)))
    value += float(np.sum(wf * np.einsum("...ij,...ij->...", loads.C_omega, config.Q)))
    value += float(np.sum(wb * np.einsum("...ij,...ij->...", loads.C_boundary, config.Q)))
    return value


def total_energy(
    grid: PlateGrid,
    config: Configuration,
    material: QuadraticMaterial,
    loads: LoadSpec,
) -> EnergyBreakdown:
    membrane, bending = internal_energy(grid, config, material)
    return EnergyBreakdown(membrane, bending, load_potential(grid, config, loads))


# ----------------------------------------------------------------------------
# gradient


def _jacobian_coeff(theta: np.ndarray) -> np.ndarray:
    """c(theta) in  J_l(v)^-1 = 1 - hat(v)/2 + c hat(v)^2,  series near zero."""
    small = theta < _SMALL_ANGLE
    theta_safe = np.where(small, 1.0, theta)
    half = 0.5 * theta_safe
    closed = (1.0 - half * np.cos(half) / np.sin(half)) / (theta_safe * theta_safe)
    theta2 = theta * theta
    return np.where(small, 1.0 / 12.0 + theta2 / 720.0, closed)


def _edge_pullbacks(v: np.ndarray, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Chain rule through one geodesic edge increment v = log(Q_b Q_a^T).

    Given the sensitivity m of the energy to v, returns the gradient
    contributions (to node b, to node a):  J_l^-T(v) m  and  -J_l^-1(v) m.
    """
    theta = np.linalg.norm(v, axis=-1)
    c = _jacobian_coeff(theta)[..., None]
    vxm = np.cross(v, m)
    vvxm = np.cross(v, vxm)
    to_b = m + 0.5 * vxm + c * vvxm
    from_a = m - 0.5 * vxm + c * vvxm
    return to_b, -from_a


def internal_energy_gradient(
    grid: PlateGrid, config: Configuration, material: QuadraticMaterial
) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradient of the discrete strain energy (no loads).

    Returns (g_y, g_q) with shapes (nx, ny, 3): per-node position derivative
    and left-trivialized rotation derivative.
    """
    hx, hy, area = grid.hx, grid.hy, grid.cell_area
    nx, ny = grid.nodes_x, grid.nodes_y

    F = cell_deformation_gradients(grid, config.y)
    S = cell_rotation_means(grid, config.Q)
    Qc = project_so3(S)
    v1, v2 = edge_logs(grid, config.Q)
    omega = cell_rotation_rates(grid, v1, v2)
    QcT = mat_t(Qc)
    QcTF = QcT @ F
    E = QcTF - IDENTITY_3X2
    K = QcT @ omega
    GE, GK = strain_stress(E, K, material)
    # spatial resultants: dW through F and through omega
    N = Qc @ GE
    M = Qc @ GK

    # --- position gradient: scatter +-N columns through the F stencil
    g_y = np.zeros((nx, ny, 3))
    c1 = area / (2.0 * hx) * N[..., 0]
    c2 = area / (2.0 * hy) * N[..., 1]
    g_y[:-1, :-1] += -c1 - c2
    g_y[1:, :-1] += c1 - c2
    g_y[:-1, 1:] += -c1 + c2
    g_y[1:, 1:] += c1 + c2

    g_q = np.zeros((nx, ny, 3))

    # --- rotation gradient, part 1: geodesic edge increments
    # energy sensitivity to each raw edge log (cells average two parallel edges)
    m1 = np.zeros((nx - 1, ny, 3))
    cm1 = area / (2.0 * hx) * M[..., 0]
    m1[:, :-1] += cm1
    m1[:, 1:] += cm1
    m2 = np.zeros((nx, ny - 1, 3))
    cm2 = area / (2.0 * hy) * M[..., 1]
    m2[:-1, :] += cm2
    m2[1:, :] += cm2

    to_b, to_a = _edge_pullbacks(v1, m1)
    g_q[1:, :] += to_b
    g_q[:-1, :] += to_a
    to_b, to_a = _edge_pullbacks(v2, m2)
    g_q[:, 1:] += to_b
    g_q[:, :-1] += to_a

    # --- rotation gradient, part 2: projected corner average
    # Differential of the polar factor: dQc = Qc hat(x) with
    # ((tr H) 1 - H) x = 2 axl(skew(Qc^T dS)), H = sym(Qc^T S).
    T = QcTF @ mat_t(GE) + K @ mat_t(GK)
    t = 2.0 * skew_part_axial(T)
    H = QcT @ S
    H = 0.5 * (H + mat_t(H))
    trH = np.einsum("...ii->...", H)
    B = trH[..., None, None] * np.eye(3) - H
    s = solve3(B, t)
    hat_s = hat(s)
    corners = ((0, 0), (1, 0), (0, 1), (1, 1))
    for di, dj in corners:
        Qk = config.Q[di : di + nx - 1, dj : dj + ny - 1]
        RkT = mat_t(Qk) @ Qc  # (Qc^T Qk)^T
        contrib = 0.5 * area * (Qc @ skew_part_axial(hat_s @ RkT)[..., None])[..., 0]
        g_q[di : di + nx - 1, dj : dj + ny - 1] += contrib

    return g_y, g_q


def load_gradient(
    grid: PlateGrid, config: Configuration, loads: LoadSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the load potential Lambda (linear in u, linear in Q)."""
    wf = node_quadrature_weights(grid)[..., None]
    wb = boundary_quadrature_weights(grid)[..., None]
    g_y = wf * loads.f + wb * loads.n_star
    QT = mat_t(config.Q)
    g_q = 2.0 * (
        wf * skew_part_axial(loads.C_omega @ QT)
        + wb * skew_part_axial(loads.C_boundary @ QT)
    )
    return g_y, g_q


def energy_gradient(
    grid: PlateGrid,
    config: Configuration,
    material: QuadraticMaterial,
    loads: LoadSpec,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the total functional I = internal - Lambda.

    Dirichlet-fixed degrees of freedom are reported like any other; masking
    is the solver's job.
    """
    g_y, g_q = internal_energy_gradient(grid, config, material)
    ly, lq = load_gradient(grid, config, loads)
    return g_y - ly, g_q - lq
