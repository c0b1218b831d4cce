"""First-order minimization over the product manifold and verification tools.

The minimizer walks translations in R^3 and rotations on SO(3): positions
update additively, rotations by the exact exponential retraction
Q <- exp_so3(t d) Q, with Armijo backtracking on the total energy, so every
accepted step decreases the functional.  Fixed (Dirichlet) degrees of freedom
are never touched.  Directions are either steepest descent or Polak-Ribiere
nonlinear CG, optionally measured in a constant diagonal metric built from
the material stiffness scales (this only reshapes the descent directions;
convergence is always declared on the raw gradient norm per free DOF).

Verification tools: finite-difference gradient check, superposed-rigid-motion
invariance check, pointwise equilibrium residual (force and moment balance,
with the divergence taken as the exact discrete adjoint of the strain
stencil), and the numerical audit that the micropolar energy coincides with
the quadratic isotropic plate energy under the coefficient identification.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .constitutive import (
    CosseratParams,
    IsotropicCoefficients,
    QuadraticMaterial,
    bending_hessian,
    energy_density,
    energy_cosserat,
    energy_isotropic,
    identify_coefficients,
    membrane_hessian,
    stress_resultants,
)
from .functional import (
    BoundaryData,
    EnergyBreakdown,
    LoadSpec,
    apply_boundary,
    energy_gradient,
    fixed_dof_masks,
    internal_energy,
    node_quadrature_weights,
    total_energy,
)
from .kinematics import (
    Configuration,
    PlateGrid,
    cell_deformation_gradients,
    cell_rotation_means,
    cell_rotation_rates,
    curvature_from_bending,
    edge_logs,
    identity_configuration,
    strain_field,
    superpose_rigid_motion,
    IDENTITY_3X2,
)
from .so3 import (
    exp_so3,
    log_so3,
    mat_t,
    project_so3,
    random_rotation,
    rotation_defect,
    skew_part_axial,
)

_DRIFT_TOL = 1e-9


# ----------------------------------------------------------------------------
# settings and reports


@dataclass
class SolverSettings:
    max_iterations: int = 5000
    grad_tolerance: float = 1e-8  # RMS gradient over the free DOFs
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    method: str = "nonlinear_cg"  # or "gradient_descent"
    seed: int = 0
    use_diagonal_metric: bool = True
    min_step: float = 1e-16
    drift_check_interval: int = 64

    def validate(self) -> None:
        if not (0.0 < self.armijo_c < 1.0):
            raise ValueError("SolverSettings: armijo_c must lie in (0, 1)")
        if not (0.0 < self.backtrack_factor < 1.0):
            raise ValueError("SolverSettings: backtrack_factor must lie in (0, 1)")
        if not (self.grad_tolerance > 0 and self.initial_step > 0 and self.min_step > 0):
            raise ValueError("SolverSettings: tolerances and steps must be positive")
        if self.method not in ("gradient_descent", "nonlinear_cg"):
            raise ValueError(f"SolverSettings: unknown method {self.method!r}")
        if self.max_iterations < 0:
            raise ValueError("SolverSettings: max_iterations must be nonnegative")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    energy_history: list
    final_grad_norm: float
    final_breakdown: EnergyBreakdown
    wall_time: float
    message: str = ""
    # per-iteration rows: (iteration, total, membrane, bending, load_potential,
    # grad_norm, step); row 0 is the initial state
    history: list = field(default_factory=list)


@dataclass
class ResidualReport:
    """Pointwise equilibrium defect: force and moment balance per node.

    Norms are taken over interior nodes only; boundary rows of the arrays
    carry natural-boundary-condition content instead of the field equations.
    """

    force_residual: np.ndarray  # (nx, ny, 3)
    moment_residual: np.ndarray  # (nx, ny, 3)
    force_max: float
    force_l2: float
    moment_max: float
    moment_l2: float

    @property
    def max_norm(self) -> float:
        return max(self.force_max, self.moment_max)

    @property
    def l2_norm(self) -> float:
        return float(np.hypot(self.force_l2, self.moment_l2))


# ----------------------------------------------------------------------------
# initial guess


def build_initial_guess(grid: PlateGrid, bd: BoundaryData) -> Configuration:
    """Admissible starting point: y = x blended to y*, rotations near identity.

    The displacement blend is a transfinite-style interpolation of the
    Dirichlet edge data (free edges contribute zero); in clamped mode the
    rotation field takes the geodesic half-step toward Q* on the node layer
    adjacent to each Dirichlet edge.  apply_boundary is called last, so the
    result satisfies the boundary conditions exactly.
    """
    config = identity_configuration(grid)
    x = grid.reference_positions()
    u_star = bd.y_star - x

    nx, ny = grid.nodes_x, grid.nodes_y
    xi = (np.arange(nx) / (nx - 1))[:, None, None]
    eta = (np.arange(ny) / (ny - 1))[None, :, None]

    def edge_term(name, data):
        return data if name in grid.dirichlet_edges else np.zeros_like(data)

    uL = edge_term("left", u_star[0, :])[None, :, :]
    uR = edge_term("right", u_star[-1, :])[None, :, :]
    uB = edge_term("bottom", u_star[:, 0])[:, None, :]
    uT = edge_term("top", u_star[:, -1])[:, None, :]
    dmask = grid.dirichlet_node_mask()

    def corner(i, j):
        return u_star[i, j] if dmask[i, j] else np.zeros(3)

    blend = (1 - xi) * uL + xi * uR + (1 - eta) * uB + eta * uT
    blend -= (
        (1 - xi) * (1 - eta) * corner(0, 0)
        + xi * (1 - eta) * corner(-1, 0)
        + (1 - xi) * eta * corner(0, -1)
        + xi * eta * corner(-1, -1)
    )
    config.y = x + blend

    if bd.mode == "clamped":
        # one-cell geodesic blend: the first interior layer takes the half
        # rotation toward the adjacent boundary value (skipped at angle pi)
        layers = {
            "left": (config.Q[1, :], bd.Q_star[0, :]),
            "right": (config.Q[-2, :], bd.Q_star[-1, :]),
            "bottom": (config.Q[:, 1], bd.Q_star[:, 0]),
            "top": (config.Q[:, -2], bd.Q_star[:, -1]),
        }
        for edge in sorted(grid.dirichlet_edges):
            target, q_star = layers[edge]
            trace = q_star[..., 0, 0] + q_star[..., 1, 1] + q_star[..., 2, 2]
            safe = trace > -1.0 + 1e-6
            if np.any(safe):
                half = exp_so3(0.5 * log_so3(q_star[safe]))
                target[safe] = half

    return apply_boundary(grid, config, bd)


# ----------------------------------------------------------------------------
# minimization


def _free_dof_count(fixed_y: np.ndarray, fixed_q: np.ndarray) -> int:
    return 3 * int(np.sum(~fixed_y)) + 3 * int(np.sum(~fixed_q))


def _grad_rms(gy: np.ndarray, gq: np.ndarray, n_free: int) -> float:
    total = float(np.sum(gy * gy) + np.sum(gq * gq))
    return np.sqrt(total / max(n_free, 1))


def _dot(ay, aq, by, bq) -> float:
    return float(np.sum(ay * by) + np.sum(aq * bq))


def _stiffness_scales(material: QuadraticMaterial) -> tuple[float, float]:
    """Largest membrane / bending Hessian eigenvalues (equal for coupled forms)."""
    if isinstance(material, IsotropicCoefficients):
        lam_e = float(np.linalg.eigvalsh(membrane_hessian(material))[-1])
        lam_k = float(np.linalg.eigvalsh(bending_hessian(material))[-1])
        return lam_e, lam_k
    lam = float(np.linalg.eigvalsh(material.matrix)[-1])
    return lam, lam


def diagonal_metric(grid: PlateGrid, material: QuadraticMaterial) -> tuple[np.ndarray, np.ndarray]:
    """Per-node diagonal stiffness scales used as a constant metric.

    Rough upper bounds on the energy Hessian diagonal: membrane stiffness
    acts on position DOFs through the 1/h difference stencil, bending
    stiffness on rotation DOFs likewise, and transverse shear couples into
    rotations without a 1/h factor.  Only the relative scale matters.
    """
    lam_e, lam_k = _stiffness_scales(material)
    k_geo = (0.5 / grid.hx) ** 2 + (0.5 / grid.hy) ** 2
    cx = np.full(grid.nodes_x, 2.0)
    cx[0] = cx[-1] = 1.0
    cy = np.full(grid.nodes_y, 2.0)
    cy[0] = cy[-1] = 1.0
    cells_per_node = cx[:, None] * cy[None, :]
    base = cells_per_node * grid.cell_area
    m_y = base * lam_e * k_geo
    m_q = base * (lam_k * k_geo + 0.5 * lam_e)
    floor = 1e-300
    return np.maximum(m_y, floor)[..., None], np.maximum(m_q, floor)[..., None]


def _locate_nonfinite_cell(grid: PlateGrid, config: Configuration, material: QuadraticMaterial):
    try:
        st = strain_field(grid, config)
        wm, wb = energy_density(st.E, st.K, material)
        bad = np.argwhere(~np.isfinite(wm + wb))
        if len(bad):
            return int(bad[0][0]), int(bad[0][1])
    except ValueError:
        pass
    return None


def minimize(
    grid: PlateGrid,
    material: QuadraticMaterial,
    loads: LoadSpec,
    boundary: BoundaryData,
    settings: SolverSettings,
    initial: Configuration | None = None,
) -> tuple[Configuration, SolveReport]:
    """Minimize the total energy over the admissible set.

    Returns the final configuration and a report whose energy history is
    non-increasing (Armijo guarantee).  Line-search failure and non-finite
    energies are reported loudly, never silently.
    """
    settings.validate()
    t_start = time.perf_counter()
    if initial is None:
        initial = build_initial_guess(grid, boundary)
    config = apply_boundary(grid, initial, boundary)
    fixed_y, fixed_q = fixed_dof_masks(grid, boundary)
    free_y, free_q = ~fixed_y, ~fixed_q
    n_free = _free_dof_count(fixed_y, fixed_q)

    if settings.use_diagonal_metric:
        metric_y, metric_q = diagonal_metric(grid, material)
    else:
        metric_y = metric_q = np.ones((1, 1, 1))

    def evaluate(cfg: Configuration) -> EnergyBreakdown:
        bd = total_energy(grid, cfg, material, loads)
        if not np.isfinite(bd.total):
            cell = _locate_nonfinite_cell(grid, cfg, material)
            raise RuntimeError(f"minimize: non-finite energy at cell {cell}")
        return bd

    def try_evaluate(cfg: Configuration) -> EnergyBreakdown | None:
        # a trial step may leave the functional's domain (rotation jump at or
        # beyond pi, degenerate cell average); treat that as +inf and backtrack
        try:
            return evaluate(cfg)
        except ValueError:
            return None

    breakdown = evaluate(config)
    energy = breakdown.total
    history_rows = [
        [0, energy, breakdown.membrane, breakdown.bending, breakdown.load_potential, np.nan, 0.0]
    ]
    energy_history = [energy]

    converged = False
    message = ""
    iterations = 0
    grad_norm = np.nan
    step = settings.initial_step
    prev_g = prev_p = prev_d = None

    for it in range(settings.max_iterations + 1):
        gy, gq = energy_gradient(grid, config, material, loads)
        gy[fixed_y] = 0.0
        gq[fixed_q] = 0.0
        grad_norm = _grad_rms(gy, gq, n_free)
        history_rows[-1][5] = grad_norm

        if grad_norm < settings.grad_tolerance:
            converged = True
            break
        if it == settings.max_iterations:
            message = f"iteration limit reached at gradient norm {grad_norm:.3e}"
            break

        py, pq = gy / metric_y, gq / metric_q
        conjugate = False
        if settings.method == "nonlinear_cg" and prev_g is not None:
            gpy, gpq = prev_g
            ppy, ppq = prev_p
            denom = _dot(gpy, gpq, ppy, ppq)
            beta = _dot(gy, gq, py - ppy, pq - ppq) / denom if denom > 0 else 0.0
            beta = max(0.0, beta)
            dy = -py + beta * prev_d[0]
            dq = -pq + beta * prev_d[1]
            conjugate = beta > 0.0
            if _dot(gy, gq, dy, dq) >= 0.0:
                dy, dq = -py, -pq
                conjugate = False
        else:
            dy, dq = -py, -pq

        slope = _dot(gy, gq, dy, dq)

        def line_search(dy, dq, slope, t):
            while t >= settings.min_step:
                trial = config.copy()
                trial.y[free_y] = config.y[free_y] + t * dy[free_y]
                trial.Q[free_q] = exp_so3(t * dq[free_q]) @ config.Q[free_q]
                trial_breakdown = try_evaluate(trial)
                if (
                    trial_breakdown is not None
                    and trial_breakdown.total <= energy + settings.armijo_c * t * slope
                ):
                    return trial, trial_breakdown, t
                t *= settings.backtrack_factor
            return None, None, t

        t0 = min(2.0 * step, 1e12) if it > 0 else settings.initial_step
        trial, trial_breakdown, t = line_search(dy, dq, slope, t0)
        if trial is None and conjugate:
            # a stale conjugate direction can stall; retry along steepest descent
            dy, dq = -py, -pq
            slope = _dot(gy, gq, dy, dq)
            prev_g = None
            trial, trial_breakdown, t = line_search(dy, dq, slope, t0)
        if trial is None:
            message = (
                f"line search failed at iteration {it}: no decrease above step "
                f"{settings.min_step:.1e} (gradient norm {grad_norm:.3e})"
            )
            break

        config = trial
        breakdown = trial_breakdown
        energy = breakdown.total
        step = t
        iterations = it + 1
        energy_history.append(energy)
        history_rows.append(
            [iterations, energy, breakdown.membrane, breakdown.bending,
             breakdown.load_potential, np.nan, t]
        )
        prev_g, prev_p, prev_d = (gy, gq), (py, pq), (dy, dq)

        if iterations % settings.drift_check_interval == 0:
            if float(np.max(rotation_defect(config.Q))) > _DRIFT_TOL:
                config.Q = project_so3(config.Q)
                config = apply_boundary(grid, config, boundary)
                breakdown = evaluate(config)
                energy = breakdown.total

    # final manifold upkeep: re-project if accumulated drift got visible
    if float(np.max(rotation_defect(config.Q))) > _DRIFT_TOL:
        config.Q = project_so3(config.Q)
        config = apply_boundary(grid, config, boundary)
        breakdown = evaluate(config)

    report = SolveReport(
        converged=converged,
        iterations=iterations,
        energy_history=energy_history,
        final_grad_norm=float(grad_norm),
        final_breakdown=breakdown,
        wall_time=time.perf_counter() - t_start,
        message=message,
        history=history_rows,
    )
    return config, report


# ----------------------------------------------------------------------------
# equilibrium residual


def _adjoint_divergence(grid: PlateGrid, X: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Discrete surface divergence of a cell field, exact adjoint of the
    strain stencil: integrating it against nodal test values reproduces minus
    the energy pairing, so at a minimizer the force residual is the (scaled)
    gradient."""
    nx, ny = grid.nodes_x, grid.nodes_y
    out = np.zeros((nx, ny, 3))
    c1 = grid.cell_area / (2.0 * grid.hx) * X[..., 0]
    c2 = grid.cell_area / (2.0 * grid.hy) * X[..., 1]
    out[:-1, :-1] += c1 + c2
    out[1:, :-1] += -c1 + c2
    out[:-1, 1:] += c1 - c2
    out[1:, 1:] += -c1 - c2
    return out / weights[..., None]


def _cells_to_nodes(grid: PlateGrid, X: np.ndarray) -> np.ndarray:
    """Average a cell array to nodes (4/2/1 adjacent cells inside/edge/corner)."""
    nx, ny = grid.nodes_x, grid.nodes_y
    out = np.zeros((nx, ny) + X.shape[2:])
    out[:-1, :-1] += X
    out[1:, :-1] += X
    out[:-1, 1:] += X
    out[1:, 1:] += X
    cx = np.full(nx, 2.0)
    cx[0] = cx[-1] = 1.0
    cy = np.full(ny, 2.0)
    cy[0] = cy[-1] = 1.0
    counts = cx[:, None] * cy[None, :]
    return out / counts.reshape((nx, ny) + (1,) * (X.ndim - 2))


def equilibrium_residual(
    grid: PlateGrid,
    config: Configuration,
    material: QuadraticMaterial,
    loads: LoadSpec | None = None,
    couple_field: np.ndarray | None = None,
) -> ResidualReport:
    """Force and moment balance defect of a configuration.

    The couple field defaults to the one induced by the rotation load
    potential (zero when no couple tensor is prescribed).
    """
    if loads is None:
        loads = LoadSpec.zeros(grid)
    F = cell_deformation_gradients(grid, config.y)
    Qc = project_so3(cell_rotation_means(grid, config.Q))
    v1, v2 = edge_logs(grid, config.Q)
    omega = cell_rotation_rates(grid, v1, v2)
    QcT = mat_t(Qc)
    E = QcT @ F - IDENTITY_3X2
    K = QcT @ omega
    N, M = stress_resultants(E, K, Qc, material)

    weights = node_quadrature_weights(grid)
    force = _adjoint_divergence(grid, N, weights) + loads.f

    if couple_field is None:
        couple_field = 2.0 * skew_part_axial(loads.C_omega @ mat_t(config.Q))
    N_node = _cells_to_nodes(grid, N)
    F_node = _cells_to_nodes(grid, F)
    spin = 2.0 * skew_part_axial(N_node @ mat_t(F_node))
    moment = _adjoint_divergence(grid, M, weights) + spin + couple_field

    interior = np.zeros((grid.nodes_x, grid.nodes_y), dtype=bool)
    interior[1:-1, 1:-1] = True
    f_int = force[interior]
    m_int = moment[interior]
    w_int = weights[interior]
    f_norms = np.linalg.norm(f_int, axis=-1)
    m_norms = np.linalg.norm(m_int, axis=-1)
    return ResidualReport(
        force_residual=force,
        moment_residual=moment,
        force_max=float(np.max(f_norms)) if f_norms.size else 0.0,
        force_l2=float(np.sqrt(np.sum(w_int * f_norms**2))),
        moment_max=float(np.max(m_norms)) if m_norms.size else 0.0,
        moment_l2=float(np.sqrt(np.sum(w_int * m_norms**2))),
    )


# ----------------------------------------------------------------------------
# gradient check


@dataclass
class GradientCheckReport:
    max_rel_error: float
    max_abs_error: float
    directions: int
    eligible: int
    step: float


def gradient_check(
    grid: PlateGrid,
    config: Configuration,
    material: QuadraticMaterial,
    loads: LoadSpec,
    step: float | None = None,
    directions: int = 20,
    seed: int = 0,
    boundary: BoundaryData | None = None,
    abs_floor: float = 1e-10,
) -> GradientCheckReport:
    """Central finite differences of the total energy vs energy_gradient.

    Directions are random unit tangents, masked to the free DOFs if boundary
    data is given.  Relative errors are taken only where the directional
    derivative stands clear of both the finite-difference roundoff floor and
    ``abs_floor``; near a stationary point every direction falls below the
    floor and the absolute defect is the meaningful number.
    """
    if step is None:
        scale = 1.0 + float(np.max(np.abs(config.y)))
        step = 1e-6 * scale
    rng = np.random.default_rng(seed)
    gy, gq = energy_gradient(grid, config, material, loads)
    if boundary is not None:
        fixed_y, fixed_q = fixed_dof_masks(grid, boundary)
    else:
        fixed_y = np.zeros((grid.nodes_x, grid.nodes_y), dtype=bool)
        fixed_q = fixed_y
    gy = gy.copy()
    gq = gq.copy()
    gy[fixed_y] = 0.0
    gq[fixed_q] = 0.0

    max_rel = 0.0
    max_abs = 0.0
    eligible = 0
    eps = np.finfo(float).eps
    for _ in range(directions):
        dy = rng.standard_normal(gy.shape)
        dq = rng.standard_normal(gq.shape)
        dy[fixed_y] = 0.0
        dq[fixed_q] = 0.0
        norm = np.sqrt(np.sum(dy * dy) + np.sum(dq * dq))
        dy /= norm
        dq /= norm

        analytic = _dot(gy, gq, dy, dq)

        def shifted(sign: float) -> float:
            cfg = config.copy()
            cfg.y = config.y + sign * step * dy
            cfg.Q = exp_so3(sign * step * dq) @ config.Q
            return total_energy(grid, cfg, material, loads).total

        e_plus = shifted(+1.0)
        e_minus = shifted(-1.0)
        fd = (e_plus - e_minus) / (2.0 * step)
        defect = abs(fd - analytic)
        max_abs = max(max_abs, defect)
        noise = eps * (abs(e_plus) + abs(e_minus)) / (2.0 * step)
        denom = max(abs(analytic), abs(fd))
        if denom > max(1e4 * noise, abs_floor):
            eligible += 1
            max_rel = max(max_rel, defect / denom)
    return GradientCheckReport(max_rel, max_abs, directions, eligible, step)


# ----------------------------------------------------------------------------
# invariance under superposed rigid motions


@dataclass
class InvarianceReport:
    max_energy_rel_change: float
    max_strain_change: float
    motions: int
    passed: bool


def invariance_check(
    grid: PlateGrid,
    config: Configuration,
    material: QuadraticMaterial,
    motions: int = 20,
    seed: int = 0,
    energy_tol: float = 1e-12,
    strain_tol: float = 1e-10,
) -> InvarianceReport:
    """Superpose random rigid motions and measure internal-energy drift.

    The internal energy and the strain fields are left-invariant; the load
    potential is not, so only the internal part is compared.  The relative
    drift is measured against the base energy or, when that is itself at
    roundoff (strain-free states), against the machine floor of the energy
    evaluation.
    """
    rng = np.random.default_rng(seed)
    base = strain_field(grid, config)
    mem0, bend0 = internal_energy(grid, config, material)
    base_energy = mem0 + bend0
    lam_e, lam_k = _stiffness_scales(material)
    area = grid.length_x * grid.length_y
    energy_floor = np.finfo(float).eps * area * max(lam_e, lam_k, 1e-300)
    scale = max(1.0, float(np.max(np.abs(config.y))))
    worst_energy = 0.0
    worst_strain = 0.0
    for _ in range(motions):
        R = random_rotation(rng)
        c = scale * rng.standard_normal(3)
        moved = superpose_rigid_motion(config, R, c)
        mem, bend = internal_energy(grid, moved, material)
        denom = max(abs(base_energy), energy_floor)
        worst_energy = max(worst_energy, abs(mem + bend - base_energy) / denom)
        st = strain_field(grid, moved)
        worst_strain = max(
            worst_strain,
            float(np.max(np.abs(st.E - base.E))),
            float(np.max(np.abs(st.K - base.K))),
        )
    passed = worst_energy <= energy_tol and worst_strain <= strain_tol
    return InvarianceReport(worst_energy, worst_strain, motions, passed)


# ----------------------------------------------------------------------------
# micropolar <-> quadratic isotropic equivalence audit


@dataclass
class EquivalenceReport:
    fitted_shear_correction: float
    max_rel_discrepancy: float
    shear_sensitive: bool  # False when the samples cannot see the shear factor
    coupling_identity_error: float  # alpha3 - alpha2 - 2 h mu_c
    samples: int
    seed: int


def equivalence_audit(
    cp: CosseratParams,
    samples: int = 10000,
    seed: int = 0,
    strain_scale: float = 0.5,
    membrane_only: bool = False,
) -> EquivalenceReport:
    """Compare the micropolar energy against the identified quadratic energy.

    Random strain pairs (E, K) are pushed through both densities; the shear
    correction factor is the only free parameter of the identification, and
    it multiplies exactly the transverse-shear invariant, so the best value
    has a closed least-squares form.  ``membrane_only`` restricts samples to
    K = 0 and vanishing transverse shear rows, where the factor drops out.
    """
    if cp.p != 1.0 or cp.a4 != 0.0:
        raise ValueError("equivalence_audit: requires p = 1 and a4 = 0")
    rng = np.random.default_rng(seed)
    E = strain_scale * (2.0 * rng.random((samples, 3, 2)) - 1.0)
    K = strain_scale * (2.0 * rng.random((samples, 3, 2)) - 1.0)
    if membrane_only:
        E[:, 2, :] = 0.0
        K[:] = 0.0

    base = identify_coefficients(cp, kappa=0.0)
    iso0 = energy_isotropic(E, K, base)[0]
    # shear-factor sensitivity: d(iso)/d(kappa)
    b = 0.5 * cp.thickness * (cp.mu + cp.mu_c) * (E[:, 2, 0] ** 2 + E[:, 2, 1] ** 2)

    Ubar_minus_1 = np.zeros((samples, 3, 3))
    Ubar_minus_1[..., :, :2] = E
    Ks = curvature_from_bending(K)
    cos = energy_cosserat(Ubar_minus_1, Ks, cp)

    bb = float(np.sum(b * b))
    if bb > 0.0:
        kappa_hat = float(np.sum(b * (cos - iso0)) / bb)
        sensitive = True
    else:
        kappa_hat = cp.kappa
        sensitive = False

    diff = np.abs(iso0 + kappa_hat * b - cos)
    denom = np.maximum(np.abs(cos), 1e-300)
    max_rel = float(np.max(diff / denom)) if samples else 0.0

    ident = identify_coefficients(replace(cp, kappa=kappa_hat) if sensitive else cp)
    eq_err = (ident.alpha[2] - ident.alpha[1]) - 2.0 * cp.thickness * cp.mu_c
    return EquivalenceReport(
        fitted_shear_correction=kappa_hat,
        max_rel_discrepancy=max_rel,
        shear_sensitive=sensitive,
        coupling_identity_error=float(eq_err),
        samples=samples,
        seed=seed,
    )
