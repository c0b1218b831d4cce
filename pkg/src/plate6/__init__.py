"""Geometrically exact 6-parameter elastic plate: energy minimization over
coupled translation (R^3) and rotation (SO(3)) fields on a rectangular grid."""

from .constitutive import (
    AnisotropicQuadratic,
    CoercivityReport,
    CosseratParams,
    DefinitenessReport,
    EngineeringParams,
    IsotropicCoefficients,
    assemble_quadratic,
    check_coercivity,
    check_definiteness,
    energy_anisotropic,
    energy_cosserat,
    energy_isotropic,
    from_engineering,
    identify_coefficients,
    membrane_quadratic_form,
    stress_resultants,
)
from .functional import (
    BoundaryData,
    EnergyBreakdown,
    LoadSpec,
    apply_boundary,
    energy_gradient,
    load_potential,
    total_energy,
)
from .kinematics import (
    Configuration,
    PlateGrid,
    StrainField,
    bending_tensor,
    curvature_third_order,
    deformation_gradient,
    identity_configuration,
    strain_field,
    strain_tensor,
)
from .so3 import axl, exp_so3, hat, log_so3, project_so3
from .solver import (
    EquivalenceReport,
    GradientCheckReport,
    InvarianceReport,
    ResidualReport,
    SolveReport,
    SolverSettings,
    build_initial_guess,
    equilibrium_residual,
    equivalence_audit,
    gradient_check,
    invariance_check,
    minimize,
)

__version__ = "0.1.0"
