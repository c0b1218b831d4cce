"""Strain-energy densities, coefficient conversions, and validity checks.

Supported material descriptions:

- ``IsotropicCoefficients``: quadratic isotropic plate energy with four
  membrane moduli (force/length) and four bending moduli (force*length).
  The energy splits additively into a membrane part, quadratic in the strain
  tensor E, and a bending part, quadratic in the bending tensor K.
- ``EngineeringParams``: Young modulus / Poisson ratio / thickness plus two
  shear correction factors; converts to IsotropicCoefficients.
- ``CosseratParams``: micropolar plate energy in terms of the stretch measure
  and the third-order curvature slices, with an internal length and a
  power-law curvature term.
- ``AnisotropicQuadratic``: arbitrary symmetric 12x12 quadratic form acting
  on the stacked strain vector.

Stacked component ordering (fixed, used for the 12-vector, the Hessians and
file I/O): column-major over (i, a), i.e.

    (E11, E21, E31, E12, E22, E32, K11, K21, K31, K12, K22, K32).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

_SHEAR_CORRECTION_DEFAULT = 5.0 / 6.0
_TWIST_CORRECTION_DEFAULT = 7.0 / 10.0


# ----------------------------------------------------------------------------
# material parameter containers


@dataclass(frozen=True)
class IsotropicCoefficients:
    """Membrane moduli alpha[0..3] and bending moduli beta[0..3]."""

    alpha: tuple
    beta: tuple

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        beta = tuple(float(b) for b in self.beta)
        if len(alpha) != 4 or len(beta) != 4:
            raise ValueError("IsotropicCoefficients: need 4 membrane and 4 bending moduli")
        if not all(math.isfinite(v) for v in alpha + beta):
            raise ValueError("IsotropicCoefficients: non-finite modulus")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)


@dataclass(frozen=True)
class EngineeringParams:
    """Isotropic plate in engineering form: E, nu, thickness, shear corrections."""

    young_modulus: float
    poisson_ratio: float
    thickness: float
    shear_correction: float = _SHEAR_CORRECTION_DEFAULT
    twist_correction: float = _TWIST_CORRECTION_DEFAULT

    def __post_init__(self):
        if not (self.young_modulus > 0):
            raise ValueError("EngineeringParams: Young modulus must be positive")
        if not (-1.0 < self.poisson_ratio < 0.5):
            raise ValueError("EngineeringParams: Poisson ratio must lie in (-1, 1/2)")
        if not (self.thickness > 0):
            raise ValueError("EngineeringParams: thickness must be positive")
        if not (self.shear_correction > 0 and self.twist_correction > 0):
            raise ValueError("EngineeringParams: shear correction factors must be positive")

    @property
    def stretching_stiffness(self) -> float:
        nu = self.poisson_ratio
        return self.young_modulus * self.thickness / (1.0 - nu * nu)

    @property
    def bending_stiffness(self) -> float:
        return self.stretching_stiffness * self.thickness**2 / 12.0


@dataclass(frozen=True)
class CosseratParams:
    """Micropolar plate parameters: Lame moduli, couple modulus, internal length.

    ``mu_c = 0`` is constructible (degenerate but meaningful); the strict
    existence regime additionally needs mu_c > 0, exposed as a property so
    callers can warn rather than fail.
    """

    mu: float
    lam: float
    mu_c: float
    internal_length: float
    a4: float = 0.0
    a5: float = 1.0
    a6: float = 1.0
    a7: float = 0.0
    p: float = 1.0
    q: float = 0.0
    kappa: float = 1.0
    thickness: float = 1.0

    def __post_init__(self):
        if not (self.mu > 0 and self.lam > 0):
            raise ValueError("CosseratParams: mu and lambda must be positive")
        if self.mu_c < 0:
            raise ValueError("CosseratParams: couple modulus must be nonnegative")
        if not (self.internal_length > 0 and self.thickness > 0):
            raise ValueError("CosseratParams: internal length and thickness must be positive")
        if not (self.a5 > 0 and self.a6 > 0 and self.a7 >= 0 and self.a4 >= 0):
            raise ValueError("CosseratParams: need a5 > 0, a6 > 0, a7 >= 0, a4 >= 0")
        if not (self.p >= 1 and self.q >= 0):
            raise ValueError("CosseratParams: exponents need p >= 1, q >= 0")

    @property
    def in_existence_regime(self) -> bool:
        return self.mu_c > 0


@dataclass(frozen=True)
class AnisotropicQuadratic:
    """W = 1/2 s^T H s on the stacked 12-vector; H symmetric."""

    matrix: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.matrix, dtype=float)
        if H.shape != (12, 12):
            raise ValueError(f"AnisotropicQuadratic: expected 12x12 matrix, got {H.shape}")
        if not np.all(np.isfinite(H)):
            raise ValueError("AnisotropicQuadratic: non-finite entries")
        if np.linalg.norm(H - H.T) > 1e-12 * max(1.0, np.linalg.norm(H)):
            raise ValueError("AnisotropicQuadratic: matrix must be symmetric")
        H = 0.5 * (H + H.T)
        H.setflags(write=False)
        object.__setattr__(self, "matrix", H)


QuadraticMaterial = IsotropicCoefficients | AnisotropicQuadratic


# ----------------------------------------------------------------------------
# stacking helpers


def stack_strains(E: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Stack (..., 3, 2) strain pairs into the canonical 12-vector."""
    sE = np.swapaxes(np.asarray(E, dtype=float), -1, -2).reshape(*np.shape(E)[:-2], 6)
    sK = np.swapaxes(np.asarray(K, dtype=float), -1, -2).reshape(*np.shape(K)[:-2], 6)
    return np.concatenate([sE, sK], axis=-1)


def unstack_strains(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(s, dtype=float)
    E = np.swapaxes(s[..., :6].reshape(*s.shape[:-1], 2, 3), -1, -2)
    K = np.swapaxes(s[..., 6:].reshape(*s.shape[:-1], 2, 3), -1, -2)
    return E, K


# ----------------------------------------------------------------------------
# isotropic energy: tensor form and expanded component form


def _embed_3x3(T: np.ndarray) -> np.ndarray:
    """Surface tensor (..., 3, 2) as a 3x3 matrix with vanishing third column."""
    T = np.asarray(T, dtype=float)
    M = np.zeros(T.shape[:-2] + (3, 3))
    M[..., :, :2] = T
    return M


def _planar_part(M: np.ndarray) -> np.ndarray:
    """T_par = T - (n (x) n) T with n = e3: zero out the third row."""
    P = M.copy()
    P[..., 2, :] = 0.0
    return P


def _isotropic_groups(T: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """The four isotropic invariants (tr^2 P, tr P^2, tr(P^T P), n T T^T n)."""
    M = _embed_3x3(T)
    P = _planar_part(M)
    tr = np.einsum("...ii->...", P)
    tr_sq = np.einsum("...ij,...ji->...", P, P)
    frob = np.einsum("...ij,...ij->...", P, P)
    shear = np.einsum("...j,...j->...", M[..., 2, :], M[..., 2, :])
    return tr * tr, tr_sq, frob, shear


def _quadratic_tensor_energy(T: np.ndarray, moduli: tuple) -> np.ndarray:
    c1, c2, c3, c4 = moduli
    g1, g2, g3, g4 = _isotropic_groups(T)
    return 0.5 * (c1 * g1 + c2 * g2 + c3 * g3 + c4 * g4)


def energy_isotropic(E: np.ndarray, K: np.ndarray, m: IsotropicCoefficients):
    """Isotropic energy density in tensor form; returns (total, membrane, bending).

    Evaluates the invariant combination c1 tr^2 T_par + c2 tr T_par^2
    + c3 tr(T_par^T T_par) + c4 n T T^T n for both strain measures.  Agrees
    with the expanded component form (membrane_quadratic_form) to roundoff;
    the two routes are kept as independent implementations on purpose.
    """
    mem = _quadratic_tensor_energy(E, m.alpha)
    bend = _quadratic_tensor_energy(K, m.beta)
    return mem + bend, mem, bend


def _component_quadratic_form(T: np.ndarray, c: tuple) -> np.ndarray:
    c1, c2, c3, c4 = c
    T = np.asarray(T, dtype=float)
    T11, T12 = T[..., 0, 0], T[..., 0, 1]
    T21, T22 = T[..., 1, 0], T[..., 1, 1]
    T31, T32 = T[..., 2, 0], T[..., 2, 1]
    return (
        0.5 * (c1 + c2 + c3) * (T11**2 + T22**2)
        + 0.5 * c3 * (T12**2 + T21**2)
        + 0.5 * c4 * (T31**2 + T32**2)
        + c1 * T11 * T22
        + c2 * T12 * T21
    )


def membrane_quadratic_form(E: np.ndarray, m: IsotropicCoefficients) -> np.ndarray:
    """Expanded membrane quadratic form in the six components of E."""
    return _component_quadratic_form(E, m.alpha)


def bending_quadratic_form(K: np.ndarray, m: IsotropicCoefficients) -> np.ndarray:
    """Bending analog of membrane_quadratic_form (beta moduli)."""
    return _component_quadratic_form(K, m.beta)


def _quadratic_stress(T: np.ndarray, moduli: tuple) -> np.ndarray:
    """Derivative of the expanded quadratic form w.r.t. the 3x2 components."""
    c1, c2, c3, c4 = moduli
    T = np.asarray(T, dtype=float)
    G = np.empty_like(T)
    G[..., 0, 0] = (c1 + c2 + c3) * T[..., 0, 0] + c1 * T[..., 1, 1]
    G[..., 1, 1] = (c1 + c2 + c3) * T[..., 1, 1] + c1 * T[..., 0, 0]
    G[..., 0, 1] = c3 * T[..., 0, 1] + c2 * T[..., 1, 0]
    G[..., 1, 0] = c3 * T[..., 1, 0] + c2 * T[..., 0, 1]
    G[..., 2, 0] = c4 * T[..., 2, 0]
    G[..., 2, 1] = c4 * T[..., 2, 1]
    return G


# ----------------------------------------------------------------------------
# generic quadratic material interface (isotropic or anisotropic)


def energy_density(E: np.ndarray, K: np.ndarray, material: QuadraticMaterial):
    """(membrane, bending) energy density for a quadratic material.

    For an anisotropic form with E-K coupling the cross energy is attributed
    half to each part; the sum is always exactly W.
    """
    if isinstance(material, IsotropicCoefficients):
        return membrane_quadratic_form(E, material), bending_quadratic_form(K, material)
    s = stack_strains(E, K)
    g = np.einsum("ab,...b->...a", material.matrix, s)
    mem = 0.5 * np.einsum("...a,...a->...", s[..., :6], g[..., :6])
    bend = 0.5 * np.einsum("...a,...a->...", s[..., 6:], g[..., 6:])
    return mem, bend


def strain_stress(E: np.ndarray, K: np.ndarray, material: QuadraticMaterial):
    """Closed-form (dW/dE, dW/dK) for a quadratic material, shapes (..., 3, 2)."""
    if isinstance(material, IsotropicCoefficients):
        return _quadratic_stress(E, material.alpha), _quadratic_stress(K, material.beta)
    s = stack_strains(E, K)
    g = np.einsum("ab,...b->...a", material.matrix, s)
    return unstack_strains(g)


def energy_anisotropic(E: np.ndarray, K: np.ndarray, aq: AnisotropicQuadratic) -> np.ndarray:
    """W = 1/2 s^T H s on the stacked 12-vector."""
    s = stack_strains(E, K)
    return 0.5 * np.einsum("...a,ab,...b->...", s, aq.matrix, s)


def stress_resultants(E: np.ndarray, K: np.ndarray, Q: np.ndarray, material: QuadraticMaterial):
    """Stress resultants (N, M) = (Q dW/dE, Q dW/dK) in the spatial frame."""
    GE, GK = strain_stress(E, K, material)
    return np.asarray(Q) @ GE, np.asarray(Q) @ GK


# ----------------------------------------------------------------------------
# Hessians, definiteness and coercivity checks


def membrane_hessian(m: IsotropicCoefficients) -> np.ndarray:
    """Hessian of the membrane form in the stacked 6-component ordering."""
    return _component_hessian(m.alpha)


def bending_hessian(m: IsotropicCoefficients) -> np.ndarray:
    return _component_hessian(m.beta)


def _component_hessian(c: tuple) -> np.ndarray:
    c1, c2, c3, c4 = c
    H = np.zeros((6, 6))
    # ordering (T11, T21, T31, T12, T22, T32)
    H[0, 0] = H[4, 4] = c1 + c2 + c3
    H[0, 4] = H[4, 0] = c1
    H[1, 1] = H[3, 3] = c3
    H[1, 3] = H[3, 1] = c2
    H[2, 2] = H[5, 5] = c4
    return H


def assemble_quadratic(m: IsotropicCoefficients) -> AnisotropicQuadratic:
    """Isotropic coefficients as a block-diagonal 12x12 quadratic form."""
    H = np.zeros((12, 12))
    H[:6, :6] = membrane_hessian(m)
    H[6:, 6:] = bending_hessian(m)
    return AnisotropicQuadratic(H)


@dataclass(frozen=True)
class DefinitenessReport:
    """Outcome of the eight strict coefficient inequalities plus the
    coercivity constants (half the smallest Hessian eigenvalue per part)."""

    inequalities: tuple  # of (label, value, satisfied)
    membrane_constant: float  # c such that W_mb >= c |E|^2
    bending_constant: float  # c such that W_bend >= c |K|^2
    passed: bool

    def failed_inequalities(self) -> list:
        return [label for label, _, ok in self.inequalities if not ok]


def check_definiteness(m: IsotropicCoefficients) -> DefinitenessReport:
    """Evaluate the positive-definiteness inequalities on both moduli sets."""
    a1, a2, a3, a4 = m.alpha
    b1, b2, b3, b4 = m.beta
    rows = (
        ("2*alpha1 + alpha2 + alpha3 > 0", 2 * a1 + a2 + a3),
        ("alpha2 + alpha3 > 0", a2 + a3),
        ("alpha3 - alpha2 > 0", a3 - a2),
        ("alpha4 > 0", a4),
        ("2*beta1 + beta2 + beta3 > 0", 2 * b1 + b2 + b3),
        ("beta2 + beta3 > 0", b2 + b3),
        ("beta3 - beta2 > 0", b3 - b2),
        ("beta4 > 0", b4),
    )
    inequalities = tuple((label, value, value > 0.0) for label, value in rows)
    c_mem = 0.5 * float(np.linalg.eigvalsh(membrane_hessian(m))[0])
    c_bend = 0.5 * float(np.linalg.eigvalsh(bending_hessian(m))[0])
    passed = all(ok for _, _, ok in inequalities)
    return DefinitenessReport(inequalities, c_mem, c_bend, passed)


@dataclass(frozen=True)
class CoercivityReport:
    """Largest k with W >= k (|E|^2 + |K|^2): half the smallest eigenvalue."""

    constant: float
    min_eigenvalue: float
    passed: bool


def check_coercivity(aq: AnisotropicQuadratic) -> CoercivityReport:
    lam_min = float(np.linalg.eigvalsh(aq.matrix)[0])
    k = 0.5 * lam_min
    return CoercivityReport(constant=k, min_eigenvalue=lam_min, passed=k > 0.0)


def material_is_admissible(material: QuadraticMaterial) -> bool:
    if isinstance(material, IsotropicCoefficients):
        return check_definiteness(material).passed
    return check_coercivity(material).passed


# ----------------------------------------------------------------------------
# engineering and micropolar parameter maps


def from_engineering(ep: EngineeringParams) -> IsotropicCoefficients:
    """Membrane/bending moduli from (E, nu, h) and the shear corrections."""
    C = ep.stretching_stiffness
    D = ep.bending_stiffness
    nu = ep.poisson_ratio
    alpha = (C * nu, 0.0, C * (1.0 - nu), ep.shear_correction * C * (1.0 - nu))
    beta = (D * nu, 0.0, D * (1.0 - nu), ep.twist_correction * D * (1.0 - nu))
    return IsotropicCoefficients(alpha, beta)


def identify_coefficients(cp: CosseratParams, kappa: float | None = None) -> IsotropicCoefficients:
    """Quadratic plate moduli equivalent to the micropolar energy (p=1, a4=0).

    Valid only in the identification regime p = 1, a4 = 0 where the curvature
    term is itself quadratic.  The returned moduli satisfy
    alpha3 - alpha2 = 2 h mu_c identically.
    """
    if cp.p != 1.0 or cp.a4 != 0.0:
        raise ValueError(
            f"identify_coefficients: requires p = 1 and a4 = 0 (got p={cp.p}, a4={cp.a4})"
        )
    if kappa is None:
        kappa = cp.kappa
    h, mu, lam, mu_c, Lc = cp.thickness, cp.mu, cp.lam, cp.mu_c, cp.internal_length
    bulk = lam * mu / (lam + 2.0 * mu)
    a5, a6, a7 = cp.a5, cp.a6, cp.a7
    curv = 1.5 * a5 + 0.5 * a6 + a7
    alpha = (2.0 * h * bulk, h * (mu - mu_c), h * (mu + mu_c), kappa * h * (mu + mu_c))
    beta = (
        -(h / 12.0) * (h * h * (mu - mu_c) + mu * Lc * Lc * (a5 - a6)),
        -(h * mu / 6.0) * (h * h * lam / (lam + 2.0 * mu) + Lc * Lc * a7),
        (h * mu / 6.0) * (h * h * 2.0 * (lam + mu) / (lam + 2.0 * mu) + Lc * Lc * curv),
        (h * mu / 6.0) * Lc * Lc * curv,
    )
    return IsotropicCoefficients(alpha, beta)


def with_kappa(cp: CosseratParams, kappa: float) -> CosseratParams:
    return replace(cp, kappa=kappa)


# ----------------------------------------------------------------------------
# micropolar plate energy


def _sym_skew_tr_groups(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    Mt = np.swapaxes(M, -1, -2)
    sym = 0.5 * (M + Mt)
    skw = 0.5 * (M - Mt)
    nsym = np.einsum("...ij,...ij->...", sym, sym)
    nskw = np.einsum("...ij,...ij->...", skw, skw)
    tr = np.einsum("...ii->...", M)
    return nsym, nskw, tr


def energy_cosserat(Ubar_minus_1: np.ndarray, Ks: np.ndarray, cp: CosseratParams) -> np.ndarray:
    """Micropolar plate energy density.

    ``Ubar_minus_1`` is the full 3x3 stretch deviation (its first two columns
    are the columns of the strain tensor E, the third is zero for plate
    kinematics, but any 3x3 input is accepted).  ``Ks`` holds the third-order
    curvature slices, shape (..., 3, 3, 2); slice i is embedded as a 3x3
    matrix with vanishing third column before taking sym/skew/trace.  The
    curvature norm in the power-law factor is the Frobenius norm over all 18
    slice components.
    """
    X = np.asarray(Ubar_minus_1, dtype=float)
    Ks = np.asarray(Ks, dtype=float)
    h, mu, lam, mu_c = cp.thickness, cp.mu, cp.lam, cp.mu_c
    bulk = lam * mu / (lam + 2.0 * mu)

    nsym, nskw, tr = _sym_skew_tr_groups(X)
    membrane = h * (mu * nsym + mu_c * nskw + bulk * tr * tr)

    # slices[..., i, :, :] is curvature slice i embedded as a 3x3 matrix
    # with vanishing third column
    slices = np.concatenate([Ks, np.zeros(Ks.shape[:-1] + (1,))], axis=-1)
    nsym_i, nskw_i, tr_i = _sym_skew_tr_groups(slices)

    bend3 = (h**3 / 12.0) * (
        mu * nsym_i[..., 2] + mu_c * nskw_i[..., 2] + bulk * tr_i[..., 2] ** 2
    )

    Lc, p, q, a4 = cp.internal_length, cp.p, cp.q, cp.a4
    quad = cp.a5 * nsym_i + cp.a6 * nskw_i + cp.a7 * tr_i**2
    curv_sum = np.sum(quad ** ((1.0 + p) / 2.0), axis=-1)
    if a4 != 0.0 and q != 0.0:
        norm_K = np.sqrt(np.einsum("...ija,...ija->...", Ks, Ks))
        gain = 1.0 + a4 * Lc**q * norm_K**q
    else:
        gain = 1.0 + a4
    curvature = (h * Lc ** (1.0 + p) * mu / 12.0) * gain * curv_sum

    return membrane + bend3 + curvature
