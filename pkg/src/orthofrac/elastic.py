"""Orthotropic linear elasticity in Voigt notation.

Material axes are labeled V, T, H and coincide with the global x, y, z
axes. Voigt component order is (xx, yy, zz, yz, xz, xy). Strain vectors
use engineering shear strains (gamma = 2*eps_shear) so that
sigma = C @ eps holds directly with the 6x6 stiffness matrix.

Triples of direction-pair quantities (coupling and shear constants) are
ordered (VT, TH, HV) everywhere in this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VOIGT_COMPONENTS = ("xx", "yy", "zz", "yz", "xz", "xy")
MATERIAL_AXES = ("V", "T", "H")

# Voigt rows/cols spanning each model plane (plane strain kills the rest).
_PLANE_INDICES = {"xz": (0, 2, 4), "xy": (0, 1, 5)}


def orthotropic_voigt(diag, coupling, shear) -> np.ndarray:
    """Assemble the 6x6 orthotropic stiffness matrix from nine constants.

    Parameters
    ----------
    diag : sequence of 3 floats
        Longitudinal constants (C_VVVV, C_TTTT, C_HHHH), MPa.
    coupling : sequence of 3 floats
        Normal-coupling constants ordered by pair (VT, TH, HV), MPa.
    shear : sequence of 3 floats
        Shear constants ordered by pair (VT, TH, HV), MPa.

    Returns
    -------
    ndarray
        Symmetric 6x6 matrix with the orthotropic sparsity pattern.
    """
    c11, c22, c33 = diag
    c12, c23, c13 = coupling
    c66, c44, c55 = shear
    c = np.zeros((6, 6))
    c[0, 0], c[1, 1], c[2, 2] = c11, c22, c33
    c[0, 1] = c[1, 0] = c12
    c[1, 2] = c[2, 1] = c23
    c[0, 2] = c[2, 0] = c13
    c[3, 3], c[4, 4], c[5, 5] = c44, c55, c66
    return c


def isotropic_voigt(young: float, poisson: float) -> np.ndarray:
    """6x6 isotropic stiffness matrix (a degenerate orthotropic case)."""
    lam = young * poisson / ((1 + poisson) * (1 - 2 * poisson))
    mu = young / (2 * (1 + poisson))
    return orthotropic_voigt(
        (lam + 2 * mu,) * 3, (lam,) * 3, (mu,) * 3
    )


@dataclass(frozen=True)
class StiffnessTensor:
    """Validated orthotropic stiffness matrix in Voigt notation.

    Parameters
    ----------
    voigt : ndarray
        6x6 stiffness matrix, MPa. Must be symmetric, carry the
        orthotropic zero blocks (no normal-shear and no shear-shear
        coupling) and be positive definite; all three are checked at
        construction so downstream evaluation can skip the checks.
    """

    voigt: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.voigt, dtype=float)
        if c.shape != (6, 6):
            raise ValueError(f"stiffness matrix must be 6x6, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("stiffness matrix contains non-finite entries")
        scale = np.max(np.abs(c))
        if scale <= 0.0:
            raise ValueError("stiffness matrix is identically zero")
        if np.max(np.abs(c - c.T)) > 1e-12 * scale:
            raise ValueError("stiffness matrix is not symmetric")
        shear_off = ~np.eye(3, dtype=bool)
        if np.max(np.abs(c[:3, 3:])) > 1e-12 * scale or np.max(np.abs(c[3:, 3:][shear_off])) > 1e-12 * scale:
            raise ValueError("matrix violates the orthotropic sparsity pattern")
        # Positive definiteness via leading principal minors.
        for k in range(1, 7):
            if np.linalg.det(c[:k, :k]) <= 0.0:
                raise ValueError(
                    f"stiffness matrix is not positive definite (minor {k} <= 0)"
                )
        object.__setattr__(self, "voigt", c)

    @classmethod
    def from_components(cls, diag, coupling, shear) -> "StiffnessTensor":
        return cls(orthotropic_voigt(diag, coupling, shear))

    @classmethod
    def isotropic(cls, young: float, poisson: float) -> "StiffnessTensor":
        return cls(isotropic_voigt(young, poisson))

    def components(self) -> np.ndarray:
        """Nine constants as (C11, C12, C13, C22, C23, C33, C44, C55, C66)."""
        c = self.voigt
        return np.array(
            [c[0, 0], c[0, 1], c[0, 2], c[1, 1], c[1, 2], c[2, 2],
             c[3, 3], c[4, 4], c[5, 5]]
        )

    def ratios(self) -> "StiffnessTensor":
        """Tensor divided entrywise by its leading constant ([0, 0] becomes 1)."""
        return StiffnessTensor(self.voigt / self.voigt[0, 0])

    def scaled(self, c_ref: float) -> "StiffnessTensor":
        """Entrywise multiplication by a positive reference constant."""
        if c_ref <= 0.0:
            raise ValueError(f"reference constant must be positive, got {c_ref}")
        return StiffnessTensor(self.voigt * c_ref)

    def plane_matrix(self, plane: str = "xz") -> np.ndarray:
        """3x3 plane-strain stiffness for the given model plane.

        Plane strain zeroes all out-of-plane strain components, so the
        reduced matrix is the corresponding 3x3 submatrix of the Voigt
        matrix; 'xz' (beam mid-plane, out-of-plane axis y) is the default
        specimen model plane.
        """
        if plane not in _PLANE_INDICES:
            raise ValueError(f"unknown model plane {plane!r}")
        idx = np.array(_PLANE_INDICES[plane])
        return self.voigt[np.ix_(idx, idx)]


def strain_energy(strain: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Undegraded strain energy density 0.5 * eps : C : eps.

    Parameters
    ----------
    strain : ndarray, shape (..., n)
        Strain in Voigt form with engineering shear components.
    c : ndarray, shape (n, n)
        Stiffness matrix (6x6, or a plane-strain 3x3).

    Returns
    -------
    ndarray, shape (...)
        Energy density, MPa. Non-negative for positive definite C.
    """
    e = np.asarray(strain, dtype=float)
    return 0.5 * np.einsum("...i,ij,...j->...", e, np.asarray(c, dtype=float), e)
