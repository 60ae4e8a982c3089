"""Phase-field damage laws: degradation and dissipation functions.

Two regularizations are supported, selected by the ``model`` tag:
``at1`` uses w(d) = d (finite elastic threshold, normalization constant
c_w = 2/3), ``at2`` uses w(d) = d**2 (damage grows at any load,
c_w = 1/2). The degradation multiplier is g(d) = (1 - d)**2 + g0 with a
small residual g0 keeping fully broken material numerically stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MODELS = ("at1", "at2")


@dataclass(frozen=True)
class PhaseFieldLaw:
    """Regularized fracture law.

    Parameters
    ----------
    model : str
        "at1" or "at2".
    ell : float
        Regularization length scale, mm.
    gc : float
        Fracture toughness (energy per unit crack area), MPa*mm.
    g0 : float
        Residual stiffness multiplier at d = 1, dimensionless.
    """

    model: str
    ell: float
    gc: float
    g0: float = 1e-5

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown phase-field model {self.model!r}")
        if self.ell <= 0.0:
            raise ValueError(f"length scale must be positive, got {self.ell}")
        if self.gc <= 0.0:
            raise ValueError(f"fracture toughness must be positive, got {self.gc}")
        if not 0.0 < self.g0 < 1e-2:
            raise ValueError(f"residual stiffness must be tiny and positive, got {self.g0}")

    @property
    def c_w(self) -> float:
        return 2.0 / 3.0 if self.model == "at1" else 0.5

    @property
    def surface_prefactor(self) -> float:
        """Prefactor gc / (4 c_w) of the regularized surface energy."""
        return self.gc / (4.0 * self.c_w)


def degradation(d, g0: float = 1e-5):
    """Stiffness degradation g(d) = (1 - d)**2 + g0 and its derivative.

    The caller guarantees d in [0, 1]; no clamping happens here.

    Returns
    -------
    (ndarray, ndarray)
        g(d) and g'(d) = -2 (1 - d), elementwise.
    """
    d = np.asarray(d, dtype=float)
    one_minus = 1.0 - d
    return one_minus * one_minus + g0, -2.0 * one_minus


def dissipation(d, model: str):
    """Dissipation function w(d), its derivative and the constant c_w.

    Returns
    -------
    (ndarray, ndarray, float)
        w(d), w'(d) and c_w for the requested model: (d, 1, 2/3) for
        "at1" and (d**2, 2 d, 1/2) for "at2".
    """
    d = np.asarray(d, dtype=float)
    if model == "at1":
        return d, np.ones_like(d), 2.0 / 3.0
    if model == "at2":
        return d * d, 2.0 * d, 0.5
    raise ValueError(f"unknown phase-field model {model!r}")


def crack_energy_density(d, grad_d_sq, law: PhaseFieldLaw):
    """Regularized surface energy density gc/(4 c_w) (w(d)/ell + ell |grad d|^2)."""
    w, _, _ = dissipation(d, law.model)
    return law.surface_prefactor * (w / law.ell + law.ell * np.asarray(grad_d_sq, dtype=float))
