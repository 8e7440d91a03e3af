"""Consistent in-plane elasticity tensor for plane-stress incompressible states.

The tangent is not the unconstrained derivative of S with respect to C: the
out-of-plane stretch and the pressure are themselves functions of the
in-plane deformation, and those dependencies are folded in. The result is
assembled from sixteen scalar coefficients multiplying dyadic products of
I_s, C_s, C_s^{-1} and the in-plane structural tensors.

Voigt convention: strain-like ordering (xx, yy, xy); the stored matrix holds
raw tensor components, so increments satisfy

    dS_voigt = 0.5 * CC @ (dC_xx, dC_yy, 2 dC_xy)

Two details were pinned by finite-difference validation of the assembled
tensor: the fourth-order identity term enters with a minus sign, and the
trace appearing inside the coefficients is the in-plane trace tr(C_s).
A seventeenth dyad carries the cross-fiber curvature d2Psi/dI4v dI4w, which
is active whenever the fiber-pair mixed term is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedStateError
from .kinematics import StructuralTensors, invariants, right_cauchy_green
from .material import (
    EnergyDerivatives,
    NodeMaterialModel,
    energy_derivatives,
    energy_hessian,
)

__all__ = [
    "DeltaCoefficients",
    "VOIGT_IDENTITY",
    "delta_coefficients",
    "assemble_tangent",
    "material_tangent",
]

# fourth-order symmetric identity in raw-component Voigt form
VOIGT_IDENTITY = np.diag([1.0, 1.0, 0.5])

_VOIGT_PAIRS = ((0, 0), (1, 1), (0, 1))


@dataclass(frozen=True)
class DeltaCoefficients:
    """The sixteen scalar tangent coefficients (MPa)."""

    delta: np.ndarray

    def __post_init__(self):
        if self.delta.shape != (16,):
            raise DomainError("expected sixteen coefficients")


def _voigt(A: np.ndarray) -> np.ndarray:
    return np.array([A[0, 0], A[1, 1], A[0, 1]])


def _sym_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.outer(a, b) + np.outer(b, a)


def _odot(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Voigt form of (A . B)_ijkl = (A_ik B_jl + A_il B_jk) / 2."""
    M = np.empty((3, 3))
    for r, (i, j) in enumerate(_VOIGT_PAIRS):
        for c, (k, l) in enumerate(_VOIGT_PAIRS):
            M[r, c] = 0.5 * (A[i, k] * B[j, l] + A[i, l] * B[j, k])
    return M


def delta_coefficients(ed: EnergyDerivatives, hess: np.ndarray, inv,
                       c33: float) -> DeltaCoefficients:
    """Evaluate the sixteen coefficients from first and second derivatives.

    ``c33`` is the squared out-of-plane stretch, 1/det(C_s).
    """
    if c33 <= 0:
        raise DomainError("c33 = 1/det(C_s) must be positive")
    p1, p2 = ed.dPsi_dI1, ed.dPsi_dI2
    p11, p12, p22 = hess[0, 0], hess[0, 1], hess[1, 1]
    p14v, p14w = hess[0, 2], hess[0, 3]
    p24v, p24w = hess[1, 2], hess[1, 3]
    p4v4v, p4w4w = hess[2, 2], hess[3, 3]
    t = inv.I1 - c33  # in-plane trace tr(C_s)
    d = np.empty(16)
    d[0] = 4.0 * (p11 + 2.0 * p12 * (t + c33)
                  + p22 * (t * t + 2.0 * t * c33 + c33 * c33) + p2)
    d[1] = 4.0 * (-p11 * c33 - p12 * c33 * (2.0 * t + c33)
                  - p22 * t * c33 * (t + c33) - p2 * c33)
    d[2] = 4.0 * (-p12 - p22 * (t + c33))
    d[3] = 4.0 * (p12 * c33 + p22 * t * c33)
    d[4] = 4.0 * p22
    d[5] = 4.0 * p2
    d[6] = 4.0 * p4v4v
    d[7] = 4.0 * p4w4w
    d[8] = 4.0 * (p11 * c33 * c33 + 2.0 * p12 * t * c33 * c33 + p1 * c33
                  + p22 * t * t * c33 * c33 + p2 * t * c33)
    d[9] = 4.0 * (p1 * c33 + p2 * t * c33)
    d[10] = 4.0 * (p14v + p24v * (t + c33))
    d[11] = 4.0 * (p14w + p24w * (t + c33))
    d[12] = 4.0 * (-p14v * c33 - p24v * t * c33)
    d[13] = 4.0 * (-p14w * c33 - p24w * t * c33)
    d[14] = -4.0 * p24v
    d[15] = -4.0 * p24w
    return DeltaCoefficients(delta=d)


def assemble_tangent(deltas: DeltaCoefficients, Cs: np.ndarray,
                     V0s: np.ndarray, W0s: np.ndarray,
                     cross_fiber: float = 0.0) -> np.ndarray:
    """Sum the dyadic products into the 3x3 Voigt matrix.

    ``cross_fiber`` is 4 * d2Psi/dI4v dI4w, the coefficient of the
    V0 (x) W0 pair the sixteen-term list does not carry.
    """
    Ci = np.linalg.inv(Cs)
    vI = np.array([1.0, 1.0, 0.0])
    vC, vCi, vV, vW = _voigt(Cs), _voigt(Ci), _voigt(V0s), _voigt(W0s)
    d = deltas.delta
    CC = (d[0] * np.outer(vI, vI)
          + d[1] * _sym_outer(vCi, vI)
          + d[2] * _sym_outer(vC, vI)
          + d[3] * _sym_outer(vC, vCi)
          + d[4] * np.outer(vC, vC)
          - d[5] * VOIGT_IDENTITY
          + d[6] * np.outer(vV, vV)
          + d[7] * np.outer(vW, vW)
          + d[8] * np.outer(vCi, vCi)
          + d[9] * _odot(Ci, Ci)
          + d[10] * _sym_outer(vI, vV)
          + d[11] * _sym_outer(vI, vW)
          + d[12] * _sym_outer(vCi, vV)
          + d[13] * _sym_outer(vCi, vW)
          + d[14] * _sym_outer(vC, vV)
          + d[15] * _sym_outer(vC, vW)
          + cross_fiber * _sym_outer(vV, vW))
    return CC


def material_tangent(model: NodeMaterialModel, F: np.ndarray,
                     dirs: StructuralTensors | None = None) -> np.ndarray:
    """Consistent tangent of the plane-stress response at F, Voigt 3x3."""
    F = np.asarray(F, dtype=float)
    if dirs is None:
        dirs = model.structural_tensors()
    if not dirs.in_plane:
        raise UnsupportedStateError("fiber directions must lie in the reference plane")
    if abs(np.linalg.det(F) - 1.0) > 1e-8:
        raise UnsupportedStateError("plane-stress incompressible states require det F = 1")
    C = right_cauchy_green(F)
    if abs(C[0, 2]) > 1e-10 or abs(C[1, 2]) > 1e-10:
        raise UnsupportedStateError("C must have no out-of-plane shear coupling")
    Cs = C[:2, :2]
    det_cs = np.linalg.det(Cs)
    if det_cs <= 0:
        raise DomainError("in-plane C block must be positive definite")
    c33 = 1.0 / det_cs
    inv = invariants(C, dirs)
    ed = energy_derivatives(model, inv)
    hess = energy_hessian(model, inv)
    deltas = delta_coefficients(ed, hess, inv, c33)
    return assemble_tangent(deltas, Cs, dirs.V0[:2, :2], dirs.W0[:2, :2],
                            cross_fiber=4.0 * hess[2, 3])
