"""Independent finite-difference validators used by checks and tests.

These deliberately bypass the tangent assembly: the in-plane S is rebuilt
from scratch at perturbed states, re-imposing incompressibility and the
vanishing normal stress, and differenced numerically. Sampling rejects
states close to a mixed-term zero crossing, where the tangent is one-sided.
"""

from __future__ import annotations

import numpy as np

from .kinematics import StructuralTensors, invariants, shift_invariants
from .material import (
    NodeMaterialModel,
    energy_derivatives,
    node_inputs,
)
from .tangent import material_tangent

__all__ = [
    "inplane_stress",
    "fd_tangent",
    "random_tensile_state",
    "tangent_consistency",
]


def inplane_stress(model: NodeMaterialModel, Cs: np.ndarray,
                   dirs: StructuralTensors) -> np.ndarray:
    """Constrained in-plane S at an in-plane C block.

    The out-of-plane stretch follows from det C = 1 and the pressure from
    the vanishing normal stress, so this is a function of Cs alone.
    """
    c33 = 1.0 / np.linalg.det(Cs)
    C = np.zeros((3, 3))
    C[:2, :2] = Cs
    C[2, 2] = c33
    inv = invariants(C, dirs)
    ed = energy_derivatives(model, inv)
    p = -c33 * (2.0 * ed.dPsi_dI1 + 2.0 * ed.dPsi_dI2 * (inv.I1 - c33))
    S = (2.0 * ed.dPsi_dI1 * np.eye(2)
         + 2.0 * ed.dPsi_dI2 * (inv.I1 * np.eye(2) - Cs)
         + 2.0 * ed.dPsi_dI4v * dirs.V0[:2, :2]
         + 2.0 * ed.dPsi_dI4w * dirs.W0[:2, :2]
         + p * np.linalg.inv(Cs))
    return S


def fd_tangent(model: NodeMaterialModel, Cs: np.ndarray,
               dirs: StructuralTensors, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the constrained S, raw-component Voigt.

    Matches the assembly convention: dS_voigt = 0.5 CC (dCxx, dCyy, 2 dCxy).
    """
    M = np.zeros((3, 3))
    for b, (k, l) in enumerate(((0, 0), (1, 1), (0, 1))):
        dC = np.zeros((2, 2))
        dC[k, l] = h
        dC[l, k] = h
        Sp = inplane_stress(model, Cs + dC, dirs)
        Sm = inplane_stress(model, Cs - dC, dirs)
        dS = (Sp - Sm) / (2.0 * h)
        col = np.array([dS[0, 0], dS[1, 1], dS[0, 1]])
        # diagonal dofs carry a factor 2 (dS = CC/2 : dC), the symmetric
        # shear perturbation already sums both off-diagonal slots
        M[:, b] = 2.0 * col if k == l else col
    return M


def _sqrtm_2x2(Cs: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(Cs)
    return vecs @ np.diag(np.sqrt(vals)) @ vecs.T


def deformation_from_cs(Cs: np.ndarray) -> np.ndarray:
    """Symmetric deformation gradient with F^T F = blockdiag(Cs, 1/det Cs)."""
    c33 = 1.0 / np.linalg.det(Cs)
    F = np.zeros((3, 3))
    F[:2, :2] = _sqrtm_2x2(Cs)
    F[2, 2] = np.sqrt(c33)
    return F


def random_tensile_state(rng: np.random.Generator, shear: float = 0.06) -> np.ndarray:
    """Random in-plane C block of a tensile biaxial state with mild shear."""
    cx = rng.uniform(1.05, 1.5)
    cy = rng.uniform(1.05, 1.5)
    g = rng.uniform(-shear, shear)
    return np.array([[cx, g], [g, cy]])


def _near_clamp_kink(model: NodeMaterialModel, Cs: np.ndarray,
                     dirs: StructuralTensors, margin: float = 1e-3) -> bool:
    c33 = 1.0 / np.linalg.det(Cs)
    C = np.zeros((3, 3))
    C[:2, :2] = Cs
    C[2, 2] = c33
    inv = invariants(C, dirs)
    x = node_inputs(shift_invariants(inv), model.alpha).reshape(10, 1)
    y = model.stacked().integrate(x)[:, 0]
    return bool(np.any(np.abs(y[4:]) < margin))


def tangent_consistency(model: NodeMaterialModel, rng: np.random.Generator,
                        n_states: int = 100, h: float = 1e-5):
    """Max relative Frobenius error of the assembled tangent vs finite
    differences over random admissible states; returns (worst, n_checked)."""
    dirs = model.structural_tensors()
    worst = 0.0
    checked = 0
    attempts = 0
    while checked < n_states and attempts < 20 * n_states:
        attempts += 1
        Cs = random_tensile_state(rng)
        if _near_clamp_kink(model, Cs, dirs):
            continue
        F = deformation_from_cs(Cs)
        analytic = material_tangent(model, F, dirs)
        numeric = fd_tangent(model, Cs, dirs, h=h)
        err = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
        worst = max(worst, float(err))
        checked += 1
    return worst, checked
