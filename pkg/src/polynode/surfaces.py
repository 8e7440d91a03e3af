"""Energy surfaces over in-plane strain and convexity diagnostics.

The surface is the constrained plane-stress energy evaluated on a square
grid of Green-Lagrange strain components (Exx, Eyy) in the tensile quadrant.
Convexity is probed with second differences along rows, columns and both
diagonals; a monotone scan of the ten derivative functions covers the
one-dimensional building blocks of a learned model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .kinematics import StructuralTensors, invariants
from . import material
from . import oracles

__all__ = [
    "strain_axis",
    "energy_surface",
    "second_difference_violations",
    "derivative_monotonicity_violations",
    "SurfaceScan",
    "convexity_scan",
]


def strain_axis(e_max: float = 0.2, n: int = 21) -> np.ndarray:
    if n < 2:
        raise ConfigError("grid needs at least two points per axis")
    if e_max <= 0:
        raise ConfigError("strain range must be positive")
    return np.linspace(0.0, e_max, n)


def energy_surface(model, n: int = 21, e_max: float = 0.2):
    """Energy psi(Exx, Eyy) on an n-by-n tensile strain grid.

    ``model`` is a learned model or an oracle parameter record. Returns
    (axis, psi) with psi[i, j] at Exx = axis[i], Eyy = axis[j].
    """
    axis = strain_axis(e_max, n)
    lam = np.sqrt(1.0 + 2.0 * axis)
    lx, ly = np.meshgrid(lam, lam, indexing="ij")
    if isinstance(model, material.NodeMaterialModel):
        dirs = model.structural_tensors()
        psi = np.empty((n, n))
        for i in range(n):
            for k in range(n):
                C = np.diag([lx[i, k] ** 2, ly[i, k] ** 2,
                             1.0 / (lx[i, k] ** 2 * ly[i, k] ** 2)])
                inv = invariants(C, dirs)
                psi[i, k] = material.strain_energy(model, inv).psi
    else:
        psi = np.asarray(oracles.oracle_energy(model, lx, ly), dtype=float)
    return axis, psi


def second_difference_violations(psi: np.ndarray, threshold: float = -1e-9):
    """Negative second differences along rows, columns and both diagonals.

    Returns (min_second_difference, violations) where each violation is a
    (direction, i, j, value) tuple anchored at the center point.
    """
    n = psi.shape[0]
    worst = np.inf
    violations = []
    directions = {
        "row": (1, 0),
        "col": (0, 1),
        "diag": (1, 1),
        "anti": (1, -1),
    }
    for name, (di, dj) in directions.items():
        for i in range(n):
            for k in range(n):
                ip, kp = i + di, k + dj
                im, km = i - di, k - dj
                if not (0 <= ip < n and 0 <= kp < n and 0 <= im < n and 0 <= km < n):
                    continue
                dd = psi[ip, kp] - 2.0 * psi[i, k] + psi[im, km]
                worst = min(worst, dd)
                if dd < threshold:
                    violations.append((name, i, k, float(dd)))
    return float(worst), violations


def derivative_monotonicity_violations(model: material.NodeMaterialModel,
                                       x_max: float = 1.0, n: int = 200,
                                       tol: float = -1e-12):
    """Grid scan of all ten derivative functions for monotonicity.

    Returns a list of (term_name, x, decrease) triples; empty means every
    function is non-decreasing on [0, x_max] at the grid resolution.
    """
    if n < 2:
        raise ConfigError("monotonicity scan needs at least two points")
    grid = np.linspace(0.0, x_max, n)
    x = np.tile(grid, (len(material.TERM_NAMES), 1))
    y = model.stacked().integrate(x)
    out = []
    for row, term in enumerate(material.TERM_NAMES):
        steps = np.diff(y[row])
        bad = np.flatnonzero(steps < tol)
        for b in bad:
            out.append((term, float(grid[b + 1]), float(steps[b])))
    return out


@dataclass(frozen=True)
class SurfaceScan:
    min_second_difference: float
    n_violations: int
    violations: list
    monotonicity_violations: list
    convex: bool

    def to_dict(self) -> dict:
        return {
            "min_second_difference": self.min_second_difference,
            "n_violations": self.n_violations,
            "violations": [list(v) for v in self.violations[:50]],
            "monotonicity_violations": [list(v) for v in
                                        self.monotonicity_violations[:50]],
            "convex": self.convex,
        }


def convexity_scan(model, n: int = 21, e_max: float = 0.2,
                   threshold: float = -1e-9) -> SurfaceScan:
    """Full diagnostic: energy-grid second differences plus, for learned
    models, the derivative-function monotonicity scan."""
    _, psi = energy_surface(model, n=n, e_max=e_max)
    worst, violations = second_difference_violations(psi, threshold)
    mono = []
    if isinstance(model, material.NodeMaterialModel):
        mono = derivative_monotonicity_violations(model)
    return SurfaceScan(
        min_second_difference=worst,
        n_violations=len(violations),
        violations=violations,
        monotonicity_violations=mono,
        convex=(len(violations) == 0 and len(mono) == 0),
    )
