"""Polyconvex material model assembled from ten monotone scalar flows.

Four flows carry the direct derivative terms for (I1, I2, I4v, I4w); six
carry the pairwise mixed terms, each fed a convex combination of two shifted
invariants. Non-negative output biases (softplus of a raw parameter) are
added to the I1 and I2 terms; mixing weights are logistic maps of raw
parameters so they stay inside (0, 1). Mixed-term outputs are clamped at
zero from below, with a zero subgradient on the clamped side.

All derivative terms are monotone non-decreasing and vanish at the identity
map, so the reference state is exactly stress free and every energy term is
convex in its argument by construction rather than by penalty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, ParseError, UnsupportedStateError
from .kinematics import (
    InvariantSet,
    ShiftedInvariants,
    StructuralTensors,
    biaxial_arrays,
    invariants,
    right_cauchy_green,
    shift_invariants,
)
from .node_core import (
    N_WEIGHTS,
    ScalarNodeParams,
    StackedNodes,
    random_node_params,
    zero_node_params,
)

__all__ = [
    "TERM_NAMES",
    "MIXED_SLOTS",
    "NodeMaterialModel",
    "EnergyDerivatives",
    "PlaneStressSolution",
    "EnergyValue",
    "softplus",
    "softplus_inverse",
    "sigmoid",
    "random_model",
    "zero_weight_model",
    "energy_derivatives",
    "energy_hessian",
    "solve_pressure",
    "pk2_stress",
    "strain_energy",
    "biaxial_stress",
    "to_document",
    "from_document",
    "save_model",
    "load_model",
]

# term order: four direct slots over (I1, I2, I4v, I4w), then the six pairs
TERM_NAMES = (
    "I1", "I2", "I4v", "I4w",
    "I1_I2", "I1_I4v", "I1_I4w", "I2_I4v", "I2_I4w", "I4v_I4w",
)
# mixed pairs as indices into the direct slots
MIXED_SLOTS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

_DOMAIN_TOL = 1e-8


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inverse(y):
    """Raw parameter whose softplus equals y (y > 0)."""
    if np.any(np.asarray(y) <= 0):
        raise DomainError("softplus inverse requires a positive value")
    return np.log(np.expm1(y))


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


@dataclass
class NodeMaterialModel:
    """Ten flow parameter sets plus biases, mixing weights and fiber angles."""

    nodes: dict
    raw_bias_1: float
    raw_bias_2: float
    raw_alpha: np.ndarray
    fiber_angle_v: float = 0.0
    fiber_angle_w: float = np.pi / 2.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = [t for t in TERM_NAMES if t not in self.nodes]
        if missing:
            raise DomainError(f"missing node parameter sets: {missing}")
        if len(self.nodes) != len(TERM_NAMES):
            extra = set(self.nodes) - set(TERM_NAMES)
            raise DomainError(f"unexpected node keys: {sorted(extra)}")
        self.raw_alpha = np.asarray(self.raw_alpha, dtype=float)
        if self.raw_alpha.shape != (6,):
            raise DomainError("raw_alpha must hold six values")

    @property
    def bias_1(self) -> float:
        """Effective non-negative output bias of the I1 term."""
        return float(softplus(self.raw_bias_1))

    @property
    def bias_2(self) -> float:
        return float(softplus(self.raw_bias_2))

    @property
    def alpha(self) -> np.ndarray:
        """Mixing weights in (0, 1), ordered like MIXED_SLOTS."""
        return sigmoid(self.raw_alpha)

    @property
    def activation(self) -> str:
        return self.nodes[TERM_NAMES[0]].activation

    @property
    def n_steps(self) -> int:
        return self.nodes[TERM_NAMES[0]].n_steps

    def structural_tensors(self) -> StructuralTensors:
        return StructuralTensors.from_angles(self.fiber_angle_v, self.fiber_angle_w)

    def stacked(self) -> StackedNodes:
        return StackedNodes.from_params([self.nodes[t] for t in TERM_NAMES])


@dataclass(frozen=True)
class EnergyDerivatives:
    """First partial derivatives of the strain energy (MPa per unit invariant)."""

    dPsi_dI1: float
    dPsi_dI2: float
    dPsi_dI4v: float
    dPsi_dI4w: float

    def as_array(self) -> np.ndarray:
        return np.array([self.dPsi_dI1, self.dPsi_dI2, self.dPsi_dI4v, self.dPsi_dI4w])


@dataclass(frozen=True)
class PlaneStressSolution:
    """Pressure and stresses of one plane-stress state (MPa)."""

    p: float
    S: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class EnergyValue:
    psi: float
    quadrature_order: int


def random_model(seed: int = 0, activation: str = "tanh", n_steps: int = 20,
                 fiber_angle_v: float = 0.0, fiber_angle_w: float = np.pi / 2.0,
                 ) -> NodeMaterialModel:
    """Fresh model with small random weights, reproducible from the seed."""
    rng = np.random.default_rng(seed)
    nodes = {t: random_node_params(rng, activation, n_steps) for t in TERM_NAMES}
    return NodeMaterialModel(
        nodes=nodes,
        raw_bias_1=float(rng.uniform(-3.0, -1.0)),
        raw_bias_2=float(rng.uniform(-3.0, -1.0)),
        raw_alpha=rng.uniform(-1.0, 1.0, 6),
        fiber_angle_v=fiber_angle_v,
        fiber_angle_w=fiber_angle_w,
        metadata={"seed": seed},
    )


def zero_weight_model(h1: float = 0.5, h2: float = 0.0, n_steps: int = 20,
                      ) -> NodeMaterialModel:
    """Model with all network weights zero and effective biases (h1, h2).

    Zero weights make every flow the identity map, so the derivative terms
    reduce to the shifted invariants plus the biases. The reference state is
    exactly stress free. A strictly zero second bias is unreachable through
    softplus; h2 = 0 is realized as ~1e-27.
    """
    nodes = {t: zero_node_params(n_steps=n_steps) for t in TERM_NAMES}
    return NodeMaterialModel(
        nodes=nodes,
        raw_bias_1=float(softplus_inverse(h1)),
        raw_bias_2=float(softplus_inverse(h2)) if h2 > 0 else -60.0,
        raw_alpha=np.zeros(6),
        metadata={"construction": "zero-weight limit"},
    )


# -- term evaluation --------------------------------------------------------


def _check_invariant_domain(inv: InvariantSet):
    if inv.I1 < 3.0 - _DOMAIN_TOL:
        raise DomainError(f"I1 = {inv.I1} below the incompressible bound 3")
    if inv.I2 < 3.0 - _DOMAIN_TOL:
        raise DomainError(f"I2 = {inv.I2} below the incompressible bound 3")
    if inv.I4v < -_DOMAIN_TOL:
        raise DomainError(f"I4v = {inv.I4v} must be non-negative")
    if inv.I4w < -_DOMAIN_TOL:
        raise DomainError(f"I4w = {inv.I4w} must be non-negative")


def node_inputs(shifted, alpha):
    """Inputs of the ten flows: shifted invariants, then their six mixes.

    ``shifted`` is a ShiftedInvariants or a 4-tuple of scalars/arrays;
    the result has shape (10,) or (10, n).
    """
    if isinstance(shifted, ShiftedInvariants):
        parts = (shifted.J1, shifted.J2, shifted.J4v, shifted.J4w)
    else:
        parts = shifted
    j = [np.asarray(v, dtype=float) for v in parts]
    rows = list(j)
    for a, (i, k) in zip(alpha, MIXED_SLOTS):
        rows.append(a * j[i] + (1.0 - a) * j[k])
    return np.stack(rows)


def accumulate_derivatives(y, alpha, bias_1, bias_2):
    """Fold the ten flow outputs into the four derivative components.

    ``y`` has shape (10,) or (10, n). Mixed outputs below zero are clamped
    and contribute nothing. Returns (derivs (4, ...), active (6, ...)).
    """
    active = y[4:] > 0.0
    clamped = np.where(active, y[4:], 0.0)
    d = np.stack([y[0] + bias_1, y[1] + bias_2, y[2], y[3]])
    for idx, (a, (i, k)) in enumerate(zip(alpha, MIXED_SLOTS)):
        d[i] = d[i] + a * clamped[idx]
        d[k] = d[k] + (1.0 - a) * clamped[idx]
    return d, active


def _term_state(model: NodeMaterialModel, inv: InvariantSet, want_sensitivity: bool):
    _check_invariant_domain(inv)
    shifted = shift_invariants(inv)
    alpha = model.alpha
    x = node_inputs(shifted, alpha).reshape(10, 1)
    stacked = model.stacked()
    if want_sensitivity:
        y, s = stacked.integrate_with_sensitivity(x)
        return y[:, 0], s[:, 0], alpha, shifted
    y = stacked.integrate(x)
    return y[:, 0], None, alpha, shifted


def energy_derivatives(model: NodeMaterialModel, inv: InvariantSet) -> EnergyDerivatives:
    """All four first derivatives of the energy at one invariant state."""
    y, _, alpha, _ = _term_state(model, inv, False)
    d, _ = accumulate_derivatives(y, alpha, model.bias_1, model.bias_2)
    return EnergyDerivatives(*(float(v) for v in d))


def energy_hessian(model: NodeMaterialModel, inv: InvariantSet) -> np.ndarray:
    """Symmetric 4x4 matrix of second derivatives over (I1, I2, I4v, I4w).

    Input sensitivities of the flows give the direct curvature; each active
    mixed term spreads its sensitivity with weights a^2, (1-a)^2 and a(1-a).
    Clamped terms contribute nothing (zero one-sided subgradient).
    """
    y, s, alpha, _ = _term_state(model, inv, True)
    active = y[4:] > 0.0
    hess = np.zeros((4, 4))
    for i in range(4):
        hess[i, i] += s[i]
    for idx, (a, (i, k)) in enumerate(zip(alpha, MIXED_SLOTS)):
        if not active[idx]:
            continue
        sm = s[4 + idx]
        hess[i, i] += a * a * sm
        hess[k, k] += (1.0 - a) * (1.0 - a) * sm
        hess[i, k] += a * (1.0 - a) * sm
        hess[k, i] += a * (1.0 - a) * sm
    return hess


# -- stress -----------------------------------------------------------------


def _pressure(ed: EnergyDerivatives, I1: float, c33: float) -> float:
    # unique root of S_33 = 0 for diagonal-in-z C with in-plane fibers
    return -c33 * (2.0 * ed.dPsi_dI1 + 2.0 * ed.dPsi_dI2 * (I1 - c33))


def solve_pressure(model: NodeMaterialModel, C: np.ndarray, inv: InvariantSet) -> float:
    """Lagrange-multiplier pressure enforcing a vanishing normal stress."""
    C = np.asarray(C, dtype=float)
    if abs(C[0, 2]) > 1e-10 or abs(C[1, 2]) > 1e-10:
        raise UnsupportedStateError("C must have no out-of-plane shear coupling")
    ed = energy_derivatives(model, inv)
    return _pressure(ed, inv.I1, float(C[2, 2]))


def pk2_stress(model: NodeMaterialModel, F: np.ndarray,
               dirs: StructuralTensors | None = None) -> PlaneStressSolution:
    """Second Piola-Kirchhoff and Cauchy stress of a plane-stress state.

    S = 2 dPsi/dI1 I + 2 dPsi/dI2 (I1 I - C) + 2 dPsi/dI4v V0
        + 2 dPsi/dI4w W0 + p C^{-1}, with p chosen so S_33 = 0.
    """
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
    inv = invariants(C, dirs)
    ed = energy_derivatives(model, inv)
    p = _pressure(ed, inv.I1, float(C[2, 2]))
    S = (2.0 * ed.dPsi_dI1 * np.eye(3)
         + 2.0 * ed.dPsi_dI2 * (inv.I1 * np.eye(3) - C)
         + 2.0 * ed.dPsi_dI4v * dirs.V0
         + 2.0 * ed.dPsi_dI4w * dirs.W0
         + p * np.linalg.inv(C))
    sigma = F @ S @ F.T
    return PlaneStressSolution(p=p, S=S, sigma=sigma)


# -- energy by quadrature -----------------------------------------------------


@lru_cache(maxsize=8)
def _gauss_legendre(order: int):
    if order < 1:
        raise DomainError("quadrature order must be positive")
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def strain_energy(model: NodeMaterialModel, inv: InvariantSet,
                  order: int = 16) -> EnergyValue:
    """Strain energy recovered from the derivative functions.

    Each of the ten one-dimensional derivative functions is integrated from
    zero to its shifted (or mixed) argument with Gauss-Legendre quadrature;
    the output biases contribute linear terms. Zero at the identity map.
    """
    _check_invariant_domain(inv)
    xq, wq = _gauss_legendre(order)
    shifted = shift_invariants(inv)
    alpha = model.alpha
    ends = node_inputs(shifted, alpha)            # (10,)
    # map [-1, 1] quadrature points onto [0, end] per term
    pts = 0.5 * ends[:, None] * (xq[None, :] + 1.0)
    y = model.stacked().integrate(pts)            # (10, order)
    y[4:] = np.maximum(y[4:], 0.0)
    integrals = 0.5 * ends * (y @ wq)
    psi = float(np.sum(integrals)
                + model.bias_1 * shifted.J1 + model.bias_2 * shifted.J2)
    return EnergyValue(psi=psi, quadrature_order=order)


# -- batched biaxial evaluation ----------------------------------------------


def biaxial_stress(model: NodeMaterialModel, lam_x, lam_y):
    """Cauchy stresses (sigma_xx, sigma_yy) along a biaxial stretch path.

    Vectorized over equally shaped stretch arrays; equivalent to running
    ``pk2_stress`` on each diagonal plane-stress state.
    """
    lam_x = np.atleast_1d(np.asarray(lam_x, dtype=float))
    lam_y = np.atleast_1d(np.asarray(lam_y, dtype=float))
    cx, cy, cz, I1, I2 = biaxial_arrays(lam_x, lam_y)
    cv, sv = np.cos(model.fiber_angle_v), np.sin(model.fiber_angle_v)
    cw, sw = np.cos(model.fiber_angle_w), np.sin(model.fiber_angle_w)
    I4v = cx * cv**2 + cy * sv**2
    I4w = cx * cw**2 + cy * sw**2
    alpha = model.alpha
    x = node_inputs((I1 - 3.0, I2 - 3.0, I4v - 1.0, I4w - 1.0), alpha)
    y = model.stacked().integrate(x)
    d, _ = accumulate_derivatives(y, alpha, model.bias_1, model.bias_2)
    sxx = (2.0 * d[0] * (cx - cz)
           + 2.0 * d[1] * (cx * (I1 - cx) - cz * (I1 - cz))
           + 2.0 * d[2] * cx * cv**2
           + 2.0 * d[3] * cx * cw**2)
    syy = (2.0 * d[0] * (cy - cz)
           + 2.0 * d[1] * (cy * (I1 - cy) - cz * (I1 - cz))
           + 2.0 * d[2] * cy * sv**2
           + 2.0 * d[3] * cy * sw**2)
    return sxx, syy


# -- serialization ------------------------------------------------------------


_SCHEMA_VERSION = 1


def to_document(model: NodeMaterialModel) -> dict:
    """Self-describing JSON-compatible tree holding every parameter."""
    return {
        "schema_version": _SCHEMA_VERSION,
        "architecture": {
            "layers": [1, 5, 5, 1],
            "activation": model.activation,
            "n_steps": model.n_steps,
        },
        "nodes": {
            t: [w.tolist() for w in model.nodes[t].layer_weights]
            for t in TERM_NAMES
        },
        "raw_bias_1": float(model.raw_bias_1),
        "raw_bias_2": float(model.raw_bias_2),
        "raw_alpha": [float(a) for a in model.raw_alpha],
        "fiber_angle_v": float(model.fiber_angle_v),
        "fiber_angle_w": float(model.fiber_angle_w),
        "metadata": dict(model.metadata),
    }


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ParseError(f"missing required key '{key}'", where=where or key)
    return doc[key]


def from_document(doc: dict) -> NodeMaterialModel:
    if not isinstance(doc, dict):
        raise ParseError("model document must be a mapping", where="$")
    version = _require(doc, "schema_version", "schema_version")
    if version != _SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version}", where="schema_version")
    arch = _require(doc, "architecture", "architecture")
    activation = _require(arch, "activation", "architecture.activation")
    n_steps = _require(arch, "n_steps", "architecture.n_steps")
    layers = _require(arch, "layers", "architecture.layers")
    if list(layers) != [1, 5, 5, 1]:
        raise ParseError(f"unsupported layer sizes {layers}", where="architecture.layers")
    raw_nodes = _require(doc, "nodes", "nodes")
    nodes = {}
    for t in TERM_NAMES:
        if t not in raw_nodes:
            raise ParseError(f"missing node parameter set '{t}'", where=f"nodes.{t}")
        mats = raw_nodes[t]
        if len(mats) != 3:
            raise ParseError("each node needs three weight matrices", where=f"nodes.{t}")
        try:
            nodes[t] = ScalarNodeParams(
                w1=np.asarray(mats[0], dtype=float),
                w2=np.asarray(mats[1], dtype=float),
                w3=np.asarray(mats[2], dtype=float),
                activation=activation,
                n_steps=int(n_steps),
            )
        except (DomainError, ValueError) as exc:
            raise ParseError(str(exc), where=f"nodes.{t}") from exc
    raw_alpha = np.asarray(_require(doc, "raw_alpha", "raw_alpha"), dtype=float)
    if raw_alpha.shape != (6,):
        raise ParseError("raw_alpha must hold six values", where="raw_alpha")
    return NodeMaterialModel(
        nodes=nodes,
        raw_bias_1=float(_require(doc, "raw_bias_1", "raw_bias_1")),
        raw_bias_2=float(_require(doc, "raw_bias_2", "raw_bias_2")),
        raw_alpha=raw_alpha,
        fiber_angle_v=float(_require(doc, "fiber_angle_v", "fiber_angle_v")),
        fiber_angle_w=float(_require(doc, "fiber_angle_w", "fiber_angle_w")),
        metadata=dict(doc.get("metadata", {})),
    )


def save_model(model: NodeMaterialModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(to_document(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> NodeMaterialModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", where=str(path)) from exc
    return from_document(doc)
