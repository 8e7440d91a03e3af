"""Closed-form hyperelastic models for synthetic data and baseline fits.

Three invariant-based models (exponential two-fiber, dispersed single-fiber,
polynomial Mooney-Rivlin) run through the same plane-stress pressure
elimination as the learned model. The exponential Green-Lagrange model is
strictly two-dimensional: its stress comes straight from dPsi/dE with no
pressure term.

Fiber terms are tension-only: the two-fiber exponential contributes when its
fiber invariant exceeds one, the dispersed model when its averaged fiber
strain measure is positive. Both gates keep the energy C^1 and preserve the
exact single-family reduction at zero dispersion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from typing import Union

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError, DomainError, ParseError
from .kinematics import biaxial_arrays

__all__ = [
    "MrParams",
    "HgoParams",
    "GohParams",
    "FungParams",
    "OracleModel",
    "ORACLE_KINDS",
    "FitConfig",
    "FitReport",
    "oracle_stress",
    "oracle_energy",
    "fit_oracle",
    "oracle_to_document",
    "oracle_from_document",
    "save_oracle",
    "load_oracle",
]


@dataclass(frozen=True)
class MrParams:
    """Polynomial model C10 (I1-3) + C01 (I2-3) + C20 (I1-3)^2, in MPa."""

    c10: float
    c01: float = 0.0
    c20: float = 0.0

    kind = "mr"


@dataclass(frozen=True)
class HgoParams:
    """Neo-Hookean matrix plus two exponential fiber families."""

    mu: float
    k1: float
    k2: float
    angle_v: float = np.pi / 4.0
    angle_w: float = -np.pi / 4.0

    kind = "hgo"

    def __post_init__(self):
        if self.mu <= 0 or self.k1 <= 0 or self.k2 <= 0:
            raise DomainError("mu, k1, k2 must be positive")


@dataclass(frozen=True)
class GohParams:
    """Neo-Hookean matrix plus one dispersed fiber family.

    kappa in [0, 1/3] blends the fiber invariant with I1; kappa = 1/3 is an
    isotropic fiber distribution, kappa = 0 a perfectly aligned one.
    """

    mu: float
    k1: float
    k2: float
    kappa: float
    theta: float

    kind = "goh"

    def __post_init__(self):
        if self.mu <= 0 or self.k1 <= 0 or self.k2 <= 0:
            raise DomainError("mu, k1, k2 must be positive")
        if not 0.0 <= self.kappa <= 1.0 / 3.0:
            raise DomainError("kappa must lie in [0, 1/3]")


@dataclass(frozen=True)
class FungParams:
    """Two-dimensional exponential model on Green-Lagrange strain components."""

    c1: float
    a1: float
    a2: float
    a4: float

    kind = "fung"

    def __post_init__(self):
        if self.c1 <= 0:
            raise DomainError("c1 must be positive")


OracleModel = Union[MrParams, HgoParams, GohParams, FungParams]

ORACLE_KINDS = {"mr": MrParams, "hgo": HgoParams, "goh": GohParams, "fung": FungParams}


# -- derivative assembly -------------------------------------------------------


def _invariant_derivatives(model, I1, I4v, I4w):
    """(dPsi_dI1, dPsi_dI2, dPsi_dI4v, dPsi_dI4w) for the invariant models."""
    zeros = np.zeros_like(I1)
    if model.kind == "mr":
        d1 = model.c10 + 2.0 * model.c20 * (I1 - 3.0) + zeros
        d2 = model.c01 + zeros
        return d1, d2, zeros, zeros
    if model.kind == "hgo":
        e_v = np.where(I4v > 1.0, I4v - 1.0, 0.0)
        e_w = np.where(I4w > 1.0, I4w - 1.0, 0.0)
        d4v = model.k1 * e_v * np.exp(model.k2 * e_v**2)
        d4w = model.k1 * e_w * np.exp(model.k2 * e_w**2)
        return model.mu + zeros, zeros, d4v, d4w
    if model.kind == "goh":
        e = model.kappa * (I1 - 3.0) + (1.0 - 3.0 * model.kappa) * (I4v - 1.0)
        e = np.maximum(e, 0.0)
        g = 0.5 * model.k1 * e * np.exp(model.k2 * e**2)
        return model.mu + g * model.kappa, zeros, g * (1.0 - 3.0 * model.kappa), zeros
    raise DomainError(f"no invariant derivatives for kind '{model.kind}'")


def _fiber_components(model):
    """Squared direction cosines of the model's fiber directions."""
    if model.kind == "hgo":
        av, aw = model.angle_v, model.angle_w
    elif model.kind == "goh":
        av, aw = model.theta, model.theta + np.pi / 2.0
    else:
        av, aw = 0.0, np.pi / 2.0
    return (np.cos(av) ** 2, np.sin(av) ** 2), (np.cos(aw) ** 2, np.sin(aw) ** 2)


def oracle_stress(model: OracleModel, lam_x, lam_y):
    """Cauchy stresses (sigma_xx, sigma_yy) at the plane-stress state.

    Vectorized over equally shaped stretch arrays.
    """
    lam_x = np.asarray(lam_x, dtype=float)
    lam_y = np.asarray(lam_y, dtype=float)
    if model.kind == "fung":
        exx = 0.5 * (lam_x**2 - 1.0)
        eyy = 0.5 * (lam_y**2 - 1.0)
        q = model.a1 * exx**2 + model.a2 * eyy**2 + 2.0 * model.a4 * exx * eyy
        s_xx = model.c1 * np.exp(q) * (model.a1 * exx + model.a4 * eyy)
        s_yy = model.c1 * np.exp(q) * (model.a2 * eyy + model.a4 * exx)
        return lam_x**2 * s_xx, lam_y**2 * s_yy
    cx, cy, cz, I1, _ = biaxial_arrays(lam_x, lam_y)
    (v_x2, v_y2), (w_x2, w_y2) = _fiber_components(model)
    I4v = cx * v_x2 + cy * v_y2
    I4w = cx * w_x2 + cy * w_y2
    d1, d2, d4v, d4w = _invariant_derivatives(model, I1, I4v, I4w)
    sxx = (2.0 * d1 * (cx - cz)
           + 2.0 * d2 * (cx * (I1 - cx) - cz * (I1 - cz))
           + 2.0 * d4v * cx * v_x2 + 2.0 * d4w * cx * w_x2)
    syy = (2.0 * d1 * (cy - cz)
           + 2.0 * d2 * (cy * (I1 - cy) - cz * (I1 - cz))
           + 2.0 * d4v * cy * v_y2 + 2.0 * d4w * cy * w_y2)
    return sxx, syy


def oracle_energy(model: OracleModel, lam_x, lam_y):
    """Strain energy (MPa) at the constrained plane-stress state.

    Zero at the identity map for every kind; the exponential 2-D model is
    reported relative to its reference value.
    """
    lam_x = np.asarray(lam_x, dtype=float)
    lam_y = np.asarray(lam_y, dtype=float)
    if model.kind == "fung":
        exx = 0.5 * (lam_x**2 - 1.0)
        eyy = 0.5 * (lam_y**2 - 1.0)
        q = model.a1 * exx**2 + model.a2 * eyy**2 + 2.0 * model.a4 * exx * eyy
        return 0.5 * model.c1 * (np.exp(q) - 1.0)
    cx, cy, _, I1, I2 = biaxial_arrays(lam_x, lam_y)
    (v_x2, v_y2), (w_x2, w_y2) = _fiber_components(model)
    I4v = cx * v_x2 + cy * v_y2
    I4w = cx * w_x2 + cy * w_y2
    if model.kind == "mr":
        return (model.c10 * (I1 - 3.0) + model.c01 * (I2 - 3.0)
                + model.c20 * (I1 - 3.0) ** 2)
    if model.kind == "hgo":
        e_v = np.where(I4v > 1.0, I4v - 1.0, 0.0)
        e_w = np.where(I4w > 1.0, I4w - 1.0, 0.0)
        aniso = (np.expm1(model.k2 * e_v**2) + np.expm1(model.k2 * e_w**2))
        return model.mu * (I1 - 3.0) + model.k1 / (2.0 * model.k2) * aniso
    if model.kind == "goh":
        e = model.kappa * (I1 - 3.0) + (1.0 - 3.0 * model.kappa) * (I4v - 1.0)
        e = np.maximum(e, 0.0)
        return model.mu * (I1 - 3.0) + model.k1 / (4.0 * model.k2) * np.expm1(model.k2 * e**2)
    raise DomainError(f"unknown oracle kind '{model.kind}'")


# -- fitting --------------------------------------------------------------------


@dataclass(frozen=True)
class FitConfig:
    restarts: int = 20
    seed: int = 0
    max_iters: int = 4000


@dataclass(frozen=True)
class FitReport:
    mse: float
    per_protocol_mae: dict
    converged: bool
    restarts: int
    kind: str


def _pack_unpack(kind: str):
    """Bound-respecting transforms between fit vectors and parameter records."""
    if kind == "mr":
        def unpack(v):
            return MrParams(c10=v[0], c01=v[1], c20=v[2])

        def pack(p):
            return np.array([p.c10, p.c01, p.c20])
    elif kind == "hgo":
        def unpack(v):
            return HgoParams(mu=np.exp(v[0]), k1=np.exp(v[1]), k2=np.exp(v[2]),
                             angle_v=v[3], angle_w=v[4])

        def pack(p):
            return np.array([np.log(p.mu), np.log(p.k1), np.log(p.k2),
                             p.angle_v, p.angle_w])
    elif kind == "goh":
        def unpack(v):
            kappa = (1.0 / 3.0) / (1.0 + np.exp(-v[3]))
            return GohParams(mu=np.exp(v[0]), k1=np.exp(v[1]), k2=np.exp(v[2]),
                             kappa=kappa, theta=v[4])

        def pack(p):
            kappa = min(max(p.kappa, 1e-6), 1.0 / 3.0 - 1e-6)
            logit = np.log(kappa / (1.0 / 3.0 - kappa))
            return np.array([np.log(p.mu), np.log(p.k1), np.log(p.k2),
                             logit, p.theta])
    elif kind == "fung":
        def unpack(v):
            return FungParams(c1=np.exp(v[0]), a1=v[1], a2=v[2], a4=v[3])

        def pack(p):
            return np.array([np.log(p.c1), p.a1, p.a2, p.a4])
    else:
        raise ConfigError(f"unknown oracle kind '{kind}'")
    return pack, unpack


def _initial_guess(kind: str, scale: float):
    if kind == "mr":
        return MrParams(c10=0.25 * scale, c01=0.1 * scale, c20=0.05 * scale)
    if kind == "hgo":
        return HgoParams(mu=0.2 * scale, k1=0.2 * scale, k2=5.0)
    if kind == "goh":
        return GohParams(mu=0.2 * scale, k1=0.2 * scale, k2=5.0,
                         kappa=0.15, theta=np.pi / 2.0)
    return FungParams(c1=0.5 * scale, a1=5.0, a2=5.0, a4=1.0)


def fit_oracle(kind: str, dataset, config: FitConfig | None = None):
    """Least-squares fit of one closed-form model to a stress dataset.

    Derivative-free simplex search on the pooled stress MSE with seeded
    random restarts; bounds are enforced through log and logistic
    transforms. Returns (params, FitReport); a non-converged search is
    flagged in the report and the best candidate is still returned.
    """
    if kind not in ORACLE_KINDS:
        raise ConfigError(f"unknown oracle kind '{kind}'")
    if len(dataset) == 0:
        raise ConfigError("cannot fit an oracle to an empty dataset")
    config = config or FitConfig()
    pack, unpack = _pack_unpack(kind)
    lam_x, lam_y = dataset.lam_x, dataset.lam_y
    target = np.concatenate([dataset.sig_xx, dataset.sig_yy])
    scale = max(float(np.max(np.abs(target))), 1e-8)

    def objective(v):
        try:
            sxx, syy = oracle_stress(unpack(v), lam_x, lam_y)
        except (DomainError, FloatingPointError, OverflowError):
            return 1e12
        resid = np.concatenate([sxx, syy]) - target
        if not np.all(np.isfinite(resid)):
            return 1e12
        return float(np.mean(resid**2))

    rng = np.random.default_rng(config.seed)
    base = pack(_initial_guess(kind, scale))
    best_v, best_f, any_converged = None, np.inf, False
    with np.errstate(over="ignore", invalid="ignore"):
        for restart in range(max(config.restarts, 1)):
            v0 = base.copy()
            if restart > 0:
                v0 = v0 + rng.normal(0.0, 1.0, v0.shape)
            res = minimize(objective, v0, method="Nelder-Mead",
                           options={"maxiter": config.max_iters,
                                    "xatol": 1e-12, "fatol": 1e-14})
            if res.fun < best_f:
                best_v, best_f = res.x, res.fun
                any_converged = any_converged or bool(res.success)
        # polish the winner from its own neighborhood
        res = minimize(objective, best_v, method="Nelder-Mead",
                       options={"maxiter": config.max_iters,
                                "xatol": 1e-13, "fatol": 1e-16})
        if res.fun < best_f:
            best_v, best_f = res.x, res.fun
            any_converged = any_converged or bool(res.success)

    params = unpack(best_v)
    sxx, syy = oracle_stress(params, lam_x, lam_y)
    mae = {}
    for tag in dataset.protocols():
        sel = dataset.protocol == tag
        err = np.concatenate([(sxx - dataset.sig_xx)[sel], (syy - dataset.sig_yy)[sel]])
        mae[tag] = float(np.mean(np.abs(err)))
    report = FitReport(mse=best_f, per_protocol_mae=mae,
                       converged=any_converged, restarts=config.restarts, kind=kind)
    return params, report


# -- documents --------------------------------------------------------------


def oracle_to_document(model: OracleModel) -> dict:
    doc = {"kind": model.kind}
    for f in fields(model):
        doc[f.name] = float(getattr(model, f.name))
    return doc


def oracle_from_document(doc: dict) -> OracleModel:
    if not isinstance(doc, dict):
        raise ParseError("oracle document must be a mapping", where="$")
    kind = doc.get("kind")
    if kind not in ORACLE_KINDS:
        raise ParseError(f"unknown oracle kind '{kind}'", where="kind")
    cls = ORACLE_KINDS[kind]
    kwargs = {}
    for f in fields(cls):
        if f.name not in doc:
            raise ParseError(f"missing parameter '{f.name}'", where=f.name)
        kwargs[f.name] = float(doc[f.name])
    try:
        return cls(**kwargs)
    except DomainError as exc:
        raise ParseError(str(exc), where=kind) from exc


def save_oracle(model: OracleModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(oracle_to_document(model), fh, indent=1)
        fh.write("\n")


def load_oracle(path) -> OracleModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", where=str(path)) from exc
    return oracle_from_document(doc)
