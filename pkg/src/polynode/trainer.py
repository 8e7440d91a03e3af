"""Loss assembly, exact gradients through the stress pipeline, and Adam.

The loss is the pooled mean-squared error of the two measured Cauchy stress
components. Its gradient is assembled analytically: per-weight flow
gradients come from differentiating the unrolled RK4 recurrence, and the
chain through the mixing weights, output biases, fiber angles and the
pressure elimination is written out in closed form. Clamped mixed terms
contribute zero gradient, matching their zero subgradient.

All convexity and non-negativity constraints are architectural, so training
never needs penalty terms and trained models keep every material invariant.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TrainingDivergedError
from .kinematics import biaxial_arrays
from .material import (
    MIXED_SLOTS,
    TERM_NAMES,
    NodeMaterialModel,
    biaxial_stress,
    sigmoid,
    softplus,
)
from .node_core import HIDDEN_WIDTH, N_WEIGHTS, ScalarNodeParams, StackedNodes

__all__ = [
    "TrainConfig",
    "LossReport",
    "N_PARAMETERS",
    "model_to_vector",
    "vector_to_model",
    "loss",
    "loss_gradient",
    "train",
    "evaluate",
]

N_NODE_WEIGHTS = len(TERM_NAMES) * N_WEIGHTS       # 350
N_PARAMETERS = N_NODE_WEIGHTS + 2 + 6 + 2          # + biases + alphas + angles

_IDX_BIAS1 = N_NODE_WEIGHTS
_IDX_BIAS2 = N_NODE_WEIGHTS + 1
_IDX_ALPHA = N_NODE_WEIGHTS + 2
_IDX_ANGLE_V = N_NODE_WEIGHTS + 8
_IDX_ANGLE_W = N_NODE_WEIGHTS + 9

# mixed rows feeding each direct slot, with the slot's position in the pair
_MIXED_OF_SLOT = {
    s: [(m, pair.index(s)) for m, pair in enumerate(MIXED_SLOTS) if s in pair]
    for s in range(4)
}


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings; every run is deterministic given the seed."""

    learning_rate: float = 1e-3
    max_iters: int = 5000
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int | None = None  # None = full batch
    seed: int = 0
    convergence_tol: float = 1e-12
    patience: int = 200
    train_fiber_angles: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if self.optimizer not in ("adam", "gradient_descent"):
            raise ConfigError(f"unknown optimizer '{self.optimizer}'")


@dataclass
class LossReport:
    total_mse: float
    per_protocol_mae: dict
    history: list = field(default_factory=list)
    n_iters: int = 0
    best_iter: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "total_mse": self.total_mse,
            "per_protocol_mae": {k: float(v) for k, v in self.per_protocol_mae.items()},
            "history": [[int(i), float(v)] for i, v in self.history],
            "n_iters": self.n_iters,
            "best_iter": self.best_iter,
            "wall_time": self.wall_time,
        }


# -- parameter vector ---------------------------------------------------------


def model_to_vector(model: NodeMaterialModel) -> np.ndarray:
    """Flatten all trainable parameters, node weights first."""
    parts = [model.nodes[t].flat() for t in TERM_NAMES]
    parts.append(np.array([model.raw_bias_1, model.raw_bias_2]))
    parts.append(np.asarray(model.raw_alpha, dtype=float))
    parts.append(np.array([model.fiber_angle_v, model.fiber_angle_w]))
    return np.concatenate(parts)


def vector_to_model(vec: np.ndarray, template: NodeMaterialModel) -> NodeMaterialModel:
    """Rebuild a model from a flat vector, taking architecture from ``template``."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (N_PARAMETERS,):
        raise ConfigError(f"expected {N_PARAMETERS} parameters, got {vec.shape}")
    nodes = {}
    for i, t in enumerate(TERM_NAMES):
        nodes[t] = ScalarNodeParams.from_flat(
            vec[i * N_WEIGHTS:(i + 1) * N_WEIGHTS],
            activation=template.activation, n_steps=template.n_steps)
    return NodeMaterialModel(
        nodes=nodes,
        raw_bias_1=float(vec[_IDX_BIAS1]),
        raw_bias_2=float(vec[_IDX_BIAS2]),
        raw_alpha=vec[_IDX_ALPHA:_IDX_ALPHA + 6].copy(),
        fiber_angle_v=float(vec[_IDX_ANGLE_V]),
        fiber_angle_w=float(vec[_IDX_ANGLE_W]),
        metadata=dict(template.metadata),
    )


def _stacked_from_vector(vec, activation, n_steps):
    blk = vec[:N_NODE_WEIGHTS].reshape(len(TERM_NAMES), N_WEIGHTS)
    h = HIDDEN_WIDTH
    return StackedNodes(
        w1=blk[:, :h],
        w2=blk[:, h:h + h * h].reshape(len(TERM_NAMES), h, h),
        w3=blk[:, h + h * h:],
        activation=activation,
        n_steps=n_steps,
    )


def _prep(data):
    if len(data) == 0:
        raise ConfigError("training data must be non-empty")
    cx, cy, cz, I1, I2 = biaxial_arrays(data.lam_x, data.lam_y)
    return {
        "cx": cx, "cy": cy, "cz": cz, "I1": I1,
        "J1": I1 - 3.0, "J2": I2 - 3.0,
        "sxx": np.asarray(data.sig_xx, dtype=float),
        "syy": np.asarray(data.sig_yy, dtype=float),
    }


# -- forward and gradient -----------------------------------------------------


def _forward(vec, prep, activation, n_steps, want_grad, subset=None):
    """Loss (and optionally its exact gradient) on prepared data."""
    cx, cy, cz, I1 = prep["cx"], prep["cy"], prep["cz"], prep["I1"]
    J1, J2 = prep["J1"], prep["J2"]
    sxx_d, syy_d = prep["sxx"], prep["syy"]
    if subset is not None:
        cx, cy, cz, I1 = cx[subset], cy[subset], cz[subset], I1[subset]
        J1, J2 = J1[subset], J2[subset]
        sxx_d, syy_d = sxx_d[subset], syy_d[subset]
    n = len(J1)

    av, aw = float(vec[_IDX_ANGLE_V]), float(vec[_IDX_ANGLE_W])
    cv2, sv2 = np.cos(av) ** 2, np.sin(av) ** 2
    cw2, sw2 = np.cos(aw) ** 2, np.sin(aw) ** 2
    J4v = cx * cv2 + cy * sv2 - 1.0
    J4w = cx * cw2 + cy * sw2 - 1.0

    alpha = sigmoid(vec[_IDX_ALPHA:_IDX_ALPHA + 6])
    j = (J1, J2, J4v, J4w)
    x = np.stack(list(j) + [alpha[m] * j[i] + (1.0 - alpha[m]) * j[k]
                            for m, (i, k) in enumerate(MIXED_SLOTS)])

    stacked = _stacked_from_vector(vec, activation, n_steps)
    if want_grad:
        y, s, G = stacked.integrate_with_gradient(x)
    else:
        y = stacked.integrate(x)
        s = G = None

    H1 = float(softplus(vec[_IDX_BIAS1]))
    H2 = float(softplus(vec[_IDX_BIAS2]))
    active = y[4:] > 0.0
    m_out = np.where(active, y[4:], 0.0)
    d = np.stack([y[0] + H1, y[1] + H2, y[2], y[3]])
    for midx, (i, k) in enumerate(MIXED_SLOTS):
        d[i] = d[i] + alpha[midx] * m_out[midx]
        d[k] = d[k] + (1.0 - alpha[midx]) * m_out[midx]

    # stress coefficients per derivative slot (plane stress, diagonal state)
    axx = np.stack([
        2.0 * (cx - cz),
        2.0 * (cx * (I1 - cx) - cz * (I1 - cz)),
        2.0 * cx * cv2,
        2.0 * cx * cw2,
    ])
    ayy = np.stack([
        2.0 * (cy - cz),
        2.0 * (cy * (I1 - cy) - cz * (I1 - cz)),
        2.0 * cy * sv2,
        2.0 * cy * sw2,
    ])
    sxx = np.einsum("an,an->n", axx, d)
    syy = np.einsum("an,an->n", ayy, d)
    rx = sxx - sxx_d
    ry = syy - syy_d
    value = float(np.mean(rx**2 + ry**2) / 2.0)
    if not want_grad:
        return value, None, (sxx, syy)

    # dLoss/dPsi_slot per record
    w = (axx * rx + ayy * ry) / n

    grad = np.zeros(N_PARAMETERS)
    blk = grad[:N_NODE_WEIGHTS].reshape(len(TERM_NAMES), N_WEIGHTS)
    for a in range(4):
        blk[a] = G[a] @ w[a]
    for midx, (i, k) in enumerate(MIXED_SLOTS):
        coeff = active[midx] * (alpha[midx] * w[i] + (1.0 - alpha[midx]) * w[k])
        blk[4 + midx] = G[4 + midx] @ coeff

    grad[_IDX_BIAS1] = float(sigmoid(vec[_IDX_BIAS1]) * np.sum(w[0]))
    grad[_IDX_BIAS2] = float(sigmoid(vec[_IDX_BIAS2]) * np.sum(w[1]))

    for midx, (i, k) in enumerate(MIXED_SLOTS):
        a_m = alpha[midx]
        ds = active[midx] * s[4 + midx] * (j[i] - j[k])
        dpsi_i = m_out[midx] + a_m * ds
        dpsi_k = -m_out[midx] + (1.0 - a_m) * ds
        grad[_IDX_ALPHA + midx] = a_m * (1.0 - a_m) * float(
            np.sum(w[i] * dpsi_i + w[k] * dpsi_k))

    # fiber angles: the invariants move the flow inputs, the structural
    # tensors move the stress coefficients directly
    for slot, idx_angle, angle in ((2, _IDX_ANGLE_V, av), (3, _IDX_ANGLE_W, aw)):
        sin2a = np.sin(2.0 * angle)
        dj = (cy - cx) * sin2a
        hcol = np.zeros((4, n))
        hcol[slot] += s[slot]
        for midx, pos in _MIXED_OF_SLOT[slot]:
            i, k = MIXED_SLOTS[midx]
            a_m = alpha[midx]
            c_in = a_m if pos == 0 else 1.0 - a_m
            sm = active[midx] * s[4 + midx] * c_in
            hcol[i] += a_m * sm
            hcol[k] += (1.0 - a_m) * sm
        g_inputs = float(np.sum(w * (hcol * dj[None, :])))
        g_struct = float(2.0 * sin2a * np.sum((ry * cy - rx * cx) * d[slot]) / n)
        grad[idx_angle] = g_inputs + g_struct

    return value, grad, (sxx, syy)


# -- public operations ----------------------------------------------------------


def loss(model: NodeMaterialModel, data) -> float:
    """Pooled stress MSE, mean over records of ((dxx)^2 + (dyy)^2)/2."""
    value, _, _ = _forward(model_to_vector(model), _prep(data),
                           model.activation, model.n_steps, False)
    return value


def loss_gradient(model: NodeMaterialModel, data) -> np.ndarray:
    """Exact gradient of ``loss`` over the flat parameter vector."""
    _, grad, _ = _forward(model_to_vector(model), _prep(data),
                          model.activation, model.n_steps, True)
    return grad


def _per_protocol_mae(model, data) -> dict:
    sxx, syy = biaxial_stress(model, data.lam_x, data.lam_y)
    mae = {}
    for tag in data.protocols():
        sel = data.protocol == tag
        err = np.concatenate([(sxx - data.sig_xx)[sel], (syy - data.sig_yy)[sel]])
        mae[tag] = float(np.mean(np.abs(err)))
    return mae


def train(model: NodeMaterialModel, data, config: TrainConfig | None = None):
    """Optimize all raw parameters; returns (best model, LossReport).

    Runs Adam (or plain gradient descent) for at most ``max_iters``
    iterations, stopping early once the best loss has not improved by
    ``convergence_tol`` within ``patience`` iterations. The returned model
    is the best-loss snapshot, not the last iterate.
    """
    config = config or TrainConfig()
    prep = _prep(data)
    n = len(data)
    rng = np.random.default_rng(config.seed)

    vec = model_to_vector(model)
    m1 = np.zeros_like(vec)
    m2 = np.zeros_like(vec)
    best_vec = vec.copy()
    best_loss = np.inf
    best_iter = 0
    history = []
    start = time.perf_counter()

    n_iter = 0
    for n_iter in range(1, config.max_iters + 1):
        subset = None
        if config.batch_size is not None and config.batch_size < n:
            subset = rng.choice(n, size=config.batch_size, replace=False)
        value, grad, _ = _forward(vec, prep, model.activation, model.n_steps,
                                  True, subset=subset)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise TrainingDivergedError(
                snapshot=vector_to_model(best_vec, model), iteration=n_iter)
        if subset is not None:
            # track progress on the full data so the snapshot is meaningful
            value, _, _ = _forward(vec, prep, model.activation, model.n_steps, False)
        history.append((n_iter, value))
        if value < best_loss - config.convergence_tol:
            best_loss, best_vec, best_iter = value, vec.copy(), n_iter
        elif value < best_loss:
            best_loss, best_vec, best_iter = value, vec.copy(), best_iter
        if n_iter - best_iter >= config.patience:
            break

        if not config.train_fiber_angles:
            grad[_IDX_ANGLE_V] = 0.0
            grad[_IDX_ANGLE_W] = 0.0
        if config.optimizer == "adam":
            m1 = config.beta1 * m1 + (1.0 - config.beta1) * grad
            m2 = config.beta2 * m2 + (1.0 - config.beta2) * grad**2
            mhat = m1 / (1.0 - config.beta1**n_iter)
            vhat = m2 / (1.0 - config.beta2**n_iter)
            vec = vec - config.learning_rate * mhat / (np.sqrt(vhat) + config.eps)
        else:
            vec = vec - config.learning_rate * grad

    trained = vector_to_model(best_vec, model)
    trained.metadata = dict(model.metadata)
    trained.metadata["training_provenance"] = {
        "optimizer": config.optimizer,
        "learning_rate": config.learning_rate,
        "iterations": n_iter,
        "seed": config.seed,
        "final_loss": best_loss,
    }
    report = LossReport(
        total_mse=best_loss,
        per_protocol_mae=_per_protocol_mae(trained, data),
        history=history,
        n_iters=n_iter,
        best_iter=best_iter,
        wall_time=time.perf_counter() - start,
    )
    return trained, report


def evaluate(model: NodeMaterialModel, data_split) -> LossReport:
    """Per-protocol MAE on both sides of a split.

    Keys in ``per_protocol_mae`` are prefixed 'train/' and 'validation/';
    ``total_mse`` is the validation-side MSE.
    """
    mae = {}
    for side, ds in (("train", data_split.train), ("validation", data_split.validation)):
        for tag, value in _per_protocol_mae(model, ds).items():
            mae[f"{side}/{tag}"] = value
    val_loss = loss(model, data_split.validation)
    return LossReport(total_mse=val_loss, per_protocol_mae=mae)
