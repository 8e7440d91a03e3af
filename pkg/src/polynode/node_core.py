"""Scalar neural ODE machinery.

Each scalar map is the time-1 flow of dH/dt = f(H) where f is a bias-free
1 -> 5 -> 5 -> 1 network. Because one-dimensional trajectories cannot cross,
the resulting input-output map is monotone, and because f(0) = 0 exactly the
map fixes the origin. Integration uses classical fixed-step RK4 on t in
[0, 1]; sensitivities are obtained by running the same RK4 scheme on the
augmented system, which for explicit Runge-Kutta methods equals the exact
derivative of the unrolled discrete recurrence.

`StackedNodes` evaluates K networks on (K, n) input batches in one pass;
the module-level functions are the single-network convenience layer on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, IntegrationError

__all__ = [
    "HIDDEN_WIDTH",
    "N_WEIGHTS",
    "ScalarNodeParams",
    "OdeSolution",
    "StackedNodes",
    "random_node_params",
    "zero_node_params",
    "linear_node_params",
    "rhs_eval",
    "integrate",
    "integrate_with_input_sensitivity",
    "integrate_with_param_gradient",
]

HIDDEN_WIDTH = 5
# weight counts per layer: (5x1) + (5x5) + (1x5)
N_WEIGHTS = HIDDEN_WIDTH + HIDDEN_WIDTH * HIDDEN_WIDTH + HIDDEN_WIDTH

_ACTIVATIONS = ("tanh", "linear")


@dataclass(frozen=True)
class ScalarNodeParams:
    """Weights of one bias-free right-hand-side network.

    ``w1`` has shape (5, 1), ``w2`` (5, 5) and ``w3`` (1, 5). There are no
    bias vectors anywhere, so the rhs vanishes at H = 0 for any weights.
    """

    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    activation: str = "tanh"
    n_steps: int = 20

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise DomainError(f"unknown activation '{self.activation}'")
        if self.n_steps < 1:
            raise DomainError("n_steps must be >= 1")
        shapes = (self.w1.shape, self.w2.shape, self.w3.shape)
        expected = ((HIDDEN_WIDTH, 1), (HIDDEN_WIDTH, HIDDEN_WIDTH), (1, HIDDEN_WIDTH))
        if shapes != expected:
            raise DomainError(f"layer shapes {shapes} do not match {expected}")

    @property
    def layer_weights(self):
        return [self.w1, self.w2, self.w3]

    def flat(self) -> np.ndarray:
        """Weights as one vector, layer-major then row-major."""
        return np.concatenate([self.w1.ravel(), self.w2.ravel(), self.w3.ravel()])

    @classmethod
    def from_flat(cls, vec, activation: str = "tanh", n_steps: int = 20):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (N_WEIGHTS,):
            raise DomainError(f"expected {N_WEIGHTS} weights, got {vec.shape}")
        h = HIDDEN_WIDTH
        return cls(
            w1=vec[:h].reshape(h, 1).copy(),
            w2=vec[h : h + h * h].reshape(h, h).copy(),
            w3=vec[h + h * h :].reshape(1, h).copy(),
            activation=activation,
            n_steps=n_steps,
        )

    def with_steps(self, n_steps: int) -> "ScalarNodeParams":
        return replace(self, n_steps=n_steps)


@dataclass(frozen=True)
class OdeSolution:
    """Final state of one flow plus its exact discrete sensitivities."""

    y: float | np.ndarray
    dy_dx: float | np.ndarray
    dy_dtheta: np.ndarray  # (35,) for scalar input, (35, n) for batches


def random_node_params(rng: np.random.Generator, activation: str = "tanh",
                       n_steps: int = 20) -> ScalarNodeParams:
    """Uniform [-0.5, 0.5] weights scaled by 1/fan-in.

    The small initial vector field keeps the flow close to identity, which
    is where training is best behaved.
    """
    h = HIDDEN_WIDTH
    return ScalarNodeParams(
        w1=rng.uniform(-0.5, 0.5, (h, 1)),
        w2=rng.uniform(-0.5, 0.5, (h, h)) / h,
        w3=rng.uniform(-0.5, 0.5, (1, h)) / h,
        activation=activation,
        n_steps=n_steps,
    )


def zero_node_params(activation: str = "tanh", n_steps: int = 20) -> ScalarNodeParams:
    h = HIDDEN_WIDTH
    return ScalarNodeParams(np.zeros((h, 1)), np.zeros((h, h)), np.zeros((1, h)),
                            activation=activation, n_steps=n_steps)


def linear_node_params(slope: float = 1.0, n_steps: int = 20) -> ScalarNodeParams:
    """Linear-activation network whose composition is multiplication by ``slope``.

    Gives the closed-form flow y = x * exp(slope), used by test oracles.
    """
    h = HIDDEN_WIDTH
    w1 = np.zeros((h, 1)); w1[0, 0] = slope
    w2 = np.zeros((h, h)); w2[0, 0] = 1.0
    w3 = np.zeros((1, h)); w3[0, 0] = 1.0
    return ScalarNodeParams(w1, w2, w3, activation="linear", n_steps=n_steps)


class StackedNodes:
    """K same-architecture networks evaluated jointly on (K, n) inputs.

    Weight arrays: ``w1`` (K, 5), ``w2`` (K, 5, 5), ``w3`` (K, 5). All
    evaluation methods are pure and deterministic.
    """

    def __init__(self, w1: np.ndarray, w2: np.ndarray, w3: np.ndarray,
                 activation: str = "tanh", n_steps: int = 20):
        if activation not in _ACTIVATIONS:
            raise DomainError(f"unknown activation '{activation}'")
        if n_steps < 1:
            raise DomainError("n_steps must be >= 1")
        self.w1 = np.asarray(w1, dtype=float)
        self.w2 = np.asarray(w2, dtype=float)
        self.w3 = np.asarray(w3, dtype=float)
        self.activation = activation
        self.n_steps = int(n_steps)
        self.k = self.w1.shape[0]

    @classmethod
    def from_params(cls, params_list) -> "StackedNodes":
        first = params_list[0]
        for p in params_list:
            if p.activation != first.activation or p.n_steps != first.n_steps:
                raise DomainError("stacked networks must share activation and n_steps")
        return cls(
            w1=np.stack([p.w1[:, 0] for p in params_list]),
            w2=np.stack([p.w2 for p in params_list]),
            w3=np.stack([p.w3[0, :] for p in params_list]),
            activation=first.activation,
            n_steps=first.n_steps,
        )

    # -- right-hand side and its derivatives -----------------------------

    def _act(self, z):
        if self.activation == "tanh":
            return np.tanh(z)
        return z

    def _layers(self, H):
        """Hidden activations and their derivative factors at state H (K, n)."""
        pre1 = self.w1[:, :, None] * H[:, None, :]
        h1 = self._act(pre1)
        pre2 = np.einsum("kij,kjn->kin", self.w2, h1)
        h2 = self._act(pre2)
        if self.activation == "tanh":
            t1 = 1.0 - h1 * h1
            t2 = 1.0 - h2 * h2
        else:
            t1 = np.ones_like(h1)
            t2 = np.ones_like(h2)
        return h1, h2, t1, t2

    def rhs(self, H: np.ndarray) -> np.ndarray:
        _, h2, _, _ = self._layers(H)
        return np.einsum("kj,kjn->kn", self.w3, h2)

    def _rhs_full(self, H, want_grad):
        """f, f' and (optionally) df/dweights at H, all batched."""
        h1, h2, t1, t2 = self._layers(H)
        f = np.einsum("kj,kjn->kn", self.w3, h2)
        d1 = t1 * self.w1[:, :, None]
        fp = np.einsum("kj,kjn->kn", self.w3, t2 * np.einsum("kij,kjn->kin", self.w2, d1))
        if not want_grad:
            return f, fp, None
        g2 = self.w3[:, :, None] * t2                      # (K, 5, n)
        gw2 = g2[:, :, None, :] * h1[:, None, :, :]        # (K, 5, 5, n)
        g1 = np.einsum("kji,kjn->kin", self.w2, g2) * t1   # (K, 5, n)
        gw1 = g1 * H[:, None, :]
        k, n = f.shape
        dtheta = np.concatenate(
            [gw1, gw2.reshape(k, HIDDEN_WIDTH * HIDDEN_WIDTH, n), h2], axis=1
        )
        return f, fp, dtheta

    # -- integration ------------------------------------------------------

    def integrate(self, x: np.ndarray) -> np.ndarray:
        """Time-1 RK4 flow of every network for every input. x, result: (K, n)."""
        H = np.array(x, dtype=float)
        h = 1.0 / self.n_steps
        for step in range(self.n_steps):
            k1 = self.rhs(H)
            k2 = self.rhs(H + 0.5 * h * k1)
            k3 = self.rhs(H + 0.5 * h * k2)
            k4 = self.rhs(H + h * k3)
            H = H + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(H)):
                raise IntegrationError(step)
        return H

    def integrate_with_sensitivity(self, x: np.ndarray):
        """Flow plus d(output)/d(input) via the jointly integrated tangent."""
        H = np.array(x, dtype=float)
        S = np.ones_like(H)
        h = 1.0 / self.n_steps
        for step in range(self.n_steps):
            f1, p1, _ = self._rhs_full(H, False)
            s1 = p1 * S
            f2, p2, _ = self._rhs_full(H + 0.5 * h * f1, False)
            s2 = p2 * (S + 0.5 * h * s1)
            f3, p3, _ = self._rhs_full(H + 0.5 * h * f2, False)
            s3 = p3 * (S + 0.5 * h * s2)
            f4, p4, _ = self._rhs_full(H + h * f3, False)
            s4 = p4 * (S + h * s3)
            H = H + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
            S = S + (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
            if not np.all(np.isfinite(H)):
                raise IntegrationError(step)
        return H, S

    def integrate_with_gradient(self, x: np.ndarray):
        """Flow, input sensitivity and per-weight gradient.

        Returns (y, dy_dx, dy_dtheta) with dy_dtheta of shape (K, 35, n).
        Differentiating the unrolled RK4 recurrence is implemented as RK4 on
        the augmented system, which is algebraically identical for explicit
        schemes.
        """
        H = np.array(x, dtype=float)
        S = np.ones_like(H)
        G = np.zeros((self.k, N_WEIGHTS, H.shape[1]))
        h = 1.0 / self.n_steps
        for step in range(self.n_steps):
            f1, p1, d1 = self._rhs_full(H, True)
            s1 = p1 * S
            g1 = p1[:, None, :] * G + d1

            f2, p2, d2 = self._rhs_full(H + 0.5 * h * f1, True)
            s2 = p2 * (S + 0.5 * h * s1)
            g2 = p2[:, None, :] * (G + 0.5 * h * g1) + d2

            f3, p3, d3 = self._rhs_full(H + 0.5 * h * f2, True)
            s3 = p3 * (S + 0.5 * h * s2)
            g3 = p3[:, None, :] * (G + 0.5 * h * g2) + d3

            f4, p4, d4 = self._rhs_full(H + h * f3, True)
            s4 = p4 * (S + h * s3)
            g4 = p4[:, None, :] * (G + h * g3) + d4

            H = H + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
            S = S + (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
            G = G + (h / 6.0) * (g1 + 2.0 * g2 + 2.0 * g3 + g4)
            if not np.all(np.isfinite(H)):
                raise IntegrationError(step)
        return H, S, G


# -- single-network API ----------------------------------------------------


def _as_batch(params, x):
    stacked = StackedNodes.from_params([params])
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    return stacked, arr.reshape(1, -1), scalar


def rhs_eval(params: ScalarNodeParams, H):
    """Evaluate the right-hand-side network f(H). f(0) = 0 exactly."""
    stacked, batch, scalar = _as_batch(params, H)
    out = stacked.rhs(batch)[0]
    return float(out[0]) if scalar else out


def integrate(params: ScalarNodeParams, x):
    """Time-1 flow starting at H(0) = x."""
    stacked, batch, scalar = _as_batch(params, x)
    out = stacked.integrate(batch)[0]
    return float(out[0]) if scalar else out


def integrate_with_input_sensitivity(params: ScalarNodeParams, x):
    """Flow and its derivative with respect to the initial condition."""
    stacked, batch, scalar = _as_batch(params, x)
    y, s = stacked.integrate_with_sensitivity(batch)
    if scalar:
        return float(y[0, 0]), float(s[0, 0])
    return y[0], s[0]


def integrate_with_param_gradient(params: ScalarNodeParams, x) -> OdeSolution:
    """Flow plus exact gradients with respect to input and every weight.

    The gradient vector follows the ``flat()`` ordering: first layer, then
    the hidden layer row by row, then the output layer.
    """
    stacked, batch, scalar = _as_batch(params, x)
    y, s, g = stacked.integrate_with_gradient(batch)
    if scalar:
        return OdeSolution(y=float(y[0, 0]), dy_dx=float(s[0, 0]), dy_dtheta=g[0, :, 0])
    return OdeSolution(y=y[0], dy_dx=s[0], dy_dtheta=g[0])
