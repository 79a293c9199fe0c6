"""Iterative schemes: SGD, weight-perturbed forward gradient, zeroth order.

The step functions are the reference implementations, one update per call.
`run_trajectory` runs the same recursions over millions of steps through
compiled chunk kernels while consuming randomness in exactly the same
order, so long runs stay replayable and cheap.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import NonFiniteIterate
from .linalg import check_vector
from .model import DataPoint, ModelSpec, RngStream, gradient, loss

_CHUNK = 16384


class Method(Enum):
    SGD = "sgd"
    FORWARD_GRADIENT = "forward_gradient"
    ZEROTH_ORDER = "zeroth_order"


@dataclass
class OptimizerState:
    """Current iterate, step counter, and the stream feeding perturbations."""

    theta: np.ndarray
    k: int
    rng: RngStream


def _finished(theta: np.ndarray, step: int) -> np.ndarray:
    if not np.all(np.isfinite(theta)):
        raise NonFiniteIterate(step)
    return theta


def sgd_step(state: OptimizerState, p: DataPoint, alpha: float) -> OptimizerState:
    """theta - alpha * grad L(theta); consumes no randomness."""
    theta = state.theta - alpha * gradient(state.theta, p)
    return OptimizerState(_finished(theta, state.k + 1), state.k + 1, state.rng)


def forward_gradient_step(state: OptimizerState, p: DataPoint, alpha: float) -> OptimizerState:
    """theta - alpha * (grad L(theta) . xi) xi with a fresh xi ~ N(0, I_d).

    The update direction (g . xi) xi is an unbiased estimate of g, built
    from the directional derivative alone.
    """
    g = gradient(state.theta, p)
    xi = state.rng.normals(state.theta.shape[0])
    theta = state.theta - alpha * (g @ xi) * xi
    return OptimizerState(_finished(theta, state.k + 1), state.k + 1, state.rng)


def zeroth_order_step(state: OptimizerState, p: DataPoint, alpha: float) -> OptimizerState:
    """theta - alpha * (L(theta + xi) - L(theta)) xi with a fresh xi ~ N(0, I_d)."""
    xi = state.rng.normals(state.theta.shape[0])
    delta = loss(state.theta + xi, p) - loss(state.theta, p)
    theta = state.theta - alpha * delta * xi
    return OptimizerState(_finished(theta, state.k + 1), state.k + 1, state.rng)


@dataclass(frozen=True)
class Dual:
    """A (value, tangent) pair propagated forward through a computation."""

    value: float
    tangent: float

    def __add__(self, other):
        return Dual(self.value + other.value, self.tangent + other.tangent)

    def __sub__(self, other):
        return Dual(self.value - other.value, self.tangent - other.tangent)

    def __mul__(self, other):
        return Dual(
            self.value * other.value,
            self.value * other.tangent + self.tangent * other.value,
        )


def dual_pass_eval(theta, v, p: DataPoint) -> tuple[float, float]:
    """Loss and directional derivative (grad L(theta)) . v in one forward pass.

    Seeds the tangents of the parameters with v and pushes (value, tangent)
    pairs through the loss graph: residual = y - sum_j x_j theta_j, then
    0.5 * residual^2. The gradient vector itself is never materialized.
    """
    d = p.x.shape[0]
    theta = check_vector(theta, d)
    v = check_vector(v, d)
    residual = Dual(p.y, 0.0)
    for j in range(d):
        residual = residual - Dual(theta[j], v[j]) * Dual(p.x[j], 0.0)
    out = Dual(0.5, 0.0) * residual * residual
    return out.value, out.tangent


@dataclass
class Trajectory:
    """Checkpointed squared-error records for one run."""

    method: str
    run_id: int
    records: list  # of (k, mse) pairs, sorted by k


def default_checkpoints(n_steps: int, count: int = 200) -> list[int]:
    """k = 0 plus `count` log-spaced integers from 1 to n_steps, deduplicated."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    grid = np.rint(np.logspace(0.0, np.log10(n_steps), count)).astype(np.int64)
    grid = np.unique(np.clip(grid, 1, n_steps))
    return [0] + [int(k) for k in grid]


_CHUNK_KERNELS = {
    Method.SGD: _kernels.sgd_chunk,
    Method.FORWARD_GRADIENT: _kernels.forward_gradient_chunk,
    Method.ZEROTH_ORDER: _kernels.zeroth_order_chunk,
}


def run_trajectory(
    spec: ModelSpec,
    method: Method,
    schedule,
    theta0,
    n_steps: int,
    checkpoints,
    rng: RngStream,
    data_rng: RngStream | None = None,
    alpha_scale: float = 1.0,
    run_id: int = 0,
) -> Trajectory:
    """Run one optimization trajectory on fresh i.i.d. data.

    Per step the draw order is: d design normals plus one noise normal
    from the data stream, then (for perturbation-based methods) d
    perturbation normals from `rng`. With data_rng=None the data draws
    come from `rng` itself, interleaved in that order; passing a separate
    data_rng lets several runs replay one data sequence while their
    perturbations differ.

    Records ||theta_k - theta_star||^2 at each checkpoint. Raises
    NonFiniteIterate (with the failing step index) if the iterate leaves
    the finite floats, e.g. under a deliberately inflated learning rate.
    """
    checkpoints = [int(k) for k in checkpoints]
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly ascending")
    if checkpoints and (checkpoints[0] < 0 or checkpoints[-1] > n_steps):
        raise ValueError("checkpoints must lie in [0, n_steps]")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")

    d = spec.d
    theta = check_vector(theta0, d).copy()
    theta_star = spec.theta_star
    chol = spec.cholesky_factor()
    identity_design = spec.sigma_kind == "identity"
    kernel = _CHUNK_KERNELS[method]
    needs_xi = method is not Method.SGD

    records = []
    cp = np.asarray(checkpoints, dtype=np.int64)
    if cp.size and cp[0] == 0:
        records.append((0, float(_kernels._mse(theta, theta_star))))
        cp = cp[1:]

    k0 = 0
    while k0 < n_steps:
        c = min(_CHUNK, n_steps - k0)
        src = data_rng if data_rng is not None else rng
        if data_rng is None and needs_xi:
            block = src.normal_block(c, 2 * d + 1)
            z, eps, xis = block[:, :d], block[:, d], block[:, d + 1 :]
        else:
            block = src.normal_block(c, d + 1)
            z, eps = block[:, :d], block[:, d]
            xis = rng.normal_block(c, d) if needs_xi else None
        x_rows = z if identity_design else z @ chol.T

        steps = np.arange(k0 + 1, k0 + c + 1, dtype=np.int64)
        alphas = alpha_scale * np.asarray(schedule.alpha(steps), dtype=np.float64)
        in_chunk = cp[(cp > k0) & (cp <= k0 + c)]
        offsets = (in_chunk - k0 - 1).astype(np.int64)
        mse_out = np.empty(offsets.size)

        x_rows = np.ascontiguousarray(x_rows)
        if needs_xi:
            xis = np.ascontiguousarray(xis)
            bad = kernel(theta, theta_star, x_rows, eps, xis, alphas, offsets, mse_out)
        else:
            bad = kernel(theta, theta_star, x_rows, eps, alphas, offsets, mse_out)
        if bad >= 0:
            raise NonFiniteIterate(k0 + bad)
        records.extend((int(k), float(m)) for k, m in zip(in_chunk, mse_out))
        k0 += c

    return Trajectory(method=method.value, run_id=run_id, records=records)
