"""Gaussian random-design linear regression: data model, sampling, squared loss.

The data-generating process draws i.i.d. pairs with x ~ N(0, sigma) and
y = x . theta_star + eps, where eps is standard normal. Randomness comes
from keyed counter-based streams so that every run is replayable and
parallel runs are independent.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .linalg import check_symmetric, check_vector, cholesky

_MASK64 = (1 << 64) - 1


class RngStream:
    """Counter-based random stream keyed by (seed, stream_id).

    Identical keys replay identical draw sequences bit-for-bit; distinct
    stream ids give statistically independent streams. Backed by Philox,
    so streams can be created cheaply and in any order.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = seed
        self.stream_id = stream_id
        self._gen = np.random.Generator(
            np.random.Philox(key=[seed & _MASK64, stream_id & _MASK64])
        )

    def normals(self, n: int) -> np.ndarray:
        """Next n standard normal draws."""
        return self._gen.standard_normal(n)

    def normal_block(self, rows: int, cols: int) -> np.ndarray:
        """Next rows*cols standard normal draws, filled row by row.

        Row i holds the same values that `normals(cols)` called rows times
        would produce at call i, which lets chunked consumers keep the
        per-step draw order contract.
        """
        return self._gen.standard_normal((rows, cols))

    def spawn(self, stream_id: int) -> "RngStream":
        """A fresh stream under the same seed."""
        return RngStream(self.seed, stream_id)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


@dataclass(frozen=True)
class DataPoint:
    """One observed pair: design vector x and scalar response y."""

    x: np.ndarray
    y: float


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """The data-generating distribution: dimension, covariance, true parameter."""

    d: int
    sigma: np.ndarray
    theta_star: np.ndarray

    def __post_init__(self):
        if self.d < 1:
            raise DimensionMismatch("dimension must be at least 1")
        sigma = check_symmetric(self.sigma)
        if sigma.shape != (self.d, self.d):
            raise DimensionMismatch(
                f"covariance shape {sigma.shape} does not match d={self.d}"
            )
        theta_star = check_vector(self.theta_star, self.d)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "theta_star", theta_star)
        cholesky(sigma)  # rejects non-PD covariance at construction time

    @classmethod
    def identity(cls, d: int, theta_star=None) -> "ModelSpec":
        """Spec with sigma = I_d; theta_star defaults to the zero vector."""
        if theta_star is None:
            theta_star = np.zeros(d)
        return cls(d=d, sigma=np.eye(d), theta_star=np.asarray(theta_star, dtype=np.float64))

    @property
    def sigma_kind(self) -> str:
        """One of "identity", "diagonal", "dense"."""
        diag = np.diag(self.sigma)
        if np.count_nonzero(self.sigma - np.diag(diag)) == 0:
            return "identity" if np.all(diag == 1.0) else "diagonal"
        return "dense"

    def cholesky_factor(self) -> np.ndarray:
        return cholesky(self.sigma)

    def to_json_dict(self) -> dict:
        kind = self.sigma_kind
        if kind == "identity":
            sigma = None
        elif kind == "diagonal":
            sigma = np.diag(self.sigma).tolist()
        else:
            sigma = self.sigma.tolist()
        return {
            "d": self.d,
            "sigma_kind": kind,
            "sigma": sigma,
            "theta_star": self.theta_star.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ModelSpec":
        d = int(obj["d"])
        kind = obj.get("sigma_kind", "dense")
        raw = obj.get("sigma")
        if kind == "identity":
            sigma = np.eye(d)
        elif kind == "diagonal":
            sigma = np.diag(np.asarray(raw, dtype=np.float64))
        else:
            sigma = np.asarray(raw, dtype=np.float64)
        return cls(d=d, sigma=sigma, theta_star=np.asarray(obj["theta_star"], dtype=np.float64))


def sample_datapoint(spec: ModelSpec, chol: np.ndarray, rng: RngStream) -> DataPoint:
    """Draw one (x, y) pair from the model.

    `chol` must be the lower Cholesky factor of spec.sigma. The draw order
    is fixed: d design normals, then one noise normal.
    """
    chol = np.asarray(chol, dtype=np.float64)
    if chol.shape != (spec.d, spec.d):
        raise DimensionMismatch(
            f"Cholesky factor shape {chol.shape} does not match d={spec.d}"
        )
    z = rng.normals(spec.d)
    eps = rng.normals(1)[0]
    x = chol @ z
    return DataPoint(x=x, y=float(x @ spec.theta_star + eps))


def loss(theta, p: DataPoint) -> float:
    """Squared loss 0.5 * (y - x . theta)^2 at one data point."""
    theta = check_vector(theta, p.x.shape[0])
    residual = p.y - p.x @ theta
    return 0.5 * residual * residual


def gradient(theta, p: DataPoint) -> np.ndarray:
    """Gradient of the squared loss: -(y - x . theta) x."""
    theta = check_vector(theta, p.x.shape[0])
    residual = p.y - p.x @ theta
    return -residual * p.x
