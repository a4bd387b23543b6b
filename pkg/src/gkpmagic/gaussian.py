"""Single-mode Gaussian states in the (q, p) convention with hbar = 1.

The vacuum has covariance I/2.  A state is described by its Wigner-function
mean and covariance; the helpers here build the inputs used for GKP error
correction and map hexagonal-lattice problems onto the square lattice.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

PHYSICALITY_SLACK = 1e-12

# symplectic map taking square-lattice GKP logical states to hexagonal ones
HEX_S = (2.0 * math.sqrt(3.0)) ** -0.5 * np.array([[2.0, -1.0], [0.0, math.sqrt(3.0)]])
HEX_S_INV = np.linalg.inv(HEX_S)


class Lattice(enum.Enum):
    SQUARE = "square"
    HEXAGONAL = "hex"

    @classmethod
    def parse(cls, value) -> "Lattice":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        if key in ("square", "sq"):
            return cls.SQUARE
        if key in ("hex", "hexagonal"):
            return cls.HEXAGONAL
        raise ValueError(f"unknown lattice {value!r} (expected 'square' or 'hex')")


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Gaussian Wigner function with ``mean`` (q, p) and 2x2 covariance ``cov``."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if mean.shape != (2,):
            raise ValueError(f"mean must be a 2-vector, got shape {mean.shape}")
        if cov.shape != (2, 2):
            raise ValueError(f"cov must be 2x2, got shape {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("state has non-finite entries")
        if abs(cov[0, 1] - cov[1, 0]) > 1e-12 * max(1.0, abs(cov).max()):
            raise ValueError("cov must be symmetric")
        cov[1, 0] = cov[0, 1]
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ValueError("cov must be positive definite")
        if np.linalg.det(cov) < 0.25 - PHYSICALITY_SLACK:
            raise ValueError(
                f"unphysical state: det(cov) = {np.linalg.det(cov):.6g} < 1/4")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def __eq__(self, other):
        if not isinstance(other, GaussianState):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov)

    def __repr__(self):
        return f"GaussianState(mean={self.mean.tolist()}, cov={self.cov.tolist()})"

    @property
    def is_pure(self) -> bool:
        return abs(np.linalg.det(self.cov) - 0.25) < 1e-9

    @property
    def is_isotropic(self) -> bool:
        c = self.cov
        return abs(c[0, 1]) <= 1e-14 * c[0, 0] and abs(c[0, 0] - c[1, 1]) <= 1e-14 * c[0, 0]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianState":
        unknown = set(data) - {"mean", "cov"}
        if unknown:
            raise ValueError(f"unknown state keys: {sorted(unknown)}")
        if "mean" not in data or "cov" not in data:
            raise ValueError("state object needs 'mean' and 'cov'")
        return cls(data["mean"], data["cov"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GaussianState":
        return cls.from_dict(json.loads(text))


def vacuum() -> GaussianState:
    return GaussianState([0.0, 0.0], 0.5 * np.eye(2))


def thermal(nbar: float) -> GaussianState:
    """Zero-mean thermal state with mean occupation ``nbar``."""
    if not nbar >= 0:
        raise ValueError(f"nbar must be non-negative, got {nbar}")
    return GaussianState([0.0, 0.0], (nbar + 0.5) * np.eye(2))


def hex_to_square_covariance(state: GaussianState) -> GaussianState:
    """Equivalent square-lattice input for hexagonal-lattice error correction.

    Only zero-mean states are supported; the covariance maps as
    ``S^-1 cov S^-T``.
    """
    if np.any(state.mean != 0):
        raise ValueError("hexagonal mapping is only defined for zero-mean states")
    return GaussianState(state.mean, HEX_S_INV @ state.cov @ HEX_S_INV.T)


def square_equivalent(state: GaussianState, lattice) -> GaussianState:
    """Input state to hand to the square-lattice machinery for ``lattice``."""
    if Lattice.parse(lattice) is Lattice.HEXAGONAL:
        return hex_to_square_covariance(state)
    return state


def damped_occupation(nbar: float, beta: float) -> float:
    """Occupation of exp(-beta n) rho_th(nbar) exp(-beta n) after renormalisation."""
    if nbar < 0 or beta < 0:
        raise ValueError("nbar and beta must be non-negative")
    return math.exp(-2.0 * beta) * nbar / (1.0 - math.expm1(-2.0 * beta) * nbar)


def damp_thermal(nbar: float, beta: float) -> GaussianState:
    """Normalised K_beta rho_th K_beta with K_beta = exp(-beta a^dag a)."""
    return thermal(damped_occupation(nbar, beta))


def wigner(state: GaussianState, x) -> np.ndarray | float:
    """Normalised Gaussian Wigner function evaluated at ``x`` (shape (..., 2))."""
    x = np.asarray(x, dtype=float)
    d = x - state.mean
    inv = np.linalg.inv(state.cov)
    expo = np.einsum("...i,ij,...j->...", d, inv, d)
    val = np.exp(-0.5 * expo) / (2.0 * math.pi * math.sqrt(np.linalg.det(state.cov)))
    return float(val) if val.ndim == 0 else val


def parse_state(text: str) -> GaussianState:
    """Parse ``vacuum``, ``thermal:<nbar>``, ``gauss:<q>,<p>,<a>,<b>,<c>`` or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        return GaussianState.from_json(text)
    kind, _, args = text.partition(":")
    kind = kind.lower()
    if kind == "vacuum" and not args:
        return vacuum()
    if kind == "thermal":
        return thermal(float(args))
    if kind == "gauss":
        vals = [float(v) for v in args.split(",")]
        if len(vals) != 5:
            raise ValueError("gauss:<q>,<p>,<a>,<b>,<c> needs five numbers")
        q, p, a, b, c = vals
        return GaussianState([q, p], [[a, b], [b, c]])
    raise ValueError(f"unrecognised state {text!r}")


def random_state(rng: np.random.Generator, nbar_max: float = 2.0, squeeze_max: float = 0.8,
                 mean_scale: float = 1.0) -> GaussianState:
    """Random physical Gaussian state: rotated squeezed thermal with a normal mean."""
    nbar = rng.uniform(0.0, nbar_max)
    r = rng.uniform(0.0, squeeze_max)
    phi = rng.uniform(0.0, math.pi)
    rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    cov = (nbar + 0.5) * rot @ np.diag([math.exp(-2 * r), math.exp(2 * r)]) @ rot.T
    return GaussianState(mean_scale * rng.normal(size=2), 0.5 * (cov + cov.T))
