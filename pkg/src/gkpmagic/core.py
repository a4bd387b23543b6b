"""Logical Bloch vector of a GKP-error-corrected Gaussian state.

For an outcome t the unnormalised Bloch components are

    rbar_mu(t) = 1/4 * sum_n (-1)^(n . ellbar_mu) G_{x0,cov}((n + ell_mu / 2) sqrt(pi) + t)

(the Pauli delta combs collapse the Wigner overlap to a lattice sum).  The
same quantity is available in closed form through the 2-D Riemann theta
function.  ``rbar_0`` is the outcome density, normalised over the
(2 sqrt(pi))^2 unit cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .gaussian import GaussianState, square_equivalent
from .theta import DEFAULT_TOL, MAX_RADIUS, box_radius, riemann_theta

SQRT_PI = math.sqrt(math.pi)
CELL = 2.0 * SQRT_PI
CELL_AREA = CELL * CELL
LATTICE_PREFACTOR = 0.25
PDF_UNDERFLOW = 1e-300


class GkpPauli(NamedTuple):
    mu: int
    ell: tuple[int, int]
    ell_bar: tuple[int, int]


PAULIS = tuple(
    GkpPauli(mu, ell, (ell[1], ell[0]))
    for mu, ell in enumerate([(0, 0), (1, 0), (1, 1), (0, 1)])
)


class Outcome(NamedTuple):
    """EC measurement outcome (t_q, t_p)."""

    tq: float
    tp: float

    @classmethod
    def canonical(cls, t) -> "Outcome":
        """Reduce ``t`` into the half-open cell [0, 2 sqrt(pi))^2."""
        tq, tp = (float(v) for v in t)
        return cls(_wrap(tq), _wrap(tp))


def _wrap(x: float) -> float:
    y = x % CELL
    return 0.0 if y >= CELL else y


@dataclass(frozen=True)
class Bloch4:
    r0: float
    r: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([[self.r0], self.r])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.r))

    def normalized(self) -> "Bloch4":
        if not self.r0 > PDF_UNDERFLOW:
            raise ValueError(f"outcome has vanishing probability (r0 = {self.r0:.3g})")
        return Bloch4(1.0, self.r / self.r0)

    @classmethod
    def from_vector(cls, v) -> "Bloch4":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), v[1:].copy())


def _pauli(mu) -> GkpPauli:
    if isinstance(mu, GkpPauli):
        return mu
    if mu not in (0, 1, 2, 3):
        raise ValueError(f"Pauli index must be 0..3, got {mu!r}")
    return PAULIS[mu]


def pauli_comb_term(pauli, n) -> tuple[np.ndarray, float]:
    """Location and weight of the ``n``-th delta spike in the Wigner function of a logical Pauli."""
    pauli = _pauli(pauli)
    n1, n2 = (int(v) for v in n)
    loc = np.array([n1 + pauli.ell[0] / 2, n2 + pauli.ell[1] / 2]) * SQRT_PI
    sign = (-1) ** ((n1 * pauli.ell_bar[0] + n2 * pauli.ell_bar[1]) % 2)
    return loc, sign / 2


def _lattice_radius(state: GaussianState, tol: float) -> int:
    inv = np.linalg.inv(state.cov)
    # G((n + c) sqrt(pi)) <= peak * exp(-(pi/2) lambda_min(cov^-1) |n + c|^2)
    kappa = 0.5 * math.pi * np.linalg.eigvalsh(inv).min()
    peak = LATTICE_PREFACTOR / (2.0 * math.pi * math.sqrt(np.linalg.det(state.cov)))
    return box_radius(kappa, tol, peak, MAX_RADIUS)


def bloch_lattice_sum(state: GaussianState, t, mu, tol: float = DEFAULT_TOL) -> float:
    """Unnormalised Bloch component from the direct lattice sum over Pauli spikes."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    pauli = _pauli(mu)
    t = np.asarray(t, dtype=float)
    ell = np.array(pauli.ell, dtype=float)
    ell_bar = np.array(pauli.ell_bar)
    # spikes sit at (n + ell/2) sqrt(pi); the Gaussian peaks where that equals mean - t
    centre = (state.mean - t) / SQRT_PI - ell / 2
    radius = _lattice_radius(state, tol)
    lo = np.floor(centre - radius).astype(int)
    hi = np.ceil(centre + radius).astype(int)
    n1, n2 = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1),
                         indexing="ij")
    n = np.stack([n1.ravel(), n2.ravel()], axis=-1)
    n = n[np.argsort(((n - centre) ** 2).sum(axis=1), kind="stable")]
    x = (n + ell / 2) * SQRT_PI + t
    d = x - state.mean
    inv = np.linalg.inv(state.cov)
    gauss = np.exp(-0.5 * np.einsum("ki,ij,kj->k", d, inv, d))
    gauss /= 2.0 * math.pi * math.sqrt(np.linalg.det(state.cov))
    signs = 1 - 2 * ((n @ ell_bar) % 2)
    return LATTICE_PREFACTOR * math.fsum(signs * gauss)


def _theta_arguments(state: GaussianState, tq, tp, pauli: GkpPauli):
    """Theta arguments (tau, z) per outcome, with the sign and log prefactor of the closed form."""
    cov = state.cov
    inv = np.linalg.inv(cov)
    tau = 0.25j * (inv + inv.T)
    ell = np.array(pauli.ell, dtype=float)
    ell_bar = np.array(pauli.ell_bar)
    offset = np.stack([np.asarray(tq, float) - state.mean[0],
                       np.asarray(tp, float) - state.mean[1]], axis=-1) / SQRT_PI
    a = ell / 2 - offset
    # integer shifts of a only flip the overall sign; keep |a| small for conditioning
    k = np.round(a)
    a = a - k
    sign = 1 - 2 * ((k.astype(int) @ ell_bar) % 2)
    v = a @ tau.T
    # log of 1 / G_{0,(4 pi cov)^-1}(v) / (4 pi), evaluated at the complex point v;
    # kept as a logarithm because it multiplies a theta value that can overflow
    quad = np.einsum("...i,ij,...j->...", v, 4.0 * math.pi * cov, v)
    log_pref = 0.5 * quad - math.log(8.0 * math.pi * math.sqrt(np.linalg.det(cov)))
    z = v + np.array(pauli.ell_bar, dtype=float) / 2
    return tau, z, sign, log_pref


def bloch_theta(state: GaussianState, t, mu, tol: float = DEFAULT_TOL) -> float:
    """Unnormalised Bloch component from the Riemann-theta closed form.

    Raises ``ArithmeticError`` if the complex result has an imaginary part of
    magnitude ``tol`` or more.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pauli = _pauli(mu)
    tau, z, sign, log_pref = _theta_arguments(state, t[0], t[1], pauli)
    value = sign * riemann_theta(z, tau, tol / 4.0, log_factor=log_pref)
    if abs(value.imag) >= tol:
        raise ArithmeticError(
            f"theta route produced imaginary residue {value.imag:.3g} (mu={pauli.mu})")
    return float(value.real)


def bloch_components(state: GaussianState, tq, tp, method: str = "theta",
                     tol: float = DEFAULT_TOL) -> np.ndarray:
    """Unnormalised Bloch 4-vectors on arrays of outcomes; returns shape (4, *tq.shape)."""
    tq, tp = np.broadcast_arrays(np.asarray(tq, float), np.asarray(tp, float))
    if method == "theta":
        out = np.empty((4,) + tq.shape)
        for pauli in PAULIS:
            tau, z, sign, log_pref = _theta_arguments(state, tq, tp, pauli)
            if z.ndim > 1:
                value = sign * riemann_theta(z, tau, tol / 4.0, log_factor=log_pref)
            else:
                value = sign * riemann_theta(z[None, :], tau, tol / 4.0, log_factor=log_pref)[0]
            resid = float(np.max(np.abs(value.imag))) if value.size else 0.0
            if resid >= tol:
                raise ArithmeticError(f"theta route imaginary residue {resid:.3g}")
            out[pauli.mu] = value.real
        return out
    if method == "lattice":
        return _lattice_components(state, tq, tp, tol)
    raise ValueError(f"unknown method {method!r}")


def _lattice_components(state: GaussianState, tq, tp, tol: float) -> np.ndarray:
    # each point sums over a local box n = n0 + k around its own dominant spike:
    # d = (k + delta) sqrt(pi) with delta = n0 - centre in [-1/2, 1/2]^2, so
    # exp(-(pi/2) (k+delta).A.(k+delta)) = W[k] * exp(-pi k1 u1) * exp(-pi k2 u2) * const
    inv = np.linalg.inv(state.cov)
    inv = 0.5 * (inv + inv.T)
    norm = 2.0 * math.pi * math.sqrt(np.linalg.det(state.cov))
    radius = _lattice_radius(state, tol) + 1
    k = np.arange(-radius, radius + 1, dtype=float)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    base = np.exp(-0.5 * math.pi * (inv[0, 0] * k1 ** 2 + 2 * inv[0, 1] * k1 * k2
                                    + inv[1, 1] * k2 ** 2))
    flat_q = tq.ravel()
    flat_p = tp.ravel()
    out = np.empty((4, flat_q.size))
    for pauli in PAULIS:
        ell = np.array(pauli.ell, dtype=float)
        centre = np.stack([(state.mean[0] - flat_q) / SQRT_PI - ell[0] / 2,
                           (state.mean[1] - flat_p) / SQRT_PI - ell[1] / 2], axis=-1)
        n0 = np.round(centre)
        delta = n0 - centre
        u = delta @ inv
        n0 = n0.astype(np.int64)
        sign0 = 1 - 2 * ((n0[:, 0] * pauli.ell_bar[0] + n0[:, 1] * pauli.ell_bar[1]) % 2)
        ksign = 1 - 2 * ((k1.astype(int) * pauli.ell_bar[0]
                          + k2.astype(int) * pauli.ell_bar[1]) % 2)
        weight = ksign * base
        if math.pi * radius * np.abs(u).max(initial=0.0) < 300:
            e1 = np.exp(-math.pi * u[:, 0, None] * k[None, :])
            e2 = np.exp(-math.pi * u[:, 1, None] * k[None, :])
            const = np.exp(-0.5 * math.pi * np.einsum("pi,ij,pj->p", delta, inv, delta))
            out[pauli.mu] = sign0 * const * ((e1 @ weight) * e2).sum(axis=1)
        else:
            # strongly squeezed input: the factorised exponentials would overflow
            kk = np.stack([k1.ravel(), k2.ravel()], axis=-1)
            chunk = max(1, 1_000_000 // len(kk))
            for start in range(0, len(delta), chunk):
                d = kk[None, :, :] + delta[start:start + chunk, None, :]
                expo = -0.5 * math.pi * np.einsum("pki,ij,pkj->pk", d, inv, d)
                out[pauli.mu, start:start + chunk] = (
                    sign0[start:start + chunk] * (np.exp(expo) @ ksign.ravel()))
    out *= LATTICE_PREFACTOR / norm
    return out.reshape((4,) + tq.shape)


def bloch_unnormalized(state: GaussianState, t, lattice="square",
                       tol: float = DEFAULT_TOL) -> Bloch4:
    state = square_equivalent(state, lattice)
    return Bloch4.from_vector([bloch_theta(state, t, mu, tol) for mu in range(4)])


def bloch_normalized(state: GaussianState, t, lattice="square", *, verify: bool = False,
                     tol: float = DEFAULT_TOL) -> Bloch4:
    """Normalised Bloch 4-vector (r0 = 1) of the corrected state for outcome ``t``.

    With ``verify`` the theta route is cross-checked against the lattice sum.
    """
    sq = square_equivalent(state, lattice)
    raw = bloch_unnormalized(sq, t, tol=tol)
    if verify:
        check = np.array([bloch_lattice_sum(sq, t, mu, tol) for mu in range(4)])
        err = np.abs(check - raw.vector).max()
        if err > 100 * tol:
            raise ArithmeticError(f"theta and lattice routes disagree by {err:.3g}")
    return raw.normalized()


def pdf(state: GaussianState, t, lattice="square", tol: float = DEFAULT_TOL) -> float:
    """Outcome probability density (the mu = 0 unnormalised component)."""
    value = bloch_theta(square_equivalent(state, lattice), t, 0, tol)
    if value < -1e-9:
        raise ArithmeticError(f"negative outcome density {value:.3g}")
    return max(value, 0.0)


def heterodyne_to_outcome(alpha: complex) -> Outcome:
    """EC outcome equivalent to heterodyne result ``alpha`` on half a GKP Bell pair."""
    alpha = complex(alpha)
    return Outcome.canonical((-math.sqrt(2.0) * alpha.real, -math.sqrt(2.0) * alpha.imag))


def cell_grid(resolution: int):
    """Midpoint grid of the unit cell; returns (tq, tp) arrays indexed [i_q, i_p]."""
    if resolution < 1:
        raise ValueError("resolution must be at least 1")
    x = (np.arange(resolution) + 0.5) * (CELL / resolution)
    return np.meshgrid(x, x, indexing="ij")


@dataclass
class BlochMap:
    tq: np.ndarray
    tp: np.ndarray
    components: np.ndarray  # (4, n, n), unnormalised

    @property
    def pdf(self) -> np.ndarray:
        return self.components[0]

    def normalized(self) -> np.ndarray:
        """Normalised 3-vectors, shape (3, n, n); NaN where the density underflows."""
        r0 = self.components[0]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = self.components[1:] / r0
        out[:, ~(r0 > PDF_UNDERFLOW)] = np.nan
        return out

    def rows(self):
        vec = self.normalized()
        for i in range(self.tq.shape[0]):
            for j in range(self.tq.shape[1]):
                yield (self.tq[i, j], self.tp[i, j], self.components[0, i, j],
                       vec[0, i, j], vec[1, i, j], vec[2, i, j])


def bloch_map(state: GaussianState, lattice="square", resolution: int = 64,
              method: str = "theta") -> BlochMap:
    tq, tp = cell_grid(resolution)
    comps = bloch_components(square_equivalent(state, lattice), tq, tp, method=method)
    return BlochMap(tq, tp, comps)
