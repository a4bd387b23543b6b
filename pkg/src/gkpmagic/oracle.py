"""Brute-force check of the analytic Bloch vectors in a truncated Fock basis.

Finite-energy codewords are exp(-beta n) applied to a finite comb of position
eigenstates, built from Hermite-function overlaps.  Logical Paulis are
assembled from the (Loewdin-orthonormalised) codewords, the input state is
displaced by V(-t) with closed-form displacement matrix elements, and Bloch
components are read off as traces.

Because exp(-beta n) damps the codewords, the oracle reproduces ideal GKP
error correction of the damped input K rho K rather than of rho itself.  For
displaced thermal inputs that damped state is again Gaussian
(:func:`damp_displaced_thermal`), which gives an exact analytic
comparator; the undamped comparison converges only linearly in beta.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, sqrtm
from scipy.special import eval_genlaguerre, gammaln

from .core import SQRT_PI, Bloch4, bloch_normalized, heterodyne_to_outcome
from .gaussian import GaussianState, damped_occupation, vacuum

PAULI_MATRICES = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class CutoffError(RuntimeError):
    """Fock cutoff too small for the requested state or codeword."""


@dataclass(frozen=True)
class OracleConfig:
    beta: float = 0.02
    cutoff: int = 300
    comb_halfwidth: int = 8

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.cutoff < 4 or self.cutoff > 512:
            raise ValueError("cutoff must lie in [4, 512]")
        if self.comb_halfwidth < 1:
            raise ValueError("comb_halfwidth must be at least 1")


def hermite_functions(n_max: int, s) -> np.ndarray:
    """Position wavefunctions <s|n> for n < n_max; shape (n_max, len(s))."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.zeros((n_max, s.size))
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * s * s)
    if n_max > 1:
        out[1] = math.sqrt(2.0) * s * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * s * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def comb_points(j: int, halfwidth: int) -> np.ndarray:
    """Spike positions of the truncated ideal codeword |j_L>, symmetric about 0."""
    if j == 0:
        k = np.arange(-halfwidth, halfwidth + 1)
        return 2 * k * SQRT_PI
    if j == 1:
        k = np.arange(halfwidth + 1)
        pos = (2 * k + 1) * SQRT_PI
        return np.concatenate([-pos[::-1], pos])
    raise ValueError("j must be 0 or 1")


def approx_codeword(j: int, config: OracleConfig) -> np.ndarray:
    """Normalised exp(-beta n) sum_k |q = (2k + j) sqrt(pi)> in the number basis."""
    n = np.arange(config.cutoff)
    vec = hermite_functions(config.cutoff, comb_points(j, config.comb_halfwidth)).sum(axis=1)
    vec *= np.exp(-config.beta * n)
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        raise CutoffError("codeword vanishes at this cutoff")
    return vec / norm


@functools.lru_cache(maxsize=16)
def codeword_basis(config: OracleConfig) -> np.ndarray:
    """Symmetrically orthonormalised codewords as columns, shape (cutoff, 2)."""
    vecs = np.stack([approx_codeword(0, config), approx_codeword(1, config)], axis=1)
    gram = vecs.T @ vecs
    w, u = np.linalg.eigh(gram)
    if w.min() < 1e-12:
        raise CutoffError("codeword Gram matrix is singular")
    basis = vecs @ (u @ np.diag(w ** -0.5) @ u.T)
    basis.flags.writeable = False
    return basis


def logical_pauli(mu: int, config: OracleConfig) -> np.ndarray:
    basis = codeword_basis(config)
    return basis @ PAULI_MATRICES[mu] @ basis.conj().T


def displacement(alpha: complex, cutoff: int) -> np.ndarray:
    """Truncated D(alpha) = exp(alpha a^dag - alpha* a) from the Laguerre closed form."""
    alpha = complex(alpha)
    if alpha == 0:
        return np.eye(cutoff, dtype=complex)
    x = abs(alpha) ** 2
    m, n = np.meshgrid(np.arange(cutoff), np.arange(cutoff), indexing="ij")
    lo = np.minimum(m, n)
    d = np.abs(m - n)
    lag = eval_genlaguerre(lo, d, x)
    logpref = 0.5 * (gammaln(lo + 1) - gammaln(lo + d + 1)) + d * math.log(abs(alpha)) - x / 2
    angle = np.where(m >= n, math.atan2(alpha.imag, alpha.real),
                     math.pi - math.atan2(alpha.imag, alpha.real))
    return np.exp(logpref + 1j * d * angle) * lag


def coherent(alpha: complex, cutoff: int) -> np.ndarray:
    alpha = complex(alpha)
    n = np.arange(cutoff)
    if alpha == 0:
        vec = np.zeros(cutoff, dtype=complex)
        vec[0] = 1.0
        return vec
    logamp = -abs(alpha) ** 2 / 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(logamp + 1j * n * math.atan2(alpha.imag, alpha.real))


def _ladder(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def thermal_diagonal(nbar: float, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff)
    if nbar == 0:
        return (n == 0).astype(float)
    return np.exp(n * math.log(nbar / (nbar + 1))) / (nbar + 1)


def fock_density(state: GaussianState, cutoff: int) -> np.ndarray:
    """Density matrix of a single-mode Gaussian state in the truncated number basis."""
    cov = state.cov
    nu = math.sqrt(np.linalg.det(cov))
    rho = np.diag(thermal_diagonal(max(nu - 0.5, 0.0), cutoff)).astype(complex)
    if not state.is_isotropic:
        # cov = nu S S^T with S symmetric symplectic; U^dag x U = S x
        s_mat = np.real(sqrtm(cov / nu))
        gen = np.real(_logm_sym(s_mat))
        omega = np.array([[0.0, 1.0], [-1.0, 0.0]])
        h_mat = -omega @ gen
        big = min(2 * cutoff, cutoff + 400)
        a = _ladder(big)
        q = (a + a.conj().T) / math.sqrt(2)
        p = -1j * (a - a.conj().T) / math.sqrt(2)
        ham = 0.5 * (h_mat[0, 0] * q @ q + h_mat[0, 1] * (q @ p + p @ q) + h_mat[1, 1] * p @ p)
        u = expm(-1j * ham)[:cutoff, :cutoff]
        rho = u @ rho @ u.conj().T
    if np.any(state.mean != 0):
        disp = displacement((state.mean[0] + 1j * state.mean[1]) / math.sqrt(2), cutoff)
        rho = disp @ rho @ disp.conj().T
    return rho


def _logm_sym(mat: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(mat)
    return u @ np.diag(np.log(w)) @ u.T


def check_density(rho: np.ndarray, trace_tol: float = 1e-6) -> None:
    if np.abs(rho - rho.conj().T).max() > 1e-12:
        raise ArithmeticError("density matrix is not Hermitian")
    deficit = 1.0 - np.trace(rho).real
    if deficit > trace_tol:
        raise CutoffError(f"cutoff loses {deficit:.3g} of the trace")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ArithmeticError("density matrix is not positive semidefinite")


def _outcome_alpha(t) -> complex:
    # V(-t) equals D(-(t_q + i t_p)/sqrt 2) up to a global phase
    return -(float(t[0]) + 1j * float(t[1])) / math.sqrt(2)


def oracle_bloch(state: GaussianState, t, config: OracleConfig) -> Bloch4:
    """Unnormalised Bloch components Tr[V(-t) rho V(-t)^dag sigma_mu] in the Fock basis."""
    rho = fock_density(state, config.cutoff)
    disp = displacement(_outcome_alpha(t), config.cutoff)
    shifted = disp @ rho @ disp.conj().T
    check_density(shifted)
    basis = codeword_basis(config)
    block = basis.conj().T @ shifted @ basis
    return Bloch4.from_vector([np.trace(block @ s).real for s in PAULI_MATRICES])


def ec_circuit_oracle(state: GaussianState, t, config: OracleConfig,
                      order: str = "qp") -> Bloch4:
    """Apply the EC Kraus operator Pi X(-t_q), Z(-t_p) in the given order and read the Bloch vector.

    ``order="qp"`` corrects q first (Z(-t_p) X(-t_q)); ``"pq"`` corrects p first.
    """
    rho = fock_density(state, config.cutoff)
    x_shift = displacement(-float(t[0]) / math.sqrt(2), config.cutoff)
    z_shift = displacement(-1j * float(t[1]) / math.sqrt(2), config.cutoff)
    if order == "qp":
        shift = z_shift @ x_shift
    elif order == "pq":
        shift = x_shift @ z_shift
    else:
        raise ValueError("order must be 'qp' or 'pq'")
    check_density(shift @ rho @ shift.conj().T)
    kraus = logical_pauli(0, config) @ shift
    out = kraus @ rho @ kraus.conj().T
    return Bloch4.from_vector(
        [np.trace(out @ logical_pauli(mu, config)).real for mu in range(4)])


def damped_thermal_diagonal(nbar: float, beta: float, cutoff: int) -> np.ndarray:
    """Normalised diagonal of K_beta rho_th K_beta built directly in the number basis."""
    n = np.arange(cutoff)
    diag = thermal_diagonal(nbar, cutoff) * np.exp(-2 * beta * n)
    return diag / diag.sum()


def damp_displaced_thermal(state: GaussianState, beta: float) -> GaussianState:
    """K_beta conjugation of a displaced thermal state (isotropic covariance, any mean).

    Writing the state as a Gaussian mixture of coherent states, each |alpha>
    maps to a multiple of |exp(-beta) alpha>; the reweighted mixture is again
    a displaced thermal state.  Anisotropic covariances are rejected.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if not state.is_isotropic:
        raise ValueError("damping is only implemented for isotropic covariances")
    nbar = state.cov[0, 0] - 0.5
    c = -math.expm1(-2.0 * beta)
    new_nbar = damped_occupation(max(nbar, 0.0), beta)
    new_mean = math.exp(-beta) * state.mean / (1.0 + c * max(nbar, 0.0))
    return GaussianState(new_mean, (new_nbar + 0.5) * np.eye(2))


def envelope_reference(state: GaussianState, t, beta: float) -> Bloch4:
    """Analytic Bloch vector of ideal EC applied to K_beta V(-t) rho V(-t)^dag K_beta.

    This is what the finite-energy oracle computes; only isotropic inputs are
    supported.
    """
    shifted = GaussianState(state.mean - np.asarray(t, dtype=float), state.cov)
    return bloch_normalized(damp_displaced_thermal(shifted, beta), (0.0, 0.0))


def compare(state: GaussianState, t, config: OracleConfig) -> dict:
    """Oracle report for one (state, t): oracle vs envelope-matched and raw analytic Bloch vectors."""
    oracle = oracle_bloch(state, t, config).normalized()
    matched = envelope_reference(state, t, config.beta)
    raw = bloch_normalized(state, t)
    return {
        "beta": config.beta,
        "cutoff": config.cutoff,
        "t": [float(t[0]), float(t[1])],
        "bloch": oracle.vector.tolist(),
        "analytic_bloch": matched.vector.tolist(),
        "abs_err": float(np.abs(oracle.vector - matched.vector).max()),
        "raw_analytic_bloch": raw.vector.tolist(),
        "raw_abs_err": float(np.abs(oracle.vector - raw.vector).max()),
    }


BELL_OPERATOR = sum(np.kron(s, s) for s in PAULI_MATRICES)


def bell_heterodyne_bloch(alpha: complex, config: OracleConfig) -> Bloch4:
    """Bloch vector left on mode 2 after projecting mode 1 of sum_mu sigma_mu (x) sigma_mu onto |alpha>.

    The two-mode operator lives on the codeword span of each mode; mode 1 is
    contracted with the coherent state through its codeword overlaps.
    """
    basis = codeword_basis(config)
    amp = basis.conj().T @ coherent(alpha, config.cutoff)      # <w_j|alpha>
    if np.linalg.norm(coherent(alpha, config.cutoff)) ** 2 < 1 - 1e-6:
        raise CutoffError("coherent state truncated by the cutoff")
    phi = BELL_OPERATOR.reshape(2, 2, 2, 2)                     # [j, j', k, k']
    out = np.einsum("j,jakb,k->ab", amp.conj(), phi, amp)
    return Bloch4.from_vector([np.trace(out @ s).real for s in PAULI_MATRICES])


def heterodyne_reference(alpha: complex, beta: float) -> Bloch4:
    """Analytic counterpart of :func:`bell_heterodyne_bloch` (K_beta maps |alpha> to |e^-beta alpha>)."""
    return bloch_normalized(vacuum(), heterodyne_to_outcome(math.exp(-beta) * complex(alpha)))


def convergence_study(state: GaussianState, outcomes, betas, cutoff: int = 300) -> list[dict]:
    """Max oracle discrepancy per beta, raw and envelope-matched."""
    rows = []
    for beta in betas:
        cfg = OracleConfig(beta=beta, cutoff=cutoff)
        reps = [compare(state, t, cfg) for t in outcomes]
        rows.append({"beta": beta, "cutoff": cutoff,
                     "max_abs_err": max(r["abs_err"] for r in reps),
                     "max_raw_abs_err": max(r["raw_abs_err"] for r in reps)})
    return rows
