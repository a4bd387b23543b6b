"""Two-dimensional Riemann (Siegel) theta function by certified direct summation.

    theta(z, tau) = sum_{m in Z^2} exp[2 pi i (m.tau.m / 2 + m.z)]

The sum is truncated to an axis-aligned integer box centred on the dominant
term.  The box half-width is the smallest integer for which an analytic
Gaussian tail bound (built from the smallest eigenvalue of Im tau) drops
below the requested absolute tolerance.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

DEFAULT_TOL = 1e-12
MAX_RADIUS = 10_000


class TruncationError(ValueError):
    """Required truncation box exceeds the hard cap (near-degenerate input)."""


def check_siegel(tau) -> np.ndarray:
    """Validate that ``tau`` is a symmetric 2x2 complex matrix with Im(tau) > 0."""
    tau = np.asarray(tau, dtype=complex)
    if tau.shape != (2, 2):
        raise ValueError(f"tau must be 2x2, got shape {tau.shape}")
    if not np.all(np.isfinite(tau)):
        raise ValueError("tau has non-finite entries")
    if tau[0, 1] != tau[1, 0]:
        raise ValueError("tau must be symmetric")
    if np.linalg.eigvalsh(tau.imag).min() <= 0:
        raise ValueError("Im(tau) must be positive definite")
    return tau


def gaussian_tail_bound(kappa: float, radius: float) -> float:
    """Bound on sum exp(-kappa |m - c|^2) over m in Z^2 outside the box |m_i - c_i| <= radius.

    Holds uniformly in the (real) centre c.
    """
    root = math.sqrt(math.pi / kappa)
    one_axis_sum = 1.0 + root
    one_axis_tail = 2.0 * (math.exp(-kappa * radius * radius)
                           + 0.5 * root * erfc(math.sqrt(kappa) * radius))
    return 2.0 * one_axis_sum * one_axis_tail


def box_radius(kappa: float, tol: float, scale: float = 1.0,
               max_radius: int = MAX_RADIUS, *, log_scale: float | None = None) -> int:
    """Smallest integer radius with ``scale * gaussian_tail_bound < tol``.

    ``log_scale`` may replace ``scale`` when the latter would overflow.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if kappa <= 0:
        raise TruncationError("Gaussian decay rate must be positive")
    if log_scale is None:
        log_scale = math.log(scale)
    log_target = math.log(tol) - log_scale
    # estimate from the leading exponential, then walk up to the certified value
    radius = max(1, int(math.sqrt(max(0.0, -log_target) / kappa)) - 1)

    def too_big(r):
        bound = gaussian_tail_bound(kappa, r)
        return bound > 0 and math.log(bound) >= log_target

    while too_big(radius):
        radius += 1
        if radius > max_radius:
            raise TruncationError(
                f"truncation radius exceeds cap {max_radius} "
                f"(decay rate {kappa:.3g}); covariance is near-singular")
    return radius


def _centres(z: np.ndarray, y_mat: np.ndarray):
    # |term(m)| = exp(-pi (m + c).Y.(m + c) + pi c.Y.c) with c = Y^-1 Im z
    c = np.linalg.solve(y_mat, z.imag.T).T
    log_scale = math.pi * np.einsum("...i,ij,...j->...", c, y_mat, c)
    return -c, log_scale


def theta_radius(z, tau, tol: float = DEFAULT_TOL, max_radius: int = MAX_RADIUS) -> int:
    """Certified truncation radius used by :func:`riemann_theta` for this input."""
    tau = check_siegel(tau)
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    y_mat = tau.imag
    _, log_scale = _centres(z, y_mat)
    kappa = math.pi * np.linalg.eigvalsh(y_mat).min()
    return box_radius(kappa, tol, max_radius=max_radius, log_scale=float(log_scale.max()))


def _box(centres: np.ndarray, radius: int) -> np.ndarray:
    lo = np.floor(centres.min(axis=0) - radius).astype(int)
    hi = np.ceil(centres.max(axis=0) + radius).astype(int)
    m1, m2 = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1),
                         indexing="ij")
    return np.stack([m1.ravel(), m2.ravel()], axis=-1)


def riemann_theta(z, tau, tol: float = DEFAULT_TOL, *, radius: int | None = None,
                  max_radius: int = MAX_RADIUS, log_factor=None):
    """Evaluate the 2-D Riemann theta function.

    ``z`` may be a single complex 2-vector (a complex scalar is returned) or an
    array of shape ``(..., 2)`` evaluated against the same ``tau``.  The
    discarded tail is below ``tol`` in absolute value for every point.
    ``radius`` overrides the certified box half-width (used for convergence
    checks).

    With ``log_factor`` (complex, broadcastable to the batch shape) the result
    is ``exp(log_factor) * theta``, with the factor folded into every term so
    that a huge theta times a tiny factor neither overflows nor loses the
    absolute tolerance, which then applies to the scaled value.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    tau = check_siegel(tau)
    z = np.asarray(z, dtype=complex)
    if z.shape[-1:] != (2,):
        raise ValueError("z must have trailing dimension 2")
    if not np.all(np.isfinite(z)):
        raise ValueError("z has non-finite entries")
    batch_shape = z.shape[:-1]
    flat = z.reshape(-1, 2)
    if log_factor is None:
        lf = np.zeros(len(flat), dtype=complex)
    else:
        lf = np.broadcast_to(np.asarray(log_factor, dtype=complex), batch_shape).reshape(-1)
        if not np.all(np.isfinite(lf)):
            raise ValueError("log_factor has non-finite entries")

    y_mat = tau.imag
    centres, log_scale = _centres(flat, y_mat)
    if radius is None:
        kappa = math.pi * np.linalg.eigvalsh(y_mat).min()
        radius = box_radius(kappa, tol, max_radius=max_radius,
                            log_scale=float((log_scale + lf.real).max()))

    if not batch_shape:
        return _theta_point(flat[0], tau, centres[0], radius, lf[0])

    return _theta_batch(flat, tau, centres, radius, lf).reshape(batch_shape)


def _theta_batch(z: np.ndarray, tau: np.ndarray, centres: np.ndarray, radius: int,
                 lf: np.ndarray) -> np.ndarray:
    lo = np.floor(centres.min(axis=0) - radius).astype(int)
    hi = np.ceil(centres.max(axis=0) + radius).astype(int)
    m1 = np.arange(lo[0], hi[0] + 1, dtype=float)
    m2 = np.arange(lo[1], hi[1] + 1, dtype=float)
    # exp(2 pi i (m.tau.m/2 + m.z)) = W[m1, m2] * E1[m1] * E2[m2]
    growth = 2 * np.pi * (np.abs(z.imag[:, 0]).max() * np.abs(m1).max()
                          + np.abs(z.imag[:, 1]).max() * np.abs(m2).max())
    if growth < 600:
        quad = 0.5 * (tau[0, 0] * m1[:, None] ** 2 + 2 * tau[0, 1] * m1[:, None] * m2[None, :]
                      + tau[1, 1] * m2[None, :] ** 2)
        weight = np.exp(2j * np.pi * quad)
        e1 = np.exp(2j * np.pi * z[:, 0, None] * m1[None, :])
        e2 = np.exp(2j * np.pi * z[:, 1, None] * m2[None, :])
        return ((e1 @ weight) * e2).sum(axis=1) * np.exp(lf)
    m = np.stack(np.meshgrid(m1, m2, indexing="ij"), axis=-1).reshape(-1, 2)
    quad = 0.5 * np.einsum("ki,ij,kj->k", m, tau, m)
    out = np.empty(len(z), dtype=complex)
    chunk = max(1, 2_000_000 // len(m))
    for start in range(0, len(z), chunk):
        phase = quad[None, :] + z[start:start + chunk] @ m.T
        expo = 2j * np.pi * phase + lf[start:start + chunk, None]
        out[start:start + chunk] = np.exp(expo).sum(axis=1)
    return out


def _theta_point(z: np.ndarray, tau: np.ndarray, centre: np.ndarray, radius: int,
                 lf: complex = 0j) -> complex:
    m = _box(centre[None, :], radius)
    # accumulate from the dominant term outwards
    order = np.argsort(((m - centre) ** 2).sum(axis=1), kind="stable")
    m = m[order].astype(float)
    phase = 0.5 * np.einsum("ki,ij,kj->k", m, tau, m) + m @ z
    terms = np.exp(2j * np.pi * phase + lf)
    return complex(math.fsum(terms.real), math.fsum(terms.imag))

