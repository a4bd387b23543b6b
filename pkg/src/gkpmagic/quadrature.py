"""Tensor-product Gauss-Legendre quadrature on adaptive dyadic subdivisions of the unit cell."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CELL


class QuadratureError(RuntimeError):
    pass


def _nodes(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


def _cell_nodes(origins: np.ndarray, h: np.ndarray, unit_x: np.ndarray):
    """Node coordinates for square cells; returns (tq, tp) of shape (cells, k, k)."""
    tq = origins[:, 0, None, None] + h[:, None, None] * unit_x[None, :, None]
    tp = origins[:, 1, None, None] + h[:, None, None] * unit_x[None, None, :]
    return np.broadcast_arrays(tq, tp)


def _covering_radius(unit_x: np.ndarray) -> float:
    """Largest distance from a point of the unit square to its nearest tensor node."""
    pts = np.concatenate([[0.0], (unit_x[1:] + unit_x[:-1]) / 2, [1.0]])
    gq, gp = np.meshgrid(pts, pts, indexing="ij")
    nq, np_ = np.meshgrid(unit_x, unit_x, indexing="ij")
    d2 = (gq.ravel()[:, None] - nq.ravel()[None, :]) ** 2 + \
        (gp.ravel()[:, None] - np_.ravel()[None, :]) ** 2
    return float(np.sqrt(d2.min(axis=1).max()))


def _split(origins: np.ndarray, h: np.ndarray):
    half = h / 2
    shifts = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    new_origins = (origins[:, None, :] + half[:, None, None] * shifts[None]).reshape(-1, 2)
    return new_origins, np.repeat(half, 4)


def _initial(initial: int, side: float = CELL):
    h = side / initial
    i, j = np.meshgrid(np.arange(initial), np.arange(initial), indexing="ij")
    origins = np.stack([i.ravel() * h, j.ravel() * h], axis=-1)
    return origins, np.full(len(origins), h)


def integrate_cell(func, tol: float = 1e-7, order: int = 6, initial: int = 4,
                   max_depth: int = 10) -> float:
    """Integrate a vectorised ``func(tq, tp)`` over the unit cell.

    A subcell is accepted once splitting it into four changes its integral by
    less than its area share of ``tol``.
    """
    unit_x, unit_w = _nodes(order)
    weights = np.outer(unit_w, unit_w)

    def rule(origins, h):
        tq, tp = _cell_nodes(origins, h, unit_x)
        vals = np.asarray(func(tq, tp), dtype=float)
        return (vals * weights).sum(axis=(1, 2)) * h * h

    origins, h = _initial(initial)
    coarse = rule(origins, h)
    total = 0.0
    area = CELL * CELL
    for _ in range(max_depth):
        child_origins, child_h = _split(origins, h)
        fine = rule(child_origins, child_h).reshape(-1, 4)
        fine_sum = fine.sum(axis=1)
        done = np.abs(fine_sum - coarse) < tol * (h * h) / area
        total += fine_sum[done].sum()
        if done.all():
            return float(total)
        keep = ~done
        origins = child_origins.reshape(-1, 4, 2)[keep].reshape(-1, 2)
        h = child_h.reshape(-1, 4)[keep].ravel()
        coarse = fine[keep].ravel()
    raise QuadratureError("cell quadrature did not converge")


@dataclass
class IndicatorIntegral:
    value: float
    undecided_mass: float
    evaluations: int


def integrate_indicator(func, tol: float = 1e-4, order: int = 3, initial: int = 16,
                        max_depth: int = 20, period: float = CELL,
                        safety: float = 2.0) -> IndicatorIntegral:
    """Integrate ``density * [margin >= 0]`` over the unit cell.

    ``func(tq, tp)`` returns ``(density, margin)`` with a smooth signed
    ``margin``.  A cell counts as decided only when every node has the same
    sign and ``|margin|`` exceeds ``safety * slope * rho`` at every node, where
    ``slope`` is the largest node-to-node gradient seen in the cell and ``rho``
    the distance from any point of the cell to its nearest node; otherwise it
    is refined.  Once the
    density mass of undecided cells is below ``tol`` it is split by node
    fraction.  If the integrand is periodic with a ``period`` dividing the cell
    side, only one period square is integrated and the result scaled up.
    """
    copies = round(CELL / period)
    if copies < 1 or abs(copies * period - CELL) > 1e-12:
        raise ValueError("period must divide the cell side")
    scale = copies * copies
    unit_x, unit_w = _nodes(order)
    weights = np.outer(unit_w, unit_w)
    gaps = np.diff(unit_x)
    rho = _covering_radius(unit_x)
    chunk = 50_000

    def evaluate_chunk(origins, h):
        tq, tp = _cell_nodes(origins, h, unit_x)
        dens, margin = func(tq, tp)
        margin = np.asarray(margin, dtype=float)
        mass = (np.asarray(dens) * weights).sum(axis=(1, 2)) * h * h
        frac = (margin >= 0).mean(axis=(1, 2))
        # slopes per unit of the scaled cell, so rho needs no factor of h
        slope_q = (np.abs(np.diff(margin, axis=1)) / gaps[None, :, None]).max(axis=(1, 2))
        slope_p = (np.abs(np.diff(margin, axis=2)) / gaps[None, None, :]).max(axis=(1, 2))
        clear = np.abs(margin).min(axis=(1, 2)) > safety * rho * np.hypot(slope_q, slope_p)
        return mass, frac, clear

    def evaluate(origins, h):
        parts = [evaluate_chunk(origins[i:i + chunk], h[i:i + chunk])
                 for i in range(0, len(origins), chunk)]
        return tuple(np.concatenate(x) for x in zip(*parts))

    origins, h = _initial(initial, period)
    total = 0.0
    evals = 0
    tol = tol / scale
    for _ in range(max_depth):
        mass, frac, clear = evaluate(origins, h)
        evals += origins.shape[0] * order * order
        decided = ((frac == 0.0) | (frac == 1.0)) & clear
        total += mass[decided & (frac == 1.0)].sum()
        undecided = ~decided
        residual = mass[undecided].sum()
        if residual < tol:
            total += (mass[undecided] * frac[undecided]).sum()
            return IndicatorIntegral(float(scale * total), float(scale * residual), evals)
        origins, h = _split(origins[undecided], h[undecided])
    raise QuadratureError(
        f"indicator quadrature left undecided mass {scale * residual:.3g} "
        f"after {max_depth} levels")
