"""Magic-state resources from GKP error correction of Gaussian inputs.

Fidelity with the nearest member of a Clifford orbit of magic states, maps of
that fidelity over the outcome cell, success probabilities for thermal inputs,
and the thermal occupation at which the best outcome stops being distillable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .core import CELL, PDF_UNDERFLOW, SQRT_PI, bloch_components, cell_grid
from .gaussian import GaussianState, Lattice, square_equivalent, thermal
from .quadrature import integrate_indicator

# exact edge of the H-type distillable region: a Pauli eigenstate's fidelity
H_PAULI_FIDELITY = 0.5 * (1.0 + 1.0 / math.sqrt(2.0))


@dataclass(frozen=True)
class MagicFamily:
    name: str
    vectors: np.ndarray
    thresholds: dict = field(default_factory=dict)

    @property
    def distill(self) -> float:
        return self.thresholds["distill"]


def _h_vectors() -> np.ndarray:
    vecs = [v for v in itertools.product((1, 0, -1), repeat=3) if v.count(0) == 1]
    return np.array(vecs, dtype=float) / math.sqrt(2.0)


def _t_vectors() -> np.ndarray:
    return np.array(list(itertools.product((1, -1), repeat=3)), dtype=float) / math.sqrt(3.0)


H_FAMILY = MagicFamily("H", _h_vectors(), {"distill": 0.853})
T_FAMILY = MagicFamily("T", _t_vectors(), {"octahedron": 0.789, "distill": 0.8273})
FAMILIES = {"H": H_FAMILY, "T": T_FAMILY}


def get_family(name) -> MagicFamily:
    if isinstance(name, MagicFamily):
        return name
    try:
        return FAMILIES[str(name).upper()]
    except KeyError:
        raise ValueError(f"unknown magic family {name!r} (expected 'H' or 'T')") from None


def fidelity_to_nearest(r, family) -> tuple[float, int]:
    """Fidelity of Bloch vector ``r`` with the closest family member, and that member's index.

    Ties go to the lowest index.
    """
    family = get_family(family)
    r = np.asarray(r, dtype=float)
    norm = np.linalg.norm(r)
    if norm > 1 + 1e-6:
        raise ValueError(f"|r| = {norm:.9g} exceeds 1")
    fids = 0.5 * (1.0 + family.vectors @ r)
    idx = int(np.argmax(fids))
    return float(fids[idx]), idx


def nearest_fidelities(vectors: np.ndarray, family) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`fidelity_to_nearest` over Bloch vectors of shape (3, ...)."""
    family = get_family(family)
    fids = 0.5 * (1.0 + np.einsum("kd,d...->k...", family.vectors, vectors))
    return fids.max(axis=0), fids.argmax(axis=0)


def _fidelity_and_density(state: GaussianState, family: MagicFamily, method: str):
    def both(tq, tp):
        comps = bloch_components(state, tq, tp, method=method)
        r0 = comps[0]
        safe = np.where(r0 > PDF_UNDERFLOW, r0, 1.0)
        fmax, _ = nearest_fidelities(comps[1:] / safe, family)
        return np.maximum(r0, 0.0), np.where(r0 > PDF_UNDERFLOW, fmax, 0.5)
    return both


@dataclass
class FidelityMap:
    tq: np.ndarray
    tp: np.ndarray
    fidelity: np.ndarray     # NaN where the outcome density underflows
    nearest: np.ndarray      # -1 where undefined
    components: np.ndarray   # unnormalised Bloch 4-vectors, (4, n, n)
    family: MagicFamily
    lattice: Lattice

    def distillable_fraction(self, f: float | None = None) -> float:
        f = self.family.distill if f is None else f
        ok = np.isfinite(self.fidelity)
        return float(np.mean(self.fidelity[ok] > f))

    def summary(self, f: float | None = None) -> dict:
        f = self.family.distill if f is None else f
        ok = np.isfinite(self.fidelity)
        return {
            "family": self.family.name,
            "lattice": self.lattice.value,
            "resolution": int(self.tq.shape[0]),
            "threshold": f,
            "min_F": float(np.min(self.fidelity[ok])),
            "max_F": float(np.max(self.fidelity[ok])),
            "fraction_above_threshold": self.distillable_fraction(f),
            "non_distillable_fraction": float(np.mean(self.fidelity[ok] <= f)),
            "undefined_points": int(np.sum(~ok)),
        }

    def rows(self):
        n1, n2 = self.tq.shape
        for i in range(n1):
            for j in range(n2):
                yield self.tq[i, j], self.tp[i, j], self.fidelity[i, j], int(self.nearest[i, j])


def fidelity_map(state: GaussianState, family="H", lattice="square", resolution: int = 64,
                 method: str = "theta") -> FidelityMap:
    """Nearest-magic-state fidelity on the midpoint grid of the outcome cell."""
    family = get_family(family)
    lattice = Lattice.parse(lattice)
    sq = square_equivalent(state, lattice)
    tq, tp = cell_grid(resolution)
    comps = bloch_components(sq, tq, tp, method=method)
    r0 = comps[0]
    valid = r0 > PDF_UNDERFLOW
    with np.errstate(invalid="ignore", divide="ignore"):
        vec = comps[1:] / r0
    fmax, idx = nearest_fidelities(np.where(valid, vec, 0.0), family)
    fmax = np.where(valid, fmax, np.nan)
    idx = np.where(valid, idx, -1)
    return FidelityMap(tq, tp, fmax, idx, comps, family, lattice)


def success_probability(nbar: float, family="H", lattice="square", f: float = 0.853,
                        tol: float = 1e-4, full_output: bool = False):
    """Probability that EC of thermal(nbar) yields fidelity at least ``f`` with the family.

    The pdf-weighted indicator is integrated over the unit cell with
    refinement of cells straddling the F = f contour until the undecided
    mass is below ``tol``.
    """
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    if not 0.5 <= f <= 1.0:
        raise ValueError("f must lie in [0.5, 1]")
    family = get_family(family)
    sq = square_equivalent(thermal(nbar), lattice)
    both = _fidelity_and_density(sq, family, "lattice")

    def dens_and_mask(tq, tp):
        dens, fmax = both(tq, tp)
        return dens, fmax - f

    # a sqrt(pi) shift of t is a logical Pauli conjugation: it flips Bloch signs,
    # which both families are closed under, so density and F are sqrt(pi)-periodic
    res = integrate_indicator(dens_and_mask, tol=tol, period=SQRT_PI)
    value = min(max(res.value, 0.0), 1.0)
    if full_output:
        return value, res
    return value


@dataclass
class SuccessCurve:
    fidelity_grid: np.ndarray
    probability: np.ndarray
    nbar: float
    family: str
    lattice: Lattice
    quadrature_tol: float

    def rows(self):
        return zip(self.fidelity_grid, self.probability)

    def metadata(self) -> dict:
        return {"nbar": self.nbar, "family": self.family, "lattice": self.lattice.value,
                "quadrature_tol": self.quadrature_tol}


def success_curve(nbar: float, family="H", lattice="square", f_grid=None,
                  tol: float = 1e-4) -> SuccessCurve:
    family = get_family(family)
    lattice = Lattice.parse(lattice)
    if f_grid is None:
        f_grid = np.linspace(0.5, 1.0, 26)
    f_grid = np.asarray(f_grid, dtype=float)
    if np.any(np.diff(f_grid) <= 0):
        raise ValueError("fidelity grid must be strictly ascending")
    probs = np.array([success_probability(nbar, family, lattice, f, tol) for f in f_grid])
    return SuccessCurve(f_grid, probs, float(nbar), family.name, lattice, tol)


def _point_fidelity(state: GaussianState, family: MagicFamily, tq: float, tp: float) -> float:
    comps = bloch_components(state, np.array([tq]), np.array([tp]), method="lattice")[:, 0]
    if comps[0] <= PDF_UNDERFLOW:
        return 0.5
    return float(nearest_fidelities(comps[1:] / comps[0], family)[0])


def max_fidelity(state: GaussianState, family="H", lattice="square", seeds: int = 3,
                 resolution: int = 64) -> tuple[float, tuple[float, float]]:
    """Best nearest-family fidelity over all outcomes, and where it is attained.

    Grid seeding followed by coordinate-wise bounded line searches from the
    best few grid points.
    """
    family = get_family(family)
    sq = square_equivalent(state, lattice)
    tq, tp = cell_grid(resolution)
    dens, fmax = _fidelity_and_density(sq, family, "lattice")(tq, tp)
    order = np.argsort(fmax.ravel())[::-1][:seeds]
    h = CELL / resolution
    best = (-np.inf, (0.0, 0.0))
    for flat in order:
        x = [tq.ravel()[flat], tp.ravel()[flat]]
        val = fmax.ravel()[flat]
        step = h
        for _ in range(8):
            prev = val
            for axis in (0, 1):
                def neg(s, axis=axis):
                    y = list(x)
                    y[axis] = s
                    return -_point_fidelity(sq, family, *y)
                res = minimize_scalar(neg, bounds=(x[axis] - step, x[axis] + step),
                                      method="bounded", options={"xatol": 1e-10})
                if -res.fun >= val:
                    x[axis], val = float(res.x), -float(res.fun)
            step *= 0.5
            if val - prev < 1e-13:
                break
        if val > best[0]:
            best = (val, (x[0] % CELL, x[1] % CELL))
    return best


@dataclass
class ThresholdResult:
    family: str
    lattice: Lattice
    f: float
    nbar_star: float
    bracket: tuple[float, float]

    def to_dict(self) -> dict:
        return {"family": self.family, "lattice": self.lattice.value, "f": self.f,
                "nbar_star": self.nbar_star, "bracket": list(self.bracket)}


def threshold_nbar(family="H", lattice="square", f: float | None = None,
                   lo: float = 0.0, hi: float = 5.0, xtol: float = 1e-4) -> ThresholdResult:
    """Thermal occupation above which no outcome reaches fidelity ``f`` (bisection)."""
    family = get_family(family)
    lattice = Lattice.parse(lattice)
    f = family.distill if f is None else float(f)
    if not 0.5 < f < 1.0:
        raise ValueError("f must lie in (0.5, 1)")

    def g(nbar):
        return max_fidelity(thermal(nbar), family, lattice)[0] - f

    g_lo, g_hi = g(lo), g(hi)
    if not (g_lo > 0 > g_hi):
        raise ValueError(
            f"max fidelity minus f does not change sign on [{lo}, {hi}] "
            f"({g_lo:.4g}, {g_hi:.4g}); is f = {f} sensible for family {family.name}?")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return ThresholdResult(family.name, lattice, f, 0.5 * (lo + hi), (lo, hi))


@dataclass
class FidelityMinimum:
    t: tuple[float, float]
    fidelity: float
    bloch: np.ndarray

    @property
    def pauli_axis(self) -> int:
        """Index (0, 1, 2 for x, y, z) of the largest Bloch component."""
        return int(np.argmax(np.abs(self.bloch)))

    @property
    def axis_alignment(self) -> float:
        """|r . e_k| / |r| for the closest Pauli axis e_k (1 means exactly aligned)."""
        return float(np.abs(self.bloch).max() / np.linalg.norm(self.bloch))


def fidelity_minima(state: GaussianState, family="H", lattice="square",
                    resolution: int = 64) -> list[FidelityMinimum]:
    """Local minima of the nearest-family fidelity over the outcome cell.

    Grid points lower than their eight periodic neighbours seed a Nelder-Mead
    polish; minima that coincide after polishing are merged.
    """
    family = get_family(family)
    sq = square_equivalent(state, Lattice.parse(lattice))
    fmap = fidelity_map(state, family, lattice, resolution)
    f = np.where(np.isfinite(fmap.fidelity), fmap.fidelity, np.inf)
    is_min = np.ones_like(f, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= f < np.roll(np.roll(f, di, axis=0), dj, axis=1)
    found: list[FidelityMinimum] = []
    for i, j in zip(*np.nonzero(is_min)):
        res = minimize(lambda x: _point_fidelity(sq, family, x[0], x[1]),
                       [fmap.tq[i, j], fmap.tp[i, j]], method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-14, "maxiter": 2000})
        t = (float(res.x[0] % CELL), float(res.x[1] % CELL))
        if any(np.hypot(*(np.subtract(t, m.t) + CELL / 2) % CELL - CELL / 2) < 1e-5 for m in found):
            continue
        comps = bloch_components(sq, np.array([t[0]]), np.array([t[1]]), method="lattice")[:, 0]
        found.append(FidelityMinimum(t, float(res.fun), comps[1:] / comps[0]))
    return sorted(found, key=lambda m: m.t)
