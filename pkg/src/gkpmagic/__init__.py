"""Exact GKP error correction of single-mode Gaussian states and the magic it yields."""

from .core import (CELL, SQRT_PI, Bloch4, BlochMap, Outcome, bloch_components, bloch_lattice_sum,
                   bloch_map, bloch_normalized, bloch_theta, bloch_unnormalized, cell_grid,
                   heterodyne_to_outcome, pdf)
from .gaussian import (GaussianState, Lattice, damp_thermal, damped_occupation,
                       hex_to_square_covariance, parse_state, square_equivalent, thermal, vacuum,
                       wigner)
from .magic import (H_FAMILY, T_FAMILY, FidelityMap, MagicFamily, ThresholdResult,
                    FidelityMinimum, fidelity_map, fidelity_minima, fidelity_to_nearest, get_family,
                    max_fidelity,
                    success_curve, success_probability, threshold_nbar)
from .theta import TruncationError, riemann_theta

__version__ = "0.1.0"
