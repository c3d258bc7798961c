"""Diffuseness estimators on SH covariance matrices.

Three estimators are provided, each returning a value in [0, 1]
(0 = one plane wave, 1 = perfectly diffuse):

* :func:`comedie` - mean absolute deviation of the covariance eigenvalues,
  normalised by its single-plane-wave value ``2 * ((L+1)**2 - 1)``.
* :func:`dirac` - active intensity over energy density from the order-0/1
  block.
* :func:`thiele_gover` - mean absolute deviation of the energy seen by
  maximum-directivity beams steered over a dense grid.

All three are ratios and hence invariant to scaling of the covariance.
Silence (a zero covariance) is reported as diffuseness 1.
"""
from dataclasses import dataclass
import math
import threading
import warnings

import numpy as np

from .covariance import clamp_spectrum, covariance_order, eigenvalues, truncate
from .sh_math import DirectionSet, fibonacci_grid, order_from_channels, sh_matrix

__all__ = [
    "ESTIMATORS",
    "DiffusenessProfile",
    "gamma0",
    "comedie",
    "comedie_covariance",
    "dirac",
    "thiele_gover",
    "beam_energies",
    "default_grid",
    "reference_mu0",
    "reference_wave_directions",
    "profile",
    "drr_to_beta",
    "beta_to_drr",
    "estimate",
]

ESTIMATORS = ("comedie", "dirac", "thiele_gover")
GRID_OVERSAMPLING = 16
MU0_WAVES = 100
ENERGY_RESOLUTION = 1e-12


def _clip01(x):
    return float(min(1.0, max(0.0, x)))


def gamma0(order):
    """Eigenvalue deviation of a single plane wave without noise."""
    return 2.0 * ((order + 1) ** 2 - 1)


def comedie(spectrum):
    """COMEDIE diffuseness from the eigenvalues of an order-L covariance.

    Parameters
    ----------
    spectrum : array_like, shape ((L+1)**2,)
        Covariance eigenvalues (any order). Roundoff-level negatives are
        clamped to zero.

    Returns
    -------
    float
        ``1 - gamma / gamma0`` clipped to [0, 1]; 1 for an all-zero spectrum.
    """
    v = clamp_spectrum(spectrum)
    order = order_from_channels(v.size)
    if order == 0:
        raise ValueError("COMEDIE needs order >= 1 (gamma0 is zero at order 0)")
    mean = v.mean()
    if mean <= 0.0:
        return 1.0
    gamma = np.sum(np.abs(v - mean)) / mean
    return _clip01(1.0 - gamma / gamma0(order))


def comedie_covariance(c):
    return comedie(eigenvalues(c))


def dirac(c):
    """DirAC diffuseness ``1 - |I| / (c E)`` from the first-order block of ``c``.

    The speed of sound cancels between intensity and energy, so only the
    N3D factor ``4 / sqrt(3)`` remains. ACN channels 1, 2, 3 are the y, z
    and x dipoles.
    """
    if covariance_order(c) < 1:
        raise ValueError("DirAC needs at least order-1 signals")
    c1 = truncate(c, 1)
    energy = float(np.trace(c1))
    if energy <= 0.0:
        return 1.0
    intensity = (4.0 / math.sqrt(3.0)) * np.array([c1[0, 3], c1[0, 1], c1[0, 2]])
    return _clip01(1.0 - np.linalg.norm(intensity) / energy)


def default_grid(order):
    return fibonacci_grid(GRID_OVERSAMPLING * (order + 1) ** 2)


def beam_energies(c, grid):
    """Mean output power of the max-directivity beam at every grid direction."""
    order = covariance_order(c)
    y = sh_matrix(order, grid)
    n = (order + 1) ** 2
    return np.einsum("ij,jk,ik->i", y, np.asarray(c, dtype=float), y) / (n * n)


def _mean_deviation(e):
    mean = e.mean(axis=0)
    return np.sum(np.abs(e - mean), axis=0) / mean


def reference_wave_directions(count=MU0_WAVES):
    """Deterministic quasi-random directions (R2 low-discrepancy sequence)."""
    g = 1.32471795724474602596  # plastic number
    i = np.arange(1, count + 1, dtype=float)
    u = np.mod(0.5 + i / g, 1.0)
    w = np.mod(0.5 + i / (g * g), 1.0)
    return DirectionSet(2.0 * np.pi * w, np.arcsin(1.0 - 2.0 * u), kind="grid")


_mu0_cache = {}
_mu0_lock = threading.Lock()


def reference_mu0(order, grid):
    """Energy deviation of a lone plane wave, averaged over wave directions.

    The value depends slightly on where the wave falls relative to the grid
    points, so it is averaged over 100 fixed quasi-random wave directions.
    Cached per ``(order, grid)``.
    """
    key = (int(order), grid.key)
    with _mu0_lock:
        if key in _mu0_cache:
            return _mu0_cache[key]
    if order == 0:
        warnings.warn("order-0 beams are omnidirectional; reference deviation is 0",
                      RuntimeWarning, stacklevel=2)
        value = 0.0
    else:
        waves = reference_wave_directions()
        g = sh_matrix(order, grid) @ sh_matrix(order, waves).T
        value = float(np.mean(_mean_deviation(g * g)))
    with _mu0_lock:
        return _mu0_cache.setdefault(key, value)


def thiele_gover(c, grid=None):
    """Thiele-Gover directional diffuseness ``1 - mu / mu0``.

    ``grid`` defaults to a Fibonacci grid with ``16 * (L+1)**2`` points.
    """
    order = covariance_order(c)
    if order == 0:
        raise ValueError("Thiele-Gover needs order >= 1")
    if grid is None:
        grid = default_grid(order)
    if len(grid) == 0:
        raise ValueError("beam grid is empty")
    e = beam_energies(c, grid)
    mean = e.mean()
    if mean <= 0.0:
        return 1.0
    dev = np.abs(e - mean)
    # deviations at rounding level are not resolvable; a flat field is exactly diffuse
    dev[dev <= ENERGY_RESOLUTION * mean] = 0.0
    mu = np.sum(dev) / mean
    return _clip01(1.0 - mu / reference_mu0(order, grid))


def estimate(c, estimator, grid=None):
    """Dispatch on estimator name."""
    if estimator == "comedie":
        return comedie_covariance(c)
    if estimator == "dirac":
        return dirac(c)
    if estimator == "thiele_gover":
        return thiele_gover(c, grid)
    raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")


@dataclass(frozen=True)
class DiffusenessProfile:
    """Estimates ``[d_1, ..., d_L]`` from the order-1..L truncations."""

    estimator: str
    values: tuple
    constant_by_definition: bool = False

    @property
    def order(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


def profile(c, estimator="comedie"):
    """Diffuseness profile of ``c``.

    DirAC only sees order-1 signals, so its profile is constant by
    definition; the result is flagged accordingly.
    """
    order = covariance_order(c)
    if order < 1:
        raise ValueError("a diffuseness profile needs order >= 1")
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
    if estimator == "dirac":
        d = dirac(c)
        return DiffusenessProfile("dirac", (d,) * order, constant_by_definition=True)
    values = tuple(estimate(truncate(c, l), estimator) for l in range(1, order + 1))
    return DiffusenessProfile(estimator, values)


def drr_to_beta(drr_db):
    """Relative noise level from a direct-to-diffuse ratio in dB."""
    drr_db = float(drr_db)
    if not math.isfinite(drr_db):
        raise ValueError("DRR must be finite")
    return 1.0 / (1.0 + 10.0 ** (drr_db / 10.0))


def beta_to_drr(beta):
    if not (0.0 < beta < 1.0):
        raise ValueError("beta must lie strictly between 0 and 1")
    return 10.0 * math.log10((1.0 - beta) / beta)
