"""Plane waves plus diffuse noise in the SH domain.

The order-L SH signals are modelled as

    b(t) = sum_q y(dir_q) s_q(t) + sqrt(nu) n(t)

with zero-mean Gaussian white source signals ``s_q`` and independent
unit-power white noise ``n`` on every channel. ``nu`` is chosen so that
the expected share of noise in the total SH power equals ``beta``.
"""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .sh_math import Direction, n_channels, packing_directions, sh_matrix

__all__ = [
    "Source",
    "ScenarioConfig",
    "SHSignalBlock",
    "ConfigError",
    "GENERATOR_NAME",
    "noise_power",
    "directional_power",
    "synthesize",
    "synthesize_parts",
    "analytic_covariance",
    "packed_scenario",
]

GENERATOR_NAME = "numpy.random.Generator(PCG64)"
CORRELATIONS = ("uncorrelated", "identical")


class ConfigError(ValueError):
    """Invalid scenario description. ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class Source:
    direction: Direction
    power: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of a synthetic sound field.

    ``ignore_sources`` allows ``beta == 1`` with a non-empty source list;
    the sources are then dropped and the field is pure diffuse noise of unit
    power per channel.
    """

    order: int
    sources: tuple = ()
    correlation: str = "uncorrelated"
    beta: float = 0.0
    samples: int = 1024
    seed: int = 0
    ignore_sources: bool = False
    sample_rate: float = 48000.0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        self.validate()

    def validate(self):
        if not isinstance(self.order, (int, np.integer)) or self.order < 0:
            raise ConfigError(f"order must be a non-negative integer, got {self.order!r}", "order")
        if self.correlation not in CORRELATIONS:
            raise ConfigError(f"correlation must be one of {CORRELATIONS}, got {self.correlation!r}",
                              "correlation")
        if not (0.0 <= self.beta <= 1.0):
            raise ConfigError(f"beta must lie in [0, 1], got {self.beta!r}", "beta")
        if not isinstance(self.samples, (int, np.integer)) or self.samples < 1:
            raise ConfigError(f"samples must be a positive integer, got {self.samples!r}", "samples")
        if not (self.sample_rate > 0):
            raise ConfigError("sample_rate must be positive", "sample_rate")
        for i, src in enumerate(self.sources):
            if not (src.power > 0):
                raise ConfigError(f"source {i}: power must be > 0, got {src.power!r}",
                                  f"sources[{i}].power")
        if self.beta == 1.0 and self.sources and not self.ignore_sources:
            raise ConfigError("beta = 1 with sources present is ambiguous; remove the sources "
                              "or set ignore_sources", "beta")
        if self.beta < 1.0 and not self.active_sources:
            raise ConfigError("a field without sources must have beta = 1", "beta")

    @property
    def active_sources(self):
        if self.beta == 1.0 and self.ignore_sources:
            return ()
        return self.sources

    @property
    def n_channels(self):
        return n_channels(self.order)

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class SHSignalBlock:
    """``(L+1)**2 x T`` SH signals, rows in ACN order."""

    data: np.ndarray
    order: int
    noise_power: float = 0.0
    seed: Optional[int] = None
    generator: str = GENERATOR_NAME
    sample_rate: float = 48000.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] != n_channels(self.order):
            raise ValueError(f"expected {n_channels(self.order)} rows for order {self.order}, "
                             f"got array of shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("SH signal block contains non-finite values")

    @property
    def samples(self):
        return self.data.shape[1]


def _steering(config):
    src = config.active_sources
    if not src:
        return np.zeros((config.n_channels, 0)), np.zeros(0)
    y = sh_matrix(config.order, [s.direction for s in src]).T
    powers = np.array([s.power for s in src], dtype=float)
    return y, powers


def directional_power(config):
    """Expected total SH power of the plane-wave part."""
    y, powers = _steering(config)
    if powers.size == 0:
        return 0.0
    if config.correlation == "identical":
        g = y @ np.sqrt(powers)
        return float(g @ g)
    return float(np.sum(powers) * config.n_channels)


def noise_power(config):
    """Per-channel diffuse noise power ``nu`` giving expected noise share ``beta``."""
    if not config.active_sources:
        return 1.0
    return config.beta * directional_power(config) / ((1.0 - config.beta) * config.n_channels)


def synthesize_parts(config):
    """Directional part and unit-variance noise of :func:`synthesize`.

    Returns ``(direct, noise)``, both ``(L+1)**2 x T``, drawn in the same
    order as :func:`synthesize` so that ``direct + sqrt(nu) * noise``
    reproduces its block for any ``0 < beta < 1``.
    """
    rng = np.random.Generator(np.random.PCG64(int(config.seed) % 2**64))
    t = config.samples
    y, powers = _steering(config)
    direct = np.zeros((config.n_channels, t))
    if powers.size:
        if config.correlation == "identical":
            s = rng.standard_normal(t)
            direct += np.outer(y @ np.sqrt(powers), s)
        else:
            s = rng.standard_normal((powers.size, t)) * np.sqrt(powers)[:, None]
            direct += y @ s
    noise = rng.standard_normal((config.n_channels, t))
    return direct, noise


def synthesize(config):
    """Draw an :class:`SHSignalBlock` for ``config``.

    Source signals are drawn first (one row per source, or a single shared
    row for ``correlation="identical"``), then the noise rows, all from one
    PCG64 generator seeded with ``config.seed``.
    """
    nu = noise_power(config)
    data, noise = synthesize_parts(config)
    if nu > 0.0:
        data += np.sqrt(nu) * noise
    return SHSignalBlock(data, config.order, noise_power=nu, seed=config.seed,
                         sample_rate=config.sample_rate)


def analytic_covariance(config):
    """Expected covariance ``Gamma + nu * I`` of the scenario (no sampling)."""
    y, powers = _steering(config)
    if powers.size == 0:
        gamma = np.zeros((config.n_channels, config.n_channels))
    elif config.correlation == "identical":
        g = y @ np.sqrt(powers)
        gamma = np.outer(g, g)
    else:
        gamma = (y * powers) @ y.T
    return gamma + noise_power(config) * np.eye(config.n_channels)


def packed_scenario(order, q, beta, correlation="uncorrelated", samples=1024, seed=0):
    """``q`` unit-power sources on a ``q``-point packing.

    ``beta == 1`` yields pure diffuse noise (sources ignored).
    """
    dirs = packing_directions(q) if q > 0 else []
    sources = tuple(Source(d, 1.0) for d in dirs)
    return ScenarioConfig(order=order, sources=sources, correlation=correlation, beta=float(beta),
                          samples=samples, seed=seed, ignore_sources=(beta == 1.0))
