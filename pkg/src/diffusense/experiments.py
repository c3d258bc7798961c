"""Multi-seed scenario sweeps over (order, source count, noise level).

Every grid point places ``Q`` unit-power sources on a ``Q``-point packing,
builds the covariance (analytically or from synthesized signals) and
evaluates the requested estimators. Seeds are derived per grid point from
the base seed, so points can be evaluated in any order or concurrently.
The seed does not depend on ``beta``: along the noise axis the same source
and noise draws are re-used with different mixing, which keeps surfaces
smooth in ``beta``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import math
import os

import numpy as np

from ._accel import backend_name
from .covariance import estimate_covariance, mismatch_xi
from .estimators import ESTIMATORS, estimate
from .field_sim import (
    GENERATOR_NAME,
    analytic_covariance,
    noise_power,
    packed_scenario,
    synthesize,
    synthesize_parts,
)

__all__ = [
    "SweepSpec",
    "SweepRecord",
    "SweepResult",
    "SweepError",
    "UsageError",
    "point_seed",
    "run_sweep",
    "run_transition",
    "default_threads",
    "DEFAULT_Q",
    "DEFAULT_BETA",
]

DEFAULT_Q = tuple(range(1, 37))
DEFAULT_BETA = tuple(round(0.05 * i, 2) for i in range(21))
DEFAULT_ORDERS = (1, 2, 3)
PACKING_SOURCE = "fibonacci lattice relaxed by Riesz repulsion (s = 1, 6, 24, 80)"
THREADS_ENV = "DIFFUSENSE_THREADS"


class UsageError(ValueError):
    """A sweep description that cannot be run (empty or malformed axes)."""


class SweepError(RuntimeError):
    """A grid point failed; ``point`` holds its coordinates."""

    def __init__(self, message, point):
        super().__init__(message)
        self.point = point


@dataclass(frozen=True)
class SweepSpec:
    estimators: tuple = ESTIMATORS
    orders: tuple = DEFAULT_ORDERS
    q_values: tuple = DEFAULT_Q
    beta_values: tuple = DEFAULT_BETA
    correlation: str = "uncorrelated"
    samples: int = 1024
    seeds: int = 10
    covariance_mode: str = "empirical"
    seed: int = 0

    def __post_init__(self):
        for name in ("estimators", "orders", "q_values", "beta_values"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise UsageError(f"{name} must not be empty")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise UsageError(f"unknown estimators {bad}; choose from {ESTIMATORS}")
        if any(int(l) != l or l < 1 for l in self.orders):
            raise UsageError("orders must be integers >= 1")
        if any(int(q) != q or q < 1 for q in self.q_values):
            raise UsageError("q_values must be integers >= 1")
        if any(not (0.0 <= b <= 1.0) for b in self.beta_values):
            raise UsageError("beta_values must lie in [0, 1]")
        if self.correlation not in ("uncorrelated", "identical"):
            raise UsageError(f"unknown correlation {self.correlation!r}")
        if self.covariance_mode not in ("empirical", "analytic"):
            raise UsageError(f"unknown covariance_mode {self.covariance_mode!r}")
        if self.samples < 1 or self.seeds < 1:
            raise UsageError("samples and seeds must be >= 1")


@dataclass(frozen=True)
class SweepRecord:
    estimator: str
    order: int
    q: int
    beta: float
    mean: float
    std: float


@dataclass
class SweepResult:
    records: list
    metadata: dict = field(default_factory=dict)

    def lookup(self, estimator, order, q, beta):
        for r in self.records:
            if r.estimator == estimator and r.order == order and r.q == q and r.beta == beta:
                return r
        raise KeyError((estimator, order, q, beta))

    def axes(self, estimator, order):
        rows = [r for r in self.records if r.estimator == estimator and r.order == order]
        return sorted({r.beta for r in rows}), sorted({r.q for r in rows})

    def matrix(self, estimator, order):
        """Mean values with beta along rows and Q along columns."""
        betas, qs = self.axes(estimator, order)
        bi = {b: i for i, b in enumerate(betas)}
        qi = {q: j for j, q in enumerate(qs)}
        m = np.full((len(betas), len(qs)), np.nan)
        for r in self.records:
            if r.estimator == estimator and r.order == order:
                m[bi[r.beta], qi[r.q]] = r.mean
        return betas, qs, m

    def to_long_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["estimator", "L", "Q", "beta", "mean", "std"])
        for r in self.records:
            w.writerow([r.estimator, r.order, r.q, repr(r.beta), repr(r.mean), repr(r.std)])
        return buf.getvalue()

    def to_matrix_csv(self, estimator, order):
        betas, qs, m = self.matrix(estimator, order)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["beta"] + [f"Q={q}" for q in qs])
        for b, row in zip(betas, m):
            w.writerow([repr(b)] + [repr(float(x)) for x in row])
        return buf.getvalue()

    def to_transition_csv(self):
        """Mismatch table: one row per order, one column per Q."""
        orders = sorted({r.order for r in self.records})
        qs = sorted({r.q for r in self.records})
        vals = {(r.order, r.q): r.mean for r in self.records}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["L"] + [f"Q={q}" for q in qs])
        for l in orders:
            w.writerow([l] + [repr(vals.get((l, q), float("nan"))) for q in qs])
        return buf.getvalue()


def default_threads():
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def point_seed(base, order, q, k):
    """64-bit seed for draw ``k`` at grid point ``(order, q)``."""
    ss = np.random.SeedSequence([int(base) % 2**63, int(order), int(q), int(k)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _beta_covariances(order, q, spec):
    """Covariances for every beta on the axis, one list (over seeds) per beta.

    In empirical mode the source and noise draws of a seed are shared by all
    beta values, so each draw is synthesized once and the covariance for a
    given ``nu`` is assembled from its direct, cross and noise parts.
    """
    betas = spec.beta_values
    if spec.covariance_mode == "analytic":
        return [[analytic_covariance(packed_scenario(order, q, b, spec.correlation))] for b in betas]
    nus = [noise_power(packed_scenario(order, q, b, spec.correlation)) for b in betas]
    out = [[] for _ in betas]
    for k in range(spec.seeds):
        cfg = packed_scenario(order, q, 0.0, spec.correlation, samples=spec.samples,
                              seed=point_seed(spec.seed, order, q, k))
        direct, noise = synthesize_parts(cfg)
        t = cfg.samples
        c_dd = direct @ direct.T / t
        c_dn = direct @ noise.T / t
        c_dn = c_dn + c_dn.T
        c_nn = noise @ noise.T / t
        for i, (b, nu) in enumerate(zip(betas, nus)):
            if b == 1.0:
                c = estimate_covariance(synthesize(cfg.with_(beta=1.0, ignore_sources=True)))
            elif b == 0.0:
                c = c_dd
            else:
                c = c_dd + math.sqrt(nu) * c_dn + nu * c_nn
            out[i].append(0.5 * (c + c.T))
    return out


def _evaluate_point(spec, order, q):
    beta = None
    try:
        covs = _beta_covariances(order, q, spec)
        out = []
        for name in spec.estimators:
            for beta, cs in zip(spec.beta_values, covs):
                vals = np.array([estimate(c, name) for c in cs])
                out.append(SweepRecord(name, int(order), int(q), float(beta),
                                       float(vals.mean()), float(vals.std())))
        return out
    except Exception as exc:
        point = {"L": order, "Q": q, "beta": beta}
        raise SweepError(f"grid point {point} failed: {exc}", point) from exc


def _run_points(func, points, threads):
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1:
        return [func(*p) for p in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda p: func(*p), points))


def _metadata(**extra):
    meta = {"generator": GENERATOR_NAME, "packing": PACKING_SOURCE, "backend": backend_name()}
    meta.update(extra)
    return meta


def run_sweep(spec, threads=None):
    """Evaluate ``spec`` on its full grid; one record per (estimator, L, Q, beta).

    Records are sorted by (estimator, L, Q, beta) regardless of evaluation order.
    """
    points = [(spec, l, q) for l in spec.orders for q in spec.q_values]
    chunks = _run_points(_evaluate_point, points, threads)
    records = [r for chunk in chunks for r in chunk]
    rank = {e: i for i, e in enumerate(spec.estimators)}
    records.sort(key=lambda r: (rank[r.estimator], r.order, r.q, r.beta))
    analytic = spec.covariance_mode == "analytic"
    meta = _metadata(seed_base=spec.seed, covariance_mode=spec.covariance_mode,
                     correlation=spec.correlation,
                     samples=None if analytic else spec.samples,
                     seeds=1 if analytic else spec.seeds)
    return SweepResult(records, meta)


def _transition_point(order, q, samples, seeds, base_seed):
    try:
        xs = []
        for k in range(seeds):
            cfg = packed_scenario(order, q, 0.0, samples=samples,
                                  seed=point_seed(base_seed, order, q, k))
            xs.append(mismatch_xi(estimate_covariance(synthesize(cfg))))
        xs = np.array(xs)
        return SweepRecord("xi", int(order), int(q), 0.0, float(xs.mean()), float(xs.std()))
    except Exception as exc:
        point = {"L": order, "Q": q}
        raise SweepError(f"grid point {point} failed: {exc}", point) from exc


def run_transition(l_values, q_values, samples=1024, seeds=10, seed=0, threads=None):
    """Mismatch ``xi`` between empirical and diffuse covariance at ``beta = 0``."""
    l_values, q_values = tuple(l_values), tuple(q_values)
    if not l_values or not q_values:
        raise UsageError("l_values and q_values must not be empty")
    if any(l < 0 for l in l_values) or any(q < 1 for q in q_values):
        raise UsageError("orders must be >= 0 and source counts >= 1")
    if samples < 1 or seeds < 1:
        raise UsageError("samples and seeds must be >= 1")
    points = [(l, q, samples, seeds, seed) for l in l_values for q in q_values]
    records = sorted(_run_points(_transition_point, points, threads), key=lambda r: (r.order, r.q))
    meta = _metadata(seed_base=seed, covariance_mode="empirical", samples=samples, seeds=seeds)
    return SweepResult(records, meta)
