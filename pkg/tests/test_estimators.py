import math
import threading
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffusense.covariance import estimate_covariance
from diffusense.estimators import (
    beta_to_drr,
    comedie,
    comedie_covariance,
    dirac,
    drr_to_beta,
    estimate,
    fibonacci_grid,
    gamma0,
    profile,
    reference_mu0,
    thiele_gover,
)
from diffusense.field_sim import ScenarioConfig, Source, analytic_covariance, packed_scenario, synthesize
from diffusense.sh_math import Direction, DirectionSet

ALL = (comedie_covariance, dirac, thiele_gover)


def plane_wave(order, beta=0.0, direction=Direction(0.7, 0.3)):
    return analytic_covariance(ScenarioConfig(order=order, sources=(Source(direction),), beta=beta))


def test_comedie_examples():
    assert comedie([16.0] + [0.0] * 15) == 0.0
    assert comedie(np.full(9, 2.5)) == 1.0
    assert comedie(np.zeros(4)) == 1.0
    with pytest.raises(ValueError):
        comedie([1.0])
    assert gamma0(2) == 16.0


def test_dirac_examples():
    assert dirac(plane_wave(1)) == pytest.approx(0.0, abs=1e-12)
    assert dirac(analytic_covariance(packed_scenario(2, 2, 0.0))) == 1.0
    assert dirac(np.eye(16)) == 1.0
    assert dirac(np.zeros((4, 4))) == 1.0
    with pytest.raises(ValueError):
        dirac(np.eye(1))


def test_extremes_agree():
    for order in (1, 2, 3):
        for f in ALL:
            assert f(plane_wave(order)) == pytest.approx(0.0, abs=0.05)
            assert f(np.eye((order + 1) ** 2)) == 1.0


def test_thiele_gover_single_wave_average():
    rng = np.random.default_rng(5)
    az, el = rng.uniform(0, 2 * np.pi, 100), np.arcsin(rng.uniform(-1, 1, 100))
    for order in (1, 3):
        phis = [thiele_gover(plane_wave(order, 0.0, Direction(a, e))) for a, e in zip(az, el)]
        assert np.mean(phis) == pytest.approx(0.0, abs=0.05)


def test_thiele_gover_fooled_by_identical_sources():
    assert thiele_gover(analytic_covariance(packed_scenario(3, 36, 0.0, "identical"))) >= 0.9


def test_reference_mu0():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        assert reference_mu0(0, fibonacci_grid(16)) == 0.0
    grid = fibonacci_grid(256)
    base = reference_mu0(1, grid)
    assert base > 0 and reference_mu0(1, grid) == base
    rng = np.random.default_rng(8)
    for _ in range(5):
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        rotated = DirectionSet.from_vectors(grid.vectors() @ q.T)
        assert reference_mu0(1, rotated) == pytest.approx(base, rel=0.01)


def test_reference_mu0_concurrent_first_access():
    grid = fibonacci_grid(333)
    out = []
    threads = [threading.Thread(target=lambda: out.append(reference_mu0(2, grid))) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(out)) == 1


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), log_alpha=st.floats(-4, 4), order=st.integers(1, 3))
def test_scale_invariance(seed, log_alpha, order):
    n = (order + 1) ** 2
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, int(rng.integers(1, 2 * n))))
    c = a @ a.T
    alpha = 10.0 ** log_alpha
    for f in ALL:
        v = f(c)
        assert 0.0 <= v <= 1.0
        assert f(alpha * c) == pytest.approx(v, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(beta=st.floats(0.0, 0.95), order=st.integers(1, 3), q=st.integers(1, 20))
def test_comedie_correlation_immunity(beta, order, q):
    d_q = comedie_covariance(analytic_covariance(packed_scenario(order, q, beta, "identical")))
    assert d_q == pytest.approx(beta, abs=1e-12)


def test_comedie_monotone_in_beta():
    for q in (3, 6):
        d = [comedie_covariance(analytic_covariance(packed_scenario(3, q, b))) for b in np.linspace(0, 0.95, 11)]
        assert all(b > a for a, b in zip(d, d[1:]))


def test_profile_order_behaviour():
    for q in range(2, 10):
        covs = [estimate_covariance(synthesize(packed_scenario(3, q, 0.0, seed=s))) for s in range(10)]
        d = np.mean([profile(c, "comedie").values for c in covs], axis=0)
        assert d[0] >= d[1] - 0.05 and d[1] >= d[2] - 0.05, (q, d)


def test_profile_shapes():
    c = analytic_covariance(packed_scenario(3, 3, 0.0))
    p = profile(c, "comedie")
    assert len(p) == 3 and p.order == 3 and not p.constant_by_definition
    pd = profile(c, "dirac")
    assert pd.constant_by_definition and len(set(pd.values)) == 1
    pt = profile(c, "thiele_gover")
    assert all(0.0 <= v <= 1.0 for v in pt)
    with pytest.raises(ValueError):
        profile(np.eye(1))
    with pytest.raises(ValueError):
        estimate(c, "music")


def test_drr_helper():
    assert drr_to_beta(4.5) == pytest.approx(0.26, abs=0.005)
    assert drr_to_beta(0.0) == 0.5
    assert drr_to_beta(100.0) == pytest.approx(1e-10, rel=1e-6)
    assert beta_to_drr(drr_to_beta(-3.0)) == pytest.approx(-3.0)
    with pytest.raises(ValueError):
        drr_to_beta(math.inf)
