import math

import numpy as np
import pytest

from oracles import sh_oracle, sphere_quadrature

from diffusense.sh_math import (
    TAMMES_MIN_ANGLE_DEG,
    Direction,
    DirectionSet,
    acn_index,
    acn_to_lm,
    eval_sh,
    fibonacci_grid,
    min_angular_distance,
    n_channels,
    order_from_channels,
    packing_directions,
    sh_matrix,
    sh_vector,
)


def _random_dirs(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 2 * np.pi, n), np.arcsin(rng.uniform(-1, 1, n))


def test_closed_forms(backend):
    assert eval_sh(0, 0, Direction(1.2, -0.4)) == 1.0
    assert eval_sh(1, 0, Direction(0.0, math.pi / 2)) == pytest.approx(math.sqrt(3), abs=1e-14)
    assert eval_sh(1, 1, Direction(0.0, 0.0)) == pytest.approx(math.sqrt(3), abs=1e-14)
    d = Direction(0.3, 0.2)
    assert eval_sh(1, -1, d) == pytest.approx(math.sqrt(3) * math.cos(0.2) * math.sin(0.3))


def test_matches_scipy_oracle(backend):
    az, el = _random_dirs(400, 1)
    y = sh_matrix(6, (az, el))
    for l in range(7):
        for m in range(-l, l + 1):
            np.testing.assert_allclose(y[:, acn_index(l, m)], sh_oracle(l, m, az, el), atol=1e-12)


def test_orthonormal_on_quadrature(backend):
    az, el, w = sphere_quadrature()
    y = sh_matrix(4, (az, el))
    gram = (y * w[:, None]).T @ y / (4 * np.pi)
    assert np.max(np.abs(gram - np.eye(25))) < 1e-3


def test_sh_vector_norm_and_parity():
    assert np.array_equal(sh_vector(0, Direction(2.0, 1.0)), [1.0])
    for d in (Direction(0.7, 0.3), Direction(4.0, -1.2), Direction(0, math.pi / 2)):
        assert np.sum(sh_vector(3, d) ** 2) == pytest.approx(16.0, abs=1e-10)
        y, ya = sh_vector(3, d), sh_vector(3, d.antipode())
        for i in range(16):
            l, _ = acn_to_lm(i)
            assert ya[i] == pytest.approx((-1) ** l * y[i], abs=1e-12)


def test_axis_aligned_directions_are_exact():
    y = sh_vector(3, Direction.from_vector([-1.0, 0.0, 0.0]))
    assert y[acn_index(1, -1)] == 0.0
    assert y[acn_index(2, -2)] == 0.0
    assert y[acn_index(1, 1)] == -math.sqrt(3)


def test_acn_bijection():
    seen = set()
    for l in range(6):
        for m in range(-l, l + 1):
            i = acn_index(l, m)
            assert acn_to_lm(i) == (l, m)
            seen.add(i)
    assert seen == set(range(36))
    with pytest.raises(ValueError):
        acn_index(1, 2)
    with pytest.raises(ValueError):
        eval_sh(2, -3, Direction(0, 0))
    assert n_channels(3) == 16 and order_from_channels(25) == 4
    with pytest.raises(ValueError):
        order_from_channels(5)


def test_direction_normalisation():
    d = Direction(-0.5 * math.pi, 2.0)
    assert d.azimuth == pytest.approx(1.5 * math.pi)
    assert d.elevation == pytest.approx(0.5 * math.pi)
    d2 = Direction.from_vector(Direction(1.0, 0.4).unit_vector())
    assert d2.azimuth == pytest.approx(1.0) and d2.elevation == pytest.approx(0.4)
    with pytest.raises(ValueError):
        Direction.from_vector([0, 0, 0])


def test_packing_small_cases():
    p1 = packing_directions(1)
    assert len(p1) == 1
    assert p1[0].azimuth == 0.0 and p1[0].elevation == 0.0
    v = packing_directions(2).vectors()
    np.testing.assert_allclose(v[0], -v[1], atol=1e-15)
    v = packing_directions(4).vectors()
    g = v @ v.T
    off = g[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, -1.0 / 3.0, atol=1e-3)
    with pytest.raises(ValueError):
        packing_directions(0)


def test_packing_quality_against_table():
    for q, best in TAMMES_MIN_ANGLE_DEG.items():
        got = math.degrees(min_angular_distance(packing_directions(q)))
        assert got >= 0.8 * best, (q, got, best)


def test_packing_deterministic():
    a = packing_directions(13).vectors()
    b = packing_directions(13).vectors()
    assert np.array_equal(a, b)
    assert packing_directions(7).kind == "packing"


def test_fibonacci_grid():
    assert len(fibonacci_grid(1)) == 1
    with pytest.raises(ValueError):
        fibonacci_grid(0)
    g = fibonacci_grid(256)
    v = g.vectors()
    dots = np.clip(v @ v.T, -1, 1)
    np.fill_diagonal(dots, -1)
    nn = np.arccos(dots.max(axis=1))
    expected = math.sqrt(4 * math.pi / 256)
    assert abs(nn.mean() - expected) <= 0.15 * expected
    y = sh_matrix(3, g)
    gram = y.T @ y / 256
    assert np.linalg.norm(gram - np.eye(16)) <= 0.05
    assert np.array_equal(fibonacci_grid(256).vectors(), v)


def test_direction_set_is_read_only_and_unique():
    g = fibonacci_grid(10)
    with pytest.raises(ValueError):
        g.azimuth[0] = 1.0
    with pytest.raises(ValueError):
        DirectionSet([0.0, 0.0], [0.1, 0.1])
    with pytest.raises(ValueError):
        DirectionSet([0.0], [0.0], kind="bogus")
    assert [d.azimuth for d in g] == list(g.azimuth)
