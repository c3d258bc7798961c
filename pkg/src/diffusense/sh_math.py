"""Real N3D spherical harmonics, ACN indexing and direction sets.

Directions are given externally as (azimuth, elevation) in radians;
azimuth is measured from +x towards +y, elevation from the xy-plane
towards +z. SH values follow the ambisonics convention: fully normalised
(N3D, ``sum_m Y_l^m(dir)**2 == 2l + 1``), no Condon-Shortley phase, and
channels in ACN order ``l**2 + l + m``.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np

from . import kernels

__all__ = [
    "Direction",
    "DirectionSet",
    "acn_index",
    "acn_to_lm",
    "n_channels",
    "order_from_channels",
    "eval_sh",
    "sh_vector",
    "sh_matrix",
    "packing_directions",
    "fibonacci_grid",
    "min_angular_distance",
    "TAMMES_MIN_ANGLE_DEG",
]

TWO_PI = 2.0 * math.pi

# Best-known minimum angular separation (degrees) of Q points on the sphere
# (Tammes problem), used only as an accuracy gate for packing_directions.
TAMMES_MIN_ANGLE_DEG = {
    2: 180.0, 3: 120.0, 4: 109.4712, 5: 90.0, 6: 90.0, 7: 77.8695,
    8: 74.8585, 9: 70.5288, 10: 66.1468, 11: 63.4349, 12: 63.4349,
    13: 57.1367, 14: 55.6706, 15: 53.6579, 16: 52.2444, 17: 51.0903,
    18: 49.5567, 19: 47.6919, 20: 47.4310, 21: 45.6132, 22: 44.7402,
    23: 43.7100, 24: 43.6908, 25: 41.6344, 26: 41.0377, 27: 40.6776,
    28: 39.3551, 29: 38.7137, 30: 38.5971,
}


@dataclass(frozen=True)
class Direction:
    """A point on the unit sphere.

    Azimuth is wrapped into ``[0, 2*pi)`` and elevation clamped to
    ``[-pi/2, pi/2]`` on construction. Directions built with
    :meth:`from_vector` keep the exact unit vector they came from, so
    axis-aligned points evaluate without trigonometric round-off.
    """

    azimuth: float
    elevation: float
    vector: tuple = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        az = math.fmod(float(self.azimuth), TWO_PI)
        if az < 0.0:
            az += TWO_PI
        if az >= TWO_PI:
            az = 0.0
        el = min(max(float(self.elevation), -0.5 * math.pi), 0.5 * math.pi)
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)
        if self.vector is None:
            ce = math.cos(el)
            vec = (ce * math.cos(az), ce * math.sin(az), math.sin(el))
        else:
            vec = tuple(float(c) for c in self.vector)
        object.__setattr__(self, "vector", vec)

    @property
    def colatitude(self):
        return 0.5 * math.pi - self.elevation

    def unit_vector(self):
        return np.array(self.vector)

    @classmethod
    def from_vector(cls, vec):
        x, y, z = (float(c) for c in vec)
        r = math.sqrt(x * x + y * y + z * z)
        if r == 0.0:
            raise ValueError("zero vector has no direction")
        x, y, z = x / r, y / r, z / r
        return cls(math.atan2(y, x), math.asin(max(-1.0, min(1.0, z))), (x, y, z))

    @classmethod
    def from_degrees(cls, azimuth, elevation):
        return cls(math.radians(azimuth), math.radians(elevation))

    def antipode(self):
        return Direction.from_vector(-self.unit_vector())


class DirectionSet:
    """Ordered set of directions stored as parallel azimuth/elevation arrays.

    ``kind`` is ``"packing"`` or ``"grid"``. Instances are treated as
    immutable; ``key`` gives a hashable fingerprint used for caching.
    """

    def __init__(self, azimuth, elevation, kind="grid", _vectors=None):
        if kind not in ("packing", "grid"):
            raise ValueError(f"unknown direction-set kind {kind!r}")
        az = np.mod(np.asarray(azimuth, dtype=float).reshape(-1), TWO_PI)
        el = np.clip(np.asarray(elevation, dtype=float).reshape(-1), -0.5 * np.pi, 0.5 * np.pi)
        if az.shape != el.shape:
            raise ValueError("azimuth and elevation must have the same length")
        az.setflags(write=False)
        el.setflags(write=False)
        self.azimuth = az
        self.elevation = el
        self.kind = kind
        if _vectors is None:
            ce = np.cos(el)
            _vectors = np.column_stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)])
        _vectors = np.array(_vectors, dtype=float)
        if len(np.unique(_vectors, axis=0)) != len(_vectors):
            raise ValueError("direction set contains repeated directions")
        _vectors.setflags(write=False)
        self._vectors = _vectors

    @classmethod
    def from_vectors(cls, vectors, kind="grid"):
        v = np.asarray(vectors, dtype=float)
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
        return cls(np.arctan2(v[:, 1], v[:, 0]), np.arcsin(np.clip(v[:, 2], -1.0, 1.0)), kind, v)

    def __len__(self):
        return self.azimuth.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i):
        return Direction(self.azimuth[i], self.elevation[i], tuple(self._vectors[i]))

    def __repr__(self):
        return f"DirectionSet(kind={self.kind!r}, n={len(self)})"

    @property
    def key(self):
        return (self.kind, self._vectors.tobytes())

    def vectors(self):
        return self._vectors.copy()

    def sh_matrix(self, order):
        return sh_matrix(order, self)


def n_channels(order):
    return (int(order) + 1) ** 2


def order_from_channels(n):
    order = math.isqrt(int(n)) - 1
    if order < 0 or (order + 1) ** 2 != n:
        raise ValueError(f"{n} channels is not a full SH set (expected (L+1)**2)")
    return order


def acn_index(l, m):
    if l < 0 or abs(m) > l:
        raise ValueError(f"invalid SH indices l={l}, m={m}: need 0 <= |m| <= l")
    return l * l + l + m


def acn_to_lm(index):
    if index < 0:
        raise ValueError("ACN index must be non-negative")
    l = math.isqrt(index)
    return l, index - l * l - l


def _as_vectors(directions):
    if isinstance(directions, Direction):
        return np.array([directions.vector])
    if isinstance(directions, DirectionSet):
        return directions._vectors
    if isinstance(directions, (list, tuple)) and directions and isinstance(directions[0], Direction):
        return np.array([d.vector for d in directions])
    az, el = directions
    az = np.asarray(az, dtype=float).reshape(-1)
    el = np.asarray(el, dtype=float).reshape(-1)
    ce = np.cos(el)
    return np.column_stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)])


def sh_matrix(order, directions):
    """SH values for many directions, shape ``(n_directions, (order+1)**2)``.

    ``directions`` may be a :class:`DirectionSet`, a single
    :class:`Direction`, a list of directions or an ``(azimuth, elevation)``
    pair of arrays.
    """
    if order < 0:
        raise ValueError("SH order must be non-negative")
    return kernels.sh_matrix(order, _as_vectors(directions))


def sh_vector(order, direction):
    """The vector ``[Y_0^0, Y_1^-1, Y_1^0, ..., Y_L^L]`` at ``direction``."""
    return sh_matrix(order, direction)[0]


def eval_sh(l, m, direction):
    """Single real N3D spherical harmonic ``Y_l^m`` at ``direction``."""
    idx = acn_index(l, m)
    return float(sh_vector(l, direction)[idx])


def _fibonacci_vectors(n):
    i = np.arange(n, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / n
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    az = TWO_PI * i / golden
    r = np.sqrt(1.0 - z * z)
    return np.column_stack([r * np.cos(az), r * np.sin(az), z])


def fibonacci_grid(n):
    """Spherical Fibonacci lattice with ``n`` points (deterministic)."""
    if n < 1:
        raise ValueError("grid size must be >= 1")
    if n == 1:
        return DirectionSet([0.0], [0.0], kind="grid")
    return DirectionSet.from_vectors(_fibonacci_vectors(n), kind="grid")


def _rotation_to_x(v):
    """Rotation matrix taking unit vector ``v`` onto +x."""
    target = np.array([1.0, 0.0, 0.0])
    axis = np.cross(v, target)
    s = np.linalg.norm(axis)
    c = float(np.dot(v, target))
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        return np.diag([-1.0, -1.0, 1.0])
    k = axis / s
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * kx + (1 - c) * kx @ kx


@lru_cache(maxsize=None)
def _packing_vectors(q):
    if q == 1:
        return np.array([[1.0, 0.0, 0.0]])
    if q == 2:
        return np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    pts = _fibonacci_vectors(q)
    # Coulomb first for a good global arrangement, then sharper exponents
    # push the closest pairs apart (towards the max-min-distance optimum).
    for exponent, iters, step in ((1.0, 1500, 0.05), (6.0, 1500, 0.02),
                                  (24.0, 2000, 0.01), (80.0, 3000, 0.003)):
        pts = kernels.relax_points(pts, exponent, iters, step)
    pts = pts @ _rotation_to_x(pts[0]).T
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts.setflags(write=False)
    return pts


def packing_directions(q):
    """Quasi-optimal packing of ``q`` directions (deterministic).

    Q=1 is the +x axis, Q=2 the antipodal pair on the x axis. Larger Q are
    a Fibonacci lattice relaxed by Riesz-energy repulsion with increasing
    exponent, rotated so the first point lies on +x.
    """
    if q < 1:
        raise ValueError("packing size must be >= 1")
    return DirectionSet.from_vectors(_packing_vectors(int(q)), kind="packing")


def min_angular_distance(directions):
    """Smallest pairwise great-circle angle (radians) in a direction set."""
    v = directions.vectors() if isinstance(directions, DirectionSet) else np.asarray(directions)
    if len(v) < 2:
        return math.pi
    g = np.clip(v @ v.T, -1.0, 1.0)
    np.fill_diagonal(g, -1.0)
    return float(np.arccos(g.max()))
