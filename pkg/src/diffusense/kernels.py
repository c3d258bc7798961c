"""Numeric inner loops, each in two flavours.

Every kernel exists as a numba ``@njit`` loop (``*_jit``) and as a
vectorised numpy routine (``*_np``). The public wrappers at the bottom pick
one according to :func:`diffusense._accel.jit_enabled`. Both flavours run
the same algorithm and agree to rounding error; the test-suite checks this.
"""
import math

import numpy as np

from ._accel import jit_enabled, njit

__all__ = ["sh_matrix", "jacobi_eigh", "relax_points", "JacobiError"]


class JacobiError(RuntimeError):
    """Raised when the Jacobi sweeps fail to converge."""


# ---------------------------------------------------------------------------
# Real N3D spherical harmonics from Cartesian unit vectors.
# Y_l^m = Q_l^|m|(z) * Re/Im (x + iy)^|m|, where Q is the fully normalised
# associated Legendre function divided by cos(elevation)**|m|. Working in
# x, y, z keeps axis-aligned directions exact (no sin(pi) residue).
# ---------------------------------------------------------------------------

@njit
def _sh_matrix_jit(order, xyz):
    n = xyz.shape[0]
    out = np.empty((n, (order + 1) ** 2))
    qlm = np.zeros((order + 1, order + 1))
    cm = np.zeros(order + 1)
    sm = np.zeros(order + 1)
    for k in range(n):
        x = xyz[k, 0]
        y = xyz[k, 1]
        z = xyz[k, 2]
        qlm[0, 0] = 1.0
        for m in range(1, order + 1):
            f = math.sqrt((2.0 * m + 1.0) / (2.0 * m))
            if m == 1:
                f *= math.sqrt(2.0)
            qlm[m, m] = f * qlm[m - 1, m - 1]
        for m in range(0, order):
            qlm[m + 1, m] = math.sqrt(2.0 * m + 3.0) * z * qlm[m, m]
        for m in range(0, order + 1):
            for l in range(m + 2, order + 1):
                a = math.sqrt((2.0 * l - 1.0) * (2.0 * l + 1.0) / ((l - m) * (l + m)))
                b = math.sqrt((2.0 * l + 1.0) * (l + m - 1.0) * (l - m - 1.0)
                              / ((l - m) * (l + m) * (2.0 * l - 3.0)))
                qlm[l, m] = a * z * qlm[l - 1, m] - b * qlm[l - 2, m]
        cm[0] = 1.0
        sm[0] = 0.0
        for m in range(1, order + 1):
            cm[m] = x * cm[m - 1] - y * sm[m - 1]
            sm[m] = x * sm[m - 1] + y * cm[m - 1]
        for l in range(order + 1):
            out[k, l * l + l] = qlm[l, 0]
            for m in range(1, l + 1):
                out[k, l * l + l + m] = qlm[l, m] * cm[m]
                out[k, l * l + l - m] = qlm[l, m] * sm[m]
    return out


def _sh_matrix_np(order, xyz):
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    n = xyz.shape[0]
    qlm = np.zeros((order + 1, order + 1, n))
    qlm[0, 0] = 1.0
    for m in range(1, order + 1):
        f = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * (np.sqrt(2.0) if m == 1 else 1.0)
        qlm[m, m] = f * qlm[m - 1, m - 1]
    for m in range(order):
        qlm[m + 1, m] = np.sqrt(2.0 * m + 3.0) * z * qlm[m, m]
    for m in range(order + 1):
        for l in range(m + 2, order + 1):
            a = np.sqrt((2.0 * l - 1.0) * (2.0 * l + 1.0) / ((l - m) * (l + m)))
            b = np.sqrt((2.0 * l + 1.0) * (l + m - 1.0) * (l - m - 1.0)
                        / ((l - m) * (l + m) * (2.0 * l - 3.0)))
            qlm[l, m] = a * z * qlm[l - 1, m] - b * qlm[l - 2, m]
    cm = [np.ones(n)]
    sm = [np.zeros(n)]
    for m in range(1, order + 1):
        cm.append(x * cm[m - 1] - y * sm[m - 1])
        sm.append(x * sm[m - 1] + y * cm[m - 1])

    out = np.empty((n, (order + 1) ** 2))
    for l in range(order + 1):
        out[:, l * l + l] = qlm[l, 0]
        for m in range(1, l + 1):
            out[:, l * l + l + m] = qlm[l, m] * cm[m]
            out[:, l * l + l - m] = qlm[l, m] * sm[m]
    return out


# ---------------------------------------------------------------------------
# Cyclic Jacobi eigensolver (threshold sweeps, Rutishauser underflow guard)
# ---------------------------------------------------------------------------

@njit
def _off_norm_jit(a):
    n = a.shape[0]
    acc = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                acc += a[i, j] * a[i, j]
    return math.sqrt(acc)


@njit
def _jacobi_jit(a, rel_tol, max_sweeps):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    off0 = _off_norm_jit(a)
    if off0 == 0.0:
        return np.diag(a).copy(), v, 0
    for sweep in range(max_sweeps):
        if _off_norm_jit(a) <= rel_tol * off0:
            return np.diag(a).copy(), v, sweep
        thresh = 0.0
        if sweep < 3:
            acc = 0.0
            for p in range(n - 1):
                for q in range(p + 1, n):
                    acc += abs(a[p, q])
            thresh = 0.2 * acc / (n * n)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                g = 100.0 * abs(apq)
                if (sweep > 3 and abs(a[p, p]) + g == abs(a[p, p])
                        and abs(a[q, q]) + g == abs(a[q, q])):
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                if abs(apq) <= thresh or apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    if _off_norm_jit(a) <= rel_tol * off0:
        return np.diag(a).copy(), v, max_sweeps
    return np.diag(a).copy(), v, -1


def _round_robin(n):
    """Pairings for a parallel (tournament) ordering of all index pairs."""
    m = n + (n % 2)
    idx = list(range(m))
    rounds = []
    for _ in range(m - 1):
        half = m // 2
        ps, qs = [], []
        for i in range(half):
            p, q = idx[i], idx[m - 1 - i]
            if p < n and q < n:
                ps.append(min(p, q))
                qs.append(max(p, q))
        rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        idx = [idx[0]] + [idx[-1]] + idx[1:-1]
    return rounds


def _off_norm_np(a):
    off = a - np.diag(np.diag(a))
    return math.sqrt(float(np.sum(off * off)))


def _jacobi_np(a, rel_tol, max_sweeps):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    off0 = _off_norm_np(a)
    if off0 == 0.0:
        return np.diag(a).copy(), v, 0
    rounds = _round_robin(n)
    iu = np.triu_indices(n, 1)
    for sweep in range(max_sweeps):
        if _off_norm_np(a) <= rel_tol * off0:
            return np.diag(a).copy(), v, sweep
        thresh = 0.2 * np.sum(np.abs(a[iu])) / (n * n) if sweep < 3 else 0.0
        for p, q in rounds:
            if p.size == 0:
                continue
            apq = a[p, q]
            app = a[p, p]
            aqq = a[q, q]
            g = 100.0 * np.abs(apq)
            tiny = (sweep > 3) & (np.abs(app) + g == np.abs(app)) & (np.abs(aqq) + g == np.abs(aqq))
            a[p[tiny], q[tiny]] = 0.0
            a[q[tiny], p[tiny]] = 0.0
            rot = ~tiny & (np.abs(apq) > thresh) & (apq != 0.0)
            if not rot.any():
                continue
            p, q, apq = p[rot], q[rot], apq[rot]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            with np.errstate(over="ignore", divide="ignore"):
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t = np.where(np.abs(theta) > 1e150, 0.5 / theta, t)
            t = np.where(theta == 0.0, 1.0, t)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            j = np.eye(n)
            j[p, p] = c
            j[q, q] = c
            j[p, q] = s
            j[q, p] = -s
            a = j.T @ a @ j
            a[p, q] = 0.0
            a[q, p] = 0.0
            v = v @ j
    if _off_norm_np(a) <= rel_tol * off0:
        return np.diag(a).copy(), v, max_sweeps
    return np.diag(a).copy(), v, -1


# ---------------------------------------------------------------------------
# Riesz-energy repulsion on the unit sphere
# ---------------------------------------------------------------------------

@njit
def _relax_jit(points, exponent, iterations, step):
    pts = points.copy()
    q = pts.shape[0]
    force = np.zeros_like(pts)
    for it in range(iterations):
        force[:] = 0.0
        for i in range(q):
            for j in range(i + 1, q):
                dx = pts[i, 0] - pts[j, 0]
                dy = pts[i, 1] - pts[j, 1]
                dz = pts[i, 2] - pts[j, 2]
                r2 = dx * dx + dy * dy + dz * dz
                w = r2 ** (-0.5 * (exponent + 2.0))
                force[i, 0] += w * dx
                force[i, 1] += w * dy
                force[i, 2] += w * dz
                force[j, 0] -= w * dx
                force[j, 1] -= w * dy
                force[j, 2] -= w * dz
        fmax = 0.0
        for i in range(q):
            radial = force[i, 0] * pts[i, 0] + force[i, 1] * pts[i, 1] + force[i, 2] * pts[i, 2]
            for d in range(3):
                force[i, d] -= radial * pts[i, d]
            f = math.sqrt(force[i, 0] ** 2 + force[i, 1] ** 2 + force[i, 2] ** 2)
            if f > fmax:
                fmax = f
        if fmax == 0.0:
            break
        h = step / (1.0 + 0.01 * it) / fmax
        for i in range(q):
            nrm = 0.0
            for d in range(3):
                pts[i, d] += h * force[i, d]
                nrm += pts[i, d] * pts[i, d]
            nrm = math.sqrt(nrm)
            for d in range(3):
                pts[i, d] /= nrm
    return pts


def _relax_np(points, exponent, iterations, step):
    pts = points.copy()
    for it in range(iterations):
        diff = pts[:, None, :] - pts[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        np.fill_diagonal(r2, np.inf)
        w = r2 ** (-0.5 * (exponent + 2.0))
        force = np.einsum("ij,ijk->ik", w, diff)
        force -= np.sum(force * pts, axis=1, keepdims=True) * pts
        fmax = np.sqrt(np.max(np.sum(force * force, axis=1)))
        if fmax == 0.0:
            break
        pts = pts + (step / (1.0 + 0.01 * it) / fmax) * force
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return pts


# ---------------------------------------------------------------------------
# Dispatchers
# ---------------------------------------------------------------------------

def sh_matrix(order, xyz):
    """Real N3D SH values at unit vectors ``xyz`` (n, 3); ACN columns."""
    xyz = np.ascontiguousarray(xyz, dtype=np.float64).reshape(-1, 3)
    if jit_enabled():
        return _sh_matrix_jit(int(order), xyz)
    return _sh_matrix_np(int(order), xyz)


def jacobi_eigh(a, rel_tol=1e-12, max_sweeps=100):
    """Eigenvalues and eigenvectors of a symmetric matrix by cyclic Jacobi.

    Returns ``(values, vectors, sweeps)`` in the solver's native order.
    Raises :class:`JacobiError` if the off-diagonal norm has not dropped
    below ``rel_tol`` times its initial value after ``max_sweeps`` sweeps.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    if jit_enabled():
        w, v, sweeps = _jacobi_jit(a, float(rel_tol), int(max_sweeps))
    else:
        w, v, sweeps = _jacobi_np(a, float(rel_tol), int(max_sweeps))
    if sweeps < 0:
        raise JacobiError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    return w, v, int(sweeps)


def relax_points(points, exponent, iterations, step):
    """Move unit vectors downhill on the Riesz ``exponent``-energy."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    if jit_enabled():
        return _relax_jit(points, float(exponent), int(iterations), float(step))
    return _relax_np(points, float(exponent), int(iterations), float(step))
