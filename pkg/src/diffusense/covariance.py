"""SH signal covariance: estimation, eigenvalues, truncation, mismatch.

Covariance matrices are plain symmetric ``(L+1)**2`` square numpy arrays
with rows/columns in ACN order, so truncating to order ``l`` is the leading
``(l+1)**2`` principal submatrix.
"""
import csv
import io

import numpy as np

from . import kernels
from .field_sim import SHSignalBlock
from .sh_math import acn_to_lm, order_from_channels

__all__ = [
    "estimate_covariance",
    "check_symmetric",
    "covariance_order",
    "eigenvalues",
    "eigh",
    "clamp_spectrum",
    "truncate",
    "mismatch_xi",
    "acn_labels",
    "covariance_to_csv",
    "covariance_from_csv",
]

SYMMETRY_RTOL = 1e-12
CLAMP_RTOL = 1e-12


def estimate_covariance(block):
    """Time-average covariance ``B @ B.T / T`` (zero-mean model, no centring)."""
    data = block.data if isinstance(block, SHSignalBlock) else np.asarray(block, dtype=float)
    t = data.shape[1]
    if t < 1:
        raise ValueError("covariance estimation needs at least one sample")
    c = data @ data.T / t
    return 0.5 * (c + c.T)


def covariance_order(c):
    c = np.asarray(c)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"covariance must be square, got shape {c.shape}")
    return order_from_channels(c.shape[0])


def check_symmetric(c):
    """Return ``c`` symmetrised, or raise if it is asymmetric beyond rounding."""
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"matrix must be square, got shape {c.shape}")
    scale = np.max(np.abs(c)) if c.size else 0.0
    if np.max(np.abs(c - c.T), initial=0.0) > SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (c + c.T)


def eigh(c, rel_tol=1e-12, max_sweeps=100):
    """Eigenpairs of a symmetric matrix, eigenvalues sorted decreasing."""
    a = check_symmetric(c)
    w, v, _ = kernels.jacobi_eigh(a, rel_tol=rel_tol, max_sweeps=max_sweeps)
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def eigenvalues(c):
    """All eigenvalues of symmetric ``c``, in decreasing order."""
    return eigh(c)[0]


def clamp_spectrum(values):
    """Zero roundoff-level negative eigenvalues; reject genuinely negative ones."""
    v = np.asarray(values, dtype=float).copy()
    tr = float(np.sum(np.abs(v)))
    neg = v < 0.0
    if np.any(v[neg] < -CLAMP_RTOL * tr):
        raise ValueError(f"spectrum is not positive semidefinite (min eigenvalue {v.min():.3e})")
    v[neg] = 0.0
    return v


def truncate(c, order):
    """Covariance of the order-``order`` SH signals (leading principal block)."""
    full = covariance_order(c)
    if order < 0 or order > full:
        raise ValueError(f"cannot truncate an order-{full} covariance to order {order}")
    n = (order + 1) ** 2
    return np.array(np.asarray(c)[:n, :n])


def mismatch_xi(c):
    """Normalised squared Frobenius distance between ``c`` and a diffuse pattern.

    ``xi = ||c / lambda_max - I||_F**2 / (L+1)**2``; 0 for a perfectly
    diffuse covariance, ``1 - 1/(L+1)**2`` for a single plane wave.
    """
    c = check_symmetric(c)
    n = c.shape[0]
    covariance_order(c)
    if not np.any(c):
        raise ValueError("mismatch is undefined for the zero matrix")
    top = eigenvalues(c)[0]
    if top <= 0.0:
        raise ValueError("mismatch needs a positive largest eigenvalue")
    diff = c / top - np.eye(n)
    return float(np.sum(diff * diff) / n)


def acn_labels(n):
    labels = []
    for i in range(n):
        l, m = acn_to_lm(i)
        labels.append(f"Y{l}_{m}")
    return labels


def covariance_to_csv(c, path=None):
    """Row-major CSV with a header row of ACN labels. Returns the text."""
    c = np.asarray(c, dtype=float)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(acn_labels(c.shape[0]))
    for row in c:
        w.writerow([repr(float(x)) for x in row])
    text = buf.getvalue()
    if path is not None:
        from .io import atomic_write_text

        atomic_write_text(path, text)
    return text


def covariance_from_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    c = np.array([[float(x) for x in row] for row in body])
    if c.shape != (len(header), len(header)):
        raise ValueError("CSV covariance is not square")
    return c
