"""Small dense linear-algebra helpers used by several modules."""

import numpy as np
import scipy.linalg

from .errors import NumericalError

# Pivot-growth threshold above which partial pivoting is not trusted.
GROWTH_LIMIT = 1e8


def log_abs_det(matrix):
    """Log-magnitude and sign of det(matrix) via LU with partial pivoting.

    Returns (log|det|, sign).  If the pivot growth factor exceeds
    GROWTH_LIMIT the magnitude is recomputed from a rank-revealing
    column-pivoted QR factorisation.  Raises NumericalError for a matrix
    that is singular to working precision.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("log_abs_det expects a square matrix")
    if a.shape[0] == 0:
        return 0.0, 1.0

    lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    diag = np.diag(lu)
    amax = np.abs(a).max()
    if amax == 0.0 or np.any(diag == 0.0):
        raise NumericalError("matrix is singular to working precision")

    # permutation parity from the LAPACK pivot vector
    sign = 1.0
    for i, p in enumerate(piv):
        if p != i:
            sign = -sign
    sign *= np.prod(np.sign(diag))
    logabs = float(np.log(np.abs(diag)).sum())

    growth = np.abs(np.triu(lu)).max() / amax
    if growth > GROWTH_LIMIT:
        # partial pivoting blew up; fall back to column-pivoted QR for the
        # magnitude (sign from LU is kept, it only feeds |det|^2 anyway)
        r = scipy.linalg.qr(a, mode="r", pivoting=True)[0]
        rdiag = np.abs(np.diag(r))
        if np.any(rdiag == 0.0):
            raise NumericalError("matrix is singular to working precision")
        logabs = float(np.log(rdiag).sum())

    if not np.isfinite(logabs):
        raise NumericalError("log-determinant overflowed")
    return logabs, float(sign)


def log_sinh(y):
    """ln(sinh(y)) for y >= 0, stable for arguments far beyond overflow."""
    y = np.asarray(y, dtype=float)
    small = y < 20.0
    with np.errstate(divide="ignore"):
        direct = np.where(small, np.log(np.sinh(np.where(small, y, 1.0))), 0.0)
    large = y - np.log(2.0) + np.log1p(-np.exp(-2.0 * np.maximum(y, 20.0)))
    out = np.where(small, direct, large)
    if out.ndim == 0:
        return float(out)
    return out
