"""Finite-dimensional laboratory for rank-one perturbation identities.

Everything here lives in R^d with a dense symmetric positive-definite
matrix A and its rank-one update B = A + phi phi^T.  Eigenvalues are kept
in *decreasing* order, so strict interlacing reads

    beta_1 > alpha_1 > beta_2 > alpha_2 > ...

The module provides two independent routes to the overlap determinant
|det(<phi_j, psi_k>)_{j,k<=N}|^2 (a Gram determinant of eigenvectors and
an eigenvalue-only double product), the Cauchy-determinant closed form,
resolvent product identities, residue weights and the projection trace
series.  All determinants and products are accumulated in log space.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._linalg import log_abs_det
from .errors import NumericalError, SeriesDivergenceError

MIN_DIMENSION = 2
MAX_DIMENSION = 64

# generation thresholds
_GAP_FLOOR = 1e-6        # min eigenvalue gap, relative to spectral radius
_CYCLICITY_FLOOR = 1e-6  # min |<v_i, phi>| / ||phi||
_MAX_RETRIES = 64


@dataclass(frozen=True)
class PerturbedPair:
    """A positive-definite matrix and the vector defining its rank-one update."""

    dimension: int
    base_matrix: np.ndarray
    perturbation: np.ndarray
    seed: int

    @property
    def updated_matrix(self):
        return self.base_matrix + np.outer(self.perturbation, self.perturbation)


@dataclass(frozen=True)
class SpectrumPair:
    """Two strictly interlacing eigenvalue sequences.

    `orientation` is 'decreasing' (matrix case, upper[0] > lower[0] > ...)
    or 'increasing' (delta case, lower[0] < upper[0] < ...).  In both
    conventions the sequences alternate strictly, starting with `upper`
    for 'decreasing' and with `lower` for 'increasing'.
    """

    lower: np.ndarray
    upper: np.ndarray
    orientation: str = "decreasing"

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if self.orientation not in ("decreasing", "increasing"):
            raise ValueError("orientation must be 'decreasing' or 'increasing'")
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower/upper must be 1-d sequences of equal length")
        merged = np.empty(2 * lower.size)
        if self.orientation == "decreasing":
            merged[0::2], merged[1::2] = upper, lower
            if not np.all(np.diff(merged) < 0):
                raise ValueError("sequences do not interlace strictly")
        else:
            merged[0::2], merged[1::2] = lower, upper
            if not np.all(np.diff(merged) > 0):
                raise ValueError("sequences do not interlace strictly")

    def __len__(self):
        return self.lower.size


@dataclass
class ResolventProductFit:
    """Constants a, b fitted from the resolvent product representation,
    with per-point residuals of the four identities they must satisfy."""

    a: float
    b: float
    sample_points: np.ndarray
    residuals: dict = field(default_factory=dict)


def generate_pair(dimension, seed):
    """Draw a reproducible PerturbedPair with well-separated spectrum.

    A = Q D Q^T with Q from the QR of a seeded Gaussian matrix and D
    log-uniform in [0.1, 10]; phi a Gaussian vector rejected until it has
    a component of at least 1e-6*||phi|| on every eigenvector of A.
    """
    if not MIN_DIMENSION <= dimension <= MAX_DIMENSION:
        raise ValueError(
            f"dimension must be in [{MIN_DIMENSION}, {MAX_DIMENSION}], got {dimension}"
        )
    rng = np.random.default_rng(seed)
    for _ in range(_MAX_RETRIES):
        gauss = rng.standard_normal((dimension, dimension))
        q, r = np.linalg.qr(gauss)
        q = q * np.sign(np.diag(r))  # deterministic sign convention
        evals = np.exp(rng.uniform(np.log(0.1), np.log(10.0), dimension))
        evals[::-1].sort()  # decreasing
        if np.min(-np.diff(evals)) <= _GAP_FLOOR * evals[0]:
            continue
        a = (q * evals) @ q.T
        a = 0.5 * (a + a.T)
        phi = rng.standard_normal(dimension)
        components = q.T @ phi
        if np.min(np.abs(components)) < _CYCLICITY_FLOOR * np.linalg.norm(phi):
            continue
        return PerturbedPair(dimension, a, phi, seed)
    raise NumericalError(
        f"could not generate a non-degenerate pair for dimension={dimension}, seed={seed}"
    )


def eigensystems(pair):
    """Eigenvalues (decreasing) and eigenvectors of A and B = A + phi phi^T."""
    a_vals, a_vecs = np.linalg.eigh(pair.base_matrix)
    b_vals, b_vecs = np.linalg.eigh(pair.updated_matrix)
    return a_vals[::-1], a_vecs[:, ::-1], b_vals[::-1], b_vecs[:, ::-1]


def spectrum_pair(pair):
    """The interlacing (alpha_k, beta_k) sequences of a PerturbedPair."""
    alphas, _, betas, _ = eigensystems(pair)
    return SpectrumPair(lower=alphas, upper=betas, orientation="decreasing")


def log_gram_overlap(pair, n_occupied):
    """ln |det(<phi_j, psi_k>)_{j,k<=N}|^2 by dense eigendecomposition."""
    _check_occupation(pair.dimension, n_occupied)
    if n_occupied == 0:
        return 0.0
    _, a_vecs, _, b_vecs = eigensystems(pair)
    gram = a_vecs[:, :n_occupied].T @ b_vecs[:, :n_occupied]
    logabs, _ = log_abs_det(gram)
    return 2.0 * logabs


def gram_overlap(pair, n_occupied):
    """|det(<phi_j, psi_k>)_{j,k<=N}|^2 via the Gram-matrix determinant."""
    return float(np.exp(log_gram_overlap(pair, n_occupied)))


def log_product_overlap(spectra, n_occupied):
    """ln of the eigenvalue-only double product for the squared overlap.

    The outer index runs over the first N levels, the inner over the
    remaining ones; in finite dimension the product is exact.  Factors are
    accumulated as log1p(factor - 1).
    """
    _check_occupation(len(spectra), n_occupied)
    n = n_occupied
    alphas, betas = spectra.lower, spectra.upper
    if spectra.orientation == "increasing":
        # same formula, symmetric under swapping the roles of the sequences
        alphas, betas = betas, alphas
    if np.isin(betas, alphas).any():
        raise ValueError("sequences share a value; interlacing is violated")
    if n == 0 or n == len(spectra):
        return 0.0
    a_occ, b_occ = alphas[:n], betas[:n]
    a_rest, b_rest = alphas[n:], betas[n:]
    # factor - 1 = (alpha_k - beta_k)(beta_j - alpha_j)
    #             / ((alpha_k - alpha_j)(beta_k - beta_j))
    num = np.outer(b_occ - a_occ, a_rest - b_rest)
    den = (a_rest[None, :] - a_occ[:, None]) * (b_rest[None, :] - b_occ[:, None])
    x = num / den
    if np.any(x <= -1.0):
        raise NumericalError("product factor is not positive; spectra inconsistent")
    return float(np.log1p(x).sum())


def product_overlap(spectra, n_occupied):
    """Squared overlap from eigenvalues only (Gram-free route)."""
    return float(np.exp(log_product_overlap(spectra, n_occupied)))


def cauchy_determinant(alphas, betas, n):
    """|det(1/(beta_k - alpha_j))_{j,k<=N}|^2 via the closed product form."""
    alphas = np.asarray(alphas, dtype=float)[:n]
    betas = np.asarray(betas, dtype=float)[:n]
    if alphas.size != n or betas.size != n:
        raise ValueError(f"need at least {n} values in each sequence")
    if (np.unique(alphas).size != n or np.unique(betas).size != n
            or np.isin(betas, alphas).any()):
        raise ValueError("nodes must be pairwise distinct across both sequences")
    if n == 0:
        return 1.0
    cross = np.log(np.abs(betas[None, :] - alphas[:, None])).sum()
    iu = np.triu_indices(n, k=1)
    same_b = np.log(np.abs(betas[None, :] - betas[:, None])[iu]).sum()
    same_a = np.log(np.abs(alphas[None, :] - alphas[:, None])[iu]).sum()
    return float(np.exp(2.0 * (same_b + same_a) - 2.0 * cross))


def default_sample_points():
    """20 points log-spaced in [-100, -0.5], all below a PD spectrum."""
    return -np.logspace(np.log10(0.5), np.log10(100.0), 20)[::-1]


def resolvent_product_fit(pair, sample_z=None):
    """Fit the constants of the resolvent product representation.

    At each z below both spectra this evaluates
        lhs_a(z) = <phi, (A-z)^-1 phi> + 1,   G(z) = prod (beta_k-z)/(alpha_k-z),
        lhs_b(z) = <phi, (B-z)^-1 phi> - 1,   F(z) = prod (alpha_k-z)/(beta_k-z),
    recovers a and b as medians of the per-point ratios lhs/product, and
    records residuals of a-fit, b-fit, F*G = 1 and lhs_b*lhs_a = -1.
    """
    z = default_sample_points() if sample_z is None else np.asarray(sample_z, float)
    alphas, a_vecs, betas, b_vecs = eigensystems(pair)
    bottom = min(alphas[-1], betas[-1])
    if np.any(z >= bottom):
        raise ValueError("sample points must lie strictly below both spectra")
    wa = (a_vecs.T @ pair.perturbation) ** 2
    wb = (b_vecs.T @ pair.perturbation) ** 2
    lhs_a = (wa[None, :] / (alphas[None, :] - z[:, None])).sum(axis=1) + 1.0
    lhs_b = (wb[None, :] / (betas[None, :] - z[:, None])).sum(axis=1) - 1.0
    g = np.prod((betas[None, :] - z[:, None]) / (alphas[None, :] - z[:, None]), axis=1)
    f = np.prod((alphas[None, :] - z[:, None]) / (betas[None, :] - z[:, None]), axis=1)
    a = float(np.median(lhs_a / g))
    b = float(np.median(lhs_b / f))
    residuals = {
        "a_fit": lhs_a / g - a,
        "b_fit": lhs_b / f - b,
        "fg": f * g - 1.0,
        "reciprocity": lhs_b * lhs_a + 1.0,
    }
    return ResolventProductFit(a=a, b=b, sample_points=z, residuals=residuals)


def residue_weights(pair, j, k):
    """Both sides of the residue-weight identity for indices j, k (1-based).

    Returns (lhs, rhs) where lhs = |<phi_j, phi>|^2 |<psi_k, phi>|^2 from
    the eigenvectors and rhs is the eigenvalue-product expression.
    """
    if not (1 <= j <= pair.dimension and 1 <= k <= pair.dimension):
        raise ValueError("indices out of range")
    lhs_mat, rhs_mat = residue_weight_matrices(pair)
    return float(lhs_mat[j - 1, k - 1]), float(rhs_mat[j - 1, k - 1])


def residue_weight_matrices(pair):
    """Vectorised residue-weight identity: (lhs, rhs) for every (j, k)."""
    alphas, a_vecs, betas, b_vecs = eigensystems(pair)
    wa = (a_vecs.T @ pair.perturbation) ** 2
    wb = (b_vecs.T @ pair.perturbation) ** 2
    # row factor: |beta_j - alpha_j| * prod_{l!=j} |beta_l-alpha_j|/|alpha_l-alpha_j|
    #           = prod_l |beta_l - alpha_j| / prod_{l!=j} |alpha_l - alpha_j|
    diff_ba = np.abs(betas[:, None] - alphas[None, :])     # [l, j]
    diff_aa = np.abs(alphas[:, None] - alphas[None, :])
    np.fill_diagonal(diff_aa, 1.0)
    row = np.exp(np.log(diff_ba).sum(axis=0) - np.log(diff_aa).sum(axis=0))
    diff_ab = np.abs(alphas[:, None] - betas[None, :])     # [l, k]
    diff_bb = np.abs(betas[:, None] - betas[None, :])
    np.fill_diagonal(diff_bb, 1.0)
    col = np.exp(np.log(diff_ab).sum(axis=0) - np.log(diff_bb).sum(axis=0))
    return np.outer(wa, wb), np.outer(row, col)


def trace_series_log_overlap(pair, n_occupied, n_max):
    """ln of the squared overlap as a truncated projection trace series.

    Returns (value, tail_bound): value = -sum_{n<=n_max} tr{(P Qbar)^n}/n
    with P the projector onto the N top eigenvectors of A and Qbar onto
    the complementary eigenvectors of B; tail_bound is the geometric
    remainder bound driven by the largest singular value of the coupling
    block.  Raises SeriesDivergenceError if that singular value is >= 1.
    """
    _check_occupation(pair.dimension, n_occupied)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if n_occupied in (0, pair.dimension):
        return 0.0, 0.0
    _, a_vecs, _, b_vecs = eigensystems(pair)
    block = a_vecs[:, :n_occupied].T @ b_vecs[:, n_occupied:]
    s2 = scipy.linalg.svdvals(block) ** 2
    return _trace_series_from_squares(s2, n_max)


def _trace_series_from_squares(s2, n_max):
    """Shared evaluator: series and tail bound from squared singular values."""
    top = float(s2.max(initial=0.0))
    if top >= 1.0:
        raise SeriesDivergenceError(
            f"largest singular value {np.sqrt(top):.6g} >= 1; series diverges"
        )
    orders = np.arange(1, n_max + 1)
    powers = s2[:, None] ** orders[None, :]
    value = -float((powers / orders[None, :]).sum())
    tail = float((s2 ** (n_max + 1)).sum() / ((n_max + 1) * (1.0 - top)))
    return value, tail


def _check_occupation(dimension, n_occupied):
    if not 0 <= n_occupied <= dimension:
        raise ValueError(
            f"occupation N={n_occupied} outside [0, {dimension}]"
        )
