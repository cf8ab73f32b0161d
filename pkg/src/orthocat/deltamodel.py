"""Finite-interval spectra for the free and delta-perturbed half-line operators.

The unperturbed operator is -d^2/dx^2 on (0, L) with Dirichlet ends; the
perturbed one replaces the condition at 0 by -4*pi*alpha f(0+) + f'(0+) = 0,
the s-wave form of a Dirac-delta point interaction of strength alpha.
Everything this module computes is s-wave (the higher angular-momentum
channels of the 3-d problem coincide for both operators and drop out of
overlap determinants).

Natural units throughout: lengths in units of the box, energies in inverse
length squared.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ._linalg import log_sinh
from .errors import NumericalError, RegimeError

# margin of the attractive bound-state regime 4*pi*|alpha|*L > 1
_REGIME_MARGIN = 1e-6

_BISECT_STEPS = 12     # bracket reduction to ~2^-12 of the initial width
_NEWTON_STEPS = 60
_RESIDUAL_TOL = 1e-13  # on |k L + delta(k) - n pi| relative to n pi


@dataclass(frozen=True)
class DeltaModel:
    """Coupling alpha, box length and Fermi energy of one configuration."""

    alpha: float
    length: float
    energy: float = 1.0

    def __post_init__(self):
        if not (self.length > 0.0):
            raise ValueError(f"box length must be positive, got {self.length}")
        if not (self.energy > 0.0):
            raise ValueError(f"Fermi energy must be positive, got {self.energy}")
        if self.alpha < 0.0:
            strength = 4.0 * np.pi * abs(self.alpha) * self.length
            if not strength > 1.0 + _REGIME_MARGIN:
                raise RegimeError(
                    "attractive coupling too weak for a box bound state: "
                    f"4*pi*|alpha|*L = {strength:.6g} <= 1 (alpha={self.alpha}, "
                    f"L={self.length})"
                )

    @property
    def has_bound_state(self):
        return self.alpha < 0.0


def phase_shift(k, alpha):
    """Scattering phase shift delta_alpha(k) for k > 0.

    arctan(k/(4 pi alpha)) on the repulsive branch, pi minus the analogous
    arctan on the attractive branch, and identically pi/2 at alpha = 0.
    """
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr <= 0.0):
        raise ValueError("phase shift is defined for k > 0 only")
    out = _phase(k_arr, alpha)
    return float(out) if out.ndim == 0 else out


def _phase(k, alpha):
    """Branch-resolved phase, tolerant of k = 0 endpoints (solver internal)."""
    k = np.asarray(k, dtype=float)
    if alpha == 0.0:
        return np.full_like(k, 0.5 * np.pi)
    core = np.arctan(k / (4.0 * np.pi * abs(alpha)))
    return core if alpha > 0.0 else np.pi - core


def phase_shift_derivative(k, alpha):
    """d/dk of the phase shift; one formula covers both branches."""
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr <= 0.0):
        raise ValueError("phase shift is defined for k > 0 only")
    c = 4.0 * np.pi * alpha
    out = np.where(c == 0.0, 0.0, c / (c * c + k_arr * k_arr))
    return float(out) if out.ndim == 0 else out


def phase_shift_sup(alpha):
    """sup_k |delta_alpha(k)|: pi/2 on the repulsive branch, pi otherwise."""
    return 0.5 * np.pi if alpha > 0.0 else np.pi if alpha < 0.0 else 0.5 * np.pi


def phase_shift_derivative_sup(alpha):
    """sup_k |delta_alpha'(k)| = 1/(4 pi |alpha|) (0 at alpha = 0)."""
    return 0.0 if alpha == 0.0 else 1.0 / (4.0 * np.pi * abs(alpha))


def lambda_n(n, length):
    """Dirichlet eigenvalues (n pi / L)^2, n = 1, 2, ..."""
    n_arr = np.asarray(n)
    if np.any(n_arr < 1):
        raise ValueError("mode index must be >= 1")
    if not length > 0.0:
        raise ValueError("box length must be positive")
    out = (n_arr * np.pi / length) ** 2
    return float(out) if out.ndim == 0 else out


def solve_mu(n, model):
    """Non-negative perturbed eigenvalue mu_n from the quantization condition
    k L + delta_alpha(k) = n pi, solved by bracketed bisection plus Newton.

    For attractive coupling n = 1 is the bound state and is not covered here
    (use solve_bound_state); require n >= 2 in that case.
    """
    n_arr = np.atleast_1d(np.asarray(n, dtype=int))
    if np.any(n_arr < 1):
        raise ValueError("mode index must be >= 1")
    if model.alpha < 0.0 and np.any(n_arr < 2):
        raise ValueError("n = 1 is the bound state for alpha < 0; need n >= 2")
    k = _solve_wavenumbers(n_arr, model)
    out = k * k
    return float(out[0]) if np.isscalar(n) or np.ndim(n) == 0 else out


def _solve_wavenumbers(n_arr, model):
    """Vectorised root solve of f(k) = k L + delta(k) - n pi on the n-th
    bracket ((n-1) pi / L, n pi / L).  f is strictly increasing there and
    changes sign across the bracket, so bisection is safe; Newton finishes.
    """
    alpha, length = model.alpha, model.length
    target = n_arr * np.pi

    def f(k):
        return k * length + _phase(k, alpha) - target

    def fprime(k):
        c = 4.0 * np.pi * alpha
        if c == 0.0:
            return np.full_like(k, length)
        return length + c / (c * c + k * k)

    lo = (n_arr - 1) * np.pi / length
    hi = n_arr * np.pi / length
    # f(lo) < 0 < f(hi) analytically (0 < delta < pi); never evaluate at lo
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        neg = f(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    k = 0.5 * (lo + hi)
    fk = f(k)
    for _ in range(_NEWTON_STEPS):
        if np.all(np.abs(fk) <= 1e-15 * target):
            break
        step = fk / fprime(k)
        cand = k - step
        # keep iterates inside the live bracket; bisect where Newton escapes
        bad = (cand <= lo) | (cand >= hi)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        fc = f(cand)
        neg = fc < 0.0
        lo = np.where(neg, cand, lo)
        hi = np.where(neg, hi, cand)
        k, fk = cand, fc
    if np.any(np.abs(fk) > _RESIDUAL_TOL * target):
        worst = int(n_arr[np.argmax(np.abs(fk) / target)])
        raise NumericalError(f"eigenvalue equation did not converge at n={worst}")
    return k


def solve_bound_state(model):
    """Decay rate kappa > 0 of the single negative eigenvalue mu_1 = -kappa^2
    for attractive coupling, from kappa*coth(kappa L) = 4 pi |alpha|."""
    if model.alpha >= 0.0:
        raise RegimeError("bound state exists only for alpha < 0")
    strength = 4.0 * np.pi * abs(model.alpha)
    length = model.length
    if not strength * length > 1.0:
        raise RegimeError(
            f"no finite-box bound state: 4*pi*|alpha|*L = {strength * length:.6g} <= 1"
        )

    def f(kappa):
        return kappa / np.tanh(kappa * length) - strength

    lo = 1e-12 / length  # f(lo) ~ 1/L - 4 pi |alpha| < 0 in regime
    kappa = brentq(f, lo, strength, xtol=1e-300, rtol=1e-15, maxiter=200)
    for _ in range(3):  # Newton polish to drive the residual to rounding
        t = np.tanh(kappa * length)
        deriv = 1.0 / t - kappa * length * (1.0 - t * t) / (t * t)
        step = f(kappa) / deriv
        if kappa - step <= 0.0:
            break
        kappa -= step
    if abs(f(kappa)) > 1e-12:
        raise NumericalError("bound-state equation did not converge")
    return float(kappa)


@dataclass(frozen=True)
class ModeSpectrum:
    """Solved spectrum of the perturbed/unperturbed pair to depth n_max.

    Arrays are indexed by mode number minus one.  For attractive coupling
    slot 0 holds the bound state: mus[0] = -kappa^2, thetas[0] = nan and
    norms[0] may overflow to inf (use bound_log_norm for stable work).
    `residuals` records the defect of the defining equation per mode.
    """

    model: DeltaModel
    lambdas: np.ndarray
    mus: np.ndarray
    thetas: np.ndarray
    norms: np.ndarray
    residuals: np.ndarray
    n_max: int
    kappa: float | None = None
    bound_log_norm: float | None = None

    @property
    def has_bound_state(self):
        return self.kappa is not None

    def deltas(self):
        """Phase shift evaluated on sqrt(mu_n) for the positive modes
        (nan in the bound-state slot)."""
        offset = np.pi if self.model.alpha < 0.0 else 0.0
        out = self.thetas + offset
        return out

    def validate(self):
        """Assert interlacing, eigenvalue-equation residuals and the
        attractive-case lower bound; used by tests and the verify report."""
        lam, mu = self.lambdas, self.mus
        if not (np.all(mu < lam) and np.all(lam[:-1] < mu[1:])):
            raise NumericalError("interlacing mu_n < lambda_n < mu_{n+1} violated")
        scale = np.arange(1, self.n_max + 1) * np.pi
        if np.any(self.residuals[~np.isnan(self.residuals)] >
                  _RESIDUAL_TOL * scale[~np.isnan(self.residuals)]):
            raise NumericalError("eigenvalue-equation residual out of tolerance")
        if self.has_bound_state:
            if not mu[0] >= -((4.0 * np.pi * self.model.alpha) ** 2):
                raise NumericalError("bound state below the uniform lower bound")


def solve_spectrum(model, n_max):
    """Solve the first n_max modes of both operators for this model."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    length, alpha = model.length, model.alpha
    ns = np.arange(1, n_max + 1)
    lambdas = (ns * np.pi / length) ** 2

    mus = np.empty(n_max)
    thetas = np.empty(n_max)
    norms = np.empty(n_max)
    residuals = np.empty(n_max)
    kappa = None
    bound_log_norm = None

    if alpha < 0.0:
        kappa = solve_bound_state(model)
        mus[0] = -kappa * kappa
        thetas[0] = np.nan
        strength = 4.0 * np.pi * abs(alpha)
        residuals[0] = abs(kappa / np.tanh(kappa * length) - strength)
        bound_log_norm = _bound_log_norm(kappa, length)
        norms[0] = np.exp(min(bound_log_norm, 709.0)) if bound_log_norm < 709.0 \
            else np.inf
        first = 1
    else:
        first = 0

    if n_max > first:
        n_pos = ns[first:]
        k = _solve_wavenumbers(n_pos, model)
        mus[first:] = k * k
        thetas[first:] = _theta_from_k(k, alpha)
        norms[first:] = np.sqrt(
            0.5 * length + np.sin(2.0 * thetas[first:]) / (4.0 * k)
        )
        residuals[first:] = np.abs(k * length + _phase(k, alpha) - n_pos * np.pi)

    return ModeSpectrum(
        model=model, lambdas=lambdas, mus=mus, thetas=thetas, norms=norms,
        residuals=residuals, n_max=n_max, kappa=kappa,
        bound_log_norm=bound_log_norm,
    )


def _theta_from_k(k, alpha):
    """Amplitude-phase angle of sin(k x + theta): arctan(k/(4 pi alpha)),
    with the alpha = 0 convention theta = pi/2."""
    if alpha == 0.0:
        return np.full_like(k, 0.5 * np.pi)
    return np.arctan(k / (4.0 * np.pi * alpha))


def _bound_log_norm(kappa, length):
    """log L2-norm of sinh(kappa(L-x)) on (0, L), overflow-safe."""
    y = 2.0 * kappa * length
    ls = log_sinh(y)  # ln sinh(2 kappa L)
    # ||.||^2 = (sinh(2 kappa L)/(2 kappa) - L)/2
    inner = ls - np.log(2.0 * kappa) + np.log1p(-2.0 * kappa * length * np.exp(-ls))
    return 0.5 * (inner - np.log(2.0))


def eigenfunctions(spectrum, n, x):
    """Values (phi_n(x), psi_n(x)) of the normalised eigenfunctions.

    phi_n is the free Dirichlet sine; psi_n the perturbed mode, which is
    the shifted sine for positive modes and the decaying sinh profile for
    the attractive bound state (evaluated through logs, so deep bound
    states do not overflow).
    """
    model = spectrum.model
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0.0) or np.any(x_arr > model.length):
        raise ValueError("position outside [0, L]")
    if not 1 <= n <= spectrum.n_max:
        raise ValueError("mode index outside the solved range")
    length = model.length
    phi = np.sqrt(2.0 / length) * np.sin(n * np.pi * x_arr / length)
    if spectrum.has_bound_state and n == 1:
        kappa = spectrum.kappa
        arg = kappa * (length - x_arr)
        with np.errstate(divide="ignore"):
            logs = np.where(arg > 0.0, log_sinh(np.maximum(arg, 1e-300)), -np.inf)
        psi = np.exp(logs - spectrum.bound_log_norm)
        psi = np.where(arg > 0.0, psi, 0.0)
    else:
        q = np.sqrt(spectrum.mus[n - 1])
        psi = np.sin(q * x_arr + spectrum.thetas[n - 1]) / spectrum.norms[n - 1]
    if np.ndim(x) == 0:
        return float(phi), float(psi)
    return phi, psi


def overlap_entry(spectrum, j, k):
    """Closed-form inner product <phi_j, psi_k> of the two eigenbases.

    For positive modes, with p = j pi/L and q = sqrt(mu_k),

        <phi_j, psi_k> = sqrt(2/L) sin(theta_k) p / (p^2 - q^2) / ||psi_k||,

    the boundary sine terms vanishing exactly because pL and qL + theta_k
    are multiples of pi.  The difference p^2 - q^2 is expanded through the
    quantization condition, which avoids cancellation when mu_k ~ lambda_j.
    The attractive bound-state column uses the sinh profile's closed form.
    """
    if not (1 <= j and 1 <= k <= spectrum.n_max):
        raise ValueError("indices out of solved range")
    return float(overlap_matrix(spectrum, rows=np.array([j]), cols=np.array([k]))[0, 0])


def overlap_matrix(spectrum, rows, cols):
    """Matrix of <phi_j, psi_k> for j in rows, k in cols (1-based indices).

    rows/cols may be integers (meaning 1..n) or explicit index arrays.
    """
    model = spectrum.model
    length, alpha = model.length, model.alpha
    rows = np.arange(1, rows + 1) if np.isscalar(rows) else np.asarray(rows)
    cols = np.arange(1, cols + 1) if np.isscalar(cols) else np.asarray(cols)
    if cols.max(initial=0) > spectrum.n_max:
        raise ValueError("column index beyond solved spectrum depth")

    p = rows * np.pi / length
    out = np.empty((rows.size, cols.size))

    bound_mask = spectrum.has_bound_state & (cols == 1)
    pos = ~bound_mask
    if np.any(pos):
        kcols = cols[pos]
        q = np.sqrt(spectrum.mus[kcols - 1])
        theta = spectrum.thetas[kcols - 1]
        delta = theta + (np.pi if alpha < 0.0 else 0.0)
        # lambda_j - mu_k = ((j-k)pi + delta_k)((j+k)pi - delta_k)/L^2, exact
        # through the quantization condition, hence cancellation-free
        dif = ((rows[:, None] - kcols[None, :]) * np.pi + delta[None, :])
        tot = ((rows[:, None] + kcols[None, :]) * np.pi - delta[None, :])
        if np.any(dif == 0.0):
            raise NumericalError("degenerate pair lambda_j = mu_k; interlacing broken")
        denom = dif * tot / (length * length)
        out[:, pos] = (np.sqrt(2.0 / length) * np.sin(theta)[None, :]
                       * p[:, None] / denom / spectrum.norms[kcols - 1][None, :])
    if np.any(bound_mask):
        kappa = spectrum.kappa
        amp = np.exp(log_sinh(kappa * length) - spectrum.bound_log_norm)
        col = np.sqrt(2.0 / length) * p * amp / (p * p + kappa * kappa)
        out[:, bound_mask] = col[:, None]
    return out


def particle_number_l0(energy, length):
    """Default thermodynamic schedule: N = floor(sqrt(E) L / pi) s-wave
    levels below the Fermi energy."""
    if energy <= 0.0 or length <= 0.0:
        raise ValueError("energy and length must be positive")
    n = int(np.floor(np.sqrt(energy) * length / np.pi + 1e-9))
    if n == 0:
        raise RegimeError(
            f"box too small: no s-wave level below E={energy} at L={length}"
        )
    return n


def phase_expansion_check(spectrum, n):
    """Defect, premultiplied by L, of the first-order phase expansion

        delta(sqrt(mu_n)) ~ delta(sqrt(lambda_n))
                            - delta'(sqrt(lambda_n)) delta(sqrt(lambda_n)) / L.

    The returned quantity must tend to 0 as L grows at fixed n/L.
    """
    model = spectrum.model
    if spectrum.has_bound_state and n == 1:
        raise ValueError("expansion applies to non-negative modes only")
    if not 1 <= n <= spectrum.n_max:
        raise ValueError("mode index outside the solved range")
    length, alpha = model.length, model.alpha
    root_mu = np.sqrt(spectrum.mus[n - 1])
    root_lam = np.sqrt(spectrum.lambdas[n - 1])
    d_mu = phase_shift(root_mu, alpha)
    d_lam = phase_shift(root_lam, alpha)
    dp_lam = phase_shift_derivative(root_lam, alpha)
    defect = abs(d_mu - d_lam + dp_lam * d_lam / length)
    return float(defect * length)
