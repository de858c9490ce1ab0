"""Tweedie exponential dispersion models in reproductive form.

A Tweedie variable ``Tw_p(mu, sigma2)`` has mean ``mu`` and variance
``sigma2 * mu**p``.  Everything here is expressed through the cumulant
function ``kappa_p`` and the canonical link ``theta = g(mu)``.

Supported powers are ``p = 0`` (Normal), ``p = 1`` (over-dispersed Poisson),
``1 < p < 2`` (compound Poisson-Gamma) and ``p = 2`` (Gamma).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "TweedieParams",
    "TweedieFamily",
    "check_power",
    "kappa_p",
    "canonical_theta",
    "tweedie_log_mgf",
    "tweedie_log_mgf_grad",
    "tweedie_mgf",
    "tweedie_log_cf",
    "tweedie_cf",
    "mgf_abscissa",
    "tweedie_sample",
]


def check_power(p: float) -> float:
    """Validate a Tweedie power and return it as a float.

    Raises
    ------
    ValidationError
        If ``p`` is not in ``{0} U [1, 2]``.
    """
    p = float(p)
    if not np.isfinite(p) or not (p == 0.0 or 1.0 <= p <= 2.0):
        raise ValidationError(
            f"unsupported Tweedie power p={p}; expected 0 or a value in [1, 2]"
        )
    return p


@dataclass(frozen=True)
class TweedieParams:
    """Parameters of a reproductive Tweedie law.

    Parameters
    ----------
    p : float
        Variance power.
    mu : float
        Mean. Must be positive unless ``p == 0``.
    sigma2 : float
        Dispersion, positive.
    """

    p: float
    mu: float
    sigma2: float

    def __post_init__(self):
        object.__setattr__(self, "p", check_power(self.p))
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValidationError(f"sigma2 must be positive, got {self.sigma2}")
        if not np.isfinite(self.mu) or (self.p >= 1 and self.mu <= 0):
            raise ValidationError(f"mu must be positive for p={self.p}, got {self.mu}")

    @property
    def variance(self) -> float:
        return self.sigma2 * abs(self.mu) ** self.p if self.p else self.sigma2


def _alpha(p):
    return (p - 2.0) / (p - 1.0)


def kappa_p(theta, p):
    """Cumulant function of the Tweedie family.

    Parameters
    ----------
    theta : float or array_like
        Canonical parameter inside the natural domain for ``p``.
    p : float
        Variance power.

    Returns
    -------
    float or ndarray

    Examples
    --------
    >>> float(kappa_p(-1.0, 1.5))
    4.0
    """
    p = check_power(p)
    theta = np.asarray(theta, dtype=float)
    if p == 0.0:
        out = 0.5 * theta**2
    elif p == 1.0:
        out = np.exp(theta)
    elif p == 2.0:
        if np.any(theta >= 0):
            raise ValidationError("theta must be negative for p=2")
        out = -np.log(-theta)
    else:
        if np.any(theta > 0):
            raise ValidationError(f"theta must be non-positive for p={p}")
        a = _alpha(p)
        out = ((a - 1.0) / a) * (theta / (a - 1.0)) ** a
    return out[()] if out.ndim == 0 else out


def canonical_theta(mu, p):
    """Canonical parameter ``g(mu)``, the inverse of ``kappa_p'``."""
    p = check_power(p)
    mu = np.asarray(mu, dtype=float)
    if p == 0.0:
        out = mu.copy()
    elif p == 1.0:
        out = np.log(mu)
    else:
        out = mu ** (1.0 - p) / (1.0 - p)
    return out[()] if out.ndim == 0 else out


def mgf_abscissa(mu, sigma2, p):
    """Supremum of the arguments at which the MGF is finite."""
    p = check_power(p)
    mu = np.asarray(mu, dtype=float)
    if p <= 1.0:
        out = np.full_like(mu, np.inf)
    else:
        out = mu ** (1.0 - p) / ((p - 1.0) * sigma2)
    return out[()] if out.ndim == 0 else out


def tweedie_log_mgf(tau, mu, sigma2, p):
    """Vectorised log-MGF without domain checks.

    Arguments broadcast against each other.  Values of ``tau`` beyond the
    convergence abscissa give ``nan`` or ``inf``.  Complex inputs are passed
    through unchanged, which allows complex-step differentiation.
    """
    tau = np.asarray(tau)
    if tau.dtype.kind not in "fc":
        tau = tau.astype(float)
    if p == 0.0:
        return mu * tau + 0.5 * sigma2 * tau**2
    if p == 1.0:
        return mu * np.expm1(sigma2 * tau) / sigma2
    if p == 2.0:
        with np.errstate(invalid="ignore", divide="ignore"):
            return -np.log1p(-tau * mu * sigma2) / sigma2
    # kappa(theta + d) - kappa(theta) = kappa(theta) * ((1 + d/theta)**alpha - 1)
    a = _alpha(p)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.log1p(tau * sigma2 * (1.0 - p) * mu ** (p - 1.0))
        return mu ** (2.0 - p) / ((2.0 - p) * sigma2) * np.expm1(a * z)


def tweedie_log_mgf_grad(tau, mu, sigma2, p):
    """Log-MGF and its partial derivatives.

    Returns
    -------
    value, d_mu, d_sigma2, d_tau : ndarray
    """
    tau = np.asarray(tau, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        if p == 0.0:
            v = mu * tau + 0.5 * sigma2 * tau**2
            return v, tau + 0 * mu, 0.5 * tau**2 + 0 * sigma2, mu + sigma2 * tau
        if p == 1.0:
            e = np.exp(sigma2 * tau)
            v = mu * np.expm1(sigma2 * tau) / sigma2
            return v, v / mu, (mu * tau * e - v) / sigma2, mu * e
        if p == 2.0:
            y = 1.0 - tau * mu * sigma2
            v = -np.log(y) / sigma2
            return v, tau / y, (tau * mu / y - v) / sigma2, mu / y
        a = _alpha(p)
        y = 1.0 + tau * sigma2 * (1.0 - p) * mu ** (p - 1.0)
        ya = y ** (a - 1.0)
        v = mu ** (2.0 - p) / ((2.0 - p) * sigma2) * (ya * y - 1.0)
        c = mu ** (2.0 - p) / sigma2 * ya * (y - 1.0)
        return v, ((2.0 - p) * v - c) / mu, -(c / (p - 1.0) + v) / sigma2, mu * ya


def tweedie_log_cf(t, mu, sigma2, p):
    """Vectorised log-characteristic function (complex)."""
    it = 1j * np.asarray(t, dtype=float)
    if p == 0.0:
        return mu * it + 0.5 * sigma2 * it**2
    if p == 1.0:
        return mu * np.expm1(sigma2 * it) / sigma2
    if p == 2.0:
        return -np.log1p(-it * mu * sigma2) / sigma2
    a = _alpha(p)
    z = np.log1p(it * sigma2 * (1.0 - p) * mu ** (p - 1.0))
    return mu ** (2.0 - p) / ((2.0 - p) * sigma2) * np.expm1(a * z)


def tweedie_mgf(params: TweedieParams, tau):
    """Moment generating function ``E[exp(tau X)]``.

    Raises
    ------
    ValidationError
        If any ``tau`` is at or beyond the convergence abscissa.

    Examples
    --------
    >>> float(tweedie_mgf(TweedieParams(2, 1.0, 1.0), -1.0))
    0.5
    """
    tau = np.asarray(tau, dtype=float)
    bound = mgf_abscissa(params.mu, params.sigma2, params.p)
    if np.any(tau >= bound):
        raise ValidationError(
            f"MGF undefined for tau >= {bound:g} (p={params.p}, mu={params.mu}, "
            f"sigma2={params.sigma2}); restrict to tau <= 0"
        )
    out = np.exp(tweedie_log_mgf(tau, params.mu, params.sigma2, params.p))
    return out[()] if out.ndim == 0 else out


def tweedie_cf(params: TweedieParams, t):
    """Characteristic function ``E[exp(i t X)]``."""
    out = np.exp(tweedie_log_cf(t, params.mu, params.sigma2, params.p))
    return out[()] if np.ndim(out) == 0 else out


def tweedie_sample(params: TweedieParams, rng: np.random.Generator, size=None):
    """Draw from ``Tw_p(mu, sigma2)``.

    Uses a Normal draw for ``p = 0``, a scaled Poisson for ``p = 1``, a
    Poisson sum of Gamma jumps for ``1 < p < 2`` and a Gamma draw for ``p = 2``.
    """
    return _sample(params.p, params.mu, params.sigma2, rng, size)


def _sample(p, mu, sigma2, rng, size=None):
    mu = np.asarray(mu, dtype=float)
    if size is None:
        size = np.broadcast_shapes(mu.shape, np.shape(sigma2))
    if p == 0.0:
        return rng.normal(mu, np.sqrt(sigma2), size)
    if p == 1.0:
        return sigma2 * rng.poisson(mu / sigma2, size)
    if p == 2.0:
        return rng.gamma(1.0 / sigma2, mu * sigma2, size)
    rate = mu ** (2.0 - p) / (sigma2 * (2.0 - p))
    shape = (2.0 - p) / (p - 1.0)
    scale = sigma2 * (p - 1.0) * mu ** (p - 1.0)
    counts = rng.poisson(rate, size)
    # a sum of k Gamma(shape) jumps is Gamma(k * shape)
    jumps = rng.gamma(np.where(counts > 0, counts * shape, 1.0), np.broadcast_to(scale, counts.shape))
    return np.where(counts > 0, jumps, 0.0)


@dataclass(frozen=True)
class TweedieFamily:
    """Family tag used by triangle simulation and CGMM fitting.

    ``scale`` below always denotes the dispersion ``sigma2``.
    """

    p: float

    def __post_init__(self):
        object.__setattr__(self, "p", check_power(self.p))

    name = "tweedie"
    has_mean = True

    def require_mean(self):
        return None

    @property
    def shape_param(self) -> float:
        return self.p

    def log_mgf(self, tau, mean, scale):
        return tweedie_log_mgf(tau, mean, scale, self.p)

    def log_mgf_grad(self, tau, mean, scale):
        return tweedie_log_mgf_grad(tau, mean, scale, self.p)

    def log_cf(self, t, mean, scale):
        return tweedie_log_cf(t, mean, scale, self.p)

    def sample(self, mean, scale, rng, size=None):
        return _sample(self.p, mean, scale, rng, size)

    def spread(self, mean, scale):
        """Standard deviation of a cell, used to size quadrature grids."""
        return np.sqrt(scale * np.abs(mean) ** self.p)

    def variance(self, mean, scale):
        return scale * np.abs(mean) ** self.p

    def abscissa(self, mean, scale):
        return mgf_abscissa(mean, scale, self.p)

    def check_values(self, x):
        x = np.asarray(x, dtype=float)
        if self.p == 2.0 and np.any(x <= 0):
            raise ValidationError("Gamma (p=2) fitting needs strictly positive increments")
        if self.p >= 1.0 and np.any(x < 0):
            raise ValidationError(f"Tweedie p={self.p} fitting needs non-negative increments")

    def to_dict(self):
        return {"name": "tweedie", "p": self.p}
