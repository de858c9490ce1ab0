"""Alpha-stable laws in the ``S_alpha(mu, sigma, beta)`` parameterisation.

The characteristic function is

    phi(t) = exp(-|sigma t|**alpha * (1 - i beta sign(t) tan(pi alpha / 2)) + i mu t)

for ``alpha != 1`` and

    phi(t) = exp(-sigma |t| * (1 + i beta (2/pi) sign(t) log|t|) + i mu t)

for ``alpha == 1``.  This form is discontinuous at ``alpha = 1`` so the
estimation code never uses that value.

Totally skewed laws have a Laplace transform on one half-line.  For
``beta = -1`` it is finite for ``tau >= 0``; a loss with ``beta = +1`` is the
negative of such a variable, so its MGF lives on ``tau <= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "StableParams",
    "StableFamily",
    "stable_cf",
    "stable_log_cf",
    "extreme_stable_mgf",
    "stable_log_mgf",
    "stable_log_mgf_grad",
    "stable_convolve",
    "stable_sample",
]


@dataclass(frozen=True)
class StableParams:
    """Parameters of a stable law.

    Parameters
    ----------
    alpha : float
        Tail index in ``(0, 2]``.
    mu : float
        Location.
    sigma : float
        Scale, positive.
    beta : float, default 1.0
        Skewness in ``[-1, 1]``.
    """

    alpha: float
    mu: float
    sigma: float
    beta: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ValidationError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if not (-1.0 <= self.beta <= 1.0):
            raise ValidationError(f"beta must lie in [-1, 1], got {self.beta}")
        if not np.isfinite(self.mu):
            raise ValidationError("mu must be finite")


def stable_log_cf(t, alpha, mu, sigma, beta):
    """Vectorised log-characteristic function."""
    t = np.asarray(t, dtype=float)
    s = np.sign(t)
    if alpha == 1.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            tlog = np.where(t == 0, 0.0, np.abs(t) * np.log(np.abs(t)))
        return -sigma * np.abs(t) - 1j * sigma * beta * (2 / np.pi) * s * tlog + 1j * mu * t
    w = np.tan(np.pi * alpha / 2)
    return -np.abs(sigma * t) ** alpha * (1 - 1j * beta * s * w) + 1j * mu * t


def stable_cf(params: StableParams, t):
    """Characteristic function of ``S_alpha(mu, sigma, beta)``.

    Examples
    --------
    >>> round(abs(stable_cf(StableParams(1.0, 0.0, 1.0, 0.0), 2.0)), 12)
    0.135335283237
    """
    out = np.exp(stable_log_cf(t, params.alpha, params.mu, params.sigma, params.beta))
    return out[()] if np.ndim(out) == 0 else out


def stable_log_mgf(tau, alpha, mu, sigma, beta=1.0):
    """Vectorised log-MGF of a totally skewed stable variable.

    For ``beta = +1`` the arguments are taken on ``tau <= 0`` and for
    ``beta = -1`` on ``tau >= 0``.  No domain check is made; callers that
    need one should use :func:`extreme_stable_mgf`.
    """
    tau = np.asarray(tau)
    if tau.dtype.kind not in "fc":
        tau = tau.astype(float)
    return mu * tau - sigma**alpha * np.abs(tau) ** alpha / np.cos(np.pi * alpha / 2)


def stable_log_mgf_grad(tau, alpha, mu, sigma):
    """Log-MGF of a ``beta = +1`` law on ``tau <= 0`` with partial derivatives.

    Returns
    -------
    value, d_mu, d_sigma, d_tau : ndarray
    """
    tau = np.asarray(tau, dtype=float)
    c = np.cos(np.pi * alpha / 2)
    at = np.abs(tau)
    ta = at**alpha
    sa = sigma**alpha
    v = mu * tau - sa * ta / c
    with np.errstate(divide="ignore", invalid="ignore"):
        d_tau = mu + alpha * sa * np.where(at > 0, ta / np.where(at > 0, at, 1.0), 0.0) / c
    return v, tau + 0 * mu, -alpha * sa / sigma * ta / c, d_tau


def extreme_stable_mgf(params: StableParams, tau):
    """MGF of a ``beta = -1`` stable variable on ``tau >= 0``.

    ``M(tau) = exp(mu tau - sigma**alpha tau**alpha / cos(pi alpha / 2))``.

    A ``beta = +1`` variable is handled by negation:
    ``E[exp(tau X)] = M_{-X}(-tau)`` for ``tau <= 0``.

    Raises
    ------
    ValidationError
        If ``beta`` is not -1, ``alpha == 1`` or ``tau < 0``.
    """
    if params.beta != -1.0:
        raise ValidationError("extreme_stable_mgf needs beta = -1; negate beta = +1 variables")
    if params.alpha == 1.0:
        raise ValidationError("extreme-stable MGF is singular at alpha = 1")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValidationError("extreme-stable MGF is only real for tau >= 0")
    out = np.exp(stable_log_mgf(tau, params.alpha, params.mu, params.sigma, -1.0))
    return out[()] if out.ndim == 0 else out


def stable_convolve(p1: StableParams, p2: StableParams) -> StableParams:
    """Law of the sum of two independent stable variables with equal ``alpha``."""
    if p1.alpha != p2.alpha:
        raise ValidationError(f"cannot convolve alpha={p1.alpha} with alpha={p2.alpha}")
    a = p1.alpha
    s1, s2 = p1.sigma**a, p2.sigma**a
    return StableParams(
        alpha=a,
        mu=p1.mu + p2.mu,
        sigma=(s1 + s2) ** (1 / a),
        beta=(p1.beta * s1 + p2.beta * s2) / (s1 + s2),
    )


def _cms(alpha, beta, rng, size):
    """Chambers-Mallows-Stuck draw from ``S_alpha(0, 1, beta)``."""
    v = rng.uniform(-np.pi / 2, np.pi / 2, size)
    w = rng.exponential(1.0, size)
    if alpha == 1.0:
        half = np.pi / 2 + beta * v
        return (2 / np.pi) * (half * np.tan(v) - beta * np.log((np.pi / 2) * w * np.cos(v) / half))
    z = beta * np.tan(np.pi * alpha / 2)
    b = np.arctan(z) / alpha
    s = (1 + z * z) ** (1 / (2 * alpha))
    return (
        s
        * np.sin(alpha * (v + b))
        / np.cos(v) ** (1 / alpha)
        * (np.cos(v - alpha * (v + b)) / w) ** ((1 - alpha) / alpha)
    )


def _sample(alpha, mu, sigma, beta, rng, size=None):
    if size is None:
        size = np.broadcast_shapes(np.shape(mu), np.shape(sigma))
    x = _cms(alpha, beta, rng, size)
    if alpha == 1.0:
        return sigma * x + (2 / np.pi) * beta * sigma * np.log(sigma) + mu
    return sigma * x + mu


def stable_sample(params: StableParams, rng: np.random.Generator, size=None):
    """Draw from ``S_alpha(mu, sigma, beta)`` by the Chambers-Mallows-Stuck method."""
    return _sample(params.alpha, params.mu, params.sigma, params.beta, rng, size)


@dataclass(frozen=True)
class StableFamily:
    """Family tag for right-skewed (``beta = +1``) stable losses.

    ``scale`` below denotes the stable scale ``sigma``.
    """

    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0) or self.alpha == 1.0:
            raise ValidationError(f"stable loss models need alpha in (0, 2] other than 1, got {self.alpha}")

    @property
    def has_mean(self) -> bool:
        return self.alpha > 1.0

    def require_mean(self):
        if not self.has_mean:
            raise ValidationError(f"stable law with alpha={self.alpha} has no mean")

    name = "stable"

    @property
    def shape_param(self) -> float:
        return self.alpha

    def log_mgf(self, tau, mean, scale):
        return stable_log_mgf(tau, self.alpha, mean, scale, 1.0)

    def log_mgf_grad(self, tau, mean, scale):
        return stable_log_mgf_grad(tau, self.alpha, mean, scale)

    def log_cf(self, t, mean, scale):
        return stable_log_cf(t, self.alpha, mean, scale, 1.0)

    def sample(self, mean, scale, rng, size=None):
        return _sample(self.alpha, mean, scale, 1.0, rng, size)

    def spread(self, mean, scale):
        return np.broadcast_to(np.asarray(scale, dtype=float), np.shape(mean)).copy()

    def abscissa(self, mean, scale):
        return np.zeros(np.shape(mean)) if np.ndim(mean) else 0.0

    def check_values(self, x):
        if not np.all(np.isfinite(np.asarray(x, dtype=float))):
            raise ValidationError("stable fitting needs finite increments")

    def to_dict(self):
        return {"name": "stable", "alpha": self.alpha}
