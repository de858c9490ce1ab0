"""Continuum GMM with MGF or CF moment conditions.

For a cell with observation ``x`` and model transform ``M(tau; theta)`` the
moment function is ``h(tau) = exp(tau x) - M(tau)`` on a quadrature lattice
in ``(-inf, 0]**L``.  Its covariance kernel is

    k(s, tau) = M(s + tau) - M(s) M(tau),

the covariance of ``exp(sX)`` and ``exp(tau X)``.  With CF conditions
``h(t) = exp(i t x) - phi(t)`` and ``k(s, t) = phi(s - t) - phi(s) conj(phi(t))``.

After Nystrom discretisation with trapezoid weights ``w`` the weighted kernel
``B = W^1/2 K W^1/2`` (``W = diag(w)``) has eigenpairs ``(d_k, v_k)`` and the
Tikhonov-regularised norm of ``B^{-1/2} h`` is

    sum_k d_k <v_k, W^1/2 h>**2 / (d_k + eps)**2.

The objective adds a spectral log-determinant barrier weighted by
``logdet_weight``; without it a continuously updated kernel lets the scale
parameters drift to where every eigenvalue is negligible against ``eps``.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .abrm import AbrmSpec, ParameterLayout, cell_log_mgf_grad, cell_log_transform
from .dispersion import TweedieFamily
from .errors import NumericalError, ValidationError
from .triangle import Triangle, chain_ladder

__all__ = [
    "QuadratureGrid",
    "CgmmConfig",
    "KernelMatrix",
    "trapezoid_weights",
    "moment_vector",
    "kernel_matrix",
    "empirical_kernel",
    "matrix_sqrt_psd",
    "regularized_norm",
    "CgmmProblem",
    "SampleProblem",
    "initial_spec",
    "cgmm_objective",
    "objective_surface",
    "write_surface",
]

TRANSFORMS = ("mgf", "cf")


def trapezoid_weights(x) -> np.ndarray:
    """Trapezoid-rule weights for sorted abscissae ``x``."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return np.ones_like(x)
    dx = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product quadrature lattice.

    The stored lattice lives on a unit box and is stretched per cell (or by a
    fixed half-width) when the objective is assembled.

    Attributes
    ----------
    points : ndarray of shape (G, L)
    weights : ndarray of shape (G,)
        Positive trapezoid weights; they sum to the volume of the support.
    support : tuple of (lo, hi) per line
    """

    points: np.ndarray
    weights: np.ndarray
    support: tuple

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] == 1 and np.ndim(self.points) == 1:
            pts = pts.T
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (pts.shape[0],) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("quadrature weights must be non-negative, one per point")
        for k, (lo, hi) in enumerate(self.support):
            if np.any(pts[:, k] < lo - 1e-12) or np.any(pts[:, k] > hi + 1e-12):
                raise ValidationError("quadrature points must lie inside the support")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n_lines(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @classmethod
    def build(cls, n_points=64, n_lines=1, spacing="uniform", transform="mgf", floor=1e-3):
        """Unit lattice on ``[-1, 0]**L`` (MGF) or ``[-1, 1]**L`` (CF).

        Parameters
        ----------
        n_points : int
            Points per line.
        spacing : {"uniform", "exponential"}
            ``"exponential"`` places points at ``-exp(u)`` with ``u`` uniform on
            ``[log(floor), 0]`` plus the origin, concentrating them near 0.
        """
        if n_points < 2:
            raise ValidationError("need at least two quadrature points per line")
        if spacing == "uniform":
            x = np.linspace(-1.0, 0.0, n_points)
        elif spacing == "exponential":
            x = np.concatenate([-np.exp(np.linspace(0.0, np.log(floor), n_points - 1)), [0.0]])
        else:
            raise ValidationError(f"unknown grid spacing {spacing!r}")
        if transform == "cf":
            x = np.concatenate([x, -x[-2::-1]])
            if spacing == "uniform":
                x = np.linspace(-1.0, 1.0, n_points)
        elif transform != "mgf":
            raise ValidationError(f"unknown transform {transform!r}")
        w = trapezoid_weights(x)
        pts = np.array(list(itertools.product(x, repeat=n_lines)))
        wts = np.prod(np.array(list(itertools.product(w, repeat=n_lines))), axis=1)
        hi = 0.0 if transform == "mgf" else 1.0
        return cls(pts, wts, tuple((-1.0, hi) for _ in range(n_lines)))


@dataclass(frozen=True)
class CgmmConfig:
    """Settings of the CGMM objective.

    Parameters
    ----------
    transform : {"mgf", "cf"}
    n_points : int, optional
        Quadrature points per line; 64 for one line, 8 per line otherwise.
    spacing : {"uniform", "exponential"}, optional
        Defaults to uniform for one line and exponential otherwise.
    lam : float
        Tikhonov parameter relative to the largest eigenvalue of each
        weighted kernel at the initial estimate.
    kernel_policy : {"continuous", "fixed"}
        Rebuild the kernel at every parameter value, or keep the one built
        at the initial estimate.
    objective_scale : float, optional
        Multiplier of the objective; 1 for one line and 1e6 otherwise.
    grid_scale : float
        Each cell's lattice spans ``grid_scale / sd`` per line, with ``sd``
        the cell's standard deviation (scale for stable laws) at the
        initial estimate.
    half_width : float, optional
        Fixed half-width shared by all cells, overriding ``grid_scale``.
    logdet_weight : float
        Weight of the spectral barrier.
    pooled : bool
        Average all cells into one moment function instead of summing one
        norm per cell.
    """

    transform: str = "mgf"
    n_points: int | None = None
    spacing: str | None = None
    lam: float = 1e-7
    kernel_policy: str = "continuous"
    objective_scale: float | None = None
    grid_scale: float = 0.5
    half_width: float | None = None
    logdet_weight: float = 0.25
    pooled: bool = False

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValidationError(f"transform must be one of {TRANSFORMS}, got {self.transform!r}")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValidationError(f"lam must be positive, got {self.lam}")
        if self.kernel_policy not in ("continuous", "fixed"):
            raise ValidationError(f"kernel_policy must be 'continuous' or 'fixed', got {self.kernel_policy!r}")
        if self.objective_scale is not None and not self.objective_scale >= 1:
            raise ValidationError("objective_scale must be at least 1")
        if self.n_points is not None and self.n_points < 2:
            raise ValidationError("n_points must be at least 2")
        if self.spacing not in (None, "uniform", "exponential"):
            raise ValidationError(f"unknown grid spacing {self.spacing!r}")
        if not self.grid_scale > 0:
            raise ValidationError("grid_scale must be positive")
        if self.half_width is not None and not self.half_width > 0:
            raise ValidationError("half_width must be positive")
        if not self.logdet_weight >= 0:
            raise ValidationError("logdet_weight must be non-negative")

    def resolved(self, n_lines: int) -> "CgmmConfig":
        """Fill the line-count dependent defaults."""
        single = n_lines == 1
        return replace(
            self,
            n_points=self.n_points or (64 if single else 8),
            spacing=self.spacing or ("uniform" if single else "exponential"),
            objective_scale=self.objective_scale or (1.0 if single else 1e6),
        )

    def grid(self, n_lines: int) -> QuadratureGrid:
        c = self.resolved(n_lines)
        return QuadratureGrid.build(c.n_points, n_lines, c.spacing, c.transform)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown CGMM settings {sorted(unknown)}")
        return cls(**d)


@dataclass
class KernelMatrix:
    """Weighted, symmetrised Nystrom kernel ``W^1/2 K W^1/2``.

    Attributes
    ----------
    entries : ndarray of shape (G, G)
    weights : ndarray of shape (G,)
    points : ndarray of shape (G, L)
    provenance : dict
        Parameters the kernel was built at.
    """

    entries: np.ndarray
    weights: np.ndarray
    points: np.ndarray
    provenance: dict = field(default_factory=dict)

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.entries)


def _as_points(points, n_lines):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[1] != n_lines:
        raise ValidationError(f"points must have {n_lines} columns")
    return pts


def kernel_matrix(family, local, points, weights=None, transform="mgf", n_lines=1, shock=False) -> KernelMatrix:
    """Model covariance kernel of one cell on a lattice.

    Parameters
    ----------
    family : TweedieFamily or StableFamily
    local : array_like
        Local cell parameters ``[m_1..m_L, g_1..g_L(, s_1, s_2)]``.
    points : array_like of shape (G,) or (G, L)
    weights : array_like of shape (G,), optional
        Quadrature weights; unit weights if omitted.

    Raises
    ------
    ValidationError
        If a lattice sum leaves the MGF domain; the offending pair is named.
    """
    pts = _as_points(points, n_lines)
    G = pts.shape[0]
    w = np.ones(G) if weights is None else np.asarray(weights, dtype=float)
    local = np.asarray(local, dtype=float)
    if transform == "mgf":
        pair = pts[:, None, :] + pts[None, :, :]
        with np.errstate(all="ignore"):
            E = np.exp(cell_log_transform(family, pair, local, n_lines, shock))
            M = np.exp(cell_log_transform(family, pts, local, n_lines, shock))
        bad = ~np.isfinite(E)
        if bad.any():
            p, q = np.argwhere(bad)[0]
            raise ValidationError(f"kernel argument s+tau outside the MGF domain at pair ({p}, {q})")
        K = E - np.outer(M, M)
    elif transform == "cf":
        pair = pts[:, None, :] - pts[None, :, :]
        E = np.exp(cell_log_transform(family, pair, local, n_lines, shock, "cf"))
        M = np.exp(cell_log_transform(family, pts, local, n_lines, shock, "cf"))
        K = E - np.outer(M, M.conj())
    else:
        raise ValidationError(f"unknown transform {transform!r}")
    sq = np.sqrt(w)
    B = sq[:, None] * K * sq[None, :]
    B = 0.5 * (B + B.conj().T)
    return KernelMatrix(B, w, pts, {"local": local.tolist(), "transform": transform})


def empirical_kernel(x, points, weights=None, transform="mgf") -> KernelMatrix:
    """Sample covariance kernel of ``exp(tau X)`` (or ``exp(i t X)``) from i.i.d. draws.

    Parameters
    ----------
    x : array_like of shape (n,) or (n, L)
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    pts = _as_points(points, x.shape[1])
    w = np.ones(pts.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    arg = x @ pts.T
    e = np.exp(arg) if transform == "mgf" else np.exp(1j * arg)
    mean = e.mean(axis=0)
    c = e - mean
    K = (c.T @ c.conj()) / x.shape[0]
    sq = np.sqrt(w)
    B = sq[:, None] * K * sq[None, :]
    return KernelMatrix(0.5 * (B + B.conj().T), w, pts, {"empirical": True, "n": int(x.shape[0])})


def matrix_sqrt_psd(K) -> np.ndarray:
    """Symmetric PSD square root with negative eigenvalues clipped to zero.

    Examples
    --------
    >>> matrix_sqrt_psd(np.diag([4.0, 9.0]))
    array([[2., 0.],
           [0., 3.]])
    """
    A = K.entries if isinstance(K, KernelMatrix) else np.asarray(K)
    if not np.all(np.isfinite(A)):
        raise NumericalError("kernel matrix has non-finite entries")
    A = 0.5 * (A + A.conj().T)
    d, V = np.linalg.eigh(A)
    d = np.clip(d, 0.0, None)
    return (V * np.sqrt(d)) @ V.conj().T


def regularized_norm(K, h, lam, weights=None) -> float:
    """Squared norm of ``u = (K + lam I)^{-1} K^{1/2} h``.

    The norm is ``sum_q weights_q |u_q|**2`` (unit weights by default).
    Negative eigenvalues of ``K`` are clipped.

    Examples
    --------
    >>> regularized_norm(np.eye(2), np.array([3.0, 4.0]), 1.0)
    6.25
    """
    if not lam > 0:
        raise ValidationError("lam must be positive")
    A = K.entries if isinstance(K, KernelMatrix) else np.asarray(K)
    h = np.asarray(h)
    if A.shape != (h.size, h.size):
        raise ValidationError(f"kernel is {A.shape} but moment vector has {h.size} entries")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(h))):
        raise NumericalError("non-finite kernel or moment vector")
    d, V = np.linalg.eigh(0.5 * (A + A.conj().T))
    d = np.clip(d, 0.0, None)
    u = V @ (np.sqrt(d) / (d + lam) * (V.conj().T @ h))
    w = np.ones(h.size) if weights is None else np.asarray(weights, dtype=float)
    return float(np.sum(w * np.abs(u) ** 2))


def _barrier(x):
    # log(1+x) + 1/(1+x) - x^2/(1+x)^2, shifted to vanish at its minimum x = 1
    return np.log1p(x) + 1.0 / (1.0 + x) - (x / (1.0 + x)) ** 2 - (np.log(2.0) + 0.25)


def _barrier_prime(x):
    return x * (x - 1.0) / (1.0 + x) ** 3


# ----------------------------------------------------------------- marginals


def _marginal_center_spread(family, local, n_lines, shock):
    """Per-line marginal mean (location) and standard deviation (scale)."""
    L = n_lines
    m, g = local[:, :L], local[:, L : 2 * L]
    if isinstance(family, TweedieFamily):
        mean, var = m.copy(), family.variance(m, g)
        if shock:
            s1, s2 = local[:, 2 * L : 2 * L + 1], local[:, 2 * L + 1 : 2 * L + 2]
            b = (s1 / m) ** (1.0 - family.p) * g / s2
            mean = mean + b * s1
            var = var + b**2 * family.variance(s1, s2)
        return mean, np.sqrt(var)
    a = family.alpha
    if shock:
        s1, s2 = local[:, 2 * L : 2 * L + 1], local[:, 2 * L + 1 : 2 * L + 2]
        return m + s1, (g**a + s2**a) ** (1 / a)
    return m.copy(), g.copy()


class _Engine:
    """Vectorised objective over groups of cells.

    Each group carries one moment function: a single cell in the default
    per-cell mode, all cells when pooled.
    """

    def __init__(self, family, n_lines, shock, x, groups, local0, config: CgmmConfig):
        self.family, self.L, self.shock = family, n_lines, shock
        self.cfg = config.resolved(n_lines)
        self.mgf = self.cfg.transform == "mgf"
        x = np.asarray(x, dtype=float).reshape(len(local0), n_lines)
        self.groups = np.asarray(groups)
        self.n_groups = int(self.groups.max()) + 1
        N = x.shape[0]
        counts = np.bincount(self.groups, minlength=self.n_groups).astype(float)
        self.agg = np.zeros((self.n_groups, N))
        self.agg[self.groups, np.arange(N)] = 1.0 / counts[self.groups]
        self.inv_n = 1.0 / counts[self.groups]

        grid = self.cfg.grid(n_lines)
        center, spread = _marginal_center_spread(family, np.asarray(local0, dtype=float), n_lines, shock)
        if not (np.all(np.isfinite(spread)) and np.all(spread > 0)):
            raise NumericalError("initial estimate gives a non-positive cell spread")
        gc = self.agg @ center
        if self.cfg.half_width is not None:
            scale = np.full((self.n_groups, n_lines), self.cfg.half_width)
        else:
            scale = self.cfg.grid_scale / (self.agg @ spread)
        tau = grid.points[None, :, :] * scale[:, None, :]
        self.sqw = np.sqrt(grid.weights[None, :] * np.prod(scale, axis=1)[:, None])
        self.center = gc[self.groups]
        self.tau = tau[self.groups]
        self.pair = self.tau[:, :, None, :] + (1 if self.mgf else -1) * self.tau[:, None, :, :]
        arg = np.einsum("cgl,cl->cg", self.tau, x - self.center)
        self.ex = np.exp(arg) if self.mgf else np.exp(1j * arg)
        self.shift_m = np.einsum("cgl,cl->cg", self.tau, self.center)
        self.shift_p = np.einsum("cghl,cl->cgh", self.pair, self.center)

        self.B_fixed = None
        B0, _, _, _ = self._assemble(np.asarray(local0, dtype=float))
        if not np.all(np.isfinite(B0)):
            raise NumericalError("kernel at the initial estimate is not finite")
        top = np.linalg.eigvalsh(B0)[:, -1]
        top = np.where(top > 0, top, 1.0)
        self.eps = self.cfg.lam * top
        if self.cfg.kernel_policy == "fixed":
            self.B_fixed = B0

    def _log_transform(self, z, local):
        return cell_log_transform(self.family, z, local, self.L, self.shock, self.cfg.transform)

    def _assemble(self, local):
        lm = local[:, None, :]
        phase = self.shift_m if self.mgf else 1j * self.shift_m
        with np.errstate(all="ignore"):
            Mt = np.exp(self._log_transform(self.tau, lm) - phase)
        h = self.sqw * (self.agg @ (self.ex - Mt))
        if self.B_fixed is not None:
            return self.B_fixed, h, Mt, None
        phase = self.shift_p if self.mgf else 1j * self.shift_p
        with np.errstate(all="ignore"):
            E = np.exp(self._log_transform(self.pair, local[:, None, None, :]) - phase)
        C = E - Mt[:, :, None] * (Mt if self.mgf else Mt.conj())[:, None, :]
        # covariance of a group average: sum over cells of C / n_g**2
        K = np.einsum("gc,cpq->gpq", self.agg**2, C)
        B = self.sqw[:, :, None] * K * self.sqw[:, None, :]
        B = 0.5 * (B + np.swapaxes(B.conj(), 1, 2))
        return B, h, Mt, E

    def value(self, local):
        """Per-group objective values (unscaled)."""
        B, h, _, _ = self._assemble(np.asarray(local))
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(h))):
            return np.full(self.n_groups, np.inf)
        d, V = np.linalg.eigh(B)
        d = np.clip(d, 0.0, None)
        p = np.einsum("gqk,gq->gk", V.conj(), h)
        e = self.eps[:, None]
        fit = np.sum(d / (d + e) ** 2 * np.abs(p) ** 2, axis=1)
        return fit + self.cfg.logdet_weight * np.sum(_barrier(d / e), axis=1)

    def value_and_grad(self, local):
        """Per-group values and the gradient of their sum w.r.t. local parameters."""
        if not self.mgf:
            raise NotImplementedError("analytic gradients are only available for MGF conditions")
        local = np.asarray(local, dtype=float)
        B, h, Mt, E = self._assemble(local)
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(h))):
            return np.full(self.n_groups, np.inf), np.zeros_like(local)
        d, V = np.linalg.eigh(B)
        d = np.clip(d, 0.0, None)
        p = np.einsum("gqk,gq->gk", V, h)
        e = self.eps[:, None]
        phi = d / (d + e) ** 2
        f = np.sum(phi * p**2, axis=1) + self.cfg.logdet_weight * np.sum(_barrier(d / e), axis=1)
        gh = 2.0 * np.einsum("gqk,gk->gq", V, phi * p)

        _, dMt = cell_log_mgf_grad(self.family, self.tau, local[:, None, :], self.L, self.shock)
        dMt *= Mt[..., None]
        grad = -np.einsum("cg,cgp->cp", (gh * self.sqw)[self.groups], dMt) * self.inv_n[:, None]

        if E is not None:
            # derivative of the spectral function through the eigen-decomposition
            dd = d[:, :, None] - d[:, None, :]
            pd = phi[:, :, None] - phi[:, None, :]
            dphi = (e - d) / (d + e) ** 3
            close = np.abs(dd) <= 1e-12 * (np.abs(d[:, :, None]) + np.abs(d[:, None, :]) + e[:, :, None])
            gam = np.where(close, 0.5 * (dphi[:, :, None] + dphi[:, None, :]), pd / np.where(close, 1.0, dd))
            inner = gam * (p[:, :, None] * p[:, None, :])
            idx = np.arange(d.shape[1])
            inner[:, idx, idx] += self.cfg.logdet_weight * _barrier_prime(d / e) / e
            gB = V @ inner @ np.swapaxes(V, 1, 2)
            gBw = (gB * self.sqw[:, :, None] * self.sqw[:, None, :])[self.groups]
            scale = self.inv_n[:, None] ** 2
            _, dlE = cell_log_mgf_grad(self.family, self.pair, local[:, None, None, :], self.L, self.shock)
            grad += np.einsum("cpq,cpqj->cj", gBw * E, dlE) * scale
            gM = np.einsum("cpq,cq->cp", gBw, Mt)
            grad -= 2.0 * np.einsum("cp,cpj->cj", gM, dMt) * scale
        return f, grad


class _Base:
    """Shared optimisation front end for :class:`CgmmProblem` and :class:`SampleProblem`."""

    engine: _Engine
    scale: float

    def _local(self, theta):
        raise NotImplementedError

    def objective(self, theta) -> float:
        """Scaled CGMM objective; ``inf`` outside the model domain."""
        local, _ = self._local(theta)
        if not np.all(np.isfinite(local)):
            return np.inf
        with np.errstate(all="ignore"):
            v = float(self.scale * np.sum(self.engine.value(local)))
        return v if np.isfinite(v) else np.inf

    def value_and_grad(self, theta):
        local, jac = self._local(theta)
        if not np.all(np.isfinite(local)):
            return np.inf, np.zeros(len(theta))
        if not self.engine.mgf:
            return self.objective(theta), self._fd_grad(theta)
        with np.errstate(all="ignore"):
            f, gl = self.engine.value_and_grad(local)
            return float(self.scale * np.sum(f)), self.scale * np.einsum("cp,cpt->t", gl, jac)

    def _fd_grad(self, theta, rel=1e-6):
        theta = np.asarray(theta, dtype=float)
        g = np.empty_like(theta)
        for k in range(theta.size):
            hk = rel * max(abs(theta[k]), 1.0)
            tp, tm = theta.copy(), theta.copy()
            tp[k] += hk
            tm[k] -= hk
            g[k] = (self.objective(tp) - self.objective(tm)) / (2 * hk)
        return g


def _cl_pattern(tri: Triangle):
    cl = chain_ladder(tri)
    beta = cl.incremental_pattern()
    return cl.ultimate * beta[0], beta / beta[0]


def initial_spec(triangles, family, shock=False, pin="nu", weights=None) -> AbrmSpec:
    """Chain-ladder starting point with moment-based dispersions.

    Tweedie dispersions are Pearson estimates; stable scales are a robust
    residual spread (``1.4826 MAD / sqrt(2)``, since ``S_2(0, s)`` has
    variance ``2 s**2``).  A shock starts small: the Tweedie shock mean is
    set so that it carries about 5% of a median cell, the stable shock at
    zero location and half the mean line scale.  Non-positive chain-ladder
    levels are floored at 0.1% of the largest level of their kind.
    """
    from .triangle import DevelopmentPattern

    lines = []
    for k, tri in enumerate(triangles):
        eta, nu = _cl_pattern(tri)
        if not (np.all(np.isfinite(eta)) and np.all(np.isfinite(nu)) and np.max(eta) > 0 and np.max(nu) > 0):
            raise ValidationError(f"chain-ladder start for {tri.lob or 'line'} has no positive levels")
        # empty or negative columns would give log(0); start them low instead
        eta = np.maximum(eta, 1e-3 * np.max(eta))
        nu = np.maximum(nu, 1e-3 * np.max(nu))
        i, j, x = tri.cells()
        m = eta[i] * nu[j]
        w = np.ones(tri.shape) if weights is None else np.asarray(weights[k], dtype=float)
        dof = max(x.size - (tri.n_ay + tri.n_dy - 1), 1)
        if isinstance(family, TweedieFamily):
            mp = np.abs(m) ** family.p if family.p else np.ones_like(m)
            g = float(np.sum(w[i, j] * (x - m) ** 2 / mp) / dof)
        else:
            g = float(1.4826 * np.median(np.abs(x - m)) / np.sqrt(2))
        if not (np.isfinite(g) and g > 0):
            g = 1e-6 * float(np.mean(np.abs(m)))
        lines.append(DevelopmentPattern(eta, nu, g, weights[k] if weights is not None else None).normalized(pin))
    sys_t = None
    if shock:
        if isinstance(family, TweedieFamily):
            p = family.p
            mt = float(np.median(np.concatenate([ln.means().ravel() for ln in lines])))
            g = float(np.mean([ln.gamma for ln in lines]))
            # share r = (alpha/m)**(2-p) * g / beta = 0.05 with beta = 1
            if p == 2:
                sys_t = (1.0, g / 0.05)
            else:
                sys_t = (mt * (0.05 / g) ** (1 / (2 - p)), 1.0)
        else:
            sys_t = (0.0, 0.5 * float(np.mean([ln.gamma for ln in lines])))
    lobs = [t.lob or f"line{k + 1}" for k, t in enumerate(triangles)]
    return AbrmSpec(family, lines, sys_t, lobs)


class CgmmProblem(_Base):
    """CGMM objective for one or more aligned triangles.

    Parameters
    ----------
    triangles : Triangle or list of Triangle
        All triangles must share the same observed region.
    family : TweedieFamily or StableFamily
    config : CgmmConfig, optional
    shock : bool, default False
        Fit a common shock (requires two or more lines to be identified).
    init : AbrmSpec, optional
        Anchor of the objective: quadrature spans, centring, kernel
        standardisation (and the kernel itself under the fixed policy) are
        computed here.  Defaults to :func:`initial_spec`.
    pin : {"nu", "eta"}
    shock_pin : float, optional
        Value of the pinned Tweedie shock coordinate; taken from ``init``.

    Notes
    -----
    The objective is a deterministic function of the data, the config and
    the anchor.  Parameters enter through :class:`~artifact.abrm.ParameterLayout`.
    """

    def __init__(self, triangles, family, config=None, shock=False, init=None, pin="nu", shock_pin=None):
        if isinstance(triangles, Triangle):
            triangles = [triangles]
        triangles = list(triangles)
        if not triangles:
            raise ValidationError("no triangles given")
        mask = triangles[0].mask
        for t in triangles[1:]:
            if t.shape != triangles[0].shape or not np.array_equal(t.mask, mask):
                raise ValidationError("all lines must share the same observed region")
        for t in triangles:
            family.check_values(t.cells()[2])
        if shock and len(triangles) < 2:
            raise ValidationError("a common shock needs at least two lines")
        if isinstance(family, type(None)):
            raise ValidationError("family is required")
        self.triangles, self.family = triangles, family
        self.config = (config or CgmmConfig()).resolved(len(triangles))
        self.shock = bool(shock)
        n_ay, n_dy = triangles[0].shape
        self.init = init if init is not None else initial_spec(triangles, family, shock, pin)
        if self.init.n_lines != len(triangles) or self.init.shape != (n_ay, n_dy):
            raise ValidationError("initial spec does not match the triangles")
        if self.init.has_shock != self.shock:
            raise ValidationError("initial spec and shock flag disagree")
        if shock_pin is None and self.shock and self.init.is_tweedie:
            shock_pin = self.init.systematic[0] if family.p == 2 else self.init.systematic[1]
        weights = np.stack([ln.weights for ln in self.init.lines])
        self.layout = ParameterLayout(
            family, len(triangles), n_ay, n_dy, self.shock, pin, 1.0 if shock_pin is None else shock_pin,
            weights, self.init.lobs,
        )
        self.theta0 = self.layout.pack(self.init)
        self.ci, self.cj = np.nonzero(mask)
        x = np.stack([t.values[self.ci, self.cj] for t in triangles], axis=1)
        groups = np.zeros(x.shape[0], dtype=int) if self.config.pooled else np.arange(x.shape[0])
        local0, _ = self.layout.local(self.theta0, self.ci, self.cj)
        self.engine = _Engine(family, len(triangles), self.shock, x, groups, local0, self.config)
        self.scale = float(self.config.objective_scale)

    @property
    def names(self):
        return self.layout.names()

    def _local(self, theta):
        if isinstance(theta, AbrmSpec):
            theta = self.layout.pack(theta)
        return self.layout.local(theta, self.ci, self.cj)

    def spec(self, theta) -> AbrmSpec:
        return self.layout.unpack(theta)


class SampleProblem(_Base):
    """CGMM objective for an i.i.d. sample from one law.

    Parameters are ``(mean, scale)`` in natural units, pooled into one moment
    function.  Useful for inspecting objective geometry.
    """

    names = ["mean", "scale"]

    def __init__(self, x, family, config=None, init=None):
        x = np.asarray(x, dtype=float).ravel()
        if x.size < 2:
            raise ValidationError("need at least two observations")
        family.check_values(x)
        self.family = family
        self.config = replace(config or CgmmConfig(), pooled=True).resolved(1)
        if init is None:
            sd = float(np.std(x, ddof=1))
            if isinstance(family, TweedieFamily):
                scale = sd**2 / (abs(np.mean(x)) ** family.p if family.p else 1.0)
            else:
                scale = sd / np.sqrt(2)
            init = (float(np.mean(x)), scale)
        self.theta0 = np.asarray(init, dtype=float)
        self.x = x
        local0 = np.tile(self.theta0, (x.size, 1))
        self.engine = _Engine(family, 1, False, x[:, None], np.zeros(x.size, dtype=int), local0, self.config)
        self.scale = float(self.config.objective_scale)

    def _local(self, theta):
        theta = np.asarray(theta, dtype=float)
        n = self.x.size
        local = np.tile(theta, (n, 1))
        if theta[1] <= 0:
            local[:, 1] = np.nan
        jac = np.broadcast_to(np.eye(2), (n, 2, 2))
        return local, jac


def moment_vector(spec: AbrmSpec, triangles, tau, transform="mgf") -> np.ndarray:
    """Average over observed cells of ``exp(<tau, x>) - M(tau)`` on a common lattice.

    Parameters
    ----------
    spec : AbrmSpec
    triangles : Triangle or list of Triangle
    tau : array_like of shape (G,) or (G, n_lines)

    Raises
    ------
    ValidationError
        On empty data or a lattice outside the MGF domain.
    """
    if isinstance(triangles, Triangle):
        triangles = [triangles]
    L = spec.n_lines
    tau = _as_points(tau, L)
    if transform == "mgf" and (np.any(tau > 0) and not spec.is_tweedie):
        raise ValidationError("stable MGF conditions need tau <= 0")
    ci, cj = np.nonzero(triangles[0].mask)
    if ci.size == 0:
        raise ValidationError("no observed cells")
    x = np.stack([t.values[ci, cj] for t in triangles], axis=1)
    layout = ParameterLayout(spec.family, L, *spec.shape, spec.has_shock, "nu",
                             spec.systematic[0] if spec.has_shock and spec.is_tweedie and spec.family.p == 2
                             else (spec.systematic[1] if spec.has_shock else 1.0),
                             np.stack([ln.weights for ln in spec.lines]))
    local, _ = layout.local(layout.pack(spec), ci, cj)
    with np.errstate(all="ignore"):
        if transform == "mgf":
            M = np.exp(cell_log_transform(spec.family, tau[None], local[:, None, :], L, spec.has_shock))
            emp = np.exp(x @ tau.T)
        else:
            M = np.exp(cell_log_transform(spec.family, tau[None], local[:, None, :], L, spec.has_shock, "cf"))
            emp = np.exp(1j * (x @ tau.T))
    if not np.all(np.isfinite(M)):
        raise ValidationError("lattice leaves the MGF domain of some cell")
    return (emp - M).mean(axis=0)


def cgmm_objective(theta, triangles, config=None, family=None, shock=False, init=None) -> float:
    """CGMM objective at ``theta`` (a parameter vector or an :class:`AbrmSpec`).

    The objective is anchored at ``init`` (chain-ladder start by default).
    """
    if family is None:
        if not isinstance(theta, AbrmSpec):
            raise ValidationError("family is required when theta is a vector")
        family = theta.family
        shock = theta.has_shock
    return CgmmProblem(triangles, family, config, shock, init).objective(theta)


def objective_surface(problem, theta_base, axis1, axis2, values1, values2) -> np.ndarray:
    """Objective on a 2-D grid of two coordinates, others held at ``theta_base``.

    Parameters
    ----------
    problem : CgmmProblem or SampleProblem
    theta_base : array_like
    axis1, axis2 : int or str
        Coordinate index or name from ``problem.names``.
    values1, values2 : array_like
        Values in natural units (coordinates stored as logarithms are
        converted).

    Returns
    -------
    ndarray of shape (len(values1) * len(values2), 3)
        Rows ``(v1, v2, objective)``.
    """
    names = list(problem.names)

    def index(a):
        if isinstance(a, str):
            if a not in names:
                raise ValidationError(f"unknown parameter {a!r}")
            return names.index(a)
        if not 0 <= int(a) < len(names):
            raise ValidationError(f"parameter index {a} out of range")
        return int(a)

    i1, i2 = index(axis1), index(axis2)
    if i1 == i2:
        raise ValidationError("surface axes must differ")
    logc = problem.layout.log_coordinates() if hasattr(problem, "layout") else np.zeros(len(names), bool)
    base = np.asarray(theta_base, dtype=float).copy()
    rows = []
    for v1 in np.atleast_1d(values1):
        for v2 in np.atleast_1d(values2):
            t = base.copy()
            t[i1] = np.log(v1) if logc[i1] else v1
            t[i2] = np.log(v2) if logc[i2] else v2
            rows.append((float(v1), float(v2), problem.objective(t)))
    return np.array(rows)


def write_surface(path, rows) -> None:
    """Write surface rows as CSV ``param1,param2,objective``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param1", "param2", "objective"])
        for r in rows:
            w.writerow([repr(float(r[0])), repr(float(r[1])), repr(float(r[2]))])
