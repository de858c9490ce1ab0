"""Additive background risk models across lines of business.

Line ``k`` of cell ``(i, j)`` is ``X_k = a_k Y_k + b_k Z`` with independent
idiosyncratic parts ``Y_k`` and one common shock ``Z`` per cell.

Tweedie lines use ``Y_k ~ Tw_p(eta_i nu_j, gamma_k)``, ``Z ~ Tw_p(alpha, beta)``,
``a_k = 1`` and ``b_k = (alpha / (eta_i nu_j))**(1 - p) * gamma_k / beta`` so
that every marginal stays Tweedie.  Stable lines use
``Y_k ~ S_a(eta_i nu_j, gamma_k, 1)``, ``Z ~ S_a(mu, sigma, 1)`` and
``a = b = 1``.

The Tweedie shock is only identified through ``alpha**(2 - p) / beta``:
replacing ``(alpha, beta)`` by ``(c alpha, c**(2 - p) beta)`` leaves the joint
law unchanged.  :class:`ParameterLayout` therefore pins ``beta`` (or
``alpha`` when ``p = 2``, where ``beta`` alone is identified).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dispersion import TweedieFamily, TweedieParams
from .errors import ValidationError
from .stable import StableFamily, StableParams
from .triangle import DevelopmentPattern, Triangle, standard_mask

__all__ = [
    "AbrmSpec",
    "ParameterLayout",
    "family_from_dict",
    "tweedie_loadings",
    "tweedie_abrm_marginal",
    "stable_abrm_marginal",
    "joint_log_mgf",
    "joint_mgf",
    "abrm_sample_cell",
    "simulate_abrm",
    "abrm_outstanding_mean",
    "cell_log_transform",
    "cell_log_mgf_grad",
]


def family_from_dict(d):
    """Build a family tag from ``{"name": "tweedie", "p": ...}`` or ``{"name": "stable", "alpha": ...}``."""
    try:
        name = d["name"]
        if name == "tweedie":
            return TweedieFamily(d["p"])
        if name == "stable":
            return StableFamily(d["alpha"])
    except KeyError as exc:
        raise ValidationError(f"family description is missing field {exc}") from None
    raise ValidationError(f"unknown family {d.get('name')!r}; expected 'tweedie' or 'stable'")


def tweedie_loadings(p, means, gammas, alpha_sys, beta_sys):
    """Shock loadings ``b = (alpha / m)**(1 - p) * gamma / beta``."""
    means = np.asarray(means)
    return (alpha_sys / means) ** (1.0 - p) * gammas / beta_sys


@dataclass
class AbrmSpec:
    """Multivariate loss model.

    Parameters
    ----------
    family : TweedieFamily or StableFamily
        Shared by every line.
    lines : list of DevelopmentPattern
        One pattern per line, all of the same shape.
    systematic : tuple of two floats or None
        ``(alpha, beta)`` Tweedie mean and dispersion of the shock, or
        ``(mu, sigma)`` stable location and scale.  ``None`` means no shock
        (independent lines).
    lobs : list of str, optional
        Line labels.
    loadings : ndarray of shape (n_lines, n_ay, n_dy), optional
        Stored Tweedie ``b`` loadings.  When given they must agree with the
        closed form; they are recomputed otherwise.
    """

    family: object
    lines: list
    systematic: tuple | None = None
    lobs: list = field(default_factory=list)
    loadings: np.ndarray | None = None

    def __post_init__(self):
        if not isinstance(self.family, (TweedieFamily, StableFamily)):
            raise ValidationError("family must be a TweedieFamily or StableFamily")
        self.lines = [ln if isinstance(ln, DevelopmentPattern) else DevelopmentPattern.from_dict(ln) for ln in self.lines]
        if not self.lines:
            raise ValidationError("an ABRM needs at least one line")
        shapes = {(ln.n_ay, ln.n_dy) for ln in self.lines}
        if len(shapes) != 1:
            raise ValidationError(f"all lines must share one triangle shape, got {sorted(shapes)}")
        if not self.lobs:
            self.lobs = [f"line{k + 1}" for k in range(len(self.lines))]
        if len(self.lobs) != len(self.lines):
            raise ValidationError("need one label per line")
        if self.systematic is not None:
            s = tuple(float(v) for v in self.systematic)
            if len(s) != 2 or not all(np.isfinite(s)):
                raise ValidationError("systematic parameters must be two finite numbers")
            if self.is_tweedie and (s[0] <= 0 or s[1] <= 0):
                raise ValidationError("Tweedie shock mean and dispersion must be positive")
            if not self.is_tweedie and s[1] <= 0:
                raise ValidationError("stable shock scale must be positive")
            self.systematic = s
        for ln in self.lines:
            if self.is_tweedie and self.family.p >= 1 and np.any(ln.means() <= 0):
                raise ValidationError("Tweedie cell means must be positive")
        b = self._compute_loadings()
        if self.loadings is not None:
            stored = np.asarray(self.loadings, dtype=float)
            if stored.shape != b.shape or not np.allclose(stored, b, rtol=1e-12, atol=0):
                raise ValidationError("stored loadings disagree with the closed-form loadings")
        self.loadings = b

    @property
    def is_tweedie(self) -> bool:
        return isinstance(self.family, TweedieFamily)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def shape(self):
        return self.lines[0].n_ay, self.lines[0].n_dy

    @property
    def has_shock(self) -> bool:
        return self.systematic is not None

    def _compute_loadings(self):
        n_ay, n_dy = self.shape
        if not self.has_shock:
            return np.zeros((self.n_lines, n_ay, n_dy))
        if not self.is_tweedie:
            return np.ones((self.n_lines, n_ay, n_dy))
        a, b = self.systematic
        return np.stack(
            [tweedie_loadings(self.family.p, ln.means(), ln.gamma / ln.weights, a, b) for ln in self.lines]
        )

    def cell_scales(self, k):
        """Per-cell dispersion (Tweedie, ``gamma / w``) or scale (stable) of line ``k``."""
        ln = self.lines[k]
        if self.is_tweedie:
            return ln.gamma / ln.weights
        return np.full(ln.means().shape, ln.gamma)

    def systematic_mean(self, k) -> np.ndarray:
        """Mean contribution ``b_k E[Z]`` of the shock in every cell of line ``k``."""
        if not self.has_shock:
            return np.zeros(self.shape)
        if not self.is_tweedie:
            self.family.require_mean()
        return self.loadings[k] * self.systematic[0]

    def marginal_means(self, k) -> np.ndarray:
        return self.lines[k].means() + self.systematic_mean(k)

    # ----------------------------------------------------------------- json
    def to_dict(self):
        d = {
            "family": self.family.to_dict(),
            "lobs": list(self.lobs),
            "lines": [ln.to_dict() for ln in self.lines],
        }
        if self.has_shock:
            keys = ("alpha", "beta") if self.is_tweedie else ("mu", "sigma")
            d["systematic"] = dict(zip(keys, self.systematic))
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ValidationError("ABRM spec must be a JSON object")
        try:
            fam = family_from_dict(d["family"])
            lines = [DevelopmentPattern.from_dict(x) for x in d["lines"]]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"ABRM spec is missing or has a malformed field: {exc}") from None
        sysd = d.get("systematic")
        sys_t = None
        if sysd is not None:
            keys = ("alpha", "beta") if isinstance(fam, TweedieFamily) else ("mu", "sigma")
            try:
                sys_t = (sysd[keys[0]], sysd[keys[1]])
            except (KeyError, TypeError):
                raise ValidationError(f"systematic block needs fields {keys}") from None
        return cls(fam, lines, sys_t, list(d.get("lobs", [])))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from None
        return cls.from_dict(d)


def _check_cell(spec: AbrmSpec, i, j, k=None):
    n_ay, n_dy = spec.shape
    if not (0 <= i < n_ay and 0 <= j < n_dy):
        raise ValidationError(f"cell ({i}, {j}) outside the {n_ay}x{n_dy} triangle")
    if k is not None and not (0 <= k < spec.n_lines):
        raise ValidationError(f"line index {k} out of range")


def tweedie_abrm_marginal(spec: AbrmSpec, i, j, k) -> TweedieParams:
    """Law of ``X_k`` in cell ``(i, j)`` (zero-based) for a Tweedie ABRM.

    With ``m = eta_i nu_j`` and ``r = (alpha / m)**(2 - p) * gamma / beta`` the
    marginal is ``Tw_p(m (1 + r), gamma (1 + r)**(1 - p))``.

    Examples
    --------
    >>> from artifact.triangle import DevelopmentPattern
    >>> s = AbrmSpec(TweedieFamily(2), [DevelopmentPattern([5.0], [1.0], 0.2)], (1.0, 1.0))
    >>> m = tweedie_abrm_marginal(s, 0, 0, 0)
    >>> round(m.mu, 12), round(m.sigma2, 12)
    (6.0, 0.166666666667)
    """
    if not spec.is_tweedie:
        raise ValidationError("tweedie_abrm_marginal needs a Tweedie ABRM")
    _check_cell(spec, i, j, k)
    p = spec.family.p
    m = spec.lines[k].means()[i, j]
    g = spec.cell_scales(k)[i, j]
    if not spec.has_shock:
        return TweedieParams(p, m, g)
    a, b = spec.systematic
    r = (a / m) ** (2.0 - p) * g / b
    return TweedieParams(p, m * (1.0 + r), g * (1.0 + r) ** (1.0 - p))


def stable_abrm_marginal(spec: AbrmSpec, i, j, k) -> StableParams:
    """Law of ``X_k = Y_k + Z`` in cell ``(i, j)`` for a stable ABRM."""
    if spec.is_tweedie:
        raise ValidationError("stable_abrm_marginal needs a stable ABRM")
    _check_cell(spec, i, j, k)
    a = spec.family.alpha
    m = spec.lines[k].means()[i, j]
    g = spec.lines[k].gamma
    if not spec.has_shock:
        return StableParams(a, m, g, 1.0)
    mu, sig = spec.systematic
    return StableParams(a, m + mu, (g**a + sig**a) ** (1 / a), 1.0)


def cell_log_transform(family, z, local, n_lines, shock, transform="mgf"):
    """Joint log-MGF (or log-CF) of one cell from its local parameters.

    Parameters
    ----------
    family : TweedieFamily or StableFamily
    z : ndarray of shape (..., n_lines)
        Transform arguments.
    local : ndarray of shape (..., 2 * n_lines + 2 * shock)
        ``[m_1..m_L, g_1..g_L, s_1, s_2]``: idiosyncratic means, cell
        dispersions/scales and the two shock parameters.  Broadcasts
        against ``z[..., 0]``.
    transform : {"mgf", "cf"}

    Returns
    -------
    ndarray of shape ``z.shape[:-1]``
    """
    L = n_lines
    f = family.log_mgf if transform == "mgf" else family.log_cf
    out = 0.0
    for k in range(L):
        out = out + f(z[..., k], local[..., k], local[..., L + k])
    if shock:
        s1, s2 = local[..., 2 * L], local[..., 2 * L + 1]
        if isinstance(family, TweedieFamily):
            u = 0.0
            for k in range(L):
                u = u + tweedie_loadings(family.p, local[..., k], local[..., L + k], s1, s2) * z[..., k]
        else:
            u = z.sum(axis=-1)
        out = out + f(u, s1, s2)
    return out


def cell_log_mgf_grad(family, z, local, n_lines, shock):
    """Joint log-MGF of :func:`cell_log_transform` and its gradient w.r.t. ``local``.

    Returns
    -------
    value : ndarray of shape ``z.shape[:-1]``
    grad : ndarray of shape ``z.shape[:-1] + (n_local,)``
    """
    L = n_lines
    P = 2 * L + (2 if shock else 0)
    shape = np.broadcast_shapes(z.shape[:-1], local.shape[:-1])
    grad = np.zeros(shape + (P,))
    val = np.zeros(shape)
    for k in range(L):
        v, dm, dg, _ = family.log_mgf_grad(z[..., k], local[..., k], local[..., L + k])
        val += v
        grad[..., k] += dm
        grad[..., L + k] += dg
    if shock:
        s1, s2 = local[..., 2 * L], local[..., 2 * L + 1]
        if isinstance(family, TweedieFamily):
            p = family.p
            u, du_s1, du_s2 = 0.0, 0.0, 0.0
            bz = []
            for k in range(L):
                b = tweedie_loadings(p, local[..., k], local[..., L + k], s1, s2)
                bz.append(b * z[..., k])
                u = u + bz[-1]
            v, dm, dg, du = family.log_mgf_grad(u, s1, s2)
            for k in range(L):
                grad[..., k] += du * (p - 1.0) * bz[k] / local[..., k]
                grad[..., L + k] += du * bz[k] / local[..., L + k]
            grad[..., 2 * L] += dm + du * (1.0 - p) * u / s1
            grad[..., 2 * L + 1] += dg - du * u / s2
        else:
            v, dm, dg, _ = family.log_mgf_grad(z.sum(axis=-1), s1, s2)
            grad[..., 2 * L] += dm
            grad[..., 2 * L + 1] += dg
        val += v
    return val, grad


def _cell_local(spec: AbrmSpec, i, j):
    L = spec.n_lines
    loc = [spec.lines[k].means()[i, j] for k in range(L)]
    loc += [spec.cell_scales(k)[i, j] for k in range(L)]
    if spec.has_shock:
        loc += list(spec.systematic)
    return np.array(loc)


def joint_log_mgf(spec: AbrmSpec, i, j, tau):
    """Log of :func:`joint_mgf`."""
    _check_cell(spec, i, j)
    tau = np.asarray(tau, dtype=float)
    if tau.shape[-1:] != (spec.n_lines,):
        raise ValidationError(f"tau must have {spec.n_lines} components")
    fam = spec.family
    b = spec.loadings[:, i, j]
    if spec.is_tweedie:
        for k in range(spec.n_lines):
            bound = fam.abscissa(spec.lines[k].means()[i, j], spec.cell_scales(k)[i, j])
            if np.any(tau[..., k] >= bound):
                raise ValidationError(f"line {k + 1} argument beyond its MGF abscissa {bound:g}")
        if spec.has_shock:
            u = tau @ b
            bound = fam.abscissa(*spec.systematic)
            if np.any(u >= bound):
                raise ValidationError(f"shock argument beyond its MGF abscissa {bound:g}")
    elif np.any(tau > 0):
        raise ValidationError("stable loss MGF is only finite for tau <= 0 in every component")
    return cell_log_transform(fam, tau, _cell_local(spec, i, j), spec.n_lines, spec.has_shock)


def joint_mgf(spec: AbrmSpec, i, j, tau):
    """Joint MGF ``E[exp(<tau, X_ij>)]`` of one cell across lines.

    Equals ``prod_k M_Yk(a_k tau_k) * M_Z(<b_ij, tau>)``.

    Raises
    ------
    ValidationError
        If any component argument leaves its MGF domain.
    """
    return np.exp(joint_log_mgf(spec, i, j, tau))


def abrm_sample_cell(spec: AbrmSpec, i, j, rng, size=None):
    """Draw ``a * Y + b * Z`` for one cell; returns shape ``(n_lines,)`` or ``size + (n_lines,)``."""
    _check_cell(spec, i, j)
    shape = () if size is None else tuple(np.atleast_1d(size))
    fam = spec.family
    out = np.empty(shape + (spec.n_lines,))
    for k in range(spec.n_lines):
        out[..., k] = fam.sample(spec.lines[k].means()[i, j], spec.cell_scales(k)[i, j], rng, shape)
    if spec.has_shock:
        z = fam.sample(spec.systematic[0], spec.systematic[1], rng, shape)
        out += np.multiply.outer(z, spec.loadings[:, i, j])
    return out


def simulate_abrm(spec: AbrmSpec, rng, mask=None, return_full=False):
    """Simulate one set of aligned triangles, one shock draw per cell.

    Returns
    -------
    list of Triangle, or (list of Triangle, ndarray of shape (n_lines, n_ay, n_dy))
    """
    n_ay, n_dy = spec.shape
    mask = standard_mask(n_ay, n_dy) if mask is None else np.asarray(mask, dtype=bool)
    fam = spec.family
    full = np.empty((spec.n_lines, n_ay, n_dy))
    for k in range(spec.n_lines):
        full[k] = fam.sample(spec.lines[k].means(), spec.cell_scales(k), rng)
    if spec.has_shock:
        z = fam.sample(np.full((n_ay, n_dy), spec.systematic[0]), np.full((n_ay, n_dy), spec.systematic[1]), rng)
        full += spec.loadings * z[None]
    tris = [Triangle(np.where(mask, full[k], np.nan), mask, spec.lobs[k]) for k in range(spec.n_lines)]
    return (tris, full) if return_full else tris


def abrm_outstanding_mean(spec: AbrmSpec, tri: Triangle) -> np.ndarray:
    """Per-line, per-AY model mean of the unobserved cells, shape ``(n_lines, n_ay)``.

    Raises
    ------
    ValidationError
        For stable specs with ``alpha <= 1`` (no mean) or a shape mismatch.
    """
    if not spec.is_tweedie:
        spec.family.require_mean()
    if tri.shape != spec.shape:
        raise ValidationError(f"spec is {spec.shape} but triangle is {tri.shape}")
    return np.stack([np.where(tri.mask, 0.0, spec.marginal_means(k)).sum(axis=1) for k in range(spec.n_lines)])


class ParameterLayout:
    """Map between an unconstrained parameter vector and an :class:`AbrmSpec`.

    Per line the vector holds ``log eta`` (all AYs), ``log nu`` (all DYs but
    the pinned first one) and ``log gamma``.  With ``pin="eta"`` the first
    ``eta`` is pinned instead.  The shock adds ``log alpha`` (Tweedie, with
    ``beta`` held at ``shock_pin``; for ``p = 2`` the roles swap) or
    ``mu, log sigma`` (stable).

    Parameters
    ----------
    family : TweedieFamily or StableFamily
    n_lines, n_ay, n_dy : int
    shock : bool
    pin : {"nu", "eta"}
    shock_pin : float, default 1.0
        Fixed Tweedie shock dispersion ``beta`` (shock mean ``alpha`` if ``p = 2``).
    weights : ndarray of shape (n_lines, n_ay, n_dy), optional
        Tweedie cell weights.
    lobs : list of str, optional
    """

    def __init__(self, family, n_lines, n_ay, n_dy, shock=False, pin="nu", shock_pin=1.0, weights=None, lobs=None):
        if pin not in ("nu", "eta"):
            raise ValidationError(f"pin must be 'nu' or 'eta', got {pin!r}")
        self.family, self.n_lines, self.n_ay, self.n_dy = family, int(n_lines), int(n_ay), int(n_dy)
        self.shock, self.pin, self.shock_pin = bool(shock), pin, float(shock_pin)
        self.weights = np.ones((self.n_lines, self.n_ay, self.n_dy)) if weights is None else np.asarray(weights, float)
        self.lobs = list(lobs) if lobs else [f"line{k + 1}" for k in range(self.n_lines)]
        self.per_line = self.n_ay + self.n_dy
        self.size = self.n_lines * self.per_line + (0 if not self.shock else (1 if self.is_tweedie else 2))

    @property
    def is_tweedie(self):
        return isinstance(self.family, TweedieFamily)

    @property
    def _free_beta(self):
        return self.is_tweedie and self.family.p == 2.0

    @property
    def n_local(self):
        return 2 * self.n_lines + (2 if self.shock else 0)

    def names(self):
        out = []
        for k, lob in enumerate(self.lobs):
            eta = [f"{lob}.eta[{i + 1}]" for i in range(self.n_ay)]
            nu = [f"{lob}.nu[{j + 1}]" for j in range(self.n_dy)]
            out += (eta + nu[1:] if self.pin == "nu" else eta[1:] + nu) + [f"{lob}.gamma"]
        if self.shock:
            if self.is_tweedie:
                out += ["shock.beta"] if self._free_beta else ["shock.alpha"]
            else:
                out += ["shock.mu", "shock.sigma"]
        return out

    def _split_line(self, t):
        if self.pin == "nu":
            return np.exp(t[: self.n_ay]), np.concatenate([[1.0], np.exp(t[self.n_ay : -1])]), np.exp(t[-1])
        return np.concatenate([[1.0], np.exp(t[: self.n_ay - 1])]), np.exp(t[self.n_ay - 1 : -1]), np.exp(t[-1])

    def unpack(self, theta) -> AbrmSpec:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.size,):
            raise ValidationError(f"parameter vector must have length {self.size}, got {theta.shape}")
        lines = []
        for k in range(self.n_lines):
            e, v, g = self._split_line(theta[k * self.per_line : (k + 1) * self.per_line])
            lines.append(DevelopmentPattern(e, v, g, self.weights[k]))
        sys_t = None
        if self.shock:
            tail = theta[self.n_lines * self.per_line :]
            if self._free_beta:
                sys_t = (self.shock_pin, np.exp(tail[0]))
            elif self.is_tweedie:
                sys_t = (np.exp(tail[0]), self.shock_pin)
            else:
                sys_t = (tail[0], np.exp(tail[1]))
        return AbrmSpec(self.family, lines, sys_t, self.lobs)

    def pack(self, spec: AbrmSpec) -> np.ndarray:
        out = []
        for ln in spec.lines:
            ln = ln.normalized(self.pin)
            if self.pin == "nu":
                out += [np.log(ln.eta), np.log(ln.nu[1:])]
            else:
                out += [np.log(ln.eta[1:]), np.log(ln.nu)]
            out.append([np.log(ln.gamma)])
        if self.shock:
            if not spec.has_shock:
                raise ValidationError("layout expects a systematic shock but the spec has none")
            a, b = spec.systematic
            if self._free_beta:
                # alpha is unidentified at p = 2, only beta matters
                out.append([np.log(b)])
            elif self.is_tweedie:
                # move to the equivalent representative with beta == shock_pin
                c = (self.shock_pin / b) ** (1.0 / (2.0 - self.family.p))
                out.append([np.log(a * c)])
            else:
                out.append([a, np.log(b)])
        return np.concatenate([np.asarray(x, dtype=float) for x in out])

    def log_coordinates(self):
        """Boolean mask of coordinates that are logarithms (all but the stable shock location)."""
        m = np.ones(self.size, dtype=bool)
        if self.shock and not self.is_tweedie:
            m[self.n_lines * self.per_line] = False
        return m

    def local(self, theta, cells_i, cells_j):
        """Local cell parameters and their Jacobian.

        Returns
        -------
        local : ndarray of shape (N, n_local)
        jac : ndarray of shape (N, n_local, size)
        """
        theta = np.asarray(theta, dtype=float)
        ci, cj = np.asarray(cells_i), np.asarray(cells_j)
        N, L = ci.size, self.n_lines
        loc = np.empty((N, self.n_local))
        jac = np.zeros((N, self.n_local, self.size))
        rows = np.arange(N)
        for k in range(L):
            off = k * self.per_line
            t = theta[off : off + self.per_line]
            if self.pin == "nu":
                ie = off + ci
                iv = np.where(cj > 0, off + self.n_ay + cj - 1, -1)
                le = t[ci]
                lv = np.where(cj > 0, t[np.clip(self.n_ay + cj - 1, 0, self.per_line - 1)], 0.0)
            else:
                ie = np.where(ci > 0, off + ci - 1, -1)
                iv = off + self.n_ay - 1 + cj
                le = np.where(ci > 0, t[np.clip(ci - 1, 0, self.per_line - 1)], 0.0)
                lv = t[self.n_ay - 1 + cj]
            m = np.exp(le + lv)
            g = np.exp(t[-1]) / self.weights[k, ci, cj]
            loc[:, k], loc[:, L + k] = m, g
            ok = ie >= 0
            jac[rows[ok], k, ie[ok]] += m[ok]
            ok = iv >= 0
            jac[rows[ok], k, iv[ok]] += m[ok]
            jac[:, L + k, off + self.per_line - 1] = g
        if self.shock:
            base = L * self.per_line
            if self._free_beta:
                b = np.exp(theta[base])
                loc[:, 2 * L], loc[:, 2 * L + 1] = self.shock_pin, b
                jac[:, 2 * L + 1, base] = b
            elif self.is_tweedie:
                a = np.exp(theta[base])
                loc[:, 2 * L], loc[:, 2 * L + 1] = a, self.shock_pin
                jac[:, 2 * L, base] = a
            else:
                s = np.exp(theta[base + 1])
                loc[:, 2 * L], loc[:, 2 * L + 1] = theta[base], s
                jac[:, 2 * L, base] = 1.0
                jac[:, 2 * L + 1, base + 1] = s
        return loc, jac
