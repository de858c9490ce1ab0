"""Estimation drivers: CGMM, Tweedie/Gamma likelihood baselines, chain ladder
and the parametric bootstrap, plus scikit-learn style estimators."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import brentq, minimize
from scipy.special import digamma, gammaln
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .abrm import AbrmSpec, abrm_outstanding_mean, family_from_dict, simulate_abrm
from .cgmm import CgmmConfig, CgmmProblem
from .dispersion import TweedieFamily, check_power
from .errors import NumericalError, ValidationError
from .stable import StableFamily
from .triangle import DevelopmentPattern, Triangle, chain_ladder, standard_mask

__all__ = [
    "OptimizerSettings",
    "FitResult",
    "BootstrapSummary",
    "fit_cgmm",
    "fit_mle_tweedie",
    "fit_mle_gamma",
    "fit_chain_ladder",
    "parametric_bootstrap",
    "CGMMReserver",
    "GammaMLEReserver",
    "ChainLadderReserver",
]

QUANTILES = (0.05, 0.95, 0.99)


@dataclass(frozen=True)
class OptimizerSettings:
    """Local solver and multi-start settings.

    Parameters
    ----------
    n_starts : int
        Local solves; the first starts at the anchor, the others at
        log-normal perturbations of it.
    perturb_sd : float
        SD of the perturbation on the log scale.
    max_iter : int
    bound_width : float
        Box half-width around the anchor, on the log scale.
    penalty : float
        Weight of ``||theta - theta_0||**2`` added to the normalised
        objective; zero disables it.
    """

    n_starts: int = 8
    perturb_sd: float = 0.2
    max_iter: int = 1000
    bound_width: float = 4.0
    penalty: float = 0.0

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValidationError("n_starts must be at least 1")
        if self.perturb_sd < 0 or self.bound_width <= 0 or self.penalty < 0 or self.max_iter < 1:
            raise ValidationError("invalid optimizer settings")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not serialisable: {type(x)}")


@dataclass
class FitResult:
    """Outcome of an estimation.

    Attributes
    ----------
    method : str
    spec : AbrmSpec
        Fitted model.
    theta : ndarray
        Parameter vector in the layout of ``names``.
    names : list of str
    objective_value : float
        CGMM objective (or negative log-likelihood) at ``theta``.
    n_starts : int
    converged : bool
    wall_time : float
        Seconds.
    outstanding : ndarray of shape (n_lines, n_ay)
        Model mean of the unobserved cells per line and AY.
    anchor : AbrmSpec or None
        Initial estimate the CGMM objective is anchored at.
    settings : dict
        Resolved configuration.
    """

    method: str
    spec: AbrmSpec
    theta: np.ndarray
    names: list
    objective_value: float
    n_starts: int
    converged: bool
    wall_time: float
    outstanding: np.ndarray
    anchor: AbrmSpec | None = None
    message: str = ""
    settings: dict = field(default_factory=dict)

    @property
    def theta_hat(self) -> dict:
        return dict(zip(self.names, np.asarray(self.theta).tolist()))

    @property
    def total_outstanding(self) -> float:
        return float(np.sum(self.outstanding))

    def to_dict(self, timing=True):
        d = {
            "method": self.method,
            "spec": self.spec.to_dict(),
            "theta": dict(zip(self.names, np.asarray(self.theta).tolist())),
            "objective_value": float(self.objective_value),
            "n_starts": int(self.n_starts),
            "converged": bool(self.converged),
            "outstanding": {lob: row.tolist() for lob, row in zip(self.spec.lobs, self.outstanding)},
            "total_outstanding": self.total_outstanding,
            "anchor": None if self.anchor is None else self.anchor.to_dict(),
            "message": self.message,
            "settings": self.settings,
        }
        if timing:
            d["wall_time"] = float(self.wall_time)
        return d

    def to_json(self, path=None, timing=True, **kw):
        s = json.dumps(self.to_dict(timing), indent=2, default=_jsonable, **kw)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s + "\n")
        return s

    @classmethod
    def from_dict(cls, d):
        try:
            spec = AbrmSpec.from_dict(d["spec"])
            th = d["theta"]
            return cls(
                method=d["method"],
                spec=spec,
                theta=np.array(list(th.values()), dtype=float),
                names=list(th.keys()),
                objective_value=float(d["objective_value"]),
                n_starts=int(d["n_starts"]),
                converged=bool(d["converged"]),
                wall_time=float(d.get("wall_time", float("nan"))),
                outstanding=np.array([d["outstanding"][lob] for lob in spec.lobs], dtype=float),
                anchor=None if d.get("anchor") is None else AbrmSpec.from_dict(d["anchor"]),
                message=d.get("message", ""),
                settings=d.get("settings", {}),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"fit result is missing or has a malformed field: {exc}") from None

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except OSError as exc:
            raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from None


def _as_list(triangles):
    if isinstance(triangles, Triangle):
        return [triangles]
    if isinstance(triangles, dict):
        return list(triangles.values())
    out = list(triangles)
    if not out or not all(isinstance(t, Triangle) for t in out):
        raise ValidationError("expected one or more Triangle objects")
    return out


# ----------------------------------------------------------------------- cgmm


def _local_solve(problem, start, lo, hi, f0, theta0, opt):
    best = [np.inf]

    def fun(t):
        f, g = problem.value_and_grad(t)
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            # a moderate wall lets the line search backtrack; an astronomical
            # one makes its interpolated step collapse to zero
            return 1e3 * max(best[0], 1.0) if np.isfinite(best[0]) else 1e30, np.zeros_like(t)
        f, g = f / f0, g / f0
        best[0] = min(best[0], f)
        if opt.penalty:
            dt = t - theta0
            f, g = f + opt.penalty * dt @ dt, g + 2 * opt.penalty * dt
        return f, g

    res = minimize(fun, start, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)),
                   options={"maxiter": opt.max_iter})
    return res


def fit_cgmm(triangles, family, config=None, shock=False, opt=None, seed=0, init=None, pin="nu",
             start=None, threads=1) -> FitResult:
    """Minimise the CGMM objective with a bounded quasi-Newton multi-start.

    Parameters
    ----------
    triangles : Triangle or list of Triangle
    family : TweedieFamily or StableFamily
    config : CgmmConfig, optional
    shock : bool
        Fit a common shock across lines.
    opt : OptimizerSettings, optional
    seed : int
        Seeds the multi-start perturbations.
    init : AbrmSpec, optional
        Anchor; chain-ladder based by default.
    start : AbrmSpec, optional
        First starting point if different from the anchor.
    threads : int
        Parallel local solves.

    Returns
    -------
    FitResult
        ``converged`` is False when no local solve reported success; the
        best point found is still returned.
    """
    t0 = time.perf_counter()
    tris = _as_list(triangles)
    opt = opt or OptimizerSettings()
    problem = CgmmProblem(tris, family, config, shock, init, pin)
    theta0 = problem.theta0
    f_init = problem.objective(theta0)
    if not np.isfinite(f_init):
        raise NumericalError("objective is not finite at the initial estimate")
    f0 = max(abs(f_init), 1e-300)
    logc = problem.layout.log_coordinates()
    width = np.where(logc, opt.bound_width, opt.bound_width * max(ln.gamma for ln in problem.init.lines))
    lo, hi = theta0 - width, theta0 + width
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7]))
    first = theta0 if start is None else np.clip(problem.layout.pack(start), lo, hi)
    scale = np.where(logc, 1.0, max(ln.gamma for ln in problem.init.lines))
    starts = [first] + [
        np.clip(theta0 + opt.perturb_sd * scale * rng.standard_normal(theta0.size), lo, hi)
        for _ in range(opt.n_starts - 1)
    ]
    if threads > 1 and len(starts) > 1:
        results = Parallel(n_jobs=threads, prefer="threads")(
            delayed(_local_solve)(problem, s, lo, hi, f0, theta0, opt) for s in starts
        )
    else:
        results = [_local_solve(problem, s, lo, hi, f0, theta0, opt) for s in starts]
    values = [problem.objective(r.x) for r in results]
    best = int(np.nanargmin(np.where(np.isfinite(values), values, np.inf)))
    if not np.isfinite(values[best]):
        raise NumericalError("no start reached a finite objective value")
    r = results[best]
    spec = problem.spec(r.x)
    converged = any(res.success for res, v in zip(results, values) if np.isfinite(v))
    settings = {
        "family": family.to_dict(),
        "config": problem.config.to_dict(),
        "optimizer": opt.to_dict(),
        "shock": bool(shock),
        "pin": pin,
        "seed": int(seed),
    }
    return FitResult(
        method="cgmm",
        spec=spec,
        theta=r.x,
        names=problem.names,
        objective_value=float(values[best]),
        n_starts=len(starts),
        converged=bool(converged),
        wall_time=time.perf_counter() - t0,
        outstanding=abrm_outstanding_mean(spec, tris[0]),
        anchor=problem.init,
        message=str(r.message),
        settings=settings,
    )


# ------------------------------------------------------------------ baselines


def _design(tri):
    i, j, x = tri.cells()
    n_ay, n_dy = tri.shape
    X = np.zeros((x.size, n_ay + n_dy - 1))
    X[np.arange(x.size), i] = 1.0
    ok = j > 0
    X[np.nonzero(ok)[0], n_ay + j[ok] - 1] = 1.0
    return X, i, j, x


def _irls(tri, p, tol=1e-13, max_iter=200):
    """Log-link GLM ``log m_ij = a_i + b_j`` with variance ``m**p``."""
    X, i, j, x = _design(tri)
    eta, nu = _cl_start(tri)
    beta = np.concatenate([np.log(eta), np.log(nu[1:])])
    for _ in range(max_iter):
        lin = X @ beta
        m = np.exp(lin)
        w = m ** (2.0 - p)
        z = lin + (x - m) / m
        A = X.T @ (w[:, None] * X)
        new = np.linalg.solve(A, X.T @ (w * z))
        if not np.all(np.isfinite(new)):
            raise NumericalError("likelihood iterations diverged")
        done = np.max(np.abs(new - beta)) < tol
        beta = new
        if done:
            break
    n_ay = tri.n_ay
    return np.exp(beta[:n_ay]), np.concatenate([[1.0], np.exp(beta[n_ay:])]), np.exp(X @ beta), x


def _cl_start(tri):
    cl = chain_ladder(tri)
    b = cl.incremental_pattern()
    return cl.ultimate * b[0], b / b[0]


def _single(triangles):
    tris = _as_list(triangles)
    if len(tris) != 1:
        raise ValidationError("likelihood baselines take one triangle at a time")
    return tris[0]


def fit_mle_tweedie(tri, p) -> FitResult:
    """Tweedie likelihood estimate of the mean pattern with Pearson dispersion.

    The mean equations ``sum (x - m) m**(1-p) = 0`` per row and column are
    the exact likelihood equations for the Poisson (``p = 1``) and Gamma
    (``p = 2``) cases; for ``p = 1`` the reserves coincide with chain ladder.
    """
    t0 = time.perf_counter()
    tri = _single(tri)
    p = check_power(p)
    fam = TweedieFamily(p)
    fam.check_values(tri.cells()[2])
    eta, nu, m, x = _irls(tri, p)
    dof = max(x.size - (tri.n_ay + tri.n_dy - 1), 1)
    gamma = float(np.sum((x - m) ** 2 / m**p) / dof) if p else float(np.sum((x - m) ** 2) / dof)
    if not gamma > 0:
        gamma = 1e-12
    spec = AbrmSpec(fam, [DevelopmentPattern(eta, nu, gamma)], None, [tri.lob or "line1"])
    theta = np.concatenate([np.log(eta), np.log(nu[1:]), [np.log(gamma)]])
    return FitResult(
        method="mle-tweedie",
        spec=spec,
        theta=theta,
        names=_names(tri),
        objective_value=float(np.nan),
        n_starts=1,
        converged=True,
        wall_time=time.perf_counter() - t0,
        outstanding=abrm_outstanding_mean(spec, tri),
        settings={"family": fam.to_dict()},
    )


def _names(tri):
    lob = tri.lob or "line1"
    return [f"{lob}.eta[{i + 1}]" for i in range(tri.n_ay)] + [f"{lob}.nu[{j + 1}]" for j in range(1, tri.n_dy)] + [
        f"{lob}.gamma"
    ]


def fit_mle_gamma(tri) -> FitResult:
    """Maximum likelihood for independent ``Gamma(1/gamma, eta_i nu_j gamma)`` cells.

    The mean parameters solve the Gamma score equations (they do not depend
    on ``gamma``); ``gamma`` then solves ``log k - digamma(k) = D / (2N)``
    with ``k = 1 / gamma`` and ``D`` the Gamma deviance.

    Raises
    ------
    ValidationError
        If any observed increment is not strictly positive.
    """
    t0 = time.perf_counter()
    tri = _single(tri)
    fam = TweedieFamily(2)
    fam.check_values(tri.cells()[2])
    eta, nu, m, x = _irls(tri, 2.0)
    r = x / m
    target = np.mean(r - 1.0 - np.log(r))
    if target <= 0:
        gamma = 1e-12
    else:
        lk = brentq(lambda u: u - digamma(np.exp(u)) - target, -30, 60)
        gamma = float(np.exp(-lk))
    spec = AbrmSpec(fam, [DevelopmentPattern(eta, nu, gamma)], None, [tri.lob or "line1"])
    k = 1.0 / gamma
    nll = -float(np.sum(k * np.log(k * r) - k * r - np.log(x) - gammaln(k)))
    theta = np.concatenate([np.log(eta), np.log(nu[1:]), [np.log(gamma)]])
    return FitResult(
        method="mle-gamma",
        spec=spec,
        theta=theta,
        names=_names(tri),
        objective_value=nll,
        n_starts=1,
        converged=True,
        wall_time=time.perf_counter() - t0,
        outstanding=abrm_outstanding_mean(spec, tri),
        settings={"family": fam.to_dict()},
    )


def fit_chain_ladder(triangles) -> FitResult:
    """Chain-ladder reserves wrapped as a :class:`FitResult` (one line per triangle).

    The spec holds the multiplicative pattern implied by the development
    factors, with a Poisson family tag and Pearson dispersion for reference.
    """
    t0 = time.perf_counter()
    tris = _as_list(triangles)
    lines, out, names = [], [], []
    for tri in tris:
        cl = chain_ladder(tri)
        eta, nu = _cl_start(tri)
        i, j, x = tri.cells()
        m = eta[i] * nu[j]
        dof = max(x.size - (tri.n_ay + tri.n_dy - 1), 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = float(np.sum((x - m) ** 2 / np.abs(m)) / dof)
        eta, nu = np.abs(eta), np.abs(nu)
        eta, nu = np.maximum(eta, 1e-3 * eta.max()), np.maximum(nu, 1e-3 * nu.max())
        lines.append(DevelopmentPattern(eta, nu, g if g > 0 and np.isfinite(g) else 1e-12))
        out.append(cl.outstanding_by_ay)
        names += _names(tri)
    spec = AbrmSpec(TweedieFamily(1), lines, None, [t.lob or f"line{k + 1}" for k, t in enumerate(tris)])
    return FitResult(
        method="chain-ladder",
        spec=spec,
        theta=np.concatenate([np.r_[np.log(ln.eta), np.log(ln.nu[1:]), np.log(ln.gamma)] for ln in lines]),
        names=names,
        objective_value=float(np.nan),
        n_starts=0,
        converged=True,
        wall_time=time.perf_counter() - t0,
        outstanding=np.array(out),
        settings={"dev_factors": [chain_ladder(t).dev_factors.tolist() for t in tris]},
    )


# ------------------------------------------------------------------ bootstrap


@dataclass
class BootstrapSummary:
    """Distribution of outstanding reserves over bootstrap replicates.

    Attributes
    ----------
    B : int
        Requested replicates.
    n_failed : int
    lobs : list of str
    replicates : ndarray of shape (B_ok, n_lines, n_ay)
        Outstanding per replicate, line and AY.
    parameters : ndarray of shape (B_ok, n_params)
    names : list of str
    process : bool
        Whether replicates include process variance of the future cells.
    """

    B: int
    n_failed: int
    lobs: list
    replicates: np.ndarray
    parameters: np.ndarray
    names: list
    process: bool = True
    seed: int = 0

    @staticmethod
    def _stats(a):
        a = np.asarray(a, dtype=float)
        out = {
            "mean": np.mean(a, axis=0),
            "median": np.median(a, axis=0),
            "sd": np.std(a, axis=0, ddof=1) if a.shape[0] > 1 else np.zeros(a.shape[1:]),
        }
        for q in QUANTILES:
            out[f"q{q:g}"] = np.quantile(a, q, axis=0)
        return out

    @property
    def by_ay(self) -> dict:
        """Per-AY statistics for each line and the total."""
        d = {lob: self._stats(self.replicates[:, k]) for k, lob in enumerate(self.lobs)}
        d["total"] = self._stats(self.replicates.sum(axis=1))
        return d

    @property
    def totals(self) -> dict:
        """Statistics of the all-AY outstanding per line and overall."""
        per_line = self.replicates.sum(axis=2)
        d = {lob: self._stats(per_line[:, k]) for k, lob in enumerate(self.lobs)}
        d["total"] = self._stats(per_line.sum(axis=1))
        return d

    def cumulative(self) -> dict:
        """Statistics of outstanding cumulated over accident years."""
        c = np.cumsum(self.replicates, axis=2)
        d = {lob: self._stats(c[:, k]) for k, lob in enumerate(self.lobs)}
        d["total"] = self._stats(c.sum(axis=1))
        return d

    def to_dict(self):
        def conv(d):
            return {k: {s: np.asarray(v).tolist() for s, v in st.items()} for k, st in d.items()}

        params = self._stats(self.parameters) if self.parameters.size else {}
        return {
            "B": int(self.B),
            "n_failed": int(self.n_failed),
            "n_ok": int(self.replicates.shape[0]),
            "process_variance": bool(self.process),
            "seed": int(self.seed),
            "lobs": list(self.lobs),
            "total": conv(self.totals),
            "by_accident_year": conv(self.by_ay),
            "parameters": {
                n: {s: float(np.asarray(v)[k]) for s, v in params.items()} for k, n in enumerate(self.names)
            },
        }

    def to_json(self, path=None):
        s = json.dumps(self.to_dict(), indent=2, default=_jsonable)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s + "\n")
        return s

    def write_ay_csv(self, path):
        """Per-AY mean and SD by line and in total, plus cumulative-over-AY columns."""
        by, cum = self.by_ay, self.cumulative()
        keys = list(self.lobs) + ["total"]
        head = ["accident_year"]
        for k in keys:
            head += [f"{k}_mean", f"{k}_sd"]
        for k in keys:
            head += [f"{k}_cum_mean", f"{k}_cum_sd"]
        n_ay = self.replicates.shape[2]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(head)
            for i in range(n_ay):
                row = [i + 1]
                for k in keys:
                    row += [repr(float(by[k]["mean"][i])), repr(float(by[k]["sd"][i]))]
                for k in keys:
                    row += [repr(float(cum[k]["mean"][i])), repr(float(cum[k]["sd"][i]))]
                w.writerow(row)


def _refit(method, tris, fitted: FitResult, config, opt, seed):
    if method == "cgmm":
        s = fitted.settings
        fam = family_from_dict(s["family"])
        cfg = config if config is not None else CgmmConfig.from_dict(s["config"])
        return fit_cgmm(tris, fam, cfg, s.get("shock", False), opt, seed, pin=s.get("pin", "nu"))
    if method == "mle-gamma":
        return fit_mle_gamma(tris[0])
    if method == "mle-tweedie":
        return fit_mle_tweedie(tris[0], fitted.spec.family.p)
    raise ValidationError(f"cannot bootstrap a {method!r} fit")


def _replicate(b, fitted, mask, config, opt, seed_seq, process):
    rng_sim, rng_proc = (np.random.default_rng(s) for s in seed_seq.spawn(2))
    tris, _ = simulate_abrm(fitted.spec, rng_sim, mask, return_full=True)
    try:
        res = _refit(fitted.method, tris, fitted, config, opt, int(seed_seq.generate_state(1)[0]))
    except (NumericalError, ValidationError, np.linalg.LinAlgError, FloatingPointError):
        return None
    if not np.isfinite(res.total_outstanding):
        return None
    if process:
        _, full = simulate_abrm(res.spec, rng_proc, mask, return_full=True)
        out = np.where(mask[None], 0.0, full).sum(axis=2)
    else:
        out = res.outstanding
    return out, np.asarray(res.theta)


def parametric_bootstrap(fitted: FitResult, B=200, config=None, opt=None, seed=0, threads=1, process=True,
                         max_fail=0.2, mask=None) -> BootstrapSummary:
    """Simulate from a fitted model, refit each replicate and summarise reserves.

    Parameters
    ----------
    fitted : FitResult
        A converged ``cgmm``, ``mle-gamma`` or ``mle-tweedie`` fit.
    B : int
        Replicates, at least 2.
    config : CgmmConfig, optional
        Defaults to the configuration stored in ``fitted``.
    opt : OptimizerSettings, optional
    seed : int
        Replicate ``b`` uses stream ``SeedSequence(seed).spawn(B)[b]``.
    threads : int
    process : bool
        Add process variance by drawing the future cells from each refit
        model; otherwise use the refit model mean.
    max_fail : float
        Abort with :class:`NumericalError` if a larger share of refits fails.
    mask : ndarray of bool, optional
        Observed region; standard triangle by default.

    Returns
    -------
    BootstrapSummary
    """
    if B < 2:
        raise ValidationError("the bootstrap needs B >= 2")
    if not fitted.converged:
        raise ValidationError("cannot bootstrap from a non-converged fit")
    if fitted.method == "chain-ladder":
        raise ValidationError("chain ladder has no parametric model to simulate from")
    n_ay, n_dy = fitted.spec.shape
    if mask is None:
        mask = standard_mask(n_ay, n_dy)
    seqs = np.random.SeedSequence(int(seed)).spawn(int(B))
    if threads > 1:
        res = Parallel(n_jobs=threads, prefer="threads")(
            delayed(_replicate)(b, fitted, mask, config, opt, seqs[b], process) for b in range(B)
        )
    else:
        res = [_replicate(b, fitted, mask, config, opt, seqs[b], process) for b in range(B)]
    ok = [r for r in res if r is not None]
    n_failed = B - len(ok)
    if n_failed > max_fail * B or len(ok) < 2:
        raise NumericalError(f"{n_failed} of {B} bootstrap refits failed")
    return BootstrapSummary(
        B=int(B),
        n_failed=n_failed,
        lobs=list(fitted.spec.lobs),
        replicates=np.array([r[0] for r in ok]),
        parameters=np.array([r[1] for r in ok]),
        names=list(fitted.names),
        process=bool(process),
        seed=int(seed),
    )


# ----------------------------------------------------------------- estimators


def _family(name, power, alpha):
    if name == "tweedie":
        return TweedieFamily(power)
    if name == "stable":
        return StableFamily(alpha)
    raise ValidationError(f"family must be 'tweedie' or 'stable', got {name!r}")


class _ReserverMixin:
    def predict(self, X=None):
        """Outstanding reserves per AY: shape ``(n_ay,)`` for one line, else ``(n_lines, n_ay)``."""
        check_is_fitted(self, "result_")
        out = self.result_.outstanding
        return out[0] if out.shape[0] == 1 else out

    @property
    def total_outstanding_(self):
        check_is_fitted(self, "result_")
        return self.result_.total_outstanding


class CGMMReserver(_ReserverMixin, BaseEstimator):
    """Continuum-GMM reserving model.

    Parameters
    ----------
    family : {"tweedie", "stable"}
    power : float
        Tweedie power (ignored for stable).
    alpha : float
        Stable tail index (ignored for Tweedie).
    shock : bool
        Common shock across lines.
    transform, n_points, lam, kernel_policy, grid_scale, logdet_weight, pooled
        See :class:`~artifact.cgmm.CgmmConfig`.
    n_starts, perturb_sd, penalty
        See :class:`OptimizerSettings`.
    random_state : int
    n_jobs : int

    Attributes
    ----------
    result_ : FitResult
    spec_ : AbrmSpec
    """

    def __init__(self, family="tweedie", power=2.0, alpha=1.8, shock=False, transform="mgf", n_points=None,
                 lam=1e-7, kernel_policy="continuous", grid_scale=0.5, logdet_weight=0.25, pooled=False,
                 n_starts=8, perturb_sd=0.2, penalty=0.0, random_state=0, n_jobs=1):
        self.family = family
        self.power = power
        self.alpha = alpha
        self.shock = shock
        self.transform = transform
        self.n_points = n_points
        self.lam = lam
        self.kernel_policy = kernel_policy
        self.grid_scale = grid_scale
        self.logdet_weight = logdet_weight
        self.pooled = pooled
        self.n_starts = n_starts
        self.perturb_sd = perturb_sd
        self.penalty = penalty
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self):
        return CgmmConfig(transform=self.transform, n_points=self.n_points, lam=self.lam,
                          kernel_policy=self.kernel_policy, grid_scale=self.grid_scale,
                          logdet_weight=self.logdet_weight, pooled=self.pooled)

    def fit(self, X, y=None):
        """Fit to a Triangle or a list of aligned Triangles."""
        fam = _family(self.family, self.power, self.alpha)
        opt = OptimizerSettings(n_starts=self.n_starts, perturb_sd=self.perturb_sd, penalty=self.penalty)
        self.result_ = fit_cgmm(X, fam, self._config(), self.shock, opt, self.random_state or 0,
                                threads=self.n_jobs)
        self.spec_ = self.result_.spec
        return self


class GammaMLEReserver(_ReserverMixin, BaseEstimator):
    """Gamma maximum-likelihood reserving on one triangle.

    Attributes
    ----------
    result_ : FitResult
    spec_ : AbrmSpec
    """

    def fit(self, X, y=None):
        self.result_ = fit_mle_gamma(X)
        self.spec_ = self.result_.spec
        return self


class ChainLadderReserver(_ReserverMixin, BaseEstimator):
    """Volume-weighted chain ladder.

    Attributes
    ----------
    result_ : FitResult
    dev_factors_ : list of ndarray
    """

    def fit(self, X, y=None):
        self.result_ = fit_chain_ladder(X)
        self.dev_factors_ = [np.asarray(f) for f in self.result_.settings["dev_factors"]]
        return self
