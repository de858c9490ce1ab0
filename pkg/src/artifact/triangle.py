"""Run-off triangles, the chain-ladder baseline and triangle simulation.

Triangles hold *incremental* claims ``x[i, j]`` indexed by accident year
``i`` and development year ``j`` (both zero-based in code, one-based in
files).  Unobserved cells are ``nan``.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ValidationError

__all__ = [
    "Triangle",
    "DevelopmentPattern",
    "ChainLadderResult",
    "chain_ladder",
    "simulate_triangle",
    "outstanding_mean",
    "standard_mask",
    "read_triangles",
    "write_triangles",
    "read_premiums",
    "load_schedule_p",
    "SCHEDULE_P_SHA256",
    "bundled_checksums",
]

# sha256 of the bundled data files, checked by the test-suite
SCHEDULE_P_SHA256 = {
    "schedule_p.csv": "876d89c9e81a1a5c500fb5333b03fc9120ad1128bf85b493b17b1118fcd8d817",
    "schedule_p_premium.csv": "6d491836673816a28d53a3ba6223f98aac2c6a544cab225c334a4eadcd456f79",
}


def standard_mask(n_ay: int, n_dy: int | None = None) -> np.ndarray:
    """Observed region of a standard triangle: ``i + j <= n_ay - 1``."""
    n_dy = n_ay if n_dy is None else n_dy
    i, j = np.indices((n_ay, n_dy))
    return i + j <= n_ay - 1


class Triangle:
    """Incremental run-off triangle.

    Parameters
    ----------
    values : array_like of shape (n_ay, n_dy)
        Incremental claims with ``nan`` marking unobserved cells.  If
        ``mask`` is omitted, the observed region is wherever ``values`` is
        finite.
    mask : array_like of bool, optional
        Explicit observed region.  Values outside it are discarded.
    lob : str, default ""
        Line-of-business label used in files.
    premium : array_like of shape (n_ay,), optional
        Earned premium per accident year, carried but unused by the models.

    Notes
    -----
    Instances are immutable; the arrays are read-only views.
    """

    def __init__(self, values, mask=None, lob: str = "", premium=None):
        v = np.array(values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValidationError(f"triangle values must be a non-empty 2-D array, got shape {v.shape}")
        m = np.isfinite(v) if mask is None else np.array(mask, dtype=bool)
        if m.shape != v.shape:
            raise ValidationError("mask shape does not match values")
        if np.any(m & ~np.isfinite(v)):
            raise ValidationError("observed cells must hold finite values")
        if not m.any():
            raise ValidationError("triangle has no observed cells")
        v[~m] = np.nan
        v.setflags(write=False)
        m.setflags(write=False)
        self._values, self._mask, self.lob = v, m, str(lob)
        if premium is not None:
            premium = np.array(premium, dtype=float)
            if premium.shape != (v.shape[0],):
                raise ValidationError("premium must have one entry per accident year")
            premium.setflags(write=False)
        self._premium = premium

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    @property
    def premium(self):
        return self._premium

    @property
    def shape(self):
        return self._values.shape

    @property
    def n_ay(self) -> int:
        return self._values.shape[0]

    @property
    def n_dy(self) -> int:
        return self._values.shape[1]

    @property
    def is_standard(self) -> bool:
        return bool(np.array_equal(self._mask, standard_mask(self.n_ay, self.n_dy)))

    def cells(self):
        """Return ``(i, j, x)`` arrays for the observed cells in row-major order."""
        i, j = np.nonzero(self._mask)
        return i, j, self._values[i, j]

    def cumulative(self) -> np.ndarray:
        """Cumulative claims along development, ``nan`` where unobserved."""
        c = np.nancumsum(np.where(self._mask, self._values, 0.0), axis=1)
        return np.where(self._mask, c, np.nan)

    def latest(self) -> np.ndarray:
        """Cumulative claims to date per accident year."""
        return np.where(self._mask, self._values, 0.0).sum(axis=1)

    def with_values(self, values) -> "Triangle":
        """Same observed region and metadata, new values."""
        return Triangle(np.where(self._mask, values, np.nan), self._mask, self.lob, self._premium)

    def __eq__(self, other):
        if not isinstance(other, Triangle):
            return NotImplemented
        return (
            self.lob == other.lob
            and np.array_equal(self._mask, other._mask)
            and np.array_equal(self._values, other._values, equal_nan=True)
        )

    def __repr__(self):
        return f"Triangle(lob={self.lob!r}, n_ay={self.n_ay}, n_dy={self.n_dy}, observed={int(self._mask.sum())})"


@dataclass
class DevelopmentPattern:
    """Multiplicative mean structure ``E[x_ij] = eta_i * nu_j`` with scale ``gamma``.

    Parameters
    ----------
    eta : array_like of shape (n_ay,)
        Accident-year levels.
    nu : array_like of shape (n_dy,)
        Development pattern.
    gamma : float
        Dispersion (Tweedie) or scale (stable).
    weights : array_like of shape (n_ay, n_dy), optional
        Tweedie cell weights; the cell dispersion is ``gamma / w_ij``.
        Defaults to one everywhere.
    """

    eta: np.ndarray
    nu: np.ndarray
    gamma: float
    weights: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        self.nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        self.gamma = float(self.gamma)
        if self.eta.ndim != 1 or self.nu.ndim != 1:
            raise ValidationError("eta and nu must be vectors")
        if np.any(~np.isfinite(self.eta)) or np.any(~np.isfinite(self.nu)):
            raise ValidationError("eta and nu must be finite")
        if np.any(self.eta <= 0) or np.any(self.nu <= 0):
            raise ValidationError("eta and nu must be positive")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        if self.weights is None:
            self.weights = np.ones((self.eta.size, self.nu.size))
        else:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != (self.eta.size, self.nu.size) or np.any(self.weights <= 0):
                raise ValidationError("weights must be a positive (n_ay, n_dy) matrix")

    @property
    def n_ay(self) -> int:
        return self.eta.size

    @property
    def n_dy(self) -> int:
        return self.nu.size

    def means(self) -> np.ndarray:
        """Matrix of cell means ``eta_i * nu_j``."""
        return np.outer(self.eta, self.nu)

    def normalized(self, pin: str = "nu") -> "DevelopmentPattern":
        """Rescale so that ``nu[0] == 1`` (``pin='nu'``) or ``eta[0] == 1`` (``pin='eta'``)."""
        if pin == "nu":
            c = self.nu[0]
        elif pin == "eta":
            c = 1.0 / self.eta[0]
        else:
            raise ValidationError(f"pin must be 'nu' or 'eta', got {pin!r}")
        return DevelopmentPattern(self.eta * c, self.nu / c, self.gamma, self.weights)

    def to_dict(self):
        d = {"eta": self.eta.tolist(), "nu": self.nu.tolist(), "gamma": self.gamma}
        if not np.all(self.weights == 1.0):
            d["weights"] = self.weights.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["eta"], d["nu"], d["gamma"], d.get("weights"))
        except KeyError as exc:
            raise ValidationError(f"development pattern is missing field {exc}") from None


@dataclass
class ChainLadderResult:
    """Output of :func:`chain_ladder`.

    Attributes
    ----------
    dev_factors : ndarray of shape (n_dy - 1,)
        Volume-weighted age-to-age factors.
    completed : ndarray of shape (n_ay, n_dy)
        Incremental triangle with the unobserved cells projected.
    ultimate : ndarray of shape (n_ay,)
    latest : ndarray of shape (n_ay,)
    outstanding_by_ay : ndarray of shape (n_ay,)
    """

    dev_factors: np.ndarray
    completed: np.ndarray
    ultimate: np.ndarray
    latest: np.ndarray
    outstanding_by_ay: np.ndarray

    @property
    def total_outstanding(self) -> float:
        return float(self.outstanding_by_ay.sum())

    def incremental_pattern(self) -> np.ndarray:
        """Share of ultimate emerging in each development year."""
        cdf = np.concatenate([np.cumprod(self.dev_factors[::-1])[::-1], [1.0]])
        share = 1.0 / cdf
        return np.diff(np.concatenate([[0.0], share]))


def chain_ladder(tri: Triangle) -> ChainLadderResult:
    """Volume-weighted chain ladder on cumulative claims.

    The factor for column ``j -> j+1`` uses every accident year observed at
    both ages.  Each row is projected from its last observed cumulative value.

    Raises
    ------
    ValidationError
        If a column has no observed pair or a zero cumulative denominator, or
        if a row has a gap in its observed cells.
    """
    m = tri.mask
    for i in range(tri.n_ay):
        row = m[i]
        if row.any():
            last = np.nonzero(row)[0][-1]
            if not row[: last + 1].all():
                raise ValidationError(f"accident year {i + 1} has a gap in its observed cells")
        else:
            raise ValidationError(f"accident year {i + 1} has no observed cells")
    cum = np.where(m, np.nancumsum(np.where(m, tri.values, 0.0), axis=1), np.nan)
    n_dy = tri.n_dy
    f = np.empty(n_dy - 1)
    for j in range(n_dy - 1):
        both = m[:, j] & m[:, j + 1]
        if not both.any():
            raise ValidationError(f"development column {j + 1}->{j + 2} has no observed pair")
        den = cum[both, j].sum()
        if den == 0:
            raise ValidationError(f"zero cumulative denominator in column {j + 1}")
        f[j] = cum[both, j + 1].sum() / den
    completed_cum = cum.copy()
    latest = np.empty(tri.n_ay)
    for i in range(tri.n_ay):
        last = np.nonzero(m[i])[0][-1]
        latest[i] = cum[i, last]
        for j in range(last + 1, n_dy):
            completed_cum[i, j] = completed_cum[i, j - 1] * f[j - 1]
    completed = np.diff(np.concatenate([np.zeros((tri.n_ay, 1)), completed_cum], axis=1), axis=1)
    ultimate = completed_cum[:, -1]
    return ChainLadderResult(f, completed, ultimate, latest, ultimate - latest)


def simulate_triangle(pattern: DevelopmentPattern, family, rng, mask=None, lob: str = "", return_full=False):
    """Draw an incremental triangle with independent cells.

    Parameters
    ----------
    pattern : DevelopmentPattern
    family : TweedieFamily or StableFamily
        Tweedie cells are ``Tw_p(eta_i nu_j, gamma / w_ij)``; stable cells
        are ``S_alpha(eta_i nu_j, gamma, 1)``.
    rng : numpy.random.Generator
    mask : array_like of bool, optional
        Observed region; defaults to the standard upper-left triangle.
    return_full : bool, default False
        Also return the full square of draws, including future cells.

    Returns
    -------
    Triangle or (Triangle, ndarray)
    """
    means = pattern.means()
    scale = pattern.gamma / pattern.weights if family.name == "tweedie" else np.full(means.shape, pattern.gamma)
    full = family.sample(means, scale, rng)
    mask = standard_mask(pattern.n_ay, pattern.n_dy) if mask is None else np.asarray(mask, bool)
    tri = Triangle(np.where(mask, full, np.nan), mask, lob)
    return (tri, full) if return_full else tri


def outstanding_mean(pattern: DevelopmentPattern, tri: Triangle, systematic_mean=0.0) -> np.ndarray:
    """Model mean of the unobserved cells, summed per accident year.

    Parameters
    ----------
    pattern : DevelopmentPattern
    tri : Triangle
        Supplies the observed region.
    systematic_mean : float or array_like of shape (n_ay, n_dy), default 0
        Additive mean contribution of a common shock in each cell.
    """
    if (pattern.n_ay, pattern.n_dy) != tri.shape:
        raise ValidationError(f"pattern is {pattern.n_ay}x{pattern.n_dy} but triangle is {tri.n_ay}x{tri.n_dy}")
    cell = pattern.means() + np.broadcast_to(np.asarray(systematic_mean, dtype=float), tri.shape)
    return np.where(tri.mask, 0.0, cell).sum(axis=1)


# --------------------------------------------------------------------------- io

_HEADER = ["lob", "accident_year", "development_year", "value"]


def read_triangles(path, premium_path=None) -> dict[str, Triangle]:
    """Read the long CSV format into triangles keyed by line of business.

    Each row is ``lob,accident_year,development_year,value`` with one-based
    years.  The triangle shape is the largest year seen in the file.
    """
    rows = _read_csv(path, _HEADER)
    by_lob: dict[str, list] = {}
    for r in rows:
        try:
            i, j, v = int(r["accident_year"]), int(r["development_year"]), float(r["value"])
        except ValueError:
            raise ValidationError(f"{path}: non-numeric entry in row {r}") from None
        if i < 1 or j < 1:
            raise ValidationError(f"{path}: years are one-based, got ({i}, {j})")
        by_lob.setdefault(r["lob"], []).append((i, j, v))
    if not by_lob:
        raise ValidationError(f"{path}: no data rows")
    premiums = read_premiums(premium_path) if premium_path is not None else {}
    n_ay = max(i for cells in by_lob.values() for i, _, _ in cells)
    n_dy = max(j for cells in by_lob.values() for _, j, _ in cells)
    out = {}
    for lob, cells in by_lob.items():
        v = np.full((n_ay, n_dy), np.nan)
        for i, j, x in cells:
            if np.isfinite(v[i - 1, j - 1]):
                raise ValidationError(f"{path}: duplicate cell ({lob}, {i}, {j})")
            v[i - 1, j - 1] = x
        prem = premiums.get(lob)
        if prem is not None:
            prem = np.resize(prem, n_ay)
        out[lob] = Triangle(v, lob=lob, premium=prem)
    return out


def read_premiums(path) -> dict[str, np.ndarray]:
    """Read ``lob,accident_year,premium`` rows."""
    rows = _read_csv(path, ["lob", "accident_year", "premium"])
    tmp: dict[str, dict[int, float]] = {}
    for r in rows:
        tmp.setdefault(r["lob"], {})[int(r["accident_year"])] = float(r["premium"])
    return {lob: np.array([d[k] for k in sorted(d)]) for lob, d in tmp.items()}


def write_triangles(path, triangles) -> None:
    """Write triangles in the long CSV format, one row per observed cell."""
    if isinstance(triangles, Triangle):
        triangles = [triangles]
    if isinstance(triangles, dict):
        triangles = list(triangles.values())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_HEADER)
        for k, tri in enumerate(triangles):
            lob = tri.lob or f"line{k + 1}"
            for i, j, x in zip(*tri.cells()):
                w.writerow([lob, i + 1, j + 1, repr(float(x))])


def _read_csv(path, header):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != header:
            raise ValidationError(f"{path}: expected header {','.join(header)}")
        return [{k.strip(): (v or "").strip() for k, v in r.items()} for r in reader]


def _data_file(name):
    return resources.files("artifact") / "data" / name


def load_schedule_p() -> dict[str, Triangle]:
    """Bundled personal and commercial auto triangles ($1,000s) with premiums."""
    with resources.as_file(_data_file("schedule_p.csv")) as p, resources.as_file(
        _data_file("schedule_p_premium.csv")
    ) as q:
        return read_triangles(Path(p), Path(q))


def bundled_checksums() -> dict[str, str]:
    return {name: hashlib.sha256(_data_file(name).read_bytes()).hexdigest() for name in SCHEDULE_P_SHA256}
