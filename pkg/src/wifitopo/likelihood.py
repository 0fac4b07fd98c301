"""Per-AP RSSI likelihood estimators and segment fingerprints.

Three representations are supported:

* :class:`Pmf` -- relative frequencies over the integer support [-100, -10],
  optionally Laplace-smoothed;
* :class:`Normal` -- sample mean and unbiased variance (floored);
* :class:`Kde` -- Gaussian kernel density estimate with fixed bandwidth.

An AP without readings is represented by full concentration at -100 dBm in
every representation.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, TextIO

import numpy as np
from scipy.special import ndtr

from .errors import ParameterError, ValidationError
from .ingest import INVISIBLE_RSSI, RSSI_MAX, RSSI_MIN

SUPPORT = np.arange(RSSI_MIN, RSSI_MAX + 1)
SUPPORT_SIZE = SUPPORT.size

DEFAULT_BANDWIDTH = 2.0
DEFAULT_LAPLACE_EPSILON = 1e-6
DEFAULT_SIGMA_MIN = 1.0

METHODS = ("pmf", "normal", "kde")

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class EvaluationGrid:
    """Uniform grid of ``(hi - lo) / step`` cells on the RSSI axis (dBm)."""

    lo: float = -105.0
    hi: float = -5.0
    step: float = 0.5

    def __post_init__(self):
        if not self.step > 0:
            raise ParameterError("grid step must be positive")
        if not self.lo < self.hi:
            raise ParameterError("grid needs lo < hi")
        n = (self.hi - self.lo) / self.step
        if abs(n - round(n)) > 1e-9:
            raise ParameterError("(hi - lo) / step must be an integer")

    @property
    def n_cells(self) -> int:
        return int(round((self.hi - self.lo) / self.step))

    @property
    def midpoints(self) -> np.ndarray:
        return self.lo + self.step * (np.arange(self.n_cells) + 0.5)

    @property
    def right_edges(self) -> np.ndarray:
        return self.lo + self.step * (np.arange(self.n_cells) + 1.0)

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.step * np.arange(self.n_cells + 1)

    def covers_support(self) -> bool:
        return self.lo <= RSSI_MIN - 0.5 and self.hi >= RSSI_MAX


DEFAULT_GRID = EvaluationGrid()


class UnivariateLikelihood:
    """Common interface of the three representations."""

    kind = None

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def same_distribution(self, other) -> bool:
        raise NotImplementedError

    def _cached(self, key, fn):
        cache = self._cache
        if key not in cache:
            cache[key] = fn()
        return cache[key]

    def grid_pdf(self, grid: EvaluationGrid) -> np.ndarray:
        return self._cached(("pdf", grid), lambda: np.asarray(self.pdf(grid.midpoints), float))

    def grid_cdf(self, grid: EvaluationGrid) -> np.ndarray:
        """Closed-form CDF on the grid's edges (``n_cells + 1`` values)."""
        return self._cached(("cdf", grid), lambda: np.asarray(self.cdf(grid.edges), float))


@dataclass(frozen=True, eq=False)
class Pmf(UnivariateLikelihood):
    """Probability mass over the integer support ``SUPPORT``."""

    probs: np.ndarray
    source_count: int = 0
    laplace_epsilon: float = 0.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    kind = "pmf"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (SUPPORT_SIZE,):
            raise ValidationError(f"PMF needs {SUPPORT_SIZE} probabilities")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValidationError("PMF must be non-negative and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def as_dict(self) -> dict:
        """Sparse ``{rssi: probability}`` map of the non-zero entries."""
        return {int(r): float(v) for r, v in zip(SUPPORT, self.probs) if v > 0}

    @property
    def strictly_positive(self) -> bool:
        return bool(np.all(self.probs > 0))

    def pmf(self, r):
        r = np.asarray(r)
        idx = r - RSSI_MIN
        inside = (idx >= 0) & (idx < SUPPORT_SIZE) & (r == np.round(r))
        out = np.zeros(r.shape, dtype=float)
        out[inside] = self.probs[idx[inside].astype(int)]
        return out

    def pdf(self, x):
        # mass sits on the integer; step-free callers should use pmf()
        return self.pmf(x)

    def cdf(self, x):
        c = np.cumsum(self.probs)
        idx = np.floor(np.asarray(x, dtype=float)) - RSSI_MIN
        out = np.where(idx < 0, 0.0, c[np.clip(idx, 0, SUPPORT_SIZE - 1).astype(int)])
        return out

    def mean(self) -> float:
        return float(np.dot(self.probs, SUPPORT))

    def same_distribution(self, other) -> bool:
        return isinstance(other, Pmf) and np.array_equal(self.probs, other.probs)


@dataclass(frozen=True, eq=False)
class Normal(UnivariateLikelihood):
    mu: float
    sigma2: float
    source_count: int = 0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    kind = "normal"

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValidationError("Normal variance must be positive")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * _SQRT_2PI)

    def cdf(self, x):
        return ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def mean(self) -> float:
        return float(self.mu)

    def same_distribution(self, other) -> bool:
        return isinstance(other, Normal) and self.mu == other.mu and self.sigma2 == other.sigma2


@dataclass(frozen=True, eq=False)
class Kde(UnivariateLikelihood):
    """Gaussian KDE, a mixture of equal-weight Gaussians of std ``h`` at the samples."""

    samples: np.ndarray
    h: float = DEFAULT_BANDWIDTH
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    kind = "kde"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).ravel()
        if s.size == 0:
            raise ValidationError("KDE needs at least one sample")
        if not self.h > 0:
            raise ParameterError(f"bandwidth must be positive, got {self.h}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        # RSSI samples are integers, so collapsing duplicates is a big saving
        centres, counts = np.unique(s, return_counts=True)
        object.__setattr__(self, "_centres", centres)
        object.__setattr__(self, "_weights", counts / s.size)

    @property
    def source_count(self) -> int:
        return int(self.samples.size)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self._centres) / self.h
        return np.exp(-0.5 * z * z) @ self._weights / (self.h * _SQRT_2PI)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return ndtr((x[..., None] - self._centres) / self.h) @ self._weights

    def mean(self) -> float:
        return float(self.samples.mean())

    def same_distribution(self, other) -> bool:
        return (isinstance(other, Kde) and self.h == other.h
                and np.array_equal(self._centres, other._centres)
                and np.array_equal(self._weights, other._weights))


# --------------------------------------------------------------------------
# estimators


def _check_values(values) -> np.ndarray:
    v = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if v.size and (np.any(v < RSSI_MIN) or np.any(v > RSSI_MAX)):
        raise ValidationError(f"RSSI values must lie in [{RSSI_MIN}, {RSSI_MAX}]")
    return v


def estimate_pmf(values: Iterable[int], laplace_epsilon: float = 0.0) -> Pmf:
    """Normalised histogram with unit bins; empty input puts all mass on -100.

    With ``laplace_epsilon > 0`` every support point receives that extra mass
    before renormalisation.
    """
    if laplace_epsilon < 0:
        raise ParameterError("laplace_epsilon must be >= 0")
    v = _check_values(values)
    if v.size and np.any(v != np.round(v)):
        raise ValidationError("PMF estimation needs integer RSSI values")
    counts = np.zeros(SUPPORT_SIZE)
    if v.size:
        np.add.at(counts, v.astype(int) - RSSI_MIN, 1.0)
    else:
        counts[INVISIBLE_RSSI - RSSI_MIN] = 1.0
    probs = counts / counts.sum()
    if laplace_epsilon > 0:
        probs = (probs + laplace_epsilon) / (1.0 + laplace_epsilon * SUPPORT_SIZE)
        probs /= probs.sum()
    return Pmf(probs, int(v.size), float(laplace_epsilon))


def estimate_normal(values: Iterable[int], sigma_min: float = DEFAULT_SIGMA_MIN) -> Normal:
    """Sample mean and unbiased variance, with the variance floored at ``sigma_min**2``."""
    v = _check_values(values)
    floor = sigma_min * sigma_min
    if v.size == 0:
        return Normal(float(INVISIBLE_RSSI), floor, 0)
    mu = float(v.mean())
    var = float(np.var(v, ddof=1)) if v.size > 1 else 0.0
    return Normal(mu, max(var, floor), int(v.size))


def estimate_kde(values: Iterable[int], h: float = DEFAULT_BANDWIDTH) -> Kde:
    if not h > 0:
        raise ParameterError(f"bandwidth must be positive, got {h}")
    v = _check_values(values)
    if v.size == 0:
        v = np.array([float(INVISIBLE_RSSI)])
    return Kde(v, float(h))


def evaluate_on_grid(lik: UnivariateLikelihood, grid: EvaluationGrid = DEFAULT_GRID):
    """Density at cell midpoints and CDF at cell right edges.

    PMF mass at integer ``r`` is assigned to the cell ``(r - step, r]`` and
    spread as density ``mass / step``; its CDF is the cumulative sum. If the
    grid does not cover [-100, -10] a warning reports the mass outside it.
    """
    if isinstance(lik, Pmf):
        mass = np.zeros(grid.n_cells)
        cell = np.ceil((SUPPORT - grid.lo) / grid.step - 1e-9).astype(int) - 1
        ok = (cell >= 0) & (cell < grid.n_cells)
        np.add.at(mass, cell[ok], lik.probs[ok])
        pdf = mass / grid.step
        cdf = np.cumsum(mass) + float(lik.probs[SUPPORT <= grid.lo].sum())
    else:
        pdf = np.asarray(lik.pdf(grid.midpoints), float)
        cdf = np.asarray(lik.cdf(grid.right_edges), float)
    if not grid.covers_support():
        below = float(lik.cdf(np.array([grid.lo]))[0])
        above = 1.0 - float(cdf[-1])
        warnings.warn(f"grid [{grid.lo}, {grid.hi}] does not cover the RSSI support; "
                      f"tail mass below={below:.3g} above={above:.3g}", stacklevel=2)
    return pdf, cdf


@lru_cache(maxsize=64)
def invisible_likelihood(method: str, *, h=DEFAULT_BANDWIDTH, laplace_epsilon=0.0,
                         sigma_min=DEFAULT_SIGMA_MIN) -> UnivariateLikelihood:
    return _estimate(method, (), h, laplace_epsilon, sigma_min)


def _estimate(method, values, h, laplace_epsilon, sigma_min):
    if method == "pmf":
        return estimate_pmf(values, laplace_epsilon)
    if method == "normal":
        return estimate_normal(values, sigma_min)
    if method == "kde":
        return estimate_kde(values, h)
    raise ParameterError(f"unknown estimator {method!r}; expected one of {METHODS}")


# --------------------------------------------------------------------------
# fingerprints


@dataclass(frozen=True)
class SegmentFingerprint:
    """Factorised likelihood of one segment: one univariate likelihood per AP."""

    segment_id: int
    per_ap: dict
    method: str
    invisibility_modeled: bool
    options: dict = field(default_factory=dict)

    def invisible(self) -> UnivariateLikelihood:
        """The likelihood used for an AP this segment never saw."""
        return invisible_likelihood(self.method, **self.options)

    def get(self, bssid) -> UnivariateLikelihood:
        lik = self.per_ap.get(bssid)
        return lik if lik is not None else self.invisible()


def estimator_options(method: str, *, h=DEFAULT_BANDWIDTH, laplace_epsilon=0.0,
                      sigma_min=DEFAULT_SIGMA_MIN) -> dict:
    """Normalised option dict; only the options relevant to ``method`` are kept."""
    if method == "pmf":
        return {"laplace_epsilon": float(laplace_epsilon)}
    if method == "normal":
        return {"sigma_min": float(sigma_min)}
    if method == "kde":
        return {"h": float(h)}
    raise ParameterError(f"unknown estimator {method!r}; expected one of {METHODS}")


def fingerprint_segment(seg, universe=None, method: str = "kde", *, invisibility: bool = True,
                        h=DEFAULT_BANDWIDTH, laplace_epsilon=0.0,
                        sigma_min=DEFAULT_SIGMA_MIN) -> SegmentFingerprint:
    """Estimate one likelihood per AP of a WiFi segment.

    With ``invisibility`` on, every AP of ``universe`` gets an entry; APs the
    segment never reported get the empty-input likelihood. Any -100
    pseudo-observations already in the segment are used as ordinary readings.
    """
    opts = estimator_options(method, h=h, laplace_epsilon=laplace_epsilon, sigma_min=sigma_min)
    if not seg.observations:
        raise ValidationError(f"segment {seg.segment_id} has no observations")
    values = defaultdict(list)
    for o in seg.observations:
        values[o.bssid].append(o.rssi)
    aps = set(values)
    if invisibility and universe is not None:
        aps |= set(universe)
    per_ap = {b: _estimate(method, values.get(b, ()), **_kw(opts)) for b in sorted(aps)}
    return SegmentFingerprint(seg.segment_id, per_ap, method, bool(invisibility), opts)


def _kw(opts):
    return dict(h=opts.get("h", DEFAULT_BANDWIDTH),
                laplace_epsilon=opts.get("laplace_epsilon", 0.0),
                sigma_min=opts.get("sigma_min", DEFAULT_SIGMA_MIN))


# --------------------------------------------------------------------------
# JSONL serialisation


def _payload(lik):
    if isinstance(lik, Pmf):
        return {str(k): v for k, v in lik.as_dict().items()}
    if isinstance(lik, Normal):
        return {"mu": lik.mu, "sigma2": lik.sigma2, "n": lik.source_count}
    return {"samples": [float(s) for s in lik.samples], "h": lik.h}


def _from_payload(method, payload, opts):
    if method == "pmf":
        probs = np.zeros(SUPPORT_SIZE)
        for k, v in payload.items():
            probs[int(k) - RSSI_MIN] = v
        return Pmf(probs, 0, opts.get("laplace_epsilon", 0.0))
    if method == "normal":
        return Normal(float(payload["mu"]), float(payload["sigma2"]), int(payload.get("n", 0)))
    if method == "kde":
        return Kde(np.asarray(payload["samples"], float), float(payload["h"]))
    raise ParameterError(f"unknown estimator {method!r}")


def write_fingerprints(fps, stream: TextIO, config_hash: Optional[str] = None) -> None:
    for fp in fps:
        rec = {"segment_id": fp.segment_id, "method": fp.method,
               "invisibility": fp.invisibility_modeled, "options": fp.options,
               "per_ap": {b: _payload(l) for b, l in sorted(fp.per_ap.items())}}
        if config_hash is not None:
            rec["config_hash"] = config_hash
        stream.write(json.dumps(rec, sort_keys=True) + "\n")


def read_fingerprints(stream: TextIO) -> list:
    out = []
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            method, opts = rec["method"], rec.get("options", {})
            per_ap = {b: _from_payload(method, p, opts) for b, p in rec["per_ap"].items()}
            out.append(SegmentFingerprint(rec["segment_id"], per_ap, method,
                                          bool(rec.get("invisibility", False)), opts))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"line {lineno}: bad fingerprint record ({exc})") from None
    return out
