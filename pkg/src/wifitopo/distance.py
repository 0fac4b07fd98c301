"""Distances between RSSI likelihoods and between segment fingerprints.

Univariate measures (natural log throughout):

=====================  =========================================
``kl``                 KL(p || q)
``symmetrized_kl``     KL(p || q) + KL(q || p)
``jensen_shannon``     (KL(p || m) + KL(q || m)) / 2, m = (p + q) / 2
``bhattacharyya_coef`` BC = integral of sqrt(p q)   (a similarity)
``bhattacharyya``      -ln BC
``hellinger``          sqrt(1 - BC)
``kolmogorov_smirnov`` sup |P - Q|
``emd``                integral of |P - Q|
``mean_abs_diff``      |E_p - E_q|
=====================  =========================================

PMF pairs are summed exactly over the integer support. Normal and KDE pairs
use trapezoidal quadrature on an :class:`EvaluationGrid` for density
integrals and closed-form CDFs (sampled on the grid edges) for KS and EMD.
Segment distances aggregate per-AP distances with an l1 or l2 norm.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, TextIO

import numpy as np
from scipy.integrate import trapezoid

from .errors import ConfigurationError, NonOverlapError, ParameterError, ValidationError
from .likelihood import DEFAULT_GRID, EvaluationGrid, Pmf, SegmentFingerprint

DENSITY_FLOOR = 1e-300
DEFAULT_BHATTACHARYYA_CAP = 50.0


class Measure(str, Enum):
    KL = "kl"
    SYMMETRIZED_KL = "symmetrized_kl"
    JENSEN_SHANNON = "jensen_shannon"
    BHATTACHARYYA_COEF = "bhattacharyya_coef"
    BHATTACHARYYA = "bhattacharyya"
    HELLINGER = "hellinger"
    KOLMOGOROV_SMIRNOV = "kolmogorov_smirnov"
    EMD = "emd"
    MEAN_ABS_DIFF = "mean_abs_diff"

    def __str__(self):
        return self.value


#: measures usable for segment aggregation and distance matrices
SYMMETRIC_DISTANCES = tuple(m for m in Measure if m not in (Measure.KL, Measure.BHATTACHARYYA_COEF))

#: measures for which PMF inputs should be Laplace-smoothed upstream
NEEDS_SMOOTHING = (Measure.KL, Measure.SYMMETRIZED_KL, Measure.JENSEN_SHANNON,
                   Measure.BHATTACHARYYA_COEF, Measure.BHATTACHARYYA, Measure.HELLINGER)


def as_measure(m) -> Measure:
    if isinstance(m, Measure):
        return m
    try:
        return Measure(str(m).lower())
    except ValueError:
        raise ParameterError(f"unknown measure {m!r}; expected one of "
                             f"{[x.value for x in Measure]}") from None


def as_norm(norm) -> int:
    if norm in (1, 2, "1", "2", "l1", "l2", "L1", "L2"):
        return int(str(norm)[-1])
    raise ParameterError(f"norm must be 1 or 2, got {norm!r}")


# --------------------------------------------------------------------------
# discrete kernels


def _kl_discrete(p, q):
    mask = p > 0
    if np.any(q[mask] == 0):
        raise NonOverlapError("KL divergence undefined: q has zero mass where p does not; "
                              "apply Laplace smoothing to PMFs")
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def _jsd_discrete(p, q):
    m = 0.5 * (p + q)
    return 0.5 * (_kl_discrete(p, m) + _kl_discrete(q, m))


# --------------------------------------------------------------------------
# continuous kernels (grid quadrature)


def _kl_grid(p, q, step):
    # 0 log 0 = 0 below the floor; q floored so Gaussian tails cannot underflow to 0
    mask = p >= DENSITY_FLOOR
    integrand = np.zeros(p.shape)
    integrand[mask] = p[mask] * np.log(p[mask] / np.maximum(q[mask], DENSITY_FLOOR))
    return float(trapezoid(integrand, dx=step))


def _jsd_grid(p, q, step):
    m = 0.5 * (p + q)
    return 0.5 * (_kl_grid(p, m, step) + _kl_grid(q, m, step))


def _bc(p, q, grid):
    if isinstance(p, Pmf):
        return float(np.sum(np.sqrt(p.probs * q.probs)))
    return float(trapezoid(np.sqrt(p.grid_pdf(grid) * q.grid_pdf(grid)), dx=grid.step))


def _univariate(p, q, m: Measure, grid: EvaluationGrid, cap):
    """Return ``(value, capped)`` for one pair of likelihoods."""
    if type(p) is not type(q):
        raise ConfigurationError(f"cannot compare {type(p).__name__} with {type(q).__name__}")
    if p.same_distribution(q):
        return (1.0 if m is Measure.BHATTACHARYYA_COEF else 0.0), False

    discrete = isinstance(p, Pmf)
    if m is Measure.MEAN_ABS_DIFF:
        return abs(p.mean() - q.mean()), False

    if m in (Measure.KOLMOGOROV_SMIRNOV, Measure.EMD):
        if discrete:
            diff = np.abs(np.cumsum(p.probs) - np.cumsum(q.probs))
            # unit spacing between integer support points
            return float(diff.max() if m is Measure.KOLMOGOROV_SMIRNOV else diff.sum()), False
        diff = np.abs(p.grid_cdf(grid) - q.grid_cdf(grid))
        if m is Measure.KOLMOGOROV_SMIRNOV:
            return float(diff.max()), False
        return float(trapezoid(diff, dx=grid.step)), False

    if m in (Measure.KL, Measure.SYMMETRIZED_KL, Measure.JENSEN_SHANNON):
        if discrete:
            a, b, kl, jsd = p.probs, q.probs, _kl_discrete, _jsd_discrete
        else:
            a, b = p.grid_pdf(grid), q.grid_pdf(grid)
            kl = lambda x, y: _kl_grid(x, y, grid.step)  # noqa: E731
            jsd = lambda x, y: _jsd_grid(x, y, grid.step)  # noqa: E731
        if m is Measure.KL:
            return max(kl(a, b), 0.0), False
        if m is Measure.SYMMETRIZED_KL:
            return max(kl(a, b) + kl(b, a), 0.0), False
        return min(max(jsd(a, b), 0.0), math.log(2.0)), False

    bc = min(max(_bc(p, q, grid), 0.0), 1.0)
    if m is Measure.BHATTACHARYYA_COEF:
        return bc, False
    if m is Measure.HELLINGER:
        return math.sqrt(max(1.0 - bc, 0.0)), False
    # Bhattacharyya distance
    if bc <= 0 and cap is None:
        raise NonOverlapError("Bhattacharyya distance undefined: distributions do not overlap")
    value = -math.log(bc) if bc > 0 else math.inf
    if cap is not None and value > cap:
        return float(cap), True
    return max(value, 0.0), False


def univariate_distance(p, q, measure, grid: EvaluationGrid = DEFAULT_GRID,
                        bhattacharyya_cap: Optional[float] = DEFAULT_BHATTACHARYYA_CAP) -> float:
    """Distance (or, for ``bhattacharyya_coef``, similarity) between two likelihoods.

    Parameters
    ----------
    p, q : UnivariateLikelihood
        Must be the same representation.
    measure : Measure or str
    grid : EvaluationGrid
        Quadrature grid for Normal/KDE inputs; ignored for PMFs.
    bhattacharyya_cap : float or None
        Value returned by the Bhattacharyya distance when the overlap
        vanishes (or ``-ln BC`` exceeds it). ``None`` raises instead.

    Raises
    ------
    NonOverlapError
        KL-type measure on PMFs where ``q`` is zero but ``p`` is not, or an
        uncapped Bhattacharyya distance between non-overlapping PMFs.
    """
    return _univariate(p, q, as_measure(measure), grid, bhattacharyya_cap)[0]


# --------------------------------------------------------------------------
# segment level


def _check_pair(a: SegmentFingerprint, b: SegmentFingerprint, m: Measure):
    if m not in SYMMETRIC_DISTANCES:
        raise ConfigurationError(f"{m.value} cannot be aggregated into a segment distance")
    if a.method != b.method or a.options != b.options:
        raise ConfigurationError(
            f"fingerprints {a.segment_id} and {b.segment_id} use different estimators: "
            f"{a.method} {a.options} vs {b.method} {b.options}")


def _segment_distance(a, b, m, norm, grid, cap):
    invis_a, invis_b = a.invisible(), b.invisible()
    total, capped = 0.0, 0
    for bssid in sorted(set(a.per_ap) | set(b.per_ap)):
        pa = a.per_ap.get(bssid, invis_a)
        pb = b.per_ap.get(bssid, invis_b)
        d, hit = _univariate(pa, pb, m, grid, cap)
        capped += hit
        total += d if norm == 1 else d * d
    return (total if norm == 1 else math.sqrt(total)), capped


def segment_distance(a: SegmentFingerprint, b: SegmentFingerprint, measure, norm=2,
                     grid: EvaluationGrid = DEFAULT_GRID,
                     bhattacharyya_cap: Optional[float] = DEFAULT_BHATTACHARYYA_CAP) -> float:
    """l-norm of the per-AP distances over the union of both fingerprints' APs.

    An AP present in only one fingerprint is compared with the invisibility
    likelihood (all mass at -100 dBm). APs invisible in both contribute zero.
    """
    m = as_measure(measure)
    _check_pair(a, b, m)
    return _segment_distance(a, b, m, as_norm(norm), grid, bhattacharyya_cap)[0]


@dataclass
class DistanceMatrix:
    segment_ids: list
    values: np.ndarray
    measure: Measure
    norm: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n = len(self.segment_ids)
        if v.shape != (n, n):
            raise ValidationError(f"matrix shape {v.shape} does not match {n} segment ids")
        self.values = v
        self.measure = as_measure(self.measure)
        self.norm = as_norm(self.norm)

    @property
    def n(self) -> int:
        return len(self.segment_ids)

    def upper_triangle(self):
        """Yield ``(i, j, value)`` for ``i < j``."""
        n = self.n
        for i in range(n):
            for j in range(i + 1, n):
                yield i, j, float(self.values[i, j])


def _pair_job(args):
    fps, pairs, m, norm, grid, cap = args
    return [_segment_distance(fps[i], fps[j], m, norm, grid, cap) for i, j in pairs]


def pairwise_matrix(fps: Sequence[SegmentFingerprint], measure, norm=2,
                    grid: EvaluationGrid = DEFAULT_GRID,
                    bhattacharyya_cap: Optional[float] = DEFAULT_BHATTACHARYYA_CAP,
                    jobs: int = 1) -> DistanceMatrix:
    """Symmetric matrix of segment distances.

    Each upper-triangle entry is computed independently and mirrored, so the
    result is bit-identical for any ``jobs``.
    """
    m = as_measure(measure)
    norm = as_norm(norm)
    fps = list(fps)
    if len(fps) < 2:
        raise ParameterError("need at least two fingerprints")
    if m not in SYMMETRIC_DISTANCES:
        raise ConfigurationError(f"{m.value} is not a symmetric distance; cannot build a matrix")
    for f in fps[1:]:
        _check_pair(fps[0], f, m)

    n = len(fps)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if jobs > 1 and len(pairs) > jobs:
        chunks = [pairs[k::jobs] for k in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_pair_job, [(fps, c, m, norm, grid, bhattacharyya_cap)
                                            for c in chunks]))
        results = {}
        for chunk, part in zip(chunks, parts):
            results.update(zip(chunk, part))
    else:
        results = dict(zip(pairs, _pair_job((fps, pairs, m, norm, grid, bhattacharyya_cap))))

    values = np.zeros((n, n))
    capped = 0
    for (i, j), (d, hit) in results.items():
        values[i, j] = values[j, i] = d
        capped += hit
    meta = {
        "estimator": fps[0].method,
        "estimator_options": dict(fps[0].options),
        "invisibility": fps[0].invisibility_modeled,
        "grid": {"lo": grid.lo, "hi": grid.hi, "step": grid.step},
        "density_floor": DENSITY_FLOOR,
    }
    if m is Measure.BHATTACHARYYA:
        meta["bhattacharyya_cap"] = bhattacharyya_cap
        meta["capped_terms"] = capped
    return DistanceMatrix([f.segment_id for f in fps], values, m, norm, meta)


# --------------------------------------------------------------------------
# serialisation


def write_matrix_csv(dm: DistanceMatrix, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["segment_id", *dm.segment_ids])
    for sid, row in zip(dm.segment_ids, dm.values):
        w.writerow([sid, *(repr(float(x)) for x in row)])


def read_matrix_csv(stream: TextIO, measure="emd", norm=2, metadata=None) -> DistanceMatrix:
    rows = list(csv.reader(stream))
    if not rows:
        raise ValidationError("empty matrix file")
    ids = rows[0][1:]
    try:
        values = [[float(x) for x in r[1:]] for r in rows[1:]]
    except ValueError as exc:
        raise ValidationError(f"bad matrix entry: {exc}") from None
    if [r[0] for r in rows[1:]] != ids:
        raise ValidationError("row labels do not match the header")
    ids = [int(s) if s.lstrip("-").isdigit() else s for s in ids]
    return DistanceMatrix(ids, np.array(values).reshape(len(ids), len(ids)), measure, norm,
                          dict(metadata or {}))


def matrix_sidecar(dm: DistanceMatrix) -> dict:
    return {"segment_ids": list(dm.segment_ids), "measure": dm.measure.value, "norm": dm.norm,
            "dtype": "<f8", "shape": [dm.n, dm.n], **dm.metadata}


def write_matrix_binary(dm: DistanceMatrix, data_path, sidecar_path, extra=None) -> None:
    """Little-endian float64 row-major payload plus a JSON metadata sidecar."""
    with open(data_path, "wb") as fh:
        fh.write(np.ascontiguousarray(dm.values, dtype="<f8").tobytes())
    meta = matrix_sidecar(dm)
    meta.update(extra or {})
    with open(sidecar_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_matrix_binary(data_path, sidecar_path) -> DistanceMatrix:
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    n = len(meta["segment_ids"])
    values = np.fromfile(data_path, dtype="<f8")
    if values.size != n * n:
        raise ValidationError(f"binary matrix has {values.size} values, expected {n * n}")
    rest = {k: v for k, v in meta.items()
            if k not in ("segment_ids", "measure", "norm", "dtype", "shape")}
    return DistanceMatrix(meta["segment_ids"], values.reshape(n, n), meta["measure"],
                          meta["norm"], rest)
