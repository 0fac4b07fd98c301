"""In-memory pipeline stages shared by the CLI and the demos.

ingest -> motion segmentation -> likelihood estimation -> pairwise
distances -> evaluation / embedding.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import itertools
import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from . import distance as dist
from .errors import ConfigurationError, ParameterError, UndefinedCorrelationError
from .evaluation import LabeledSegment, correlations, label_pairs, roc_auc
from .ingest import (DEFAULT_SCAN_EPSILON_MS, Blacklist, augment_ap_invisibility,
                     filter_mobile_aps, restrict_device)
from .likelihood import (DEFAULT_BANDWIDTH, DEFAULT_LAPLACE_EPSILON, DEFAULT_SIGMA_MIN,
                         EvaluationGrid, fingerprint_segment)
from .motionseg import (DEFAULT_MIN_DURATION_MS, WindowConfig, extract_stationary_segments,
                        pool_segments, segment_motion, segments_from_table)

SWEEP_ESTIMATORS = ("pmf", "normal", "kde")
SWEEP_NORMS = (1, 2)
SWEEP_INVISIBILITY = (True, False)
SWEEP_FIELDS = ("estimator", "measure", "norm", "invisibility", "auc", "pearson", "spearman",
                "kendall")


@dataclass
class PipelineConfig:
    wifi: Optional[str] = None
    accel: Optional[str] = None
    blacklist: Optional[str] = None
    labels: Optional[str] = None
    segments: Optional[str] = None
    fingerprints: Optional[str] = None
    distances: Optional[str] = None
    scene: Optional[str] = None
    output_dir: Optional[str] = None
    device: Optional[str] = None
    window_len: int = 2000
    hop: int = 1000
    statistic: str = "variance"
    threshold: float = 0.5
    assume_stationary_when_no_accel: bool = False
    min_duration: int = DEFAULT_MIN_DURATION_MS
    scan_epsilon: int = DEFAULT_SCAN_EPSILON_MS
    estimator: str = "kde"
    h: float = DEFAULT_BANDWIDTH
    laplace_epsilon: float = DEFAULT_LAPLACE_EPSILON
    sigma_min: float = DEFAULT_SIGMA_MIN
    invisibility: bool = True
    measure: str = "emd"
    norm: int = 2
    grid_lo: float = -105.0
    grid_hi: float = -5.0
    grid_step: float = 0.5
    bhattacharyya_cap: float = dist.DEFAULT_BHATTACHARYYA_CAP
    pool: str = "segment"
    seed: int = 42
    jobs: int = 1
    sweep_estimators: list = field(default_factory=lambda: list(SWEEP_ESTIMATORS))
    sweep_measures: list = field(default_factory=lambda: [m.value for m in dist.SYMMETRIC_DISTANCES])
    sweep_norms: list = field(default_factory=lambda: list(SWEEP_NORMS))
    sweep_invisibility: list = field(default_factory=lambda: list(SWEEP_INVISIBILITY))

    #: keys that do not influence any primary artifact
    _NON_SEMANTIC = ("output_dir", "jobs")

    def __post_init__(self):
        if self.pool not in ("segment", "room-day"):
            raise ParameterError(f"pool must be 'segment' or 'room-day', got {self.pool!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ParameterError(f"unknown config keys: {unknown}")
        return cls(**data)

    def window_config(self) -> WindowConfig:
        return WindowConfig(int(self.window_len), int(self.hop), self.statistic,
                            float(self.threshold), bool(self.assume_stationary_when_no_accel))

    def grid(self) -> EvaluationGrid:
        return EvaluationGrid(float(self.grid_lo), float(self.grid_hi), float(self.grid_step))

    def as_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        data = {k: v for k, v in asdict(self).items() if k not in self._NON_SEMANTIC}
        blob = json.dumps(data, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def prepare_wifi(ds, blacklist: Optional[Blacklist] = None, device: Optional[str] = None):
    """Blacklist filtering and restriction to one device."""
    if blacklist is not None:
        ds = filter_mobile_aps(ds, blacklist)
    devices = ds.devices
    if device is None:
        if len(devices) > 1:
            raise ConfigurationError(f"several devices present {devices}; choose one with --device")
        return ds
    return restrict_device(ds, device)


def smoothing_for(estimator: str, measure, epsilon: float = DEFAULT_LAPLACE_EPSILON) -> float:
    """Laplace epsilon to use for a PMF feeding ``measure`` (0 when not needed)."""
    if estimator != "pmf":
        return 0.0
    return float(epsilon) if dist.as_measure(measure) in dist.NEEDS_SMOOTHING else 0.0


def build_fingerprints(ds, segment_table, estimator: str, invisibility: bool, *,
                       h=DEFAULT_BANDWIDTH, laplace_epsilon=0.0, sigma_min=DEFAULT_SIGMA_MIN,
                       scan_epsilon=DEFAULT_SCAN_EPSILON_MS, pool_keys=None):
    """Fingerprints for every segment in ``segment_table``.

    ``ds`` is the filtered single-device dataset; invisibility
    pseudo-observations are added here when ``invisibility`` is on.
    """
    source = augment_ap_invisibility(ds, scan_epsilon) if invisibility else ds
    segs = segments_from_table(source, segment_table)
    if pool_keys is not None:
        segs, _ = pool_segments(segs, pool_keys)
    return [fingerprint_segment(s, ds.ap_universe, estimator, invisibility=invisibility, h=h,
                                laplace_epsilon=laplace_epsilon, sigma_min=sigma_min)
            for s in segs if s.observations]


def segment_table(segments) -> list:
    return [(s.segment_id, s.device, s.start, s.end) for s in segments]


def run_segmentation(ds, accel, cfg: PipelineConfig):
    wcfg = cfg.window_config()
    span = (ds.observations[0].timestamp, ds.observations[-1].timestamp) if len(ds) else None
    if cfg.device is not None:
        accel = [a for a in accel if a.device == cfg.device]
    seg = segment_motion(accel, wcfg, wifi_span=span)
    return seg, extract_stationary_segments(ds, seg, int(cfg.min_duration))


def room_day_keys(table, labels):
    """Pooling keys ``label@YYYY-MM-DD`` (UTC) and the pooled label list."""
    by_id = {str(l.segment_id): l for l in labels}
    keys = []
    for sid, _, start, _ in table:
        lab = by_id.get(str(sid))
        if lab is None:
            raise ConfigurationError(f"segment {sid} has no label; cannot pool by room-day")
        day = _dt.datetime.fromtimestamp(start / 1000.0, tz=_dt.timezone.utc).date().isoformat()
        keys.append((lab.location_label, day))
    pooled = {}
    for key, (sid, *_rest) in zip(keys, table):
        pooled.setdefault(key, []).append(by_id[str(sid)])
    out = []
    for key, members in pooled.items():
        pos = [m.position for m in members if m.position is not None]
        mean = tuple(np.mean(pos, axis=0)) if len(pos) == len(members) else None
        out.append(LabeledSegment(f"{key[0]}@{key[1]}", key[0], mean))
    return keys, out


def evaluate_matrix(dm, labels) -> dict:
    """AUC plus correlations (``None`` where undefined or positions are missing)."""
    same, diff = label_pairs(dm, labels)
    out = {"auc": None, "n_same": len(same), "n_diff": len(diff),
           "pearson": None, "spearman": None, "kendall": None}
    if same and diff:
        out["auc"] = roc_auc(same, diff).auc
    if all(l.position is not None for l in labels):
        try:
            rep = correlations(dm, labels)
            out.update(pearson=rep.pearson, spearman=rep.spearman, kendall=rep.kendall_tau)
        except UndefinedCorrelationError as exc:
            out["correlation_error"] = str(exc)
    return out


def sweep_combinations(cfg: PipelineConfig):
    return list(itertools.product(cfg.sweep_estimators,
                                  [dist.as_measure(m).value for m in cfg.sweep_measures],
                                  [dist.as_norm(n) for n in cfg.sweep_norms],
                                  [bool(v) for v in cfg.sweep_invisibility]))


def format_row(estimator, measure, norm, invisibility, result) -> list:
    def num(v):
        return "" if v is None else repr(float(v))
    return [estimator, measure, str(norm), "true" if invisibility else "false",
            num(result["auc"]), num(result["pearson"]), num(result["spearman"]),
            num(result["kendall"])]


def run_sweep(ds, table, labels, cfg: PipelineConfig, done=None, on_row=None):
    """Evaluate every (estimator, measure, norm, invisibility) combination.

    ``done`` maps already-completed combination keys to their rows (resume);
    ``on_row(key, row)`` is called after each newly computed combination.
    """
    done = dict(done or {})
    pool_keys = None
    if cfg.pool == "room-day":
        pool_keys, labels = room_day_keys(table, labels)
    grid = cfg.grid()
    cache = {}
    rows = []
    for est, meas, norm, inv in sweep_combinations(cfg):
        key = (est, meas, str(norm), "true" if inv else "false")
        if key in done:
            rows.append(done[key])
            continue
        eps = smoothing_for(est, meas, cfg.laplace_epsilon)
        fkey = (est, inv, eps)
        if fkey not in cache:
            cache[fkey] = build_fingerprints(ds, table, est, inv, h=cfg.h, laplace_epsilon=eps,
                                             sigma_min=cfg.sigma_min,
                                             scan_epsilon=cfg.scan_epsilon, pool_keys=pool_keys)
        fps = cache[fkey]
        if pool_keys is not None:
            fps = [_relabel(f, labels[i].segment_id) for i, f in enumerate(fps)]
        dm = dist.pairwise_matrix(fps, meas, norm, grid, cfg.bhattacharyya_cap, jobs=cfg.jobs)
        row = format_row(est, meas, norm, inv, evaluate_matrix(dm, labels))
        rows.append(row)
        if on_row is not None:
            on_row(key, row)
    return rows


def _relabel(fp, new_id):
    from dataclasses import replace
    return replace(fp, segment_id=new_id)
