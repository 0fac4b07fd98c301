"""Seeded synthetic office scenes for desk-scale verification.

Mean RSSI follows the log-distance path-loss model

    P(d) = P0 - 10 * gamma * log10(d / 1 m)

with independent Gaussian shadowing per scan. Readings below the visibility
threshold are dropped (the AP is invisible in that scan).

The device visits every location ``segments_per_location`` times, round-robin,
staying still for ``samples_per_segment`` scans and walking for
``move_duration_ms`` between visits. :func:`scene_timeline` gives the exact
stationary intervals, which also drive the synthetic accelerometer trace.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError
from .evaluation import LabeledSegment
from .ingest import RSSI_MAX, RSSI_MIN, AccelObservation, WifiDataset, WifiObservation
from .motionseg import MotionSegmentation

GRAVITY = 9.81


def _default_aps():
    return [(0.0, 0.0), (20.0, 0.0), (0.0, 20.0), (20.0, 20.0), (10.0, 10.0)]


def _default_locations():
    # 4 x 3 grid at 6 m pitch, centred on the floor
    xs = (1.0, 7.0, 13.0, 19.0)
    ys = (4.0, 10.0, 16.0)
    return [(x, y) for y in ys for x in xs]


@dataclass
class SyntheticSceneConfig:
    area: tuple = (20.0, 20.0)
    ap_positions: list = field(default_factory=_default_aps)
    path_loss_exponent: float = 2.5
    reference_power: float = -40.0
    shadowing_sigma: float = 4.0
    visibility_threshold: Optional[float] = -95.0
    dropout_prob: float = 0.0
    locations: list = field(default_factory=_default_locations)
    samples_per_segment: int = 20
    segments_per_location: int = 3
    seed: int = 42
    scan_interval_ms: int = 3000
    move_duration_ms: int = 20_000
    margin_ms: int = 1500
    start_ms: int = 1_700_000_000_000
    device: str = "sim-phone"
    accel_rate_hz: float = 20.0
    accel_still_sigma: float = 0.03
    accel_move_sigma: float = 3.0

    def __post_init__(self):
        self.area = tuple(float(v) for v in self.area)
        self.ap_positions = [tuple(float(c) for c in p) for p in self.ap_positions]
        self.locations = [tuple(float(c) for c in p) for p in self.locations]
        if not self.ap_positions:
            raise ParameterError("scene needs at least one AP")
        if not self.locations:
            raise ParameterError("scene needs at least one location")
        if self.samples_per_segment < 1 or self.segments_per_location < 1:
            raise ParameterError("samples_per_segment and segments_per_location must be >= 1")
        if self.shadowing_sigma < 0 or not 0 <= self.dropout_prob <= 1:
            raise ParameterError("shadowing_sigma must be >= 0 and dropout_prob in [0, 1]")

    @property
    def n_aps(self) -> int:
        return len(self.ap_positions)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticSceneConfig":
        data = json.loads(text)
        known = cls.__dataclass_fields__
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ParameterError(f"unknown scene config keys: {unknown}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def mean_rssi(distance_m: float, reference_power: float, exponent: float) -> float:
    """Log-distance path loss; distances under 1 m are treated as 1 m."""
    return reference_power - 10.0 * exponent * math.log10(max(distance_m, 1.0))


def bssid_for(k: int) -> str:
    return "02:00:00:00:{:02x}:{:02x}".format(k // 256, k % 256)


def scene_timeline(cfg: SyntheticSceneConfig) -> list:
    """``(segment_id, location_index, start_ms, end_ms)`` for every stationary visit."""
    still = cfg.samples_per_segment * cfg.scan_interval_ms + 2 * cfg.margin_ms
    out, t = [], cfg.start_ms
    sid = 0
    for _ in range(cfg.segments_per_location):
        for loc in range(len(cfg.locations)):
            out.append((sid, loc, t, t + still))
            sid += 1
            t += still + cfg.move_duration_ms
    return out


def scene_segmentation(cfg: SyntheticSceneConfig) -> MotionSegmentation:
    """The true stationary/moving boundaries of the scene."""
    bounds = []
    for _, _, start, end in scene_timeline(cfg):
        bounds.extend((start, end))
    return MotionSegmentation(tuple(bounds))


def generate_synthetic_scene(cfg: SyntheticSceneConfig = None):
    """Draw a labelled WiFi dataset.

    Returns
    -------
    (WifiDataset, list of LabeledSegment)
        Segment ids are visit ordinals in time order, matching what
        :func:`~wifitopo.motionseg.extract_stationary_segments` yields on the
        true segmentation.
    """
    cfg = cfg or SyntheticSceneConfig()
    rng = np.random.default_rng(cfg.seed)
    aps = np.array(cfg.ap_positions)
    locs = np.array(cfg.locations)
    means = np.array([[mean_rssi(float(np.hypot(*(loc - ap))), cfg.reference_power,
                                 cfg.path_loss_exponent) for ap in aps] for loc in locs])
    bssids = [bssid_for(k) for k in range(len(aps))]
    ssids = [f"office-ap-{k}" for k in range(len(aps))]

    threshold = cfg.visibility_threshold
    silent = [i for i in range(len(locs))
              if threshold is not None and np.all(means[i] < threshold)]
    if silent:
        warnings.warn(f"locations with no visible AP at mean level: {silent}", stacklevel=2)

    obs, labels = [], []
    for sid, loc, start, _ in scene_timeline(cfg):
        labels.append(LabeledSegment(sid, f"loc{loc:02d}", tuple(cfg.locations[loc])))
        for k in range(cfg.samples_per_segment):
            t = start + cfg.margin_ms + k * cfg.scan_interval_ms
            noise = rng.normal(0.0, cfg.shadowing_sigma, size=len(aps)) \
                if cfg.shadowing_sigma > 0 else np.zeros(len(aps))
            drop = rng.random(len(aps)) < cfg.dropout_prob
            raw = np.rint(means[loc] + noise)
            for a in range(len(aps)):
                r = int(raw[a])
                if drop[a] or (threshold is not None and r < threshold):
                    continue
                r = min(max(r, RSSI_MIN), RSSI_MAX)
                obs.append(WifiObservation(t, cfg.device, bssids[a], r, ssids[a]))
    return WifiDataset.from_observations(obs), labels


def generate_scene_accel(cfg: SyntheticSceneConfig = None) -> list:
    """Accelerometer magnitudes: quiet while stationary, noisy while walking."""
    cfg = cfg or SyntheticSceneConfig()
    rng = np.random.default_rng([cfg.seed, 1])
    timeline = scene_timeline(cfg)
    t_end = timeline[-1][3]
    dt = 1000.0 / cfg.accel_rate_hz
    times = cfg.start_ms + np.round(np.arange(0, t_end - cfg.start_ms, dt)).astype(np.int64)
    still = np.zeros(times.size, dtype=bool)
    for _, _, s, e in timeline:
        still |= (times >= s) & (times < e)
    sigma = np.where(still, cfg.accel_still_sigma, cfg.accel_move_sigma)
    mags = np.abs(GRAVITY + rng.normal(0.0, 1.0, times.size) * sigma)
    return [AccelObservation(int(t), cfg.device, float(m)) for t, m in zip(times, mags)]
