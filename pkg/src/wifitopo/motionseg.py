"""Stationary/moving segmentation from acceleration magnitude.

Windows slide over *time* (not sample count). Each window is labelled moving
when its statistic exceeds the threshold; labels are attached to the hop-wide
slot centred on the window, and runs of equal labels become the alternating
segmentation ``(t0, t1, ..., tn)`` where ``[t_i, t_{i+1})`` is stationary for
even ``i`` and moving for odd ``i``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .errors import ParameterError, ValidationError
from .ingest import WifiDataset

STATISTICS = ("energy", "variance")
MIN_WINDOW_SAMPLES = 3
DEFAULT_MIN_DURATION_MS = 10_000


@dataclass(frozen=True)
class WindowConfig:
    window_len: int = 2000
    hop: int = 1000
    statistic: str = "variance"
    threshold: float = 0.5
    assume_stationary_when_no_accel: bool = False

    def __post_init__(self):
        if self.statistic not in STATISTICS:
            raise ParameterError(f"statistic must be one of {STATISTICS}, got {self.statistic!r}")
        if not 0 < self.hop <= self.window_len:
            raise ParameterError("need 0 < hop <= window_len")
        if not self.threshold >= 0:
            raise ParameterError("threshold must be non-negative")


@dataclass(frozen=True)
class MotionSegmentation:
    """Alternating stationary/moving boundaries.

    ``boundaries[0] == boundaries[1]`` is allowed and encodes a series that
    starts in motion (empty stationary prefix). All other consecutive
    boundaries are strictly increasing.
    """

    boundaries: tuple
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        b = tuple(int(t) for t in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        for i in range(1, len(b)):
            if b[i] < b[i - 1] or (b[i] == b[i - 1] and i != 1):
                raise ValidationError(f"boundaries not increasing at index {i}: {b}")

    def intervals(self):
        """Yield ``(index, start, end, stationary)`` for each interval."""
        b = self.boundaries
        for i in range(len(b) - 1):
            yield i, b[i], b[i + 1], i % 2 == 0

    def stationary_intervals(self) -> list:
        return [(s, e) for _, s, e, still in self.intervals() if still]


@dataclass(frozen=True)
class WifiSegment:
    device: str
    start: int
    end: int
    observations: tuple
    segment_id: int = 0

    @property
    def duration(self) -> int:
        return self.end - self.start


def window_statistic(samples: Sequence[float], statistic: str = "variance") -> float:
    """Motion statistic of one window of acceleration magnitudes.

    ``variance`` is the unbiased sample variance; ``energy`` is the mean
    square of the mean-removed samples, so the gravity baseline does not
    enter. A single sample has variance 0.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("window_statistic needs at least one sample")
    if statistic not in STATISTICS:
        raise ParameterError(f"unknown statistic {statistic!r}")
    if x.size == 1:
        return 0.0
    centred = x - x.mean()
    ss = float(np.dot(centred, centred))
    return ss / (x.size - 1) if statistic == "variance" else ss / x.size


def _window_labels(times, mags, cfg):
    """Return window starts, moving flags and the count of sparse windows."""
    t_first, t_last = int(times[0]), int(times[-1])
    starts = np.arange(t_first, t_last + 1, cfg.hop, dtype=np.int64)
    lo = np.searchsorted(times, starts, side="left")
    hi = np.searchsorted(times, starts + cfg.window_len, side="left")
    moving = np.zeros(starts.size, dtype=bool)
    sparse = 0
    prev = False
    for k in range(starts.size):
        if hi[k] - lo[k] < MIN_WINDOW_SAMPLES:
            sparse += 1
            moving[k] = prev
        else:
            moving[k] = window_statistic(mags[lo[k]:hi[k]], cfg.statistic) > cfg.threshold
        prev = moving[k]
    return starts, moving, sparse


def segment_motion(accel, cfg: WindowConfig = WindowConfig(), wifi_span=None) -> MotionSegmentation:
    """Segment one device's acceleration series into stationary/moving runs.

    Parameters
    ----------
    accel : sequence of AccelObservation
        Sorted observations of a single device.
    cfg : WindowConfig
    wifi_span : (int, int), optional
        ``(first, last)`` WiFi timestamps, used only when ``accel`` is empty
        and ``cfg.assume_stationary_when_no_accel`` is set.

    Returns
    -------
    MotionSegmentation
        The last boundary is one past the final sample so that every sample
        lies in a half-open interval.
    """
    if not accel:
        if cfg.assume_stationary_when_no_accel and wifi_span is not None:
            t0, t1 = wifi_span
            return MotionSegmentation((t0, t1 + 1), {"assumed_stationary": True})
        raise ValidationError("empty acceleration series")
    devices = {a.device for a in accel}
    if len(devices) > 1:
        raise ValidationError(f"segment_motion needs a single device, got {sorted(devices)}")

    times = np.array([a.timestamp for a in accel], dtype=np.int64)
    mags = np.array([a.magnitude for a in accel], dtype=float)
    if np.any(np.diff(times) < 0):
        order = np.argsort(times, kind="stable")
        times, mags = times[order], mags[order]

    t_start, t_end = int(times[0]), int(times[-1]) + 1
    starts, moving, sparse = _window_labels(times, mags, cfg)

    # slot of window k: [start + (L - hop)/2, start + (L + hop)/2), clipped
    offset = (cfg.window_len - cfg.hop) // 2
    runs = []  # [moving, start, end]
    for k in range(starts.size):
        lo = t_start if k == 0 else int(starts[k]) + offset
        hi = t_end if k == starts.size - 1 else int(starts[k]) + offset + cfg.hop
        lo, hi = max(lo, t_start), min(hi, t_end)
        if hi <= lo:
            continue
        if runs and runs[-1][0] == moving[k]:
            runs[-1][2] = hi
        elif runs:
            runs[-1][2] = lo
            runs.append([bool(moving[k]), lo, hi])
        else:
            runs.append([bool(moving[k]), lo, hi])

    boundaries = [runs[0][1]]
    if runs[0][0]:
        boundaries.append(runs[0][1])
    boundaries.extend(r[2] for r in runs)
    meta = {"n_windows": int(starts.size), "sparse_windows": int(sparse)}
    if sparse:
        meta["gap_policy"] = "carry_previous_label"
    return MotionSegmentation(tuple(boundaries), meta)


def extract_stationary_segments(ds: WifiDataset, seg: MotionSegmentation,
                                min_duration: int = DEFAULT_MIN_DURATION_MS) -> list:
    """Cut the WiFi stream into stationary segments of at least ``min_duration`` ms."""
    devices = ds.devices
    if len(devices) > 1:
        raise ValidationError(f"extraction needs a single-device dataset, got {devices}")
    obs = ds.observations
    times = np.array([o.timestamp for o in obs], dtype=np.int64)
    out = []
    for _, start, end, still in seg.intervals():
        if not still or end - start < min_duration:
            continue
        lo, hi = np.searchsorted(times, [start, end], side="left")
        if hi <= lo:
            continue
        out.append(WifiSegment(devices[0], start, end, obs[lo:hi], len(out)))
    return out


def pool_segments(segments: Sequence[WifiSegment], keys: Sequence) -> tuple:
    """Merge segments sharing a key (e.g. room and day) into one segment each.

    Returns ``(pooled, keys)``. Output order follows the first appearance of
    each key; ids are renumbered.
    """
    if len(keys) != len(segments):
        raise ParameterError("one key per segment is required")
    groups = {}
    for seg, key in zip(segments, keys):
        groups.setdefault(key, []).append(seg)
    pooled = []
    for i, members in enumerate(groups.values()):
        obs = tuple(sorted(o for m in members for o in m.observations))
        pooled.append(WifiSegment(members[0].device, min(m.start for m in members),
                                  max(m.end for m in members), obs, i))
    return pooled, list(groups)


# --------------------------------------------------------------------------
# serialisation

SEGMENT_FIELDS = ("segment_id", "device", "start_ms", "end_ms", "n_observations")
BOUNDARY_FIELDS = ("index", "timestamp_ms", "parity")


def write_segments(segments: Sequence[WifiSegment], stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(SEGMENT_FIELDS)
    for s in segments:
        w.writerow((s.segment_id, s.device, s.start, s.end, len(s.observations)))


def read_segment_table(stream: TextIO) -> list:
    """Read a segment CSV into ``(segment_id, device, start, end)`` tuples."""
    rows = []
    for row in csv.DictReader(stream):
        try:
            rows.append((int(row["segment_id"]), row["device"],
                         int(row["start_ms"]), int(row["end_ms"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad segment row {row}: {exc}") from None
    return rows


def segments_from_table(ds: WifiDataset, table) -> list:
    """Re-attach observations of ``ds`` to previously extracted segment bounds."""
    obs = ds.observations
    times = np.array([o.timestamp for o in obs], dtype=np.int64)
    out = []
    for sid, device, start, end in table:
        lo, hi = np.searchsorted(times, [start, end], side="left")
        mine = tuple(o for o in obs[lo:hi] if o.device == device)
        out.append(WifiSegment(device, start, end, mine, sid))
    return out


def write_boundaries(seg: MotionSegmentation, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(BOUNDARY_FIELDS)
    for i, t in enumerate(seg.boundaries):
        w.writerow((i, t, i % 2))
