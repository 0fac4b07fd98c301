"""Parsing, validation and preprocessing of raw WiFi and acceleration traces.

WiFi records carry ``(timestamp_ms, device, bssid, ssid, rssi)``; acceleration
records carry either the raw ``(ax, ay, az)`` components or a precomputed
``magnitude``. Both CSV (with header) and JSON-lines inputs are accepted.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO

from .errors import ParseError, ValidationError

RSSI_MIN = -100
RSSI_MAX = -10
INVISIBLE_RSSI = RSSI_MIN

WIFI_FIELDS = ("timestamp_ms", "device", "bssid", "ssid", "rssi")
ACCEL_VECTOR_FIELDS = ("timestamp_ms", "device", "ax", "ay", "az")
ACCEL_MAGNITUDE_FIELDS = ("timestamp_ms", "device", "magnitude")

DEFAULT_SCAN_EPSILON_MS = 500


@dataclass(frozen=True, order=True)
class WifiObservation:
    timestamp: int
    device: str
    bssid: str
    rssi: int
    ssid: Optional[str] = field(default=None, compare=False)


@dataclass(frozen=True, order=True)
class AccelObservation:
    timestamp: int
    device: str
    magnitude: float


@dataclass(frozen=True)
class WifiDataset:
    """Time-ordered WiFi observations together with the set of APs they mention.

    Build instances through :meth:`from_observations`, which sorts and
    recomputes ``ap_universe``.
    """

    observations: tuple = ()
    ap_universe: frozenset = frozenset()

    @classmethod
    def from_observations(cls, observations: Iterable[WifiObservation]) -> "WifiDataset":
        obs = tuple(sorted(observations))
        return cls(obs, frozenset(o.bssid for o in obs))

    def __len__(self):
        return len(self.observations)

    def __iter__(self):
        return iter(self.observations)

    @property
    def devices(self) -> list:
        return sorted({o.device for o in self.observations})

    @property
    def timestamps(self) -> list:
        return sorted({o.timestamp for o in self.observations})


@dataclass(frozen=True)
class Blacklist:
    """SSID prefix/suffix rules identifying mobile hotspots. Case-insensitive."""

    prefixes: tuple = ()
    suffixes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "prefixes", tuple(p.lower() for p in self.prefixes))
        object.__setattr__(self, "suffixes", tuple(s.lower() for s in self.suffixes))

    def matches(self, ssid: Optional[str]) -> bool:
        if not ssid:
            return False
        name = ssid.lower()
        return any(name.startswith(p) for p in self.prefixes) or any(
            name.endswith(s) for s in self.suffixes
        )


# --------------------------------------------------------------------------
# readers


def _rows(stream: TextIO, fmt: str):
    """Yield ``(line_number, dict)`` pairs from a CSV or JSONL stream."""
    if fmt == "csv":
        reader = csv.DictReader(stream)
        if reader.fieldnames is None:
            return
        header = [h.strip() for h in reader.fieldnames]
        reader.fieldnames = header
        for row in reader:
            if None in row:
                raise ParseError("too many fields", reader.line_num)
            yield reader.line_num, row
    elif fmt == "jsonl":
        for lineno, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", lineno)
            yield lineno, obj
    else:
        raise ValueError(f"unknown format {fmt!r}; expected 'csv' or 'jsonl'")


def _field(row, name, lineno, required=True):
    value = row.get(name)
    if value is None or (isinstance(value, str) and value.strip() == ""):
        if required:
            raise ParseError(f"missing field {name!r}", lineno)
        return None
    return value.strip() if isinstance(value, str) else value


def _as_int(value, name, lineno) -> int:
    try:
        if isinstance(value, str):
            return int(value)
        if isinstance(value, float):
            if not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(value, bool):
            raise ValueError
        return int(value)
    except (TypeError, ValueError):
        raise ParseError(f"{name} is not an integer: {value!r}", lineno) from None


def _as_float(value, name, lineno) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ParseError(f"{name} is not a number: {value!r}", lineno) from None
    if not math.isfinite(out):
        raise ParseError(f"{name} is not finite: {value!r}", lineno)
    return out


def parse_wifi_records(stream: TextIO, format: str = "csv") -> WifiDataset:
    """Parse and validate a WiFi observation stream.

    Raises
    ------
    ParseError
        On a malformed row; the message carries the line number.
    ValidationError
        When an RSSI lies outside [-100, -10] or a ``(timestamp, device,
        bssid)`` triple appears twice with different RSSI values.
    """
    seen = {}
    for lineno, row in _rows(stream, format):
        t = _as_int(_field(row, "timestamp_ms", lineno), "timestamp_ms", lineno)
        device = str(_field(row, "device", lineno))
        bssid = str(_field(row, "bssid", lineno))
        ssid = _field(row, "ssid", lineno, required=False)
        rssi = _as_int(_field(row, "rssi", lineno), "rssi", lineno)
        if not RSSI_MIN <= rssi <= RSSI_MAX:
            raise ValidationError(
                f"line {lineno}: rssi {rssi} outside [{RSSI_MIN}, {RSSI_MAX}]"
            )
        key = (t, device, bssid)
        prev = seen.get(key)
        if prev is not None:
            if prev.rssi != rssi:
                raise ValidationError(
                    f"line {lineno}: conflicting rssi for {key}: {prev.rssi} vs {rssi}"
                )
            continue
        seen[key] = WifiObservation(t, device, bssid, rssi, None if ssid is None else str(ssid))
    return WifiDataset.from_observations(seen.values())


def parse_accel_records(stream: TextIO, format: str = "csv") -> list:
    """Parse acceleration records into time-sorted magnitudes (m/s^2)."""
    out = []
    for lineno, row in _rows(stream, format):
        t = _as_int(_field(row, "timestamp_ms", lineno), "timestamp_ms", lineno)
        device = str(_field(row, "device", lineno))
        if row.get("magnitude") not in (None, ""):
            mag = _as_float(row["magnitude"], "magnitude", lineno)
            if mag < 0:
                raise ValidationError(f"line {lineno}: negative magnitude {mag}")
        else:
            ax, ay, az = (
                _as_float(_field(row, k, lineno), k, lineno) for k in ("ax", "ay", "az")
            )
            mag = math.sqrt(ax * ax + ay * ay + az * az)
        out.append(AccelObservation(t, device, mag))
    out.sort()
    return out


def load_blacklist(stream: TextIO) -> Blacklist:
    """Read ``prefix:<s>`` / ``suffix:<s>`` rules, one per line; ``#`` starts a comment."""
    prefixes, suffixes = [], []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        kind, sep, value = line.partition(":")
        kind = kind.strip().lower()
        if not sep or kind not in ("prefix", "suffix") or not value:
            raise ParseError(f"expected 'prefix:<s>' or 'suffix:<s>', got {line!r}", lineno)
        (prefixes if kind == "prefix" else suffixes).append(value)
    return Blacklist(tuple(prefixes), tuple(suffixes))


# --------------------------------------------------------------------------
# writers


def write_wifi_records(ds: WifiDataset, stream: TextIO, format: str = "csv") -> None:
    if format == "csv":
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(WIFI_FIELDS)
        for o in ds.observations:
            writer.writerow((o.timestamp, o.device, o.bssid, o.ssid or "", o.rssi))
    elif format == "jsonl":
        for o in ds.observations:
            rec = dict(timestamp_ms=o.timestamp, device=o.device, bssid=o.bssid,
                       ssid=o.ssid, rssi=o.rssi)
            stream.write(json.dumps(rec) + "\n")
    else:
        raise ValueError(f"unknown format {format!r}")


def write_accel_records(accel: Iterable[AccelObservation], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(ACCEL_MAGNITUDE_FIELDS)
    for a in accel:
        writer.writerow((a.timestamp, a.device, repr(float(a.magnitude))))


def wifi_to_string(ds: WifiDataset, format: str = "csv") -> str:
    buf = io.StringIO()
    write_wifi_records(ds, buf, format)
    return buf.getvalue()


# --------------------------------------------------------------------------
# preprocessing


def filter_mobile_aps(ds: WifiDataset, bl: Blacklist) -> WifiDataset:
    """Drop observations whose SSID matches a blacklist rule."""
    if not bl.prefixes and not bl.suffixes:
        return ds
    return WifiDataset.from_observations(o for o in ds.observations if not bl.matches(o.ssid))


def restrict_device(ds: WifiDataset, device: str) -> WifiDataset:
    kept = [o for o in ds.observations if o.device == device]
    if not kept and ds.observations:
        warnings.warn(f"device {device!r} has no observations", stacklevel=2)
    return WifiDataset.from_observations(kept)


def group_scans(timestamps, scan_epsilon: int = DEFAULT_SCAN_EPSILON_MS) -> list:
    """Group sorted distinct timestamps into scans.

    A scan opens at its first timestamp and absorbs every later timestamp
    within ``scan_epsilon`` ms of that opening timestamp.
    """
    scans = []
    for t in sorted(set(timestamps)):
        if scans and t - scans[-1][0] <= scan_epsilon:
            scans[-1].append(t)
        else:
            scans.append([t])
    return scans


def augment_ap_invisibility(ds: WifiDataset, scan_epsilon: int = DEFAULT_SCAN_EPSILON_MS) -> WifiDataset:
    """Add a -100 dBm pseudo-observation for every AP missing from a scan.

    The pseudo-observation is stamped with the scan's opening timestamp.
    With ``scan_epsilon=0`` every distinct timestamp is its own scan.
    """
    devices = ds.devices
    if len(devices) > 1:
        raise ValidationError(f"augmentation needs a single-device dataset, got {devices}")
    if not ds.observations:
        return ds
    device = devices[0]
    universe = ds.ap_universe
    by_time = {}
    for o in ds.observations:
        by_time.setdefault(o.timestamp, set()).add(o.bssid)

    added = []
    for scan in group_scans(by_time, scan_epsilon):
        seen = set().union(*(by_time[t] for t in scan))
        for b in sorted(universe - seen):
            added.append(WifiObservation(scan[0], device, b, INVISIBLE_RSSI, None))
    if not added:
        return ds
    ssid_of = {o.bssid: o.ssid for o in ds.observations if o.ssid}
    added = [WifiObservation(a.timestamp, a.device, a.bssid, a.rssi, ssid_of.get(a.bssid))
             for a in added]
    return WifiDataset.from_observations(ds.observations + tuple(added))
