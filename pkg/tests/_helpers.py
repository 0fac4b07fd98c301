"""Shared builders for the test suite."""

import numpy as np

from wifitopo.ingest import AccelObservation, WifiObservation
from wifitopo.likelihood import Kde, Normal, Pmf, SUPPORT_SIZE, estimate_kde, estimate_normal, estimate_pmf

GRAVITY = 9.81


def accel_blocks(blocks, t0=0, rate_hz=20.0, quiet_sigma=0.03, noisy_sigma=3.0, seed=0,
                 device="A"):
    """Accel series from ``[(duration_ms, moving), ...]``; returns (series, change points)."""
    rng = np.random.default_rng(seed)
    dt = 1000.0 / rate_hz
    total = sum(d for d, _ in blocks)
    times = t0 + np.round(np.arange(0, total, dt)).astype(np.int64)
    sigma = np.empty(times.size)
    changes, t = [], t0
    for duration, moving in blocks:
        inside = (times >= t) & (times < t + duration)
        sigma[inside] = noisy_sigma if moving else quiet_sigma
        t += duration
        changes.append(t)
    mags = np.abs(GRAVITY + rng.normal(size=times.size) * sigma)
    series = [AccelObservation(int(a), device, float(m)) for a, m in zip(times, mags)]
    return series, changes[:-1]


def scans(times, readings, device="A"):
    """WiFi observations: every timestamp sees every ``bssid -> rssi`` of ``readings``."""
    return [WifiObservation(int(t), device, b, r) for t in times for b, r in readings.items()]


def random_values(rng, n=None):
    n = int(rng.integers(1, 25)) if n is None else n
    centre = rng.integers(-95, -20)
    spread = rng.integers(1, 12)
    return np.clip(np.rint(rng.normal(centre, spread, n)), -100, -10).astype(int)


def random_likelihood(kind, rng, smooth=1e-6):
    v = random_values(rng)
    if kind == "pmf":
        return estimate_pmf(v, smooth)
    if kind == "normal":
        return estimate_normal(v)
    return estimate_kde(v, 2.0)


def point_mass(r, eps=0.0):
    return estimate_pmf([r], eps)
