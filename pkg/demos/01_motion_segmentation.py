"""
Stationary segments from an accelerometer trace
===============================================

Build a synthetic office walk, segment the acceleration magnitude into
stationary and moving runs, and cut the WiFi stream into stationary
segments of at least ten seconds.
"""

from wifitopo.motionseg import WindowConfig, extract_stationary_segments, segment_motion
from wifitopo.synthetic import (SyntheticSceneConfig, generate_scene_accel,
                                generate_synthetic_scene, scene_segmentation)

cfg = SyntheticSceneConfig(seed=42)
wifi, labels = generate_synthetic_scene(cfg)
accel = generate_scene_accel(cfg)
print(f"{len(wifi)} WiFi readings, {len(accel)} accel samples")

# variance of the magnitude over 2 s windows sliding by 1 s
seg = segment_motion(accel, WindowConfig(window_len=2000, hop=1000, threshold=0.5))
truth = scene_segmentation(cfg).boundaries
err = max(abs(a - b) for a, b in zip(seg.boundaries[:-1], truth[:-1]))
print(f"{len(seg.boundaries)} boundaries, worst offset from truth {err} ms")

segments = extract_stationary_segments(wifi, seg, min_duration=10_000)
for s in segments[:4]:
    print(f"segment {s.segment_id}: {s.duration / 1000:.1f} s, {len(s.observations)} readings,"
          f" label {labels[s.segment_id].location_label}")
