"""
A map from distances alone
==========================

Classical MDS of the KDE + EMD distance matrix. Segments from the same
location should land close together; the SVG is written next to this
script.
"""

from pathlib import Path

from wifitopo.distance import pairwise_matrix
from wifitopo.embed import classical_mds, embedding_svg
from wifitopo.motionseg import extract_stationary_segments
from wifitopo.pipeline import build_fingerprints, segment_table
from wifitopo.synthetic import SyntheticSceneConfig, generate_synthetic_scene, scene_segmentation

cfg = SyntheticSceneConfig(seed=42)
wifi, labels = generate_synthetic_scene(cfg)
table = segment_table(extract_stationary_segments(wifi, scene_segmentation(cfg)))
dm = pairwise_matrix(build_fingerprints(wifi, table, "kde", True), "emd")

emb = classical_mds(dm, dim=2)
print("top eigenvalues:", [round(float(v), 2) for v in emb.eigenvalues])
print(f"Kruskal stress-1: {emb.stress:.3f}")

names = {l.segment_id: l.location_label for l in labels}
for sid, (x, y) in list(zip(emb.segment_ids, emb.coords))[:6]:
    print(f"segment {sid:2d} {names[sid]}: ({x:7.2f}, {y:7.2f})")

out = Path(__file__).with_name("embedding.svg")
out.write_text(embedding_svg(emb, names))
print("wrote", out)
