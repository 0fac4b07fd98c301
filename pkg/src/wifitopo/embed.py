"""Classical (Torgerson) multidimensional scaling of distance matrices."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, TextIO
from xml.sax.saxutils import escape

import numpy as np

from .errors import ValidationError

EIGEN_TOL = 1e-10

# Okabe-Ito; colour-blind safe
PALETTE = ("#E69F00", "#56B4E9", "#009E73", "#F0E442", "#0072B2", "#D55E00",
           "#CC79A7", "#000000", "#999999")


@dataclass(frozen=True)
class Embedding:
    segment_ids: list
    coords: np.ndarray
    eigenvalues: np.ndarray
    stress: float
    negative_eigenvalues: np.ndarray = None

    def pairwise_distances(self) -> np.ndarray:
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        return np.sqrt((diff ** 2).sum(axis=-1))


def _as_array(m):
    if hasattr(m, "values") and hasattr(m, "segment_ids"):
        return np.asarray(m.values, float), list(m.segment_ids)
    d = np.asarray(m, float)
    return d, list(range(d.shape[0]))


def kruskal_stress(d: np.ndarray, d_hat: np.ndarray) -> float:
    """Kruskal stress-1 over the upper triangle."""
    iu = np.triu_indices_from(d, k=1)
    denom = float(np.sum(d[iu] ** 2))
    if denom == 0:
        return 0.0
    return float(np.sqrt(np.sum((d[iu] - d_hat[iu]) ** 2) / denom))


def _canonicalize(x: np.ndarray) -> np.ndarray:
    x = x - x.mean(axis=0)
    # principal axes of the configuration onto the coordinate axes
    _, _, vt = np.linalg.svd(x, full_matrices=False)
    x = x @ vt.T
    for k in range(x.shape[1]):
        nz = np.flatnonzero(np.abs(x[:, k]) > 1e-12)
        if nz.size and x[nz[0], k] < 0:
            x[:, k] = -x[:, k]
    return x


def classical_mds(m, dim: int = 2) -> Embedding:
    """Embed a distance matrix in ``dim`` dimensions.

    Squares the distances, double-centres ``B = -J D^2 J / 2``, and takes the
    top ``dim`` eigenpairs. Negative eigenvalues are zeroed and reported in
    ``negative_eigenvalues``. The result is centred, rotated onto its
    principal axes and sign-fixed so that the first segment with a non-zero
    coordinate on each axis has it positive.

    Parameters
    ----------
    m : DistanceMatrix or (n, n) array
    dim : int

    Returns
    -------
    Embedding
    """
    d, ids = _as_array(m)
    n = d.shape[0]
    if d.ndim != 2 or d.shape != (n, n):
        raise ValidationError("distance matrix must be square")
    if n < dim + 1:
        raise ValidationError(f"need at least {dim + 1} points for a {dim}-D embedding")
    if not np.all(np.isfinite(d)):
        raise ValidationError("distance matrix has non-finite entries")
    scale = max(1.0, float(np.abs(d).max()))
    if np.max(np.abs(d - d.T)) > 1e-9 * scale:
        raise ValidationError("distance matrix is not symmetric")
    if np.any(np.diag(d) < 0) or np.any(np.abs(np.diag(d)) > 1e-12 * scale):
        raise ValidationError("distance matrix diagonal must be zero")

    j = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * j @ (d ** 2) @ j
    b = 0.5 * (b + b.T)
    evals, evecs = np.linalg.eigh(b)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]

    tol = EIGEN_TOL * max(1.0, abs(evals[0]))
    negative = evals[evals < -tol]
    top = evals[:dim].copy()
    positive = top > tol
    if positive.sum() < dim:
        warnings.warn(f"only {int(positive.sum())} positive eigenvalues; "
                      f"embedding has reduced rank", stacklevel=2)
    top[~positive] = 0.0
    coords = _canonicalize(evecs[:, :dim] * np.sqrt(top))
    emb = Embedding(ids, coords, top, 0.0, negative)
    stress = kruskal_stress(d, emb.pairwise_distances())
    return Embedding(ids, coords, top, stress, negative)


def write_embedding_csv(emb: Embedding, stream: TextIO, labels: Optional[dict] = None) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(("segment_id", "x", "y", "label"))
    for sid, row in zip(emb.segment_ids, emb.coords):
        y = row[1] if row.size > 1 else 0.0
        w.writerow((sid, repr(float(row[0])), repr(float(y)),
                    "" if labels is None else labels.get(sid, "")))


def embedding_svg(emb: Embedding, labels: Optional[dict] = None, size: int = 480) -> str:
    """Scatter plot of the first two coordinates, coloured by label."""
    xy = emb.coords[:, :2] if emb.coords.shape[1] >= 2 else \
        np.column_stack([emb.coords[:, 0], np.zeros(len(emb.coords))])
    pad = 40
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    px = pad + (xy - lo) / span * (size - 2 * pad)
    keys = sorted({str(v) for v in (labels or {}).values()})
    colour = {k: PALETTE[i % len(PALETTE)] for i, k in enumerate(keys)}
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + 140}" height="{size}" '
             f'viewBox="0 0 {size + 140} {size}">',
             f'<rect width="{size + 140}" height="{size}" fill="white"/>']
    for sid, (x, y) in zip(emb.segment_ids, px):
        lab = str((labels or {}).get(sid, ""))
        fill = colour.get(lab, "#444444")
        parts.append(f'<circle cx="{x:.2f}" cy="{size - y:.2f}" r="5" fill="{fill}" '
                     f'stroke="black" stroke-width="0.5"><title>{escape(str(sid))} '
                     f'{escape(lab)}</title></circle>')
    for i, k in enumerate(keys):
        y = 20 + 18 * i
        parts.append(f'<circle cx="{size + 15}" cy="{y}" r="5" fill="{colour[k]}"/>')
        parts.append(f'<text x="{size + 26}" y="{y + 4}" font-size="12" '
                     f'font-family="sans-serif">{escape(k)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
