"""Command line interface: one subcommand per pipeline stage plus ``sweep``.

Settings come from built-in defaults, then an optional ``--config`` JSON
file, then command-line flags (highest priority). Every command writes its
artifacts into the output directory (``--output-dir``, else
``$WIFITOPO_OUTPUT_DIR``, else ``./wifitopo-out``) together with a
``<command>.manifest.json``.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import platform
import sys
import tempfile
import time
from dataclasses import fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import distance as dist
from .embed import classical_mds, embedding_svg, write_embedding_csv
from .errors import ConfigurationError, ParameterError, WifiTopoError
from .evaluation import read_labels, roc_auc, label_pairs, write_labels, write_roc_csv
from .ingest import (load_blacklist, parse_accel_records, parse_wifi_records,
                     write_accel_records, write_wifi_records)
from .likelihood import read_fingerprints, write_fingerprints
from .motionseg import read_segment_table, write_boundaries, write_segments
from .pipeline import (SWEEP_FIELDS, PipelineConfig, build_fingerprints, evaluate_matrix,
                       prepare_wifi, room_day_keys, run_segmentation, run_sweep, segment_table,
                       smoothing_for, _relabel)
from .synthetic import SyntheticSceneConfig, generate_scene_accel, generate_synthetic_scene

ENV_OUTPUT_DIR = "WIFITOPO_OUTPUT_DIR"
COMMANDS = ("segment", "fingerprint", "distances", "evaluate", "embed", "simulate", "sweep")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _csv_list(cast):
    def parse(text):
        return [cast(x) for x in str(text).split(",") if x.strip()]
    return parse


_FLAG_TYPES = {
    "wifi": str, "accel": str, "blacklist": str, "labels": str, "segments": str,
    "fingerprints": str, "distances": str, "scene": str, "output_dir": str, "device": str,
    "window_len": int, "hop": int, "statistic": str, "threshold": float,
    "assume_stationary_when_no_accel": _bool, "min_duration": int, "scan_epsilon": int,
    "estimator": str, "h": float, "laplace_epsilon": float, "sigma_min": float,
    "invisibility": _bool, "measure": str, "norm": int, "grid_lo": float, "grid_hi": float,
    "grid_step": float, "bhattacharyya_cap": float, "pool": str, "seed": int, "jobs": int,
    "sweep_estimators": _csv_list(str), "sweep_measures": _csv_list(str),
    "sweep_norms": _csv_list(int), "sweep_invisibility": _csv_list(_bool),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wifitopo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with pipeline settings")
        for key, typ in _FLAG_TYPES.items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)
        if name == "sweep":
            p.add_argument("--resume", action="store_true",
                           help="skip combinations recorded in an earlier partial run")
    return parser


def resolve_config(args) -> PipelineConfig:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
    for f in fields(PipelineConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            data[f.name] = v
    if not data.get("output_dir"):
        data["output_dir"] = os.environ.get(ENV_OUTPUT_DIR, "wifitopo-out")
    try:
        return PipelineConfig.from_dict(data)
    except (ParameterError, TypeError) as exc:
        raise UsageError(str(exc)) from None


# --------------------------------------------------------------------------
# file helpers


def atomic_write(path: Path, text: str = None, data: bytes = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(text.encode("utf-8") if data is None else data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _render(writer, *args, **kw) -> str:
    buf = io.StringIO()
    writer(*args, buf, **kw)
    return buf.getvalue()


def _fmt(path):
    return "jsonl" if str(path).endswith((".jsonl", ".json")) else "csv"


def _need(cfg, key, out, default_name):
    value = getattr(cfg, key)
    if value:
        return Path(value)
    candidate = Path(out) / default_name
    if candidate.exists():
        return candidate
    raise UsageError(f"--{key.replace('_', '-')} is required (no {candidate} found)")


def _open(path):
    try:
        return open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise UsageError(f"cannot open {path}: {exc}") from None


class Run:
    """Collects artifacts and timings for the manifest."""

    def __init__(self, command, cfg):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.hash = cfg.config_hash()
        self.artifacts = {}
        self.timings = {}
        self._t0 = time.perf_counter()

    def write(self, name, text=None, data=None):
        path = self.out / name
        atomic_write(path, text, data)
        payload = data if data is not None else text.encode("utf-8")
        self.artifacts[name] = {"sha256": hashlib.sha256(payload).hexdigest(),
                                "config_hash": self.hash}
        return path

    def time(self, label):
        now = time.perf_counter()
        self.timings[label] = round(now - self._t0, 6)
        self._t0 = now

    def manifest(self):
        doc = {
            "command": self.command,
            "config_hash": self.hash,
            "config": self.cfg.as_dict(),
            "versions": {"wifitopo": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "timings_s": self.timings,
            "created_unix": time.time(),
            "artifacts": self.artifacts,
        }
        atomic_write(self.out / f"{self.command}.manifest.json",
                     json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


# --------------------------------------------------------------------------
# shared loading


def _load_wifi(cfg, out):
    path = _need(cfg, "wifi", out, "wifi.csv")
    with _open(path) as fh:
        ds = parse_wifi_records(fh, _fmt(path))
    bl = None
    if cfg.blacklist:
        with _open(cfg.blacklist) as fh:
            bl = load_blacklist(fh)
    return prepare_wifi(ds, bl, cfg.device)


def _load_accel(cfg, out):
    path = _need(cfg, "accel", out, "accel.csv")
    with _open(path) as fh:
        return parse_accel_records(fh, _fmt(path))


def _load_labels(cfg, out, required=True):
    try:
        path = _need(cfg, "labels", out, "labels.csv")
    except UsageError:
        if required:
            raise
        return None
    with _open(path) as fh:
        return read_labels(fh)


def _load_table(cfg, out, ds):
    if cfg.segments or (Path(out) / "segments.csv").exists():
        path = _need(cfg, "segments", out, "segments.csv")
        with _open(path) as fh:
            return read_segment_table(fh)
    accel = _load_accel(cfg, out)
    _, segs = run_segmentation(ds, accel, cfg)
    return segment_table(segs)


def _load_matrix(cfg, out):
    path = _need(cfg, "distances", out, "distances.csv")
    sidecar = path.with_suffix(".json")
    meta = {}
    measure, norm = cfg.measure, cfg.norm
    if sidecar.exists():
        with open(sidecar) as fh:
            meta = json.load(fh)
        measure, norm = meta.get("measure", measure), meta.get("norm", norm)
    with _open(path) as fh:
        return dist.read_matrix_csv(fh, measure, norm, meta)


# --------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, run):
    scene = SyntheticSceneConfig(seed=cfg.seed)
    if cfg.scene:
        with _open(cfg.scene) as fh:
            scene = SyntheticSceneConfig.from_json(fh.read())
        scene.seed = cfg.seed
    ds, labels = generate_synthetic_scene(scene)
    accel = generate_scene_accel(scene)
    run.time("generate")
    run.write("wifi.csv", _render(write_wifi_records, ds))
    run.write("accel.csv", _render(write_accel_records, accel))
    run.write("labels.csv", _render(write_labels, labels))
    run.write("scene.json", json.dumps(json.loads(scene.to_json()), indent=2, sort_keys=True) + "\n")
    run.time("write")


def cmd_segment(cfg, run):
    ds = _load_wifi(cfg, run.out)
    accel = _load_accel(cfg, run.out)
    seg, segs = run_segmentation(ds, accel, cfg)
    run.time("segment")
    run.write("segments.csv", _render(write_segments, segs))
    run.write("boundaries.csv", _render(write_boundaries, seg))
    run.write("segmentation.json", json.dumps(
        {"config_hash": run.hash, "metadata": seg.metadata, "n_segments": len(segs)},
        indent=2, sort_keys=True) + "\n")


def cmd_fingerprint(cfg, run):
    ds = _load_wifi(cfg, run.out)
    table = _load_table(cfg, run.out, ds)
    pool_keys = None
    if cfg.pool == "room-day":
        pool_keys, pooled = room_day_keys(table, _load_labels(cfg, run.out))
        run.write("labels.pooled.csv", _render(write_labels, pooled))
    eps = smoothing_for(cfg.estimator, cfg.measure, cfg.laplace_epsilon)
    fps = build_fingerprints(ds, table, cfg.estimator, cfg.invisibility, h=cfg.h,
                             laplace_epsilon=eps, sigma_min=cfg.sigma_min,
                             scan_epsilon=cfg.scan_epsilon, pool_keys=pool_keys)
    if pool_keys is not None:
        fps = [_relabel(f, pooled[i].segment_id) for i, f in enumerate(fps)]
    run.time("fingerprint")
    run.write("fingerprints.jsonl", _render(write_fingerprints, fps, config_hash=run.hash))


def cmd_distances(cfg, run):
    path = _need(cfg, "fingerprints", run.out, "fingerprints.jsonl")
    with _open(path) as fh:
        fps = read_fingerprints(fh)
    dm = dist.pairwise_matrix(fps, cfg.measure, cfg.norm, cfg.grid(), cfg.bhattacharyya_cap,
                              jobs=cfg.jobs)
    run.time("distances")
    run.write("distances.csv", _render(dist.write_matrix_csv, dm))
    run.write("distances.f64", data=np.ascontiguousarray(dm.values, dtype="<f8").tobytes())
    side = dist.matrix_sidecar(dm)
    side["config_hash"] = run.hash
    side["payload"] = "distances.f64"
    run.write("distances.json", json.dumps(side, indent=2, sort_keys=True) + "\n")


def cmd_evaluate(cfg, run):
    dm = _load_matrix(cfg, run.out)
    labels = _load_labels(cfg, run.out)
    same, diff = label_pairs(dm, labels)
    report = evaluate_matrix(dm, labels)
    report["config_hash"] = run.hash
    report["measure"] = dm.measure.value
    report["norm"] = dm.norm
    if same and diff:
        run.write("roc.csv", _render(write_roc_csv, roc_auc(same, diff)))
    run.time("evaluate")
    run.write("report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")


def cmd_embed(cfg, run):
    dm = _load_matrix(cfg, run.out)
    labels = _load_labels(cfg, run.out, required=False)
    names = None
    if labels is not None:
        names = {}
        by_str = {str(l.segment_id): l.location_label for l in labels}
        for sid in dm.segment_ids:
            names[sid] = by_str.get(str(sid), "")
    emb = classical_mds(dm, 2)
    run.time("embed")
    run.write("embedding.csv", _render(write_embedding_csv, emb, labels=names))
    run.write("embedding.svg", embedding_svg(emb, names))
    run.write("embedding.json", json.dumps(
        {"config_hash": run.hash, "eigenvalues": [float(v) for v in emb.eigenvalues],
         "negative_eigenvalues": [float(v) for v in emb.negative_eigenvalues],
         "stress": emb.stress}, indent=2, sort_keys=True) + "\n")


def cmd_sweep(cfg, run, resume=False):
    ds = _load_wifi(cfg, run.out)
    table = _load_table(cfg, run.out, ds)
    labels = _load_labels(cfg, run.out)
    partial = run.out / "sweep.csv.partial"
    progress = run.out / "sweep.progress.json"
    done = {}
    if resume and progress.exists():
        with open(progress) as fh:
            state = json.load(fh)
        if state.get("config_hash") == run.hash:
            done = {tuple(r[:4]): r for r in state.get("rows", [])}
    header = ",".join(SWEEP_FIELDS) + "\n"
    rows_so_far = [list(r) for r in done.values()]

    def checkpoint(key, row):
        rows_so_far.append(row)
        atomic_write(partial, header + "".join(",".join(r) + "\n" for r in rows_so_far))
        atomic_write(progress, json.dumps({"config_hash": run.hash,
                                           "completed": [r[:4] for r in rows_so_far],
                                           "rows": rows_so_far}, indent=1) + "\n")

    rows = run_sweep(ds, table, labels, cfg, done=done, on_row=checkpoint)
    run.time("sweep")
    run.write("sweep.csv", header + "".join(",".join(r) + "\n" for r in rows))
    for p in (partial, progress):
        if p.exists():
            p.unlink()


HANDLERS = {
    "simulate": cmd_simulate, "segment": cmd_segment, "fingerprint": cmd_fingerprint,
    "distances": cmd_distances, "evaluate": cmd_evaluate, "embed": cmd_embed,
}


def _fail(command, exc, code):
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code,
           "command": command}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    command = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        cfg = resolve_config(args)
        run = Run(command, cfg)
        if command == "sweep":
            cmd_sweep(cfg, run, resume=args.resume)
        else:
            HANDLERS[command](cfg, run)
        run.manifest()
        return EXIT_OK
    except UsageError as exc:
        return _fail(command, exc, EXIT_USAGE)
    except (ParameterError, ConfigurationError) as exc:
        return _fail(command, exc, EXIT_USAGE)
    except WifiTopoError as exc:
        return _fail(command, exc, exc.exit_code)
    except (ValueError, KeyError) as exc:
        return _fail(command, exc, EXIT_DATA)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(command, exc, EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
