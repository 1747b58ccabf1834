"""Result files: gaps.csv, rate_fit.json, bound_report.json, plot_data.csv, manifest.json."""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ReportIOError
from .experiments import GapRecord, RateFit, aggregate_by_n

GAPS_HEADER = ("experiment_id", "error_kind", "n", "m", "replicate", "gap", "abs_mode", "sup_method", "seed")
PLOT_HEADER = ("n", "median_gap", "q25", "q75", "predicted_gap_from_fit")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def to_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def gaps_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GAPS_HEADER)
    for r in sorted(records, key=GapRecord.sort_key):
        w.writerow([r.experiment_id, r.error_kind, r.n, r.m, r.replicate, fmt(r.gap),
                    "on" if r.abs_mode else "off", r.sup_method, r.seed])
    return buf.getvalue()


def read_gaps_csv(path) -> list[GapRecord]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    records = []
    for row in rows:
        if tuple(row) != GAPS_HEADER:
            raise ValueError(f"{path}: unexpected columns {list(row)}")
        records.append(GapRecord(row["experiment_id"], row["error_kind"], int(row["n"]), int(row["m"]),
                                 int(row["replicate"]), float(row["gap"]), row["abs_mode"] == "on",
                                 row["sup_method"], "", int(row["seed"])))
    return records


def plot_rows(records, fit: RateFit | None) -> list[dict]:
    groups: dict[int, list] = {}
    for r in records:
        groups.setdefault(r.n, []).append(r.gap)
    rows = []
    for n in sorted(groups):
        g = np.array(groups[n])
        q25, med, q75 = np.quantile(g, [0.25, 0.5, 0.75])
        pred = float(fit.predict(n)) if fit is not None and n >= 2 else math.nan
        rows.append({"n": n, "median_gap": float(med), "q25": float(q25), "q75": float(q75),
                     "predicted_gap_from_fit": pred})
    return rows


def plot_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_HEADER)
    for row in rows:
        w.writerow([row["n"]] + [fmt(row[k]) for k in PLOT_HEADER[1:]])
    return buf.getvalue()


def new_manifest(config_hash: str, master_seed: int | None, config: dict, command: str) -> dict:
    return {"config_hash": config_hash, "tool_version": __version__, "master_seed": master_seed,
            "command": command, "config": config, "started_at": _now(), "finished_at": None,
            "status": "running", "outputs": []}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(manifest: dict, out_dir) -> Path:
    return write_text(Path(out_dir) / "manifest.json", to_json(manifest))


def finalize_manifest(manifest: dict, out_dir, outputs, status: str = "complete") -> Path:
    manifest["outputs"] = sorted(set(manifest["outputs"]) | {Path(p).name for p in outputs} | {"manifest.json"})
    manifest["finished_at"] = _now()
    manifest["status"] = status
    return write_manifest(manifest, out_dir)


def emit_results(records, fits: dict, manifest: dict, out_dir, bound_report=None,
                 extra: dict | None = None) -> list[Path]:
    """Write every result file and the finalized manifest; returns the paths.

    Identical records, fits and report produce byte-identical data files.
    """
    if not records:
        raise ValueError("no gap records to write")
    out = Path(out_dir)
    paths = [write_text(out / "gaps.csv", gaps_csv(records))]
    fit_json = {k: (v.to_dict() if isinstance(v, RateFit) else v) for k, v in fits.items()}
    paths.append(write_text(out / "rate_fit.json", to_json(fit_json)))
    if bound_report is not None:
        paths.append(write_text(out / "bound_report.json", to_json(bound_report.to_dict())))
    main_fit = fits.get("log_sqrt_logn_over_n")
    main_fit = main_fit if isinstance(main_fit, RateFit) else None
    paths.append(write_text(out / "plot_data.csv", plot_csv(plot_rows(records, main_fit))))
    for name, obj in (extra or {}).items():
        paths.append(write_text(out / name, to_json(obj)))
    finalize_manifest(manifest, out, paths)
    return paths + [out / "manifest.json"]


def summary_lines(records, fits: dict) -> list[str]:
    agg = aggregate_by_n(records)
    lines = [f"n={n} gap={g:.6g}" for n, g in agg.items()]
    for kind, fit in fits.items():
        if isinstance(fit, RateFit):
            lines.append(f"fit[{kind}] slope={fit.slope:.4f} intercept={fit.intercept:.4f} r2={fit.r_squared:.4f}")
        elif isinstance(fit, dict):
            lines.append(f"fit[{kind}] unavailable: {fit.get('error')}")
        else:
            lines.append(f"{kind}={fit:.4f}")
    return lines
