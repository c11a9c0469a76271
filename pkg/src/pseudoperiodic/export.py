"""Output writers: atomic files, trajectory CSV/JSON and a static SVG plot."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def atomic_write(path: str | Path, text: str) -> Path:
    """Write via a temporary file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, payload) -> Path:
    return atomic_write(path, json.dumps(_jsonable(payload), indent=2) + "\n")


def trajectory_csv(times: np.ndarray, positions: np.ndarray) -> str:
    """Columns ``t, x1, y1, ..., xn, yn``; 17 significant digits."""
    n = positions.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"{c}{i + 1}" for i in range(n) for c in ("x", "y")])
    for t, p in zip(times, positions):
        w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in p.ravel()])
    return buf.getvalue()


def trajectory_svg(positions: np.ndarray, size: int = 600, margin: int = 20) -> str:
    """Polylines of each body's path, equal aspect, no interactivity."""
    pts = positions.reshape(-1, 2)
    lo = pts.min(axis=0)
    span = float(max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1e-12))
    scale = (size - 2 * margin) / span

    def xy(p):
        # SVG y axis points down
        return margin + (p[0] - lo[0]) * scale, size - margin - (p[1] - lo[1]) * scale

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for b in range(positions.shape[1]):
        coords = " ".join("%.3f,%.3f" % xy(p) for p in positions[:, b])
        color = PALETTE[b % len(PALETTE)]
        lines.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{coords}">'
                     f"<title>body {b + 1}</title></polyline>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
