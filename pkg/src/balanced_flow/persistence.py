"""Snapshots, trajectory tables and plot data on disk.

Snapshots are JSON with sorted keys and no timestamps, so identical runs
produce identical bytes.  Floats go through ``repr`` (shortest round-trip
form), which restores every value bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .exceptions import SnapshotError
from .seqspace import normalize, reference_values

SNAPSHOT_SCHEMA = "balanced-flow/snapshot"
SNAPSHOT_VERSION = 1


def _floats(arr) -> list:
    return [float(v) for v in np.asarray(arr, dtype=float)]


def snapshot_record(traj, digest: str | None = None, residual=None) -> dict:
    """Final state of a trajectory as a plain dict.

    ``residual`` overrides the final-sample residual (e.g. the recheck done
    at tighter quadrature tolerance).
    """
    cfg = traj.config
    final = traj.final
    F = final.F if residual is None else residual
    e = final.energy
    return {
        "schema": SNAPSHOT_SCHEMA,
        "version": SNAPSHOT_VERSION,
        "beta": float(cfg.beta),
        "s": float(cfg.s),
        "N": int(cfg.N),
        "M": int(cfg.M),
        "tail_mode": cfg.quad.tail_mode,
        "status": traj.status,
        "t_final": float(final.t),
        "lambda": _floats(final.lam),
        "lambda_normalized": _floats(normalize(np.asarray(final.lam))),
        "residual": _floats(F),
        "energy": {"E": e.E, "E_s": e.E_s, "G_s": e.G_s, "H_s": e.H_s},
        "config_digest": digest,
    }


def dumps_snapshot(record: dict) -> str:
    return json.dumps(record, sort_keys=True, indent=1) + "\n"


def write_snapshot(path, record: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_snapshot(record))
    return path


def read_snapshot(path) -> dict:
    try:
        rec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    if not isinstance(rec, dict) or rec.get("schema") != SNAPSHOT_SCHEMA:
        raise SnapshotError(f"{path} is not a snapshot record")
    if rec.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(f"unsupported snapshot version {rec.get('version')!r}")
    for key in ("beta", "N", "lambda"):
        if key not in rec:
            raise SnapshotError(f"snapshot is missing {key!r}")
    lam = np.asarray(rec["lambda"], dtype=float)
    if lam.size != rec["N"] + 1 or not np.all(np.isfinite(lam)):
        raise SnapshotError("snapshot lambda has the wrong length or non-finite entries")
    rec["lambda"] = lam
    rec["lambda_normalized"] = np.asarray(rec.get("lambda_normalized", normalize(lam)),
                                          dtype=float)
    rec["residual"] = np.asarray(rec.get("residual", []), dtype=float)
    return rec


def trajectory_rows(traj) -> tuple:
    """Header and rows: t, E, E_s, linf_F, l2_drift, lambda_0..lambda_k."""
    cfg = traj.config
    k = min(cfg.M, 10)
    ref = reference_values(cfg.N)
    header = ["t", "E", "E_s", "linf_F", "l2_drift"] + [f"lambda_{i}" for i in range(k + 1)]
    rows = []
    for smp in traj.samples:
        drift = float(np.linalg.norm(smp.lam - ref))
        rows.append([smp.t, smp.energy.E, smp.energy.E_s, smp.linf_F, drift]
                    + [float(v) for v in smp.lam[: k + 1]])
    return header, rows


def write_table(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(header)]
    lines += ["\t".join(repr(float(v)) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_table(path) -> tuple:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split("\t")
    rows = np.array([[float(v) for v in ln.split("\t")] for ln in lines[1:]])
    return header, rows


def write_series(path, xs, ys) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{float(x)!r} {float(y)!r}\n" for x, y in zip(xs, ys)))
    return path


def write_plot_data(directory, traj, svg: bool = False) -> list:
    """Two-column files for E(t), ||F||_inf(t) and lambda_i at the final time."""
    directory = Path(directory)
    t = traj.times
    E = [smp.energy.E for smp in traj.samples]
    linf = [smp.linf_F for smp in traj.samples]
    lam = normalize(np.asarray(traj.final.lam))
    curves = [
        ("energy", t, E, "E(t)", True),
        ("linf_F", t, linf, "||F||_inf(t)", True),
        ("lambda_inf", np.arange(lam.size), lam, "lambda_i at final time", False),
    ]
    paths = []
    for name, xs, ys, title, logy in curves:
        paths.append(write_series(directory / f"{name}.dat", xs, ys))
        if svg:
            paths.append(write_svg(directory / f"{name}.svg", xs, ys, title, logy))
    return paths


def write_svg(path, xs, ys, title: str, logy: bool = False,
              width: int = 480, height: int = 320) -> Path:
    """Minimal line plot as SVG; non-positive values are dropped on a log axis."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if logy:
        keep = ys > 0
        xs, ys = xs[keep], np.log10(ys[keep])
    pad = 40
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if xs.size == 0:
        pts = ""
    else:
        x0, x1 = xs.min(), xs.max()
        y0, y1 = ys.min(), ys.max()
        sx = (width - 2 * pad) / (x1 - x0 if x1 > x0 else 1.0)
        sy = (height - 2 * pad) / (y1 - y0 if y1 > y0 else 1.0)
        pts = " ".join(f"{pad + (x - x0) * sx:.2f},{height - pad - (y - y0) * sy:.2f}"
                       for x, y in zip(xs, ys))
    label = f"{title} (log10)" if logy else title
    path.write_text(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
        f'<text x="{pad}" y="{pad / 2}" font-size="14">{label}</text>\n'
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>\n'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>\n'
        f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{pts}"/>\n'
        "</svg>\n")
    return path
