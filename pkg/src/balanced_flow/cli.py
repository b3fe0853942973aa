"""Command line entry point.

    balanced-flow solve beta=0.3 N=40
    balanced-flow verify snapshot=runs/solve-.../snapshot.json
    balanced-flow sweep-s beta=0.3 s_list=0.9,0.99,0.999
    balanced-flow continue-beta beta=0.9 delta=0.05
    balanced-flow diagnose snapshot=...   (or beta=... to solve first)

Settings come from ``--config FILE``, then ``key=value`` arguments, then
``--key value`` flags; later sources win.  Output goes to ``--output-dir``,
else ``$BALANCED_FLOW_OUTPUT_DIR/<command>-<digest>``, else
``runs/<command>-<digest>``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 false
convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import COMMANDS, RunConfig, parse_config
from .continuation import continue_solve
from .diagnostics import bounds_report, verify_balance
from .exceptions import (BalancedFlowError, ConfigValidationError, FalseConvergenceError,
                         SnapshotError, StageFailure, UnreachableTargetError)
from .flow import FlowTrajectory, converged_sequence, integrate, s_sweep
from .persistence import (read_snapshot, snapshot_record, trajectory_rows,
                          write_plot_data, write_snapshot, write_table)
from .seqspace import extend_with_reference

log = logging.getLogger(__name__)

OUTPUT_ENV = "BALANCED_FLOW_OUTPUT_DIR"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_FALSE_CONVERGENCE = 4


@dataclass
class RunManifest:
    command: str
    config_digest: str
    outputs: list = field(default_factory=list)
    started: str = ""
    finished: str = ""
    exit_code: int | None = None
    status: str = ""
    error: dict | None = None


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, FalseConvergenceError):
        return EXIT_FALSE_CONVERGENCE
    if isinstance(exc, StageFailure) and isinstance(exc.__cause__, FalseConvergenceError):
        return EXIT_FALSE_CONVERGENCE
    if isinstance(exc, (ConfigValidationError, SnapshotError, UnreachableTargetError)):
        return EXIT_VALIDATION
    return EXIT_NUMERICAL


def default_output_dir(cfg: RunConfig) -> Path:
    base = Path(os.environ.get(OUTPUT_ENV, "runs"))
    return base / f"{cfg.command}-{cfg.digest()[:12]}"


# ---------------------------------------------------------------------------
# commands

def _write_flow_outputs(out: Path, traj: FlowTrajectory, cfg: RunConfig, name: str = "",
                        residual=None) -> list:
    digest = cfg.digest()
    paths = [write_snapshot(out / f"{name}snapshot.json",
                            snapshot_record(traj, digest, residual))]
    header, rows = trajectory_rows(traj)
    paths.append(write_table(out / f"{name}trajectory.tsv", header, rows))
    if cfg.plots:
        paths += write_plot_data(out / f"{name}plots", traj, svg=cfg.svg)
    return paths


def load_initial(path, N: int):
    """Snapshot state as an initial value of order N (tail filled from the reference)."""
    rec = read_snapshot(path)
    if rec["N"] > N:
        raise SnapshotError(
            f"snapshot has N={rec['N']} but the run uses N={N}; "
            "a snapshot can only be resumed into an equal or larger truncation")
    return extend_with_reference(rec["lambda"], N)


def _solve(cfg: RunConfig, out: Path, manifest: RunManifest) -> int:
    initial = load_initial(cfg.resume, cfg.N) if cfg.resume else None
    traj = integrate(cfg.flow_config(initial=initial))
    manifest.status = traj.status
    if traj.status != "converged":
        manifest.outputs += _write_flow_outputs(out, traj, cfg)
        return EXIT_NUMERICAL
    try:
        _, F = converged_sequence(traj)
    except FalseConvergenceError:
        manifest.outputs += _write_flow_outputs(out, traj, cfg)
        manifest.status = "false_convergence"
        raise
    manifest.outputs += _write_flow_outputs(out, traj, cfg, residual=F.unweighted)
    return EXIT_OK


def resume(snapshot_path, cfg: RunConfig, out: Path | None = None) -> tuple:
    """Continue integration from a saved state with new settings."""
    return run(replace(cfg, command="solve", resume=str(snapshot_path)), out)


def _verify(cfg: RunConfig, out: Path, manifest: RunManifest) -> int:
    rec = read_snapshot(cfg.snapshot)
    beta = cfg.beta if cfg.beta is not None else rec["beta"]
    report = verify_balance(rec["lambda_normalized"], beta, cfg.s_grid, cfg.quad())
    path = out / "balance.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n")
    manifest.outputs.append(path)
    ok = report.passed(cfg.balance_tol)
    manifest.status = "balanced" if ok else "imbalanced"
    return EXIT_OK if ok else EXIT_NUMERICAL


def _sweep(cfg: RunConfig, out: Path, manifest: RunManifest) -> int:
    res = s_sweep(cfg.flow_config(), cfg.s_list, horizon=cfg.horizon,
                  window=cfg.sweep_window)
    for s, traj in zip(res.s_values, res.trajectories):
        header, rows = trajectory_rows(traj)
        manifest.outputs.append(write_table(out / f"trajectory_s{s!r}.tsv", header, rows))
    k = len(res.distances[0]) if res.distances else 0
    header = ["s_a", "s_b", "sup"] + [f"d_{i}" for i in range(k)]
    rows = [[a, b, float(np.max(d))] + [float(v) for v in d]
            for a, b, d in zip(res.s_values, res.s_values[1:], res.distances)]
    manifest.outputs.append(write_table(out / "cauchy.tsv", header, rows))
    manifest.status = "partial" if res.failures else "complete"
    return EXIT_NUMERICAL if res.failures else EXIT_OK


def _continue(cfg: RunConfig, out: Path, manifest: RunManifest) -> int:
    try:
        result = continue_solve(cfg.plan())
        stages = result.stages
    except StageFailure as exc:
        stages = exc.stages
        _write_stages(out, stages, cfg, manifest)
        raise
    _write_stages(out, stages, cfg, manifest)
    final_cfg = replace(cfg, beta=stages[-1].beta)
    manifest.outputs += _write_flow_outputs(out, stages[-1].trajectory, final_cfg)
    path = out / "balance.json"
    path.write_text(json.dumps(result.balance.to_dict(), sort_keys=True, indent=1) + "\n")
    manifest.outputs.append(path)
    ok = result.balance.passed(cfg.balance_tol)
    manifest.status = "balanced" if ok else "imbalanced"
    return EXIT_OK if ok else EXIT_NUMERICAL


def _write_stages(out: Path, stages, cfg: RunConfig, manifest: RunManifest):
    rows = []
    for n, st in enumerate(stages):
        stage_cfg = replace(cfg, beta=st.beta)
        manifest.outputs.append(write_snapshot(
            out / f"stage_{n}.json", snapshot_record(st.trajectory, stage_cfg.digest())))
        rows.append([n, st.beta, st.start_energy, st.expected_start_energy,
                     st.trajectory.final.t,
                     float("nan") if st.residual_linf is None else st.residual_linf])
    header = ["stage", "beta", "start_E", "expected_start_E", "t_final", "residual_linf"]
    manifest.outputs.append(write_table(out / "stages.tsv", header, rows))


def _diagnose(cfg: RunConfig, out: Path, manifest: RunManifest) -> int:
    traj = None
    if cfg.snapshot:
        rec = read_snapshot(cfg.snapshot)
        lam = rec["lambda_normalized"]
        beta = cfg.beta if cfg.beta is not None else rec["beta"]
    else:
        if cfg.beta is None:
            raise ConfigValidationError("beta", "required when no snapshot is given")
        traj = integrate(cfg.flow_config())
        lam, beta = traj.final.lam, cfg.beta
        manifest.outputs += _write_flow_outputs(out, traj, cfg)
    report = bounds_report(lam, beta, cfg.quad(), traj=traj)
    path = out / "bounds.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n")
    manifest.outputs.append(path)
    flags = [report.u_monotone_ok, report.sandwich_ok, report.lambda2_ok]
    if report.drift_ok is not None:
        flags.append(report.drift_ok)
    manifest.status = "ok" if all(flags) else "violations"
    return EXIT_OK if all(flags) else EXIT_NUMERICAL


_HANDLERS = {
    "solve": _solve,
    "verify": _verify,
    "sweep-s": _sweep,
    "continue-beta": _continue,
    "diagnose": _diagnose,
}


def run(cfg: RunConfig, out: Path | None = None) -> tuple:
    """Execute one command; returns ``(exit_code, manifest)``.

    Errors are caught, mapped to exit codes and recorded in
    ``error.json`` next to the manifest.
    """
    out = Path(out) if out is not None else default_output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.command, cfg.digest(), started=_now())
    try:
        code = _HANDLERS[cfg.command](cfg, out, manifest)
    except BalancedFlowError as exc:
        code = exit_code_for(exc)
        manifest.error = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
        err_path = out / "error.json"
        err_path.write_text(json.dumps(manifest.error, sort_keys=True, indent=1) + "\n")
        manifest.outputs.append(err_path)
        log.error("%s failed: %s", cfg.command, exc)
    manifest.exit_code = code
    manifest.finished = _now()
    manifest.outputs = [str(p) for p in manifest.outputs]
    (out / "manifest.json").write_text(json.dumps(asdict(manifest), indent=1) + "\n")
    return code, manifest


# ---------------------------------------------------------------------------
# argument parsing

_FLAG_KEYS = [f.name for f in fields(RunConfig) if f.name not in ("command", "plots", "svg")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="balanced-flow", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("pairs", nargs="*", metavar="key=value")
        p.add_argument("--config", type=Path, help="file of key=value lines")
        p.add_argument("--output-dir", type=Path)
        p.add_argument("--svg", dest="svg", action="store_const", const="true")
        p.add_argument("--no-plots", dest="plots", action="store_const", const="false")
        for key in _FLAG_KEYS:
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar="VALUE")
    return parser


def config_from_args(args) -> RunConfig:
    chunks = []
    if args.config is not None:
        try:
            chunks.append(args.config.read_text())
        except OSError as exc:
            raise ConfigValidationError("config", str(exc)) from exc
    chunks.append(" ".join(args.pairs))
    flags = [f"{k}={getattr(args, k)}" for k in _FLAG_KEYS + ["svg", "plots"]
             if getattr(args, k, None) is not None]
    chunks.append(" ".join(flags))
    return parse_config("\n".join(chunks), command=args.command)


def main(argv=None) -> int:
    parser = build_parser()
    # key=value tokens may follow flags, which a plain "*" positional rejects
    args, extra = parser.parse_known_args(argv)
    stray = [tok for tok in extra if "=" not in tok or tok.startswith("-")]
    if stray:
        parser.error(f"unrecognized arguments: {' '.join(stray)}")
    args.pairs = list(args.pairs) + extra
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigValidationError as exc:
        print(json.dumps({"type": type(exc).__name__, "key": exc.key, "message": str(exc),
                          "exit_code": EXIT_VALIDATION}), file=sys.stderr)
        return EXIT_VALIDATION
    code, manifest = run(cfg, args.output_dir)
    if manifest.error:
        print(json.dumps(manifest.error), file=sys.stderr)
    print(json.dumps({"command": manifest.command, "status": manifest.status,
                      "exit_code": code, "outputs": manifest.outputs}))
    return code


if __name__ == "__main__":
    sys.exit(main())
