"""Run configuration: ``key=value`` text, defaults, validation and digest."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .continuation import DEFAULT_DELTA, ContinuationPlan
from .diagnostics import DEFAULT_S_GRID
from .exceptions import ConfigValidationError
from .flow import FlowConfig
from .quadrature import TAIL_MODES, QuadSettings

COMMANDS = ("solve", "verify", "sweep-s", "continue-beta", "diagnose")


@dataclass(frozen=True)
class RunConfig:
    command: str = "solve"
    beta: float | None = None
    s: float = 0.95
    N: int = 40
    M: int | None = None
    t_max: float = 2000.0
    f_tol: float = 1e-6
    ode_rel_tol: float = 1e-8
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    panel_budget: int = 4096
    cutoff_nats: float = 46.0
    tail_mode: str = "frozen_exp"
    delta: float = DEFAULT_DELTA
    beta_start: float | None = None
    s_list: tuple | None = None
    horizon: float = 5.0
    sweep_window: int = 10
    s_grid: tuple = DEFAULT_S_GRID
    balance_tol: float = 1e-4
    snapshot: str | None = None
    resume: str | None = None
    plots: bool = True
    svg: bool = False

    def quad(self) -> QuadSettings:
        return QuadSettings(rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                            panel_budget=self.panel_budget,
                            cutoff_nats=self.cutoff_nats, tail_mode=self.tail_mode)

    def flow_kwargs(self) -> dict:
        return dict(s=self.s, N=self.N, M=self.M, t_max=self.t_max, f_tol=self.f_tol,
                    ode_rel_tol=self.ode_rel_tol, quad=self.quad())

    def flow_config(self, initial=None, **overrides) -> FlowConfig:
        kw = self.flow_kwargs()
        kw.update(overrides)
        return FlowConfig(beta=self.beta if self.beta is not None else 0.0,
                          initial=initial, **kw)

    def plan(self) -> ContinuationPlan:
        return ContinuationPlan(beta_target=self.beta, delta=self.delta,
                                beta_start=self.beta_start, flow=self.flow_kwargs(),
                                s_grid=tuple(self.s_grid))

    def digest(self) -> str:
        """sha256 over the inputs plus the bytes of any referenced snapshot.

        Plot switches are left out: they change which files are written,
        not any computed value.
        """
        payload = asdict(self)
        for key in _OUTPUT_ONLY:
            payload.pop(key)
        for key in ("snapshot", "resume"):
            path = payload.get(key)
            if path:
                try:
                    payload[key + "_sha256"] = hashlib.sha256(Path(path).read_bytes()).hexdigest()
                except OSError:
                    payload[key + "_sha256"] = None
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=list)
        return hashlib.sha256(blob.encode()).hexdigest()


_KEYS = {f.name for f in fields(RunConfig)}
_OUTPUT_ONLY = ("plots", "svg")
_FLOATS = {"beta", "s", "t_max", "f_tol", "ode_rel_tol", "rel_tol", "abs_tol",
           "cutoff_nats", "delta", "beta_start", "horizon", "balance_tol"}
_INTS = {"N", "M", "panel_budget", "sweep_window"}
_FLOAT_LISTS = {"s_list", "s_grid"}
_BOOLS = {"plots", "svg"}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _FLOATS:
            return None if raw.lower() == "none" else float(raw)
        if key in _INTS:
            if raw.lower() == "none":
                return None
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        if key in _FLOAT_LISTS:
            parts = [p for p in raw.replace(";", ",").split(",") if p.strip()]
            return tuple(float(p) for p in parts)
        if key in _BOOLS:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
    except ValueError:
        raise ConfigValidationError(key, f"cannot parse {raw!r}") from None
    return raw


def parse_pairs(text: str) -> dict:
    """``key=value`` pairs from lines or whitespace-separated tokens.

    ``#`` starts a comment; later keys override earlier ones.
    """
    out = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        for token in line.split():
            if "=" not in token:
                raise ConfigValidationError(token, "expected key=value")
            key, value = token.split("=", 1)
            key = key.strip().replace("-", "_")
            if key not in _KEYS:
                raise ConfigValidationError(key, "unknown key")
            out[key] = value
    return out


def validate(cfg: RunConfig) -> RunConfig:
    def bad(key, msg):
        raise ConfigValidationError(key, msg)

    if cfg.command not in COMMANDS:
        bad("command", f"must be one of {COMMANDS}")
    if cfg.beta is not None and not 0.0 <= cfg.beta < 1.0:
        bad("beta", f"must lie in [0, 1), got {cfg.beta}")
    if cfg.beta is None and cfg.command in ("solve", "sweep-s", "continue-beta"):
        bad("beta", "required")
    if not 0.0 < cfg.s <= 1.0:
        bad("s", f"must lie in (0, 1], got {cfg.s}")
    if cfg.N < 4:
        bad("N", f"must be >= 4, got {cfg.N}")
    if cfg.M is not None and not 0 <= cfg.M <= cfg.N - 2:
        bad("M", f"must satisfy 0 <= M <= N-2 = {cfg.N - 2}")
    for key in ("t_max", "f_tol", "ode_rel_tol", "rel_tol", "cutoff_nats", "delta",
                "horizon", "balance_tol"):
        if not getattr(cfg, key) > 0:
            bad(key, "must be positive")
    if cfg.abs_tol < 0:
        bad("abs_tol", "must be >= 0")
    if cfg.panel_budget < 1:
        bad("panel_budget", "must be >= 1")
    if cfg.sweep_window < 0:
        bad("sweep_window", "must be >= 0")
    if cfg.tail_mode not in TAIL_MODES:
        bad("tail_mode", f"must be one of {TAIL_MODES}")
    if any(not 0.0 <= s < 1.0 for s in cfg.s_grid):
        bad("s_grid", "entries must lie in [0, 1)")
    if cfg.command == "sweep-s":
        if not cfg.s_list:
            bad("s_list", "required for sweep-s")
        if any(not 0.0 < s < 1.0 for s in cfg.s_list):
            bad("s_list", "entries must lie in (0, 1)")
        if any(b <= a for a, b in zip(cfg.s_list, cfg.s_list[1:])):
            bad("s_list", "must be strictly increasing")
    if cfg.command == "continue-beta":
        if cfg.beta >= 1.0 - cfg.delta:
            bad("beta", f"target must be below 1 - delta = {1 - cfg.delta}")
        start = cfg.beta_start if cfg.beta_start is not None else min(cfg.beta, 0.4)
        if start > cfg.beta:
            bad("beta_start", "must not exceed the target beta")
        if start > 0.5 - cfg.delta + 1e-12:
            bad("beta_start", "first stage must satisfy beta <= 1/2 - delta")
    if cfg.command == "verify" and cfg.snapshot is None:
        bad("snapshot", "required for verify")
    if cfg.M is None:
        cfg = replace(cfg, M=cfg.N // 2)
    return cfg


def parse_config(text: str, command: str | None = None, **overrides) -> RunConfig:
    """Validated RunConfig from ``key=value`` text; unknown keys are rejected."""
    pairs = parse_pairs(text)
    values = {key: _coerce(key, raw) for key, raw in pairs.items()}
    if command is not None:
        values["command"] = command
    values.update(overrides)
    return validate(RunConfig(**values))
