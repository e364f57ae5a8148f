"""Fatigue-gated treadmill session state machine and closed-loop simulation.

Two modes: FAT_C pauses running for a fixed rest whenever the MPF drop rate
reaches the threshold and resumes afterwards with a fresh bout; FOR_T ignores
the drop rate entirely. Both stop once the accumulated running time reaches
the target. ``run_session`` closes the loop against the synthetic EMG plant.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError, ProtocolError
from .fatigue import BaselineRule, MpfStream
from .signals import DEFAULT_RATE, TimeSeries
from .synth import FatigueState, PlantConfig, _gen_emg_samples, plant_step


class Mode(enum.Enum):
    FAT_C = "fat-c"
    FOR_T = "for-t"


class Phase(enum.Enum):
    RUNNING = "running"
    RESTING = "resting"
    COMPLETED = "completed"


@dataclass
class SessionConfig:
    mode: Mode = Mode.FAT_C
    speed: float = 16.0               # m/min, metadata only
    target_running: float = 1800.0    # accumulated running seconds
    rest_duration: float = 180.0
    threshold: float = 11.0           # percent MPF drop triggering rest
    window: float = 4.0               # evaluation window, seconds
    baseline_rule: BaselineRule = field(default_factory=BaselineRule)

    def __post_init__(self):
        if isinstance(self.mode, str):
            self.mode = Mode(self.mode)
        if self.target_running <= 0 or self.rest_duration <= 0 or self.window <= 0:
            raise ConfigError("durations must be positive")
        if not 0 < self.threshold < 100:
            raise ConfigError(f"threshold must be in (0, 100), got {self.threshold}")


@dataclass(frozen=True)
class SessionState:
    phase: Phase = Phase.RUNNING
    rest_remaining: float = 0.0
    accumulated_running: float = 0.0
    bout_index: int = 0
    last_drop_rate: float | None = None


def step(
    state: SessionState,
    cfg: SessionConfig,
    drop_rate: float | None,
    dt: float,
) -> SessionState:
    """Advance the state machine by ``dt`` seconds.

    While running, ``drop_rate`` is the window's evaluated drop rate (None
    during baseline collection or gaps). "Exceeded the threshold" is read
    inclusively, so drop_rate == threshold pauses.
    """
    if dt <= 0:
        raise ConfigError("dt must be positive")
    if state.phase is Phase.COMPLETED:
        raise ProtocolError("step() called on a completed session")
    if state.phase is Phase.RESTING:
        if drop_rate is not None:
            raise ProtocolError("drop_rate supplied while resting")
        remaining = state.rest_remaining - dt
        if remaining <= 1e-12:
            return replace(state, phase=Phase.RUNNING, rest_remaining=0.0,
                           bout_index=state.bout_index + 1)
        return replace(state, rest_remaining=remaining)
    accumulated = state.accumulated_running + dt
    if accumulated >= cfg.target_running:
        return replace(state, phase=Phase.COMPLETED,
                       accumulated_running=accumulated, last_drop_rate=drop_rate)
    if (cfg.mode is Mode.FAT_C and drop_rate is not None
            and drop_rate >= cfg.threshold):
        return replace(state, phase=Phase.RESTING, rest_remaining=cfg.rest_duration,
                       accumulated_running=accumulated, last_drop_rate=drop_rate)
    return replace(state, accumulated_running=accumulated, last_drop_rate=drop_rate)


@dataclass
class Event:
    t: float
    kind: str
    data: dict = field(default_factory=dict)

    def to_obj(self) -> dict:
        return {"t": self.t, "kind": self.kind, **self.data}


@dataclass
class BoutSummary:
    bout_index: int
    start: float
    end: float
    n_windows: int
    max_drop_rate: float | None
    mean_mpf: float | None


@dataclass
class SessionLog:
    """Timestamped event record of one session plus per-bout summaries."""

    events: list[Event] = field(default_factory=list)
    bouts: list[BoutSummary] = field(default_factory=list)

    TERMINAL = ("completed", "timeout")

    def append(self, t: float, kind: str, **data) -> None:
        self.events.append(Event(t, kind, data))

    def validate(self) -> None:
        times = [e.t for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ProtocolError("event timestamps decrease")
        rest_open = False
        for e in self.events:
            if e.kind == "rest_start":
                if rest_open:
                    raise ProtocolError("rest_start without rest_end")
                rest_open = True
            elif e.kind == "rest_end":
                if not rest_open:
                    raise ProtocolError("rest_end without rest_start")
                rest_open = False
        terminals = [e for e in self.events if e.kind in self.TERMINAL]
        if len(terminals) != 1 or self.events[-1].kind not in self.TERMINAL:
            raise ProtocolError("log must end with exactly one terminal event")

    @property
    def completed(self) -> bool:
        return bool(self.events) and self.events[-1].kind == "completed"

    FORMAT_VERSION = 1

    def to_jsonl(self) -> str:
        lines = [json.dumps({"format": "session-log",
                             "version": self.FORMAT_VERSION}, sort_keys=True)]
        lines += [json.dumps(e.to_obj(), sort_keys=True) for e in self.events]
        for b in self.bouts:
            lines.append(json.dumps(
                {"kind": "bout_summary", "bout_index": b.bout_index, "start": b.start,
                 "end": b.end, "n_windows": b.n_windows,
                 "max_drop_rate": b.max_drop_rate, "mean_mpf": b.mean_mpf},
                sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "SessionLog":
        log = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            if "format" in obj:
                if obj.get("version") != cls.FORMAT_VERSION:
                    raise DataError(
                        f"unsupported session-log version {obj.get('version')!r}")
                continue
            kind = obj.pop("kind")
            if kind == "bout_summary":
                log.bouts.append(BoutSummary(
                    obj["bout_index"], obj["start"], obj["end"], obj["n_windows"],
                    obj["max_drop_rate"], obj["mean_mpf"]))
            else:
                t = obj.pop("t")
                log.events.append(Event(t, kind, obj))
        return log


def _derived_seed(session_seed: int, plant_seed: int) -> int:
    return int(np.random.SeedSequence([session_seed, plant_seed]).generate_state(1)[0])


def simulate_session(
    cfg: SessionConfig,
    plant: PlantConfig,
    seed: int,
    sample_rate: float = DEFAULT_RATE,
    wall_clock_cap: float | None = None,
) -> tuple[SessionLog, TimeSeries]:
    """Closed loop: plant EMG -> windowed MPF -> gating, until the target.

    Returns the event log and the concatenated running-phase EMG (the signal
    the controller actually evaluated). Simulated time only; a session that
    cannot finish within ``wall_clock_cap`` (default 4x target) ends with a
    timeout event instead of completing.
    """
    cap = wall_clock_cap if wall_clock_cap is not None else 4.0 * cfg.target_running
    plant_eff = replace(plant, seed=_derived_seed(seed, plant.seed))
    stream = MpfStream(cfg.baseline_rule)
    state = SessionState()
    fat = FatigueState(0.0)
    log = SessionLog()
    n_win = int(round(cfg.window * sample_rate))
    # running windows cannot exceed the completion bound, so preallocate once
    max_windows = int(np.ceil(cfg.target_running / cfg.window)) + 1
    emg_buf = np.empty(max_windows * n_win)
    n_windows = 0
    t = 0.0
    call_index = 0
    bout_start = 0.0
    bout_windows: list[tuple[float | None, float | None]] = []  # (mpf, drop)

    def close_bout(end: float):
        mpfs = [m for m, _ in bout_windows if m is not None]
        drops = [d for _, d in bout_windows if d is not None]
        log.bouts.append(BoutSummary(
            state.bout_index, bout_start, end, len(bout_windows),
            max(drops) if drops else None,
            float(np.mean(mpfs)) if mpfs else None))

    log.append(0.0, "bout_start", bout_index=0)
    while True:
        step_len = cfg.window if state.phase is Phase.RUNNING else cfg.rest_duration
        if t + step_len > cap:
            close_bout(t)
            log.append(t, "timeout", accumulated_running=state.accumulated_running)
            break
        if state.phase is Phase.RUNNING:
            burst = _gen_emg_samples(fat.level, plant_eff, n_win, sample_rate, call_index)
            call_index += 1
            emg_buf[n_windows * n_win:(n_windows + 1) * n_win] = burst
            n_windows += 1
            fat = plant_step(fat, plant, running=True, dt=cfg.window)
            win = stream.push(burst, sample_rate, t)
            bout_windows.append((win.mpf, win.drop_rate))
            t += cfg.window
            log.append(t, "window_evaluated", mpf=win.mpf, drop_rate=win.drop_rate,
                       is_baseline=win.is_baseline_window)
            state = step(state, cfg, win.drop_rate, cfg.window)
            if state.phase is Phase.COMPLETED:
                close_bout(t)
                log.append(t, "completed", accumulated_running=state.accumulated_running)
                break
            if state.phase is Phase.RESTING:
                close_bout(t)
                log.append(t, "rest_start", drop_rate=win.drop_rate)
        else:  # RESTING: a single countdown step covers the whole rest
            fat = plant_step(fat, plant, running=False, dt=cfg.rest_duration)
            state = step(state, cfg, None, cfg.rest_duration)
            t += cfg.rest_duration
            log.append(t, "rest_end")
            log.append(t, "bout_start", bout_index=state.bout_index)
            stream.reset_baseline()
            bout_start = t
            bout_windows = []
    log.validate()
    if n_windows:
        emg = TimeSeries(emg_buf[:n_windows * n_win].copy(), sample_rate,
                         channel="EMG_AFF")
    else:
        emg = TimeSeries(np.zeros(1), sample_rate, channel="EMG_AFF")
    return log, emg


def run_session(
    cfg: SessionConfig,
    plant: PlantConfig,
    seed: int,
    sample_rate: float = DEFAULT_RATE,
    wall_clock_cap: float | None = None,
) -> SessionLog:
    """Closed-loop session; see :func:`simulate_session` for the signal too."""
    log, _ = simulate_session(cfg, plant, seed, sample_rate, wall_clock_cap)
    return log
