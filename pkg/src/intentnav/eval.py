"""Metrics and report tables: SR, completion rate, time, jerk smoothness."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class EmptyTrials(ValueError):
    pass


class TooShort(ValueError):
    pass


class MismatchedScenarios(ValueError):
    pass


@dataclass(frozen=True)
class TrialRecord:
    s: int      # successful steps
    n: int      # total steps

    def __post_init__(self):
        if self.n < 0 or not 0 <= self.s <= self.n:
            raise ValueError(f"need 0 <= s <= n, got s={self.s}, n={self.n}")

    @property
    def complete(self) -> bool:
        return self.s == self.n

    @property
    def fraction(self) -> float:
        # a trial with no steps counts as complete
        return 1.0 if self.n == 0 else self.s / self.n


def _trials(trials) -> list[TrialRecord]:
    out = [t if isinstance(t, TrialRecord) else TrialRecord(*t) for t in trials]
    if not out:
        raise EmptyTrials("no trials")
    return out


def success_rate(trials: Iterable) -> float:
    """Fraction of trials in which every step succeeded."""
    ts = _trials(trials)
    return sum(t.complete for t in ts) / len(ts)


def completion_rate(trials: Iterable) -> float:
    """Mean fraction of successful steps per trial."""
    ts = _trials(trials)
    return sum(t.fraction for t in ts) / len(ts)


def smoothness(positions, dt: float) -> float:
    """Mean magnitude of the third finite difference of position over dt^3."""
    p = np.asarray(positions, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if len(p) < 4:
        raise TooShort(f"need at least 4 samples, got {len(p)}")
    if not dt > 0:
        raise ValueError("dt must be > 0")
    jerk = np.diff(p, n=3, axis=0) / dt ** 3
    return float(np.linalg.norm(jerk, axis=1).mean())


def trial_of(log) -> TrialRecord:
    return TrialRecord(log.successes, log.n_steps)


def log_smoothness(log) -> float | None:
    """Sample-weighted jerk over the continuous runs of a trajectory log."""
    total, count = 0.0, 0
    for seg in log.continuous_segments():
        if len(seg) >= 4:
            total += smoothness(seg, log.dt) * (len(seg) - 3)
            count += len(seg) - 3
    return None if count == 0 else total / count


# --------------------------------------------------------------------------
# tables

@dataclass(frozen=True)
class MetricsReport:
    task: str
    method: str
    sr: float
    completion: float
    interventions: float
    time: float
    smoothness: float | None
    trials: int


def summarize(task: str, method: str, logs: Sequence) -> MetricsReport:
    trials = [trial_of(l) for l in logs]
    sm = [s for s in (log_smoothness(l) for l in logs) if s is not None]
    return MetricsReport(task, method, success_rate(trials), completion_rate(trials),
                         float(np.mean([l.interventions for l in logs])),
                         float(np.mean([l.time for l in logs])),
                         float(np.mean(sm)) if sm else None, len(logs))


def _fmt(x, digits=2) -> str:
    if x is None:
        return "--"
    return f"{x:.{digits}f}"


@dataclass
class Table:
    header: list[str]
    rows: list[list[str]]

    def text(self) -> str:
        widths = [max(len(r[i]) for r in [self.header] + self.rows) for i in range(len(self.header))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [self.header] + self.rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()

    def write(self, stem: str | Path) -> tuple[Path, Path]:
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        t, c = stem.with_suffix(".txt"), stem.with_suffix(".csv")
        t.write_text(self.text())
        c.write_text(self.csv())
        return t, c


def task_report(runs: dict[str, dict[str, Sequence | None]]) -> Table:
    """``runs[method][task]`` holds that method's logs on a task (None for a
    run that failed to produce logs). One row per (task, method) with
    Success, Intervention, Time (s) and Smoothness; failed runs show "--"."""
    if not runs:
        raise EmptyTrials("no runs")
    tasks = None
    for method, per_task in runs.items():
        if tasks is None:
            tasks = sorted(per_task)
        elif sorted(per_task) != tasks:
            raise MismatchedScenarios(f"{method} covers {sorted(per_task)}, expected {tasks}")
    rows = []
    for task in tasks:
        for method in runs:
            logs = runs[method][task]
            if not logs:
                rows.append([task, method, "--", "--", "--", "--"])
                continue
            r = summarize(task, method, logs)
            rows.append([task, method, _fmt(r.sr), _fmt(r.interventions), _fmt(r.time, 1),
                         _fmt(r.smoothness)])
    return Table(["Task", "Method", "Success", "Intervention", "Time", "Smoothness"], rows)


def ablation_report(runs: dict[str, dict[str, Sequence | None]],
                    throughput: dict[str, float] | None = None) -> Table:
    """SR and Avg.Int. (percent) per task for each controller kind, plus a
    throughput column in forward calls per second."""
    if not runs:
        raise EmptyTrials("no runs")
    tasks = None
    for method, per_task in runs.items():
        if tasks is None:
            tasks = sorted(per_task)
        elif sorted(per_task) != tasks:
            raise MismatchedScenarios(f"{method} covers {sorted(per_task)}, expected {tasks}")
    header = ["Method"] + [f"{t} {k}" for t in tasks for k in ("SR", "Avg.Int.")] + ["Throughput"]
    rows = []
    for method, per_task in runs.items():
        row = [method]
        for t in tasks:
            logs = per_task[t]
            if not logs:
                row += ["--", "--"]
                continue
            trials = [trial_of(l) for l in logs]
            row += [_fmt(100 * success_rate(trials), 0), _fmt(100 * completion_rate(trials), 0)]
        tp = (throughput or {}).get(method)
        row.append(_fmt(tp, 1))
        rows.append(row)
    return Table(header, rows)


def throughput_of(policy) -> float | None:
    """Forward calls per wall-clock second, from a policy's counters."""
    if getattr(policy, "forward_seconds", 0.0) > 0:
        return policy.forward_calls / policy.forward_seconds
    return None


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def experiment_summary(config: dict, seeds: Sequence[int], reports: dict[str, Table]) -> dict:
    return {"config_hash": config_hash(config), "config": config, "seeds": list(seeds),
            "reports": {k: {"header": t.header, "rows": t.rows} for k, t in sorted(reports.items())}}
