"""Per-community start times, peaks and network-wide totals."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .numerics import Trajectory
from .simulate import EventLog

PEAK_SLACK = 1e-6
TABLE_HEADER = ("community", "start_time", "peak_time", "peak_magnitude")


@dataclass(frozen=True)
class Peak:
    time: float
    magnitude: float


@dataclass(frozen=True)
class CommunitySummary:
    group: int
    A_start: float | None
    A_peak: Peak
    I_start: float | None
    I_peak: Peak
    A_star: float | None = None
    I_star: float | None = None

    def row(self, kind: str) -> tuple:
        if kind == "A":
            return (self.group, self.A_start, self.A_peak.time, self.A_peak.magnitude)
        if kind == "I":
            return (self.group, self.I_start, self.I_peak.time, self.I_peak.magnitude)
        raise ValueError(f"kind must be 'A' or 'I', got {kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def refine_peak(times, values) -> Peak:
    """Global maximum of a sampled series.

    The earliest maximizing sample is taken and, when it has a neighbor on
    each side, refined by the parabola through the three samples.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    k = int(np.argmax(y))
    top = float(y[k])
    if k == 0 or k == len(y) - 1:
        return Peak(float(t[k]), top)
    t0, t1, t2 = t[k - 1 : k + 2]
    y0, y1, y2 = y[k - 1 : k + 2]
    if y2 == y1:
        return Peak(float(t1), top)  # plateau
    # Divided differences of the interpolating parabola.
    d01 = (y1 - y0) / (t1 - t0)
    d12 = (y2 - y1) / (t2 - t1)
    curv = (d12 - d01) / (t2 - t0)
    if not curv < 0:
        return Peak(float(t1), top)
    slope1 = d01 + curv * (t1 - t0)  # derivative at t1
    tp = t1 - slope1 / (2.0 * curv)
    tp = min(max(tp, t0), t2)
    yp = y1 + slope1 * (tp - t1) + curv * (tp - t1) ** 2
    yp = min(max(yp, top), top + PEAK_SLACK, 1.0)
    return Peak(float(tp), float(yp))


def peak_summary(traj: Trajectory, events: EventLog, endemic=None) -> list[CommunitySummary]:
    """One summary per group. ``endemic`` may be an equilibrium state whose
    ``A`` and ``I`` are attached for reference."""
    if traj.times.size == 0:
        raise ValueError("empty trajectory")
    out = []
    for i in range(traj.n_groups):
        out.append(
            CommunitySummary(
                group=i + 1,
                A_start=events.A[i],
                A_peak=refine_peak(traj.times, traj.A[:, i]),
                I_start=events.I[i],
                I_peak=refine_peak(traj.times, traj.I[:, i]),
                A_star=None if endemic is None else float(endemic.A[i]),
                I_star=None if endemic is None else float(endemic.I[i]),
            )
        )
    return out


def totals(traj: Trajectory) -> np.ndarray:
    """Columns ``t, sum A, sum I`` at every sample."""
    return np.column_stack([traj.times, traj.A.sum(axis=1), traj.I.sum(axis=1)])


def totals_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    np.savetxt(buf, totals(traj), delimiter=",", fmt="%.12g", header="t,sum_A,sum_I",
               comments="")
    return buf.getvalue()


def _fmt(x, digits: int) -> str:
    return "" if x is None else f"{x:.{digits}f}"


def table_report(summaries: list[CommunitySummary], fmt: str = "csv", kind: str = "I") -> str:
    """Render the ``kind`` (``"A"`` or ``"I"``) table as ``csv``, ``json`` or
    aligned ``text``. Only the text form rounds (2 decimals for times, 4 for
    magnitudes)."""
    if not summaries:
        raise ValueError("no summaries to report")
    rows = [s.row(kind) for s in summaries]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for g, start, tp, mag in rows:
            w.writerow([g, "" if start is None else repr(start), repr(tp), repr(mag)])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps(
            {"kind": kind, "rows": [dict(zip(TABLE_HEADER, r)) for r in rows]}, indent=2
        )
    if fmt == "text":
        head = ("Community", "Starting time", "Time of peak", "Magnitude of peak")
        body = [(str(g), _fmt(s, 2), _fmt(tp, 2), _fmt(m, 4)) for g, s, tp, m in rows]
        widths = [max(len(r[c]) for r in [head, *body]) for c in range(4)]
        lines = [f"{kind} compartment"]
        for r in [head, *body]:
            lines.append("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")
