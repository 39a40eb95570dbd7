"""Gantt charts of a schedule, as SVG or fixed-width text.

Two views: train against time (one row per train), and train against
location (one band per physical segment, arrows for each traversal).
Every drawn event carries ``data-*`` attributes with the exact times, so
the SVG can be parsed back with :func:`parse_svg_events`.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from html import escape

from .model import Instance, Schedule, validate_schedule
from .timing import InfeasibleSchedule

WAIT_TOL = 1e-6
TIME_SCALE = 20.0   # px per time unit
ROW_H = 28
LEFT = 60
TOP = 30

# Roles are normative, hues are not.
PALETTE = {
    "run-dep": "#2f6fb0",
    "run-ret": "#c8553d",
    "unload": "#8cb369",
    "load": "#f4a259",
    "dwell": "#9b8ec4",
    "wait": "#d9d9d9",
    "boundary": "#555555",
    "interruption": "#f2d000",
}

SVG_NS = "http://www.w3.org/2000/svg"


def _check(inst: Instance, sched: Schedule) -> None:
    problems = validate_schedule(inst, sched)
    if problems:
        lines = "\n".join(str(v) for v in problems[:20])
        raise InfeasibleSchedule(f"refusing to draw an infeasible schedule:\n{lines}")


def _f(x: float) -> str:
    return repr(float(x))


def _px(x: float) -> str:
    return f"{x:.3f}"


def _style() -> str:
    rules = [f".{role}{{fill:{color};stroke:none}}" for role, color in PALETTE.items()
             if role not in ("boundary", "interruption")]
    rules.append(f".boundary{{stroke:{PALETTE['boundary']};stroke-dasharray:4 3;fill:none}}")
    rules.append(f".interruption{{fill:none;stroke:{PALETTE['interruption']};stroke-width:2.5}}")
    rules.append(".arrow-dep,.arrow-arr{stroke:#222;fill:#222}")
    rules.append("text{font-family:monospace;font-size:10px}")
    return "<style>" + "".join(rules) + "</style>"


def stop_blocks(inst: Instance, sched: Schedule, i: int):
    """(kind, start, end, traversal) for each block at the stations a train passes.

    Intermediate stations get unload, load and dwell in turn, then any extra
    wait; the end station gets the unload block.
    """
    t = inst.trains[i]
    n = inst.n
    out = []
    for k in range(n - 1):
        st = k + 1
        at = float(sched.arr[i, k])
        for kind, dur in (("unload", t.unload[st]), ("load", t.load[st]), ("dwell", t.dwell[st])):
            if dur > 0:
                out.append((kind, at, at + dur, k))
                at += dur
        leave = float(sched.dep[i, k + 1])
        if leave > at + WAIT_TOL:
            out.append(("wait", at, leave, k))
    if t.unload[n] > 0:
        end = float(sched.arr[i, n - 1])
        out.append(("unload", end, end + t.unload[n], n - 1))
    return out


def interruptions(inst: Instance, sched: Schedule):
    """(train index, station index in traversal order, excess wait) where a train waits beyond its stop."""
    out = []
    for i in range(inst.n_trains):
        for k in range(inst.n - 1):
            wait = sched.dep[i, k + 1] - sched.arr[i, k]
            need = inst.stop[i, k + 1]
            if wait > need + WAIT_TOL:
                out.append((i, k + 1, float(wait - need)))
    return out


def render_train_time(inst: Instance, sched: Schedule, format: str = "svg") -> str:
    _check(inst, sched)
    if format == "text":
        return _time_text(inst, sched)
    if format != "svg":
        raise ValueError(f"unknown format {format!r}")
    return _time_svg(inst, sched)


def render_train_location(inst: Instance, sched: Schedule, format: str = "svg") -> str:
    _check(inst, sched)
    if format == "text":
        return _location_text(inst, sched)
    if format != "svg":
        raise ValueError(f"unknown format {format!r}")
    return _location_svg(inst, sched)


def _horizon(inst, sched) -> float:
    end = float(sched.arr.max()) if sched.arr.size else 0.0
    return end + max((t.unload[-1] for t in inst.trains), default=0.0) + 1.0


def _time_svg(inst: Instance, sched: Schedule) -> str:
    n = inst.n
    horizon = _horizon(inst, sched)
    width = LEFT + horizon * TIME_SCALE + 20
    height = TOP + ROW_H * inst.n_trains + 20
    parts = [
        f'<svg xmlns="{SVG_NS}" version="1.1" width="{_px(width)}" height="{_px(height)}" '
        f'data-view="train-time" data-time-scale="{_f(TIME_SCALE)}" data-origin-x="{_f(LEFT)}">',
        _style(),
    ]
    for i, t in enumerate(inst.trains):
        y = TOP + ROW_H * i
        parts.append(f'<text x="4" y="{_px(y + ROW_H * 0.6)}">{escape(t.id)}</text>')
        role = "run-dep" if t.departing else "run-ret"
        for k in range(n):
            d, a = float(sched.dep[i, k]), float(sched.arr[i, k])
            s = int(inst.phys[i, k]) + 1
            parts.append(
                f'<rect class="{role}" x="{_px(LEFT + d * TIME_SCALE)}" y="{_px(y + 4)}" '
                f'width="{_px((a - d) * TIME_SCALE)}" height="{_px(ROW_H - 8)}" '
                f'data-train="{escape(t.id)}" data-segment="{s}" data-kind="run" '
                f'data-start="{_f(d)}" data-end="{_f(a)}"/>')
            # segment boundary at the end of the traversal
            xb = LEFT + a * TIME_SCALE
            parts.append(f'<line class="boundary" x1="{_px(xb)}" y1="{_px(y + 2)}" '
                         f'x2="{_px(xb)}" y2="{_px(y + ROW_H - 2)}"/>')
        for kind, b, e, k in stop_blocks(inst, sched, i):
            parts.append(
                f'<rect class="{kind}" x="{_px(LEFT + b * TIME_SCALE)}" y="{_px(y + 8)}" '
                f'width="{_px((e - b) * TIME_SCALE)}" height="{_px(ROW_H - 16)}" '
                f'data-train="{escape(t.id)}" data-station="{k + 1}" data-kind="{kind}" '
                f'data-start="{_f(b)}" data-end="{_f(e)}"/>')
    for i, st, excess in interruptions(inst, sched):
        y = TOP + ROW_H * i
        b = float(sched.arr[i, st - 1])
        e = float(sched.dep[i, st])
        cx = LEFT + (b + e) / 2 * TIME_SCALE
        parts.append(
            f'<ellipse class="interruption" cx="{_px(cx)}" cy="{_px(y + ROW_H / 2)}" '
            f'rx="{_px(max((e - b) * TIME_SCALE / 2 + 4, 6))}" ry="{_px(ROW_H / 2)}" '
            f'data-train="{escape(inst.trains[i].id)}" data-station="{st}" data-kind="interruption" '
            f'data-start="{_f(b)}" data-end="{_f(e)}" data-excess="{_f(excess)}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _segment_names(inst: Instance, s: int) -> str:
    """Both direction-relative names of 0-based physical segment ``s``."""
    return f"pd{s + 1}/pdr{inst.n - s}"


def _location_svg(inst: Instance, sched: Schedule) -> str:
    n = inst.n
    band = 140.0
    width = LEFT + band * n + 20
    height = TOP + ROW_H * 1.5 * inst.n_trains + 30
    parts = [
        f'<svg xmlns="{SVG_NS}" version="1.1" width="{_px(width)}" height="{_px(height)}" '
        f'data-view="train-location">',
        _style(),
    ]
    for s in range(n):
        x = LEFT + band * s
        parts.append(f'<line class="boundary" x1="{_px(x)}" y1="{_px(TOP - 14)}" x2="{_px(x)}" y2="{_px(height - 10)}"/>')
        parts.append(f'<text x="{_px(x + 4)}" y="{_px(TOP - 4)}" data-segment="{s + 1}">{_segment_names(inst, s)}</text>')
    xe = LEFT + band * n
    parts.append(f'<line class="boundary" x1="{_px(xe)}" y1="{_px(TOP - 14)}" x2="{_px(xe)}" y2="{_px(height - 10)}"/>')
    for i, t in enumerate(inst.trains):
        y = TOP + ROW_H * 1.5 * i + 12
        parts.append(f'<text x="4" y="{_px(y + 4)}">{escape(t.id)}</text>')
        for k in range(n):
            s = int(inst.phys[i, k])
            d, a = float(sched.dep[i, k]), float(sched.arr[i, k])
            x0, x1 = LEFT + band * s + 10, LEFT + band * (s + 1) - 10
            if not t.departing:
                x0, x1 = x1, x0
            head = 6 if t.departing else -6
            common = (f'data-train="{escape(t.id)}" data-segment="{s + 1}" '
                      f'data-start="{_f(d)}" data-end="{_f(a)}"')
            parts.append(
                f'<g class="{"arrow-dep" if t.departing else "arrow-arr"}" data-kind="run" {common}>'
                f'<line x1="{_px(x0)}" y1="{_px(y)}" x2="{_px(x1)}" y2="{_px(y)}"/>'
                f'<polygon points="{_px(x1)},{_px(y)} {_px(x1 - head)},{_px(y - 4)} {_px(x1 - head)},{_px(y + 4)}"/>'
                f'</g>')
            left, right = (x0, x1) if t.departing else (x1, x0)
            parts.append(f'<text x="{_px(left)}" y="{_px(y + 14)}">{d:.1f}</text>')
            parts.append(f'<text x="{_px(right - 24)}" y="{_px(y + 14)}">{a:.1f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def parse_svg_events(svg: str) -> list[dict]:
    """Traversal and station blocks recorded in a rendered SVG."""
    root = ET.fromstring(svg)
    out = []
    for el in root.iter():
        kind = el.get("data-kind")
        if kind is None:
            continue
        rec = {"train": el.get("data-train"), "kind": kind,
               "start": float(el.get("data-start")), "end": float(el.get("data-end"))}
        if el.get("data-segment") is not None:
            rec["segment"] = int(el.get("data-segment"))
        if el.get("data-station") is not None:
            rec["station"] = int(el.get("data-station"))
        out.append(rec)
    return out


def _time_text(inst: Instance, sched: Schedule) -> str:
    marks = {(i, st) for i, st, _ in interruptions(inst, sched)}
    width = max([len("train")] + [len(t.id) for t in inst.trains])
    lines = [f"{'train':<{width}}  dir  " + "  ".join(f"{'seg':>3} {'dep':>7} {'arr':>7}" for _ in range(inst.n))]
    for i, t in enumerate(inst.trains):
        cells = []
        for k in range(inst.n):
            s = int(inst.phys[i, k]) + 1
            cells.append(f"{s:>3} {sched.dep[i, k]:>7.1f} {sched.arr[i, k]:>7.1f}")
        tag = "dep" if t.departing else "ret"
        lines.append(f"{t.id:<{width}}  {tag}  " + "  ".join(cells))
        for kind, b, e, k in stop_blocks(inst, sched, i):
            lines.append(f"{'':<{width}}       station {k + 1} {kind:<7} {b:>7.1f} {e:>7.1f}")
        for st in range(1, inst.n):
            if (i, st) in marks:
                lines.append(f"{'':<{width}}       station {st} interrupted")
    return "\n".join(lines) + "\n"


def _location_text(inst: Instance, sched: Schedule) -> str:
    lines = []
    for s in range(inst.n):
        lines.append(f"segment {_segment_names(inst, s)}")
        for i, t in enumerate(inst.trains):
            k = int(list(inst.phys[i]).index(s))
            arrow = "-->" if t.departing else "<--"
            lines.append(f"  {t.id:<8} {arrow} {sched.dep[i, k]:>7.1f} {sched.arr[i, k]:>7.1f}")
    return "\n".join(lines) + "\n"
