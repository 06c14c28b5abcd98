#!/usr/bin/env python3
"""Render figures from simulator output files.

Reads the CSV/JSON files a run or sweep directory contains and draws one of
four figure kinds:

    cdf            header-arrival CDF curves (one per input file)
    sweep_panel    goodput / trims / max queue versus the sweep axis
    mode_timeline  horizontal bars where pessimistic mode is active, per port
    seq_scatter    sequence number versus arrival time from a packet trace

Usage:
    plots/render.py --spec figure.json

The spec file names the kind, the input paths, optional labels/title, and the
output image path.  Rendering is read-only and deterministic: the same inputs
produce the same image.  A missing input column is a hard error naming the
file and column; an empty CDF input renders empty axes with a note and exits
zero (a zero-trim run is a valid result).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

KINDS = ("cdf", "sweep_panel", "mode_timeline", "seq_scatter")
_PNG_META = {"Software": "trimsim-plots"}


class SchemaError(ValueError):
    """An input file does not match the expected schema."""


def _read_csv(path, required):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    with path.open() as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        return list(reader)


def _finish(fig, axes, out_path):
    fig.savefig(out_path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
    meta = {
        "output": str(out_path),
        "axes": [{"xlim": ax.get_xlim(), "ylim": ax.get_ylim()} for ax in axes],
    }
    return meta


def render_cdf(spec):
    inputs = spec["inputs"]
    labels = spec.get("labels") or [Path(p).parent.name or str(p) for p in inputs]
    fig, ax = plt.subplots(figsize=(6, 4))
    drawn = 0
    for path, label in zip(inputs, labels):
        rows = _read_csv(path, ["time_ns", "fraction"])
        if not rows:
            continue
        xs = [float(r["time_ns"]) / 1000.0 for r in rows]
        ys = [float(r["fraction"]) for r in rows]
        ax.step(xs, ys, where="post", label=label)
        drawn += 1
    ax.set_xlabel("header arrival time (us)")
    ax.set_ylabel("CDF")
    ax.set_title(spec.get("title", "Header arrival times"))
    if drawn:
        ax.legend()
        ax.set_ylim(0, 1.02)
    else:
        ax.text(0.5, 0.5, "no trimmed headers in this run",
                ha="center", va="center", transform=ax.transAxes)
    return _finish(fig, [ax], spec["output"])


def render_sweep_panel(spec):
    rows = _read_csv(spec["inputs"][0], ["value", "goodput_mean_gbps",
                                         "total_trims", "max_dod_queue"])
    if not rows:
        raise SchemaError(f"{spec['inputs'][0]}: sweep file has no data rows")

    def axis_value(r):
        try:
            return float(r["value"])
        except ValueError:
            return r["value"]

    xs = [axis_value(r) for r in rows]
    panels = [
        ("goodput_mean_gbps", "average goodput (Gb/s)"),
        ("total_trims", "trimmed packets"),
        ("max_dod_queue", "max DoD queue (packets)"),
    ]
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    categorical = any(isinstance(x, str) for x in xs)
    for ax, (col, label) in zip(axes, panels):
        ys = [float(r[col]) for r in rows]
        if categorical:
            ax.bar(range(len(xs)), ys)
            ax.set_xticks(range(len(xs)), [str(x) for x in xs])
        else:
            ax.plot(xs, ys, marker="o")
        ax.set_xlabel(rows[0]["axis"] if "axis" in rows[0] else "value")
        ax.set_ylabel(label)
    fig.suptitle(spec.get("title", "Sweep results"))
    fig.tight_layout()
    return _finish(fig, list(axes), spec["output"])


def render_mode_timeline(spec):
    rows = _read_csv(spec["inputs"][0], ["time_ns", "pipe", "port", "mode"])
    horizon_ns = float(spec.get("horizon_ns", 0.0))
    # reconstruct pessimistic intervals per (pipe, port), then plot per port
    open_at = {}
    bars = {}
    last_t = 0.0
    for r in rows:
        t = float(r["time_ns"])
        last_t = max(last_t, t)
        key = (int(r["pipe"]), int(r["port"]))
        if r["mode"] == "PESSIMISTIC":
            open_at.setdefault(key, t)
        elif key in open_at:
            start = open_at.pop(key)
            bars.setdefault(key[1], []).append((start, t - start))
    horizon = max(horizon_ns, last_t)
    for (pipe, port), start in open_at.items():
        bars.setdefault(port, []).append((start, horizon - start))

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for port, spans in sorted(bars.items()):
        ax.broken_barh([(s / 1000.0, w / 1000.0) for s, w in spans],
                       (port - 0.4, 0.8))
    ax.set_xlabel("time (us)")
    ax.set_ylabel("egress port")
    ax.set_title(spec.get("title", "Pessimistic mode activation"))
    if bars:
        ax.set_ylim(min(bars) - 1, max(bars) + 1)
        ax.set_xlim(0, horizon / 1000.0)
    else:
        ax.text(0.5, 0.5, "no pessimistic activations",
                ha="center", va="center", transform=ax.transAxes)
    return _finish(fig, [ax], spec["output"])


def render_seq_scatter(spec):
    rows = _read_csv(spec["inputs"][0],
                     ["time_ns", "flow_id", "seqno", "kind", "trim_origin"])
    flow = spec.get("flow_id")
    if flow is not None:
        rows = [r for r in rows if int(r["flow_id"]) == int(flow)]
    if not rows:
        raise SchemaError(f"{spec['inputs'][0]}: no trace rows"
                          + (f" for flow {flow}" if flow is not None else ""))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    groups = {"DATA": ("full packets", "."), "TRIMMED_HEADER": ("trimmed headers", "x")}
    for kind, (label, marker) in groups.items():
        xs = [float(r["time_ns"]) / 1000.0 for r in rows if r["kind"] == kind]
        ys = [int(r["seqno"]) for r in rows if r["kind"] == kind]
        if xs:
            ax.scatter(xs, ys, s=6, marker=marker, label=label, linewidths=0.7)
    ax.set_xlabel("arrival time (us)")
    ax.set_ylabel("sequence number")
    ax.set_title(spec.get("title", "Packet arrivals"))
    ax.legend()
    return _finish(fig, [ax], spec["output"])


_RENDERERS = {
    "cdf": render_cdf,
    "sweep_panel": render_sweep_panel,
    "mode_timeline": render_mode_timeline,
    "seq_scatter": render_seq_scatter,
}


def render(spec: dict) -> dict:
    """Draw the figure described by `spec`; returns output metadata."""
    kind = spec.get("kind")
    if kind not in KINDS:
        raise SchemaError(f"unknown figure kind {kind!r} (expected one of {KINDS})")
    if not spec.get("inputs"):
        raise SchemaError("spec has no inputs")
    if not spec.get("output"):
        raise SchemaError("spec has no output path")
    Path(spec["output"]).parent.mkdir(parents=True, exist_ok=True)
    return _RENDERERS[kind](spec)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="render simulator output figures")
    parser.add_argument("--spec", required=True, help="JSON figure description")
    args = parser.parse_args(argv)
    try:
        with open(args.spec) as f:
            spec = json.load(f)
        meta = render(spec)
    except (SchemaError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(meta))
    return 0


if __name__ == "__main__":
    sys.exit(main())
