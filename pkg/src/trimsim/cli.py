"""Command-line front end.

    trimsim run   --config cfg.json --out dir [--trace] [--queues]
    trimsim sweep --axis n_senders|response_duration|variant --config cfg.json
                  --out dir [--values v1,v2,...] [--jobs N]
    trimsim compare --a dirA --b dirB
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .engine import us
from .harness import (
    ConfigError,
    load_config,
    run_scenario,
    sweep,
    sweep_row,
    write_run_outputs,
    write_sweep_csv,
)


def _cmd_run(args) -> int:
    scenario = load_config(args.config)
    store = run_scenario(scenario, record_queues=True, record_trace=args.trace)
    write_run_outputs(store, args.out)
    print(f"wrote {args.out}: sent={store.sent_data} delivered_full={store.delivered_full} "
          f"trims={store.total_trims()} max_dod={max(store.max_dod_queue, default=0)}")
    return 0


def _parse_values(axis: str, text: str):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if axis == "n_senders":
        return [int(p) for p in parts]
    if axis == "response_duration":
        # values given in microseconds on the command line
        return [us(float(p)) for p in parts]
    return parts


def _cmd_sweep(args) -> int:
    base = load_config(args.config)
    values = _parse_values(args.axis, args.values) if args.values else None
    results = sweep(args.axis, base, values=values, jobs=args.jobs)
    rows = [sweep_row(args.axis, value, store) for value, store in results]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out / "sweep.csv")
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} points)")
    return 0


def _read_counters(d: Path) -> dict:
    path = d / "counters.json"
    if not path.exists():
        raise SystemExit(f"error: {path} not found (run `trimsim run` first)")
    return json.loads(path.read_text())


def _read_goodputs(d: Path) -> list[float]:
    path = d / "flows.csv"
    if not path.exists():
        return []
    with path.open() as f:
        return [float(row["goodput_gbps"]) for row in csv.DictReader(f)]


def _cmd_compare(args) -> int:
    a, b = Path(args.a), Path(args.b)
    ca, cb = _read_counters(a), _read_counters(b)
    trims = lambda c: c["ingress_trims"] + c["dod_trims"] + c["ideal_trims"] + c["mod_trims"]
    ta, tb = trims(ca), trims(cb)
    ga, gb = _read_goodputs(a), _read_goodputs(b)
    report = {
        "a": {"dir": str(a), "trims": ta,
              "goodput_mean_gbps": sum(ga) / len(ga) if ga else None},
        "b": {"dir": str(b), "trims": tb,
              "goodput_mean_gbps": sum(gb) / len(gb) if gb else None},
        "excess_trim_ratio_a_vs_b": (ta - tb) / tb if tb else None,
        "excess_trims_absolute": ta - tb,
    }
    print(json.dumps(report, indent=2))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="trimsim",
                                     description="packet trimming switch simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write its outputs")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--trace", action="store_true", help="also write trace.csv")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run one scenario per axis value")
    p_sweep.add_argument("--axis", required=True,
                         choices=["n_senders", "response_duration", "variant"])
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--values", help="comma-separated axis values "
                         "(durations in microseconds)")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_cmp = sub.add_parser("compare", help="compare two run output directories")
    p_cmp.add_argument("--a", required=True)
    p_cmp.add_argument("--b", required=True)
    p_cmp.set_defaults(func=_cmd_compare)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
