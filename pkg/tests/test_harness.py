import csv
import json
import random

import pytest

from trimsim.engine import us
from trimsim.harness import (
    ConfigError,
    MetricStore,
    Scenario,
    build_incast,
    cdf,
    clone_scenario,
    load_config,
    run_scenario,
    scenario_from_config,
    sweep,
    sweep_row,
    trim_excess,
    write_run_outputs,
    write_sweep_csv,
)
from trimsim.policy import Fanout, Variant
from trimsim.switch import SwitchVariant


def tiny(n=4, r=1, **kw):
    kw.setdefault("duration_ps", us(60))
    kw.setdefault("initial_window", 200)
    return build_incast(n, r, **kw)


class TestCdf:
    def test_three_values(self):
        assert cdf([1, 2, 3]) == [(1, 1 / 3), (2, 2 / 3), (3, 1.0)]

    def test_single_value(self):
        assert cdf([7]) == [(7, 1.0)]

    def test_empty(self):
        assert cdf([]) == []

    def test_duplicates_collapse(self):
        assert cdf([5, 5, 9]) == [(5, 2 / 3), (9, 1.0)]

    def test_large_sample_matches_sort_oracle(self):
        rng = random.Random(13)
        values = [rng.randrange(0, 10**6) for _ in range(10**5)]
        got = cdf(values)
        # independent oracle: for each step point, the fraction of samples <= v
        ordered = sorted(values)
        n = len(ordered)
        import bisect
        for v, frac in random.Random(1).sample(got, 200):
            assert frac == bisect.bisect_right(ordered, v) / n
        assert [v for v, _ in got] == sorted(set(values))


class TestScenario:
    def test_mapping_defaults(self):
        s = build_incast(64, 16)
        assert s.sender_egress_port(0) == 0
        assert s.sender_egress_port(17) == 1
        assert s.sender_ingress_port(17) == 17
        # sender i sits in pipe i div 16
        assert s.sender_ingress_port(17) // s.switch.ports_per_pipe == 1

    def test_64_to_1(self):
        s = build_incast(64, 1)
        assert {s.sender_egress_port(i) for i in range(64)} == {0}
        # a one-port sink concentrates header load; queue must absorb it
        assert s.switch.header_queue_cap >= 65536

    def test_too_many_senders_rejected(self):
        with pytest.raises(ValueError):
            build_incast(65, 16)

    def test_ingress_ports_validated(self):
        with pytest.raises(ValueError):
            Scenario(n_senders=2, ingress_ports=(0, 0))
        with pytest.raises(ValueError):
            Scenario(n_senders=2, ingress_ports=(0, 99))

    def test_clone_is_deep(self):
        a = tiny()
        b = clone_scenario(a, switch={"data_queue_cap": 3})
        assert a.switch.data_queue_cap == 10
        assert b.switch.data_queue_cap == 3


class TestRunScenario:
    def test_no_congestion_no_trims(self):
        m = run_scenario(tiny(1, 1))
        assert m.total_trims() == 0
        assert m.delivered_full == m.sent_data

    def test_conservation_exact_at_quiescence(self):
        m = run_scenario(tiny(8, 2))
        assert m.conservation_residual() == 0
        assert m.sent_data == (m.delivered_full + m.delivered_header
                               + m.dod_dropped + m.header_dropped)

    def test_determinism_byte_identical(self):
        a = run_scenario(tiny(8, 2), record_queues=True)
        b = run_scenario(tiny(8, 2), record_queues=True)
        assert a.counters_dict() == b.counters_dict()
        assert a.flow_rows == b.flow_rows
        assert a.header_arrival_ps == b.header_arrival_ps
        assert a.queue_samples == b.queue_samples
        assert a.mode_trace == b.mode_trace

    def test_seed_changes_dither_stream(self):
        a = run_scenario(tiny(8, 2))
        b = run_scenario(tiny(8, 2, seed=1))
        assert a.header_arrival_ps != b.header_arrival_ps

    def test_jitter_is_seeded_and_bounded(self):
        s = tiny(4, 2, start_jitter_ps=us(1))
        a = run_scenario(s)
        b = run_scenario(s)
        assert a.counters_dict() == b.counters_dict()
        starts = [row["start_ns"] for row in a.flow_rows]
        assert any(t > 0 for t in starts)
        assert all(0 <= t <= 1000 for t in starts)


class TestTrimExcess:
    def test_identical_stores_zero(self):
        m = run_scenario(tiny(8, 2))
        assert trim_excess(m, m).ratio == 0.0

    def test_zero_over_zero(self):
        a = run_scenario(tiny(1, 1))
        b = run_scenario(tiny(1, 1))
        r = trim_excess(a, b)
        assert r.ratio == 0.0 and r.absolute == 0

    def test_absolute_when_baseline_clean(self):
        clean = run_scenario(tiny(1, 1))
        dirty = run_scenario(tiny(8, 1))
        r = trim_excess(dirty, clean)
        assert r.ratio is None
        assert r.absolute == dirty.total_trims()
        with pytest.raises(ValueError):
            _ = r.value


class TestSweep:
    def test_n_senders_axis(self):
        rows = sweep("n_senders", tiny(4, 2), values=[1, 2, 3])
        assert [v for v, _ in rows] == [1, 2, 3]
        assert all(isinstance(m, MetricStore) for _, m in rows)

    def test_duration_axis_arms_policy(self):
        rows = sweep("response_duration", tiny(4, 2), values=[us(3)])
        _, m = rows[0]
        assert m.meta["t0_ns"] == 3000
        assert m.meta["t1_ns"] == 12000

    def test_variant_axis(self):
        rows = sweep("variant", tiny(4, 2), values=[Variant.FULL, Variant.TRIM_ALL])
        assert [v for v, _ in rows] == ["FULL", "TRIM_ALL"]

    def test_parallel_matches_serial(self):
        serial = sweep("n_senders", tiny(4, 2), values=[2, 4], jobs=1)
        parallel = sweep("n_senders", tiny(4, 2), values=[2, 4], jobs=2)
        for (_, a), (_, b) in zip(serial, parallel):
            assert a.counters_dict() == b.counters_dict()

    def test_unknown_axis_rejected(self):
        with pytest.raises(ValueError):
            sweep("bogus", tiny(2, 1))


class TestOutputs:
    def test_run_outputs_schema(self, tmp_path):
        m = run_scenario(tiny(8, 2), record_queues=True, record_trace=True)
        write_run_outputs(m, tmp_path)
        counters = json.loads((tmp_path / "counters.json").read_text())
        for key in ("ingress_trims", "dod_trims", "ideal_trims", "dod_dropped",
                    "header_dropped", "max_dod_queue", "max_data_queue"):
            assert key in counters
        assert len(counters["max_dod_queue"]) == 4
        assert len(counters["max_data_queue"]) == 64

        def header_of(name):
            with (tmp_path / name).open() as f:
                return next(csv.reader(f))

        assert header_of("header_cdf.csv") == ["time_ns", "fraction"]
        assert header_of("flows.csv") == ["flow_id", "bytes", "start_ns", "end_ns",
                                          "goodput_gbps", "rtx_count"]
        assert header_of("modes.csv") == ["time_ns", "pipe", "port", "mode"]
        assert header_of("queues.csv") == ["time_ns", "queue", "index", "depth"]
        assert header_of("trace.csv") == ["time_ns", "flow_id", "seqno", "kind",
                                          "trim_origin", "egress_port"]
        with (tmp_path / "trace.csv").open() as f:
            rows = list(csv.DictReader(f))
        assert rows and all(r["kind"] in ("DATA", "TRIMMED_HEADER") for r in rows)

    def test_sweep_csv(self, tmp_path):
        rows = [sweep_row("n_senders", v, m)
                for v, m in sweep("n_senders", tiny(4, 2), values=[2, 4])]
        write_sweep_csv(rows, tmp_path / "sweep.csv")
        with (tmp_path / "sweep.csv").open() as f:
            got = list(csv.DictReader(f))
        assert len(got) == 2
        assert got[0]["axis"] == "n_senders"
        assert float(got[0]["goodput_mean_gbps"]) > 0


class TestConfig:
    BASE = {
        "scenario": {"n_senders": 4, "n_receivers": 2, "duration_ns": 60000,
                     "initial_window": 200},
        "switch": {"variant": "TOFINO_FULL", "data_queue_cap": 10},
        "policy": {"t0_ns": 6000, "t1_ns": 24000, "signal_fanout": "ALL_PIPES"},
    }

    def test_round_trip(self):
        s = scenario_from_config(json.loads(json.dumps(self.BASE)))
        assert s.n_senders == 4
        assert s.duration_ps == us(60)
        assert s.switch.variant is SwitchVariant.TOFINO_FULL
        assert s.switch.policy.signal_fanout is Fanout.ALL_PIPES

    def test_unknown_top_level_key(self):
        doc = dict(self.BASE, extra={})
        with pytest.raises(ConfigError):
            scenario_from_config(doc)

    def test_unknown_section_key(self):
        doc = json.loads(json.dumps(self.BASE))
        doc["switch"]["bogus_knob"] = 1
        with pytest.raises(ConfigError):
            scenario_from_config(doc)

    def test_bad_enum_value(self):
        doc = json.loads(json.dumps(self.BASE))
        doc["switch"]["variant"] = "NOT_A_SWITCH"
        with pytest.raises(ConfigError):
            scenario_from_config(doc)

    def test_load_config_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(self.BASE))
        s = load_config(path)
        assert s.n_receivers == 2


class TestCli:
    def write_cfg(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(TestConfig.BASE))
        return path

    def test_run_command(self, tmp_path, capsys):
        from trimsim.cli import main
        cfg = self.write_cfg(tmp_path)
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "counters.json").exists()
        assert (out / "flows.csv").exists()

    def test_sweep_command(self, tmp_path):
        from trimsim.cli import main
        cfg = self.write_cfg(tmp_path)
        out = tmp_path / "sweepdir"
        rc = main(["sweep", "--axis", "n_senders", "--config", str(cfg),
                   "--out", str(out), "--values", "2,4"])
        assert rc == 0
        assert (out / "sweep.csv").exists()

    def test_compare_command(self, tmp_path, capsys):
        from trimsim.cli import main
        cfg = self.write_cfg(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        main(["run", "--config", str(cfg), "--out", str(a)])
        main(["run", "--config", str(cfg), "--out", str(b)])
        capsys.readouterr()
        assert main(["compare", "--a", str(a), "--b", str(b)]) == 0
        out = capsys.readouterr().out
        doc = json.loads(out[out.index("{"):])
        assert doc["excess_trims_absolute"] == 0

    def test_bad_config_exit_code(self, tmp_path):
        from trimsim.cli import main
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"nope": 1}))
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
