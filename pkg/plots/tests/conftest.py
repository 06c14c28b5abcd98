import json
import subprocess
import sys
from pathlib import Path

import pytest

PLOTS_DIR = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(PLOTS_DIR))

RENDER = PLOTS_DIR / "render.py"


def trimsim(*args):
    """Invoke the simulator CLI (the producer side of the file interface)."""
    cmd = [sys.executable, "-m", "trimsim.cli", *args]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


def _render_cli(spec_path):
    return subprocess.run([sys.executable, str(RENDER), "--spec", str(spec_path)],
                          capture_output=True, text=True)


@pytest.fixture(scope="session")
def render_cli():
    return _render_cli


@pytest.fixture(scope="session")
def sim_outputs(tmp_path_factory):
    """Real simulator outputs covering every figure input schema.

    Scaled-down versions of the acceptance scenarios: the header-arrival
    comparison pair, a sender sweep, a congestion-response run with mode
    transitions, and a packet trace.
    """
    root = tmp_path_factory.mktemp("simdata")

    def cfg(path, scenario, switch=None):
        doc = {"scenario": scenario}
        if switch:
            doc["switch"] = switch
        p = root / path
        p.write_text(json.dumps(doc))
        return p

    incast = {"n_senders": 64, "n_receivers": 1, "initial_window": 300,
              "duration_ns": 150_000}
    c_ideal = cfg("ideal.json", incast, {"variant": "IDEAL", "header_queue_cap": 65536})
    c_mod = cfg("mod.json", incast, {"variant": "MOD", "header_queue_cap": 65536})
    trimsim("run", "--config", str(c_ideal), "--out", str(root / "ideal"))
    trimsim("run", "--config", str(c_mod), "--out", str(root / "mod"))

    c_sweep = cfg("sweep.json", {"n_senders": 8, "n_receivers": 16,
                                 "initial_window": 300, "duration_ns": 150_000})
    trimsim("sweep", "--axis", "n_senders", "--config", str(c_sweep),
            "--out", str(root / "sweepdir"), "--values", "8,16,24")

    c_modes = cfg("modes.json", {"n_senders": 18, "n_receivers": 16})
    trimsim("run", "--config", str(c_modes), "--out", str(root / "modes18"))

    c_trace = cfg("trace.json", {"n_senders": 4, "n_receivers": 1,
                                 "initial_window": 500, "duration_ns": 150_000})
    trimsim("run", "--config", str(c_trace), "--out", str(root / "trace4to1"),
            "--trace")

    return root
