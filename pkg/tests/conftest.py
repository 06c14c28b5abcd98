import os
from multiprocessing import Pool

import pytest

from trimsim.engine import us
from trimsim.harness import build_incast, clone_scenario, run_scenario
from trimsim.policy import Variant
from trimsim.switch import SwitchVariant

JOBS = max(1, min(4, os.cpu_count() or 1))


def run_many(scenarios):
    if JOBS > 1 and len(scenarios) > 1:
        # run_scenario is importable, so it pickles by reference
        with Pool(JOBS) as pool:
            return pool.map(run_scenario, scenarios)
    return [run_scenario(s) for s in scenarios]


@pytest.fixture(scope="session")
def full_sweep():
    """TOFINO_FULL base-evaluation sweep: one run per sender count 1..64."""
    scenarios = [build_incast(n, 16) for n in range(1, 65)]
    return dict(zip(range(1, 65), run_many(scenarios)))


@pytest.fixture(scope="session")
def ideal_sweep():
    scenarios = [build_incast(n, 16, switch={"variant": SwitchVariant.IDEAL})
                 for n in range(1, 65)]
    return dict(zip(range(1, 65), run_many(scenarios)))


@pytest.fixture(scope="session")
def blast_64to1():
    """64:1 blast under IDEAL and MOD (header-arrival comparison)."""
    scenarios = [build_incast(64, 1, switch={"variant": v})
                 for v in (SwitchVariant.IDEAL, SwitchVariant.MOD)]
    ideal, mod = run_many(scenarios)
    return {"IDEAL": ideal, "MOD": mod}


@pytest.fixture(scope="session")
def dod_16x4():
    """Sixteen parallel 4:1 incasts with deflect-on-drop only (no feedback)."""
    return run_scenario(build_incast(64, 16, switch={"variant": SwitchVariant.TOFINO_DOD}))


@pytest.fixture(scope="session")
def duration_sweep():
    """Congestion-response duration sweep at 64 senders (t0=d, t1=4d)."""
    base = build_incast(64, 16)
    values = [1, 2, 3, 4, 6, 9, 12, 15, 18, 24, 30]
    scenarios = [
        clone_scenario(base, name=f"dur_{d}us",
                       policy={"t0_ps": us(d), "t1_ps": us(4 * d)})
        for d in values
    ]
    return dict(zip(values, run_many(scenarios)))


@pytest.fixture(scope="session")
def variant_sweeps_32():
    """Single-stage response variants at 32 senders across durations."""
    base = build_incast(32, 16)
    grid = [6, 10, 14, 18, 22, 26]
    out = {}
    for var in (Variant.PESSI_ONLY, Variant.TRIM_ALL):
        scenarios = [
            clone_scenario(base, name=f"{var.name}_{d}us",
                           policy={"variant": var, "t0_ps": us(d), "t1_ps": us(d)})
            for d in grid
        ]
        out[var.name] = dict(zip(grid, run_many(scenarios)))
    return out


@pytest.fixture(scope="session")
def fanout_runs():
    """ORIGIN_PIPE vs ALL_PIPES at 32 and 64 senders."""
    from trimsim.policy import Fanout
    out = {}
    scenarios = []
    keys = []
    for n in (32, 64):
        base = build_incast(n, 16)
        for d in (6, 9, 12):
            keys.append(("ORIGIN", n, d))
            scenarios.append(clone_scenario(
                base, name=f"origin_{n}_{d}us",
                policy={"signal_fanout": Fanout.ORIGIN_PIPE,
                        "t0_ps": us(d), "t1_ps": us(4 * d)}))
        keys.append(("ALL", n, 12))
        scenarios.append(clone_scenario(
            base, name=f"all_{n}_12us",
            policy={"t0_ps": us(12), "t1_ps": us(48)}))
    return dict(zip(keys, run_many(scenarios)))
