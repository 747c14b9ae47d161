import dataclasses
import math
import random

import numpy as np
import pytest

from plate_netsim.config import ControlGains, ScenarioConfig
from plate_netsim.control import PdGains
from plate_netsim.runner import (
    CONTROL_FLOW,
    PACKET_HEADER,
    SENSOR_FLOW,
    TRACE_HEADER,
    RunDiverged,
    reference,
    run_experiment,
    run_scenario,
    write_run,
)

SER64 = 64 * 8 / 1e7
SER32 = 32 * 8 / 1e7


def short(**kw):
    base = dict(duration=20.0, period=10.0, runs=1)
    base.update(kw)
    return ScenarioConfig(**base)


def test_reference_examples():
    assert reference(0.0, 100.0, 0.1, 0.2) == (0.0, 0.2)
    x, y = reference(25.0, 100.0, 0.1, 0.2)
    assert x == pytest.approx(0.1) and y == pytest.approx(0.0, abs=1e-15)


def test_reference_is_periodic():
    rng = random.Random(0)
    for _ in range(1000):
        t = rng.uniform(0, 1e4)
        np.testing.assert_allclose(reference(t + 100.0, 100.0, 0.1, 0.1),
                                   reference(t, 100.0, 0.1, 0.1), atol=1e-12)


@pytest.fixture(scope="module")
def ideal_run():
    cfg = short(duration=5.0, period=5.0).with_links(jitter=0.0, loss=0.0)
    return cfg, run_experiment(cfg, 0)


def test_ideal_network_latencies(ideal_run):
    _, res = ideal_run
    done = [r for r in res.packet_rows if r[4] is not None]
    sensor = [r for r in done if r[0] == SENSOR_FLOW]
    control = [r for r in done if r[0] == CONTROL_FLOW]
    assert sensor and control
    for r in sensor:
        assert r[4] - r[3] == pytest.approx(0.020 + 2 * SER64, abs=1e-9)
        assert r[5] == 1
    for r in control:
        assert r[4] - r[3] == pytest.approx(0.020 + 2 * SER32, abs=1e-9)
    # the controller acts the moment a sample arrives
    trace = res.trace_array()
    np.testing.assert_allclose(trace[:, 0], [r[4] for r in sensor], atol=1e-12)


def test_handshake(ideal_run):
    _, res = ideal_run
    reg_flows = {r[0] for r in res.packet_rows if "register" in r[0]}
    assert reg_flows == {"sta1>h1:register", "h1>sta1:register_ack",
                         "sta2>h1:register", "h1>sta2:register_ack"}
    # both registers leave at t=0 and queue behind each other on s1->h1
    assert res.handshake_done == pytest.approx(0.040 + 5 * SER64, abs=1e-9)
    first_sensor = min(r[3] for r in res.packet_rows if r[0] == SENSOR_FLOW)
    assert first_sensor >= res.handshake_done
    last_h1 = max(r[4] for r in res.packet_rows if "h1" in r[0])
    assert last_h1 <= first_sensor


def test_sensor_is_time_triggered():
    cfg = short(duration=30.0).with_links(loss=0.05)
    res = run_experiment(cfg, 0)
    sends = [r[3] for r in res.packet_rows if r[0] == SENSOR_FLOW]
    ticks = np.round(np.array(sends) / 0.01)
    np.testing.assert_allclose(np.array(sends), ticks * 0.01, atol=1e-9)
    assert list(np.diff(ticks)) == [1] * (len(ticks) - 1)
    first = math.ceil(res.handshake_done / 0.01)
    assert len(sends) == 3000 - first


def test_trace_rows_strictly_increasing():
    res = run_experiment(short(duration=30.0).with_links(loss=0.05), 0)
    t = res.trace_array()[:, 0]
    assert np.all(np.diff(t) > 0)
    seqs = [r[1] for r in res.packet_rows if r[0] == SENSOR_FLOW and r[4] is not None]
    assert seqs == list(range(len(seqs)))


def test_run_is_deterministic(tmp_path):
    cfg = short(duration=10.0)
    a, b = run_experiment(cfg, 0), run_experiment(cfg, 0)
    write_run(tmp_path / "a", a, cfg)
    write_run(tmp_path / "b", b, cfg)
    for name in ("controller.csv", "packets.csv", "config.snapshot.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    c = run_experiment(dataclasses.replace(cfg, master_seed=1), 0)
    assert c.controller_rows != a.controller_rows


def test_written_headers(tmp_path):
    cfg = short(duration=2.0, period=2.0)
    write_run(tmp_path, run_experiment(cfg, 0), cfg)
    lines = (tmp_path / "controller.csv").read_text().splitlines()
    assert lines[0] == TRACE_HEADER
    assert all(len(f.split(".")[1]) == 9 for f in lines[1].split(","))
    assert (tmp_path / "packets.csv").read_text().splitlines()[0] == PACKET_HEADER


def test_contiguous_runs_carry_state():
    cfg = short(runs=2)
    res = run_scenario(cfg)
    again = run_experiment(cfg, 1, res[0].final)
    assert again.controller_rows == res[1].controller_rows
    assert again.controller_rows != run_experiment(cfg, 1).controller_rows


def test_cold_start_mode():
    cfg = short(runs=2, contiguous=False)
    res = run_scenario(cfg)
    assert res[1].controller_rows == run_experiment(cfg, 1).controller_rows


def test_runs_have_distinct_seeds():
    res = run_scenario(short(runs=2, contiguous=False))
    a = [r for r in res[0].packet_rows if r[0] == SENSOR_FLOW]
    b = [r for r in res[1].packet_rows if r[0] == SENSOR_FLOW]
    assert [r[4] for r in a[:50]] != [r[4] for r in b[:50]]


def test_divergence_aborts_and_flushes(tmp_path):
    bad = PdGains(-5.0, 0.0)
    cfg = short(duration=200.0, period=100.0,
                gains=ControlGains(bad, PdGains(20.0, 0.1), bad, PdGains(20.0, 0.1)),
                blowup_bound=10.0)
    with pytest.raises(RunDiverged) as info:
        run_scenario(cfg, tmp_path)
    assert info.value.run_index == 0
    run_dir = tmp_path / cfg.scenario_id / "run_0"
    assert (run_dir / "controller.csv").is_file()
    assert len((run_dir / "controller.csv").read_text().splitlines()) > 1
