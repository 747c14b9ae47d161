import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from plate_netsim.netem import (
    HOSTS,
    EventLoop,
    FlowReceiverState,
    Link,
    LinkParams,
    Message,
    ReliableFlow,
    Topology,
    TopologyError,
    deliver_in_order,
    sample_link_delay,
    switch_forward,
    transmit,
)


def topo(seed=0, **params):
    return Topology({h: LinkParams(**params) for h in HOSTS}, seed)


def test_default_link_params():
    p = LinkParams()
    assert (p.delay, p.jitter, p.loss, p.bandwidth) == (0.010, 0.001, 0.01, 1e7)


@pytest.mark.parametrize("kw", [dict(delay=0.001, jitter=0.002), dict(jitter=-1e-3),
                                dict(loss=1.0), dict(loss=-0.1), dict(bandwidth=0.0)])
def test_invalid_link_params(kw):
    with pytest.raises(ValueError):
        LinkParams(**kw)


def test_zero_jitter_is_constant_delay():
    r = random.Random(1)
    p = LinkParams(jitter=0.0)
    assert {sample_link_delay(p, r) for _ in range(1000)} == {0.010}


def test_default_delay_bounds_and_mean():
    r = random.Random(2)
    p = LinkParams()
    n = 1_000_000
    total, lo, hi = 0.0, 1.0, 0.0
    for _ in range(n):
        d = sample_link_delay(p, r)
        total += d
        lo, hi = min(lo, d), max(hi, d)
    assert 0.009 <= lo and hi <= 0.011
    assert total / n == pytest.approx(0.010, abs=1e-5)


def _link(params, seed=0):
    return Link("test", params, random.Random(seed), random.Random(seed + 1))


def test_serialization_on_idle_link():
    link = _link(LinkParams(delay=0.0, jitter=0.0, loss=0.0, bandwidth=1e7))
    msg = Message("f", 0, None, 1250, 0.0)
    assert transmit(msg, link, 0.0) == pytest.approx(0.001, abs=1e-15)


def test_fifo_serialization_queues_back_to_back():
    link = _link(LinkParams(delay=0.0, jitter=0.0, loss=0.0, bandwidth=1e7))
    arrivals = [link.transmit(1250, 0.0) for _ in range(3)]
    assert arrivals == pytest.approx([0.001, 0.002, 0.003])
    # an idle gap resets the queue
    assert link.transmit(1250, 1.0) == pytest.approx(1.001)


def test_loss_fraction_monte_carlo():
    link = _link(LinkParams(loss=0.5), seed=7)
    n = 1_000_000
    lost = sum(link.transmit(10, 0.0) is None for _ in range(n))
    assert lost / n == pytest.approx(0.5, abs=0.002)


def test_switch_paths():
    t = topo()
    up, down = t.path("sta1", "sta2")
    assert (up.name, down.name) == ("sta1->s1", "s1->sta2")
    up, down = t.path("sta1", "h1")
    assert (up.name, down.name) == ("sta1->s1", "s1->h1")
    assert switch_forward("h1", t).name == "s1->h1"
    with pytest.raises(TopologyError):
        t.path("sta1", "sta1")
    with pytest.raises(TopologyError):
        switch_forward("nowhere", t)


def test_every_host_path_is_two_links():
    t = topo()
    for a in HOSTS:
        for b in HOSTS:
            if a != b:
                up, down = t.path(a, b)
                assert up.name.startswith(a) and down.name.endswith(b)


def test_in_order_examples():
    rs = FlowReceiverState()
    m = [Message("f", i, None, 1, 0.0) for i in range(3)]
    assert [x.seq for x in deliver_in_order(rs, m[0])[0]] == [0]
    assert [x.seq for x in deliver_in_order(rs, m[1])[0]] == [1]
    assert [x.seq for x in deliver_in_order(rs, m[2])[0]] == [2]

    rs = FlowReceiverState()
    assert deliver_in_order(rs, m[1])[0] == []
    assert [x.seq for x in deliver_in_order(rs, m[0])[0]] == [0, 1]
    assert deliver_in_order(rs, m[0])[0] == []


@given(st.lists(st.integers(0, 30), min_size=1, max_size=200))
def test_in_order_delivery_is_gapless(arrivals):
    rs = FlowReceiverState()
    delivered = []
    for seq in arrivals:
        out, rs = deliver_in_order(rs, Message("f", seq, None, 1, 0.0))
        delivered += [m.seq for m in out]
    assert delivered == list(range(len(delivered)))
    # everything up to the first missing seq number was released
    first_gap = next(i for i in range(32) if i not in set(arrivals))
    assert len(delivered) == first_gap


def test_event_ties_break_in_schedule_order():
    loop = EventLoop()
    seen = []
    for tag in "abc":
        loop.schedule(1.0, seen.append, tag)
    loop.schedule(0.5, seen.append, "first")
    loop.run(2.0)
    assert seen == ["first", "a", "b", "c"]
    with pytest.raises(ValueError):
        loop.schedule(1.0, seen.append, "past")


def _echo(params, size=64):
    loop = EventLoop()
    t = topo(**params)
    done = []
    back = ReliableFlow(loop, t, "sta2", "sta1", "back", 0.05, lambda ms: done.append(loop.now))
    fwd = ReliableFlow(loop, t, "sta1", "sta2", "fwd", 0.05,
                       lambda ms: back.send(ms[-1].payload, size))
    fwd.send("ping", size)
    loop.run(1.0)
    return done


def test_round_trip_is_40ms_plus_serialization():
    (rtt,) = _echo(dict(jitter=0.0, loss=0.0))
    assert rtt == pytest.approx(0.040 + 4 * 64 * 8 / 1e7, abs=1e-9)


def test_rto_must_exceed_one_way_delay():
    with pytest.raises(TopologyError):
        ReliableFlow(EventLoop(), topo(), "sta1", "sta2", "f", 0.02)


def _stream(loss, n, seed=3, jitter=0.001):
    loop = EventLoop()
    t = topo(seed, loss=loss, jitter=jitter)
    log = []
    flow = ReliableFlow(loop, t, "sta2", "sta1", "s", 0.05, packet_log=log)
    for i in range(n):
        loop.schedule(i * 0.01, flow.send, i, 64)
    loop.run(n * 0.01 + 10.0)
    return log


def test_lossless_flow_uses_one_attempt():
    log = _stream(0.0, 1000)
    assert len(log) == 1000
    assert {row[5] for row in log} == {1}


def test_expected_attempts_geometric():
    p, n = 0.01, 100_000
    log = _stream(p, n)
    assert len(log) == n
    mean = sum(row[5] for row in log) / n
    expected = 1 / (1 - p) ** 2
    assert expected == pytest.approx(1.0203, abs=1e-4)
    assert mean == pytest.approx(expected, rel=0.01)


def test_flow_delivers_in_order_with_latency_floor():
    log = _stream(0.2, 5000, jitter=0.001)
    assert [row[1] for row in log] == list(range(5000))
    floor = 2 * (0.010 - 0.001) + 2 * 64 * 8 / 1e7
    assert all(row[4] - row[3] >= floor - 1e-12 for row in log)
    assert all(b[4] >= a[4] for a, b in zip(log, log[1:]))


def test_seeded_schedule_is_reproducible():
    assert _stream(0.05, 2000) == _stream(0.05, 2000)
    assert _stream(0.05, 2000, seed=3) != _stream(0.05, 2000, seed=4)
