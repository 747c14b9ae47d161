"""Discrete-event emulation of a three-host star network.

Hosts ``h1``, ``sta1`` and ``sta2`` hang off a single switch ``s1``. Every
host-switch link is impaired independently in each direction (delay with
uniform jitter, Bernoulli loss, FIFO serialization at a fixed bandwidth).
Application traffic rides on reliable in-order flows: a copy lost on either
hop is re-sent one RTO after the attempt that lost it, and the receiver
reorders and de-duplicates by sequence number.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from . import rng

HOSTS = ("h1", "sta1", "sta2")
SWITCH = "s1"


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class LinkParams:
    delay: float = 0.010
    jitter: float = 0.001
    loss: float = 0.01
    bandwidth: float = 1e7

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.delay, self.jitter, self.loss, self.bandwidth)):
            raise ValueError("link parameters must be finite")
        if not self.delay >= self.jitter >= 0:
            raise ValueError(f"need delay >= jitter >= 0, got delay={self.delay} jitter={self.jitter}")
        if not 0 <= self.loss < 1:
            raise ValueError(f"loss must be in [0, 1), got {self.loss}")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")

    def serialization(self, size: int) -> float:
        return size * 8 / self.bandwidth


@dataclass(slots=True)
class Message:
    flow_id: str
    seq: int
    payload: Any
    size: int
    send_time: float
    attempts: int = 0
    deliver_time: float | None = None


class EventLoop:
    """Min-heap of ``(time, id, callback, args)``; ids break ties in schedule order."""

    def __init__(self):
        self.now = 0.0
        self._queue: list = []
        self._next_id = 0

    def schedule(self, time: float, fn: Callable, *args) -> None:
        if time < self.now:
            raise ValueError(f"cannot schedule into the past ({time} < {self.now})")
        heapq.heappush(self._queue, (time, self._next_id, fn, args))
        self._next_id += 1

    def run(self, until: float) -> None:
        """Execute every event with time strictly before ``until``."""
        q = self._queue
        pop = heapq.heappop
        while q and q[0][0] < until:
            t, _, fn, args = pop(q)
            self.now = t
            fn(*args)
        self.now = max(self.now, until)

    def __len__(self):
        return len(self._queue)


def sample_link_delay(params: LinkParams, stream) -> float:
    return max(0.0, params.delay + params.jitter * (2.0 * stream.random() - 1.0))


class Link:
    """One direction of a host-switch link with its own FIFO and RNG streams."""

    __slots__ = ("name", "params", "busy_until", "_jitter", "_loss", "sent", "dropped")

    def __init__(self, name: str, params: LinkParams, jitter_stream, loss_stream):
        self.name = name
        self.params = params
        self.busy_until = 0.0
        self._jitter = jitter_stream
        self._loss = loss_stream
        self.sent = 0
        self.dropped = 0

    def transmit(self, size: int, now: float) -> float | None:
        """Queue ``size`` bytes at ``now``; return the arrival time, or None if lost.

        A lost copy still occupies the link for its serialization time.
        Jitter and loss are both drawn for every copy, which keeps each
        stream's position a function of the number of copies alone.
        """
        p = self.params
        depart = now if now > self.busy_until else self.busy_until
        done = depart + size * 8 / p.bandwidth
        self.busy_until = done
        delay = sample_link_delay(p, self._jitter)
        lost = self._loss.random() < p.loss
        self.sent += 1
        if lost:
            self.dropped += 1
            return None
        return done + delay


def transmit(msg: Message, link: Link, now: float) -> float | None:
    return link.transmit(msg.size, now)


class Topology:
    def __init__(self, params: Mapping[str, LinkParams], master_seed: int = 0, labels: tuple = ()):
        missing = [h for h in HOSTS if h not in params]
        if missing:
            raise TopologyError(f"no link parameters for host(s) {missing}")
        self.params = dict(params)
        self.links: dict[tuple[str, str], Link] = {}
        for host in HOSTS:
            for a, b in ((host, SWITCH), (SWITCH, host)):
                name = f"{a}->{b}"
                self.links[(a, b)] = Link(
                    name,
                    params[host],
                    rng.stream(master_seed, *labels, name, "jitter"),
                    rng.stream(master_seed, *labels, name, "loss"),
                )

    def path(self, src: str, dst: str) -> tuple[Link, Link]:
        if src not in HOSTS:
            raise TopologyError(f"unknown source host {src!r}")
        if src == dst:
            raise TopologyError(f"self-addressed message at {src!r}")
        return self.links[(src, SWITCH)], switch_forward(dst, self)


def switch_forward(dst: str, topology: Topology) -> Link:
    """Static forwarding: the unique switch egress toward ``dst``, no added delay."""
    if dst not in HOSTS:
        raise TopologyError(f"unknown destination host {dst!r}")
    return topology.links[(SWITCH, dst)]


@dataclass
class FlowReceiverState:
    next_expected_seq: int = 0
    out_of_order_buffer: dict[int, Message] = field(default_factory=dict)


def deliver_in_order(rs: FlowReceiverState, msg: Message) -> tuple[list[Message], FlowReceiverState]:
    """Buffer ``msg`` and release the longest gapless run; updates ``rs`` in place."""
    if msg.seq < rs.next_expected_seq or msg.seq in rs.out_of_order_buffer:
        return [], rs
    buf = rs.out_of_order_buffer
    buf[msg.seq] = msg
    out = []
    while rs.next_expected_seq in buf:
        out.append(buf.pop(rs.next_expected_seq))
        rs.next_expected_seq += 1
    return out, rs


PacketRow = tuple  # (flow_id, seq, size, send_time, deliver_time | None, attempts)


class ReliableFlow:
    """Sender and receiver halves of one reliable, in-order flow ``src -> dst``.

    ``on_deliver`` receives the list of messages released to the application
    by one arrival. Delivered messages are appended to ``packet_log``.
    """

    def __init__(self, loop: EventLoop, topology: Topology, src: str, dst: str, flow_id: str,
                 rto: float, on_deliver: Callable[[list[Message]], None] | None = None,
                 packet_log: list | None = None):
        self.loop = loop
        self.up, self.down = topology.path(src, dst)
        one_way = self.up.params.delay + self.down.params.delay
        if not rto > one_way:
            raise TopologyError(
                f"rto={rto} must exceed the expected one-way delay {one_way:.6g} s on {flow_id}"
            )
        self.flow_id = flow_id
        self.src, self.dst = src, dst
        self.rto = rto
        self.on_deliver = on_deliver
        self.packet_log = packet_log if packet_log is not None else []
        self.receiver = FlowReceiverState()
        self.next_seq = 0
        self.in_flight: dict[int, Message] = {}

    def send(self, payload: Any, size: int) -> Message:
        if size <= 0:
            raise ValueError("message size must be positive")
        msg = Message(self.flow_id, self.next_seq, payload, size, self.loop.now)
        self.next_seq += 1
        self.in_flight[msg.seq] = msg
        self._attempt(msg)
        return msg

    def _attempt(self, msg: Message) -> None:
        now = self.loop.now
        msg.attempts += 1
        arrival = self.up.transmit(msg.size, now)
        if arrival is None:
            self.loop.schedule(now + self.rto, self._attempt, msg)
        else:
            self.loop.schedule(arrival, self._at_switch, msg, now)

    def _at_switch(self, msg: Message, attempt_time: float) -> None:
        now = self.loop.now
        arrival = self.down.transmit(msg.size, now)
        if arrival is None:
            retry = attempt_time + self.rto
            self.loop.schedule(retry if retry > now else now, self._attempt, msg)
        else:
            self.loop.schedule(arrival, self._arrive, msg)

    def _arrive(self, msg: Message) -> None:
        released, _ = deliver_in_order(self.receiver, msg)
        if not released:
            return
        now = self.loop.now
        log = self.packet_log
        for m in released:
            m.deliver_time = now
            del self.in_flight[m.seq]
            log.append((m.flow_id, m.seq, m.size, m.send_time, now, m.attempts))
        if self.on_deliver is not None:
            self.on_deliver(released)

    def undelivered(self) -> list[PacketRow]:
        return [(m.flow_id, m.seq, m.size, m.send_time, None, m.attempts)
                for m in sorted(self.in_flight.values(), key=lambda m: m.seq)]


def reliable_send(flow: ReliableFlow, payload: Any, size: int) -> Message:
    return flow.send(payload, size)
