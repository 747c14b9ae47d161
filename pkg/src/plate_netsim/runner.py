"""Closed-loop experiment: plant on ``sta2``, controller on ``sta1``, name service on ``h1``.

The sensor samples the plant on a fixed clock and publishes the state over
a reliable flow; the controller answers each update with a voltage pair;
the actuator holds the latest voltage it received. A scenario is a
sequence of runs whose plant and controller state carry from one run to
the next (unless ``contiguous`` is off), each run with fresh network
randomness derived from ``(master_seed, scenario_id, run_index)``.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .control import ControllerState, cascade_step
from .netem import EventLoop, ReliableFlow, Topology
from .plant import AxisState, BallPlate, DivergenceError, PlantState, build_discretization

log = logging.getLogger(__name__)

TRACE_HEADER = "time_s,ref_x_m,ref_y_m,ball_x_m,ball_y_m,roll_rad,pitch_rad,u_x_v,u_y_v"
PACKET_HEADER = "flow_id,seq,size_bytes,send_time_s,deliver_time_s,attempts"
STATIONS = ("sta1", "sta2")

SENSOR_FLOW = "sta2>sta1:sensor"
CONTROL_FLOW = "sta1>sta2:control"


def reference(t: float, period: float, amp_x: float, amp_y: float) -> tuple[float, float]:
    w = 2.0 * math.pi * ((t % period) / period)
    return amp_x * math.sin(w), amp_y * math.cos(w)


@dataclass(frozen=True)
class LoopState:
    """Everything that carries across contiguous runs."""

    plant: PlantState
    u: tuple[float, float] = (0.0, 0.0)
    ctrl_x: ControllerState = field(default_factory=ControllerState)
    ctrl_y: ControllerState = field(default_factory=ControllerState)
    last_stamp: float | None = None  # sample time of the last measurement used


def initial_state(cfg: ScenarioConfig) -> LoopState:
    # ball starts on the reference at t = 0
    x0, y0 = reference(0.0, cfg.period, cfg.amp_x, cfg.amp_y)
    return LoopState(PlantState(AxisState(ball_pos=x0), AxisState(ball_pos=y0)))


@dataclass
class RunResult:
    run_index: int
    controller_rows: list
    packet_rows: list
    final: LoopState
    handshake_done: float | None = None
    diverged: str | None = None

    def trace_array(self) -> np.ndarray:
        return np.asarray(self.controller_rows, dtype=float).reshape(-1, 9)


class RunDiverged(RuntimeError):
    def __init__(self, run_index: int, message: str, partial: list[RunResult]):
        super().__init__(f"run {run_index} diverged: {message}")
        self.run_index = run_index
        self.partial = partial


class ClosedLoop:
    def __init__(self, cfg: ScenarioConfig, run_index: int, start: LoopState | None = None):
        self.cfg = cfg
        self.run_index = run_index
        start = start or initial_state(cfg)
        self.loop = EventLoop()
        self.topology = Topology(cfg.links, cfg.master_seed, (cfg.scenario_id, run_index))
        self.packets: list = []
        self.trace: list = []
        disc = build_discretization(cfg.motor, cfg.plant_dt)
        self.plant = BallPlate(disc, dataclasses.replace(start.plant, time=0.0),
                               angle_limit=cfg.angle_limit, blowup=cfg.blowup_bound, u=start.u)
        self.ctrl_x, self.ctrl_y = start.ctrl_x, start.ctrl_y
        self.total_steps = round(cfg.duration / cfg.plant_dt)
        self.handshake_done: float | None = None
        self._registered: set[str] = set()
        self._last_stamp = start.last_stamp - cfg.duration if start.last_stamp is not None else -math.inf

        def flow(src, dst, name, on_deliver=None):
            return ReliableFlow(self.loop, self.topology, src, dst, name, cfg.rto,
                                on_deliver, self.packets)

        self.flows: list[ReliableFlow] = []
        self.reg_req = {}
        self.reg_ack = {}
        for sta in STATIONS:
            self.reg_req[sta] = flow(sta, "h1", f"{sta}>h1:register",
                                     lambda msgs, sta=sta: self._on_register(sta))
            self.reg_ack[sta] = flow("h1", sta, f"h1>{sta}:register_ack",
                                     lambda msgs, sta=sta: self._on_registered(sta))
            self.flows += [self.reg_req[sta], self.reg_ack[sta]]
        self.sensor = flow("sta2", "sta1", SENSOR_FLOW, self._on_sensor)
        self.control = flow("sta1", "sta2", CONTROL_FLOW, self._on_control)
        self.flows += [self.sensor, self.control]

    # name service handshake
    def _on_register(self, sta: str) -> None:
        self.reg_ack[sta].send(("ack", sta), self.cfg.register_msg_bytes)

    def _on_registered(self, sta: str) -> None:
        self._registered.add(sta)
        if len(self._registered) == len(STATIONS):
            self.handshake_done = now = self.loop.now
            sps = self.cfg.steps_per_sample
            k = math.ceil(now / (sps * self.cfg.plant_dt)) * sps
            if k < self.total_steps:
                self.loop.schedule(max(now, k * self.cfg.plant_dt), self._sample, k)

    # sta2: time-triggered sensor
    def _sample(self, k: int) -> None:
        plant = self.plant
        plant.advance(k - plant.steps)
        x, y = plant.x, plant.y
        self.sensor.send((self.loop.now, x[0], y[0], x[2], y[2]), self.cfg.sensor_msg_bytes)
        k += self.cfg.steps_per_sample
        if k < self.total_steps:
            self.loop.schedule(k * self.cfg.plant_dt, self._sample, k)

    # sta1: controller, acts on the newest state in each delivery
    def _on_sensor(self, msgs) -> None:
        cfg = self.cfg
        now = self.loop.now
        stamp, bx, by, roll, pitch = msgs[-1].payload
        cx, cy = self.ctrl_x, self.ctrl_y
        if cx.started:
            # elapsed time since the last update, but never shorter than the time
            # between the two measurements (a burst release can be followed by a
            # fresh message microseconds later)
            dt = max(now - cx.last_update_time, stamp - self._last_stamp)
        else:
            dt = 1.0 / cfg.sensor_rate
        if not dt > 0 or now <= cx.last_update_time:
            return
        self._last_stamp = stamp
        rx, ry = reference(now, cfg.period, cfg.amp_x, cfg.amp_y)
        g = cfg.gains
        ux, _, self.ctrl_x = cascade_step(cx, rx, bx, roll, g.x_outer, g.x_inner, dt,
                                          cfg.angle_limit, now)
        uy, _, self.ctrl_y = cascade_step(cy, ry, by, pitch, g.y_outer, g.y_inner, dt,
                                          cfg.angle_limit, now)
        self.trace.append((now, rx, ry, bx, by, roll, pitch, ux, uy))
        self.control.send((ux, uy), cfg.control_msg_bytes)

    # sta2: actuator, zero-order hold from the next plant step on
    def _on_control(self, msgs) -> None:
        plant = self.plant
        k = math.ceil(self.loop.now / self.cfg.plant_dt - 1e-6)
        plant.advance(k - plant.steps)
        plant.u_x, plant.u_y = msgs[-1].payload

    def run(self) -> RunResult:
        diverged = None
        try:
            for sta in STATIONS:
                self.reg_req[sta].send(("register", sta), self.cfg.register_msg_bytes)
            self.loop.run(self.cfg.duration)
            self.plant.advance(self.total_steps - self.plant.steps)
        except DivergenceError as exc:
            diverged = str(exc)
        packets = self.packets + [row for f in self.flows for row in f.undelivered()]
        shift = self.cfg.duration

        def rebase(cs: ControllerState) -> ControllerState:
            return dataclasses.replace(cs, last_update_time=cs.last_update_time - shift)

        final = LoopState(self.plant.state(), (self.plant.u_x, self.plant.u_y),
                          rebase(self.ctrl_x), rebase(self.ctrl_y),
                          self._last_stamp if math.isfinite(self._last_stamp) else None)
        return RunResult(self.run_index, self.trace, packets, final, self.handshake_done, diverged)


def run_experiment(cfg: ScenarioConfig, run_index: int, start: LoopState | None = None) -> RunResult:
    return ClosedLoop(cfg, run_index, start).run()


def _cold_run(args):
    cfg, k = args
    return run_experiment(cfg, k)


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None, jobs: int = 1,
                 keep: bool = True) -> list[RunResult]:
    """Run all ``cfg.runs`` runs; write each to ``out_dir/<scenario>/run_<k>`` if given.

    Raises :class:`RunDiverged` after flushing the partial trace of the
    failing run. With ``keep=False`` the row lists are dropped after writing.
    """
    results: list[RunResult] = []
    scenario_dir = Path(out_dir) / cfg.scenario_id if out_dir is not None else None

    def finish(res: RunResult):
        if scenario_dir is not None:
            write_run(scenario_dir / f"run_{res.run_index}", res, cfg)
        if not keep:
            res.controller_rows, res.packet_rows = [], []
        results.append(res)
        if res.diverged:
            raise RunDiverged(res.run_index, res.diverged, results)
        log.info("%s run %d done: %d controller updates", cfg.scenario_id, res.run_index,
                 len(res.controller_rows))

    if cfg.contiguous or jobs <= 1:
        state = None
        for k in range(cfg.runs):
            res = run_experiment(cfg, k, state if cfg.contiguous else None)
            finish(res)
            state = res.final
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for res in pool.map(_cold_run, [(cfg, k) for k in range(cfg.runs)]):
                finish(res)
    return results


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.9f}"
    return str(v)


def write_run(run_dir: Path, res: RunResult, cfg: ScenarioConfig) -> None:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    fmt = ",".join(["%.9f"] * 9)
    with open(run_dir / "controller.csv", "w", newline="\n") as fh:
        fh.write(TRACE_HEADER + "\n")
        fh.writelines(fmt % row + "\n" for row in res.controller_rows)
    with open(run_dir / "packets.csv", "w", newline="\n") as fh:
        fh.write(PACKET_HEADER + "\n")
        fh.writelines(",".join(map(_fmt, row)) + "\n" for row in res.packet_rows)
    (run_dir / "config.snapshot.json").write_text(cfg.to_json())
