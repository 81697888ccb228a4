"""Piecewise-linear node trajectories and the FEN / FGW / BKH scenario.

A trajectory is an ordered list of segments. Inside a segment a node moves
in a straight line at constant velocity; after the last segment ends it
stays where it is.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .streams import substream

Position3 = tuple  # (x, y, z) in meters


@dataclass(frozen=True)
class Segment:
    start_time: float
    origin: tuple
    velocity: tuple
    duration: float

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError(f"segment duration must be >= 0, got {self.duration}")

    @property
    def end_time(self):
        return self.start_time + self.duration

    @property
    def speed(self):
        return math.sqrt(sum(v * v for v in self.velocity))

    def end_position(self):
        return tuple(o + v * self.duration for o, v in zip(self.origin, self.velocity))


@dataclass(frozen=True)
class Trajectory:
    node_id: str
    segments: tuple = field(default_factory=tuple)

    def arrays(self):
        """Segment table as arrays ``(starts, origins, velocities, durations)``.

        This is the layout consumed by the compiled position routine.
        """
        if not self.segments:
            raise ValueError("no segments")
        starts = np.array([s.start_time for s in self.segments], dtype=np.float64)
        origins = np.array([s.origin for s in self.segments], dtype=np.float64)
        vels = np.array([s.velocity for s in self.segments], dtype=np.float64)
        durs = np.array([s.duration for s in self.segments], dtype=np.float64)
        return starts, origins, vels, durs

    def position_at(self, t):
        return position_at(self, t)


@dataclass(frozen=True)
class ScenarioConfig:
    arena_side: float = 1000.0
    run_duration: float = 300.0
    delta: float = 30.0
    fen_speed: float = 8.0
    bkh_position: tuple = (0.0, 500.0, 20.0)
    altitude: float = 20.0
    seed: int = 1

    def __post_init__(self):
        if not self.arena_side > 0:
            raise ValueError("arena_side must be > 0")
        if not (0 < self.delta <= self.run_duration or self.run_duration == 0):
            raise ValueError("delta must satisfy 0 < delta <= run_duration")
        if not self.fen_speed > 0:
            raise ValueError("fen_speed must be > 0")


@dataclass(frozen=True)
class Scenario:
    fen: Trajectory
    fgw: Trajectory
    bkh: Trajectory
    config: ScenarioConfig

    def node(self, node_id):
        return {"fen": self.fen, "fgw": self.fgw, "bkh": self.bkh}[node_id]


@njit(cache=True)
def _segment_index(starts, t):
    # last segment whose start is <= t; 0 if t precedes every segment
    i = np.searchsorted(starts, t, side="right") - 1
    return i if i > 0 else 0


@njit(cache=True)
def position_xyz(starts, origins, vels, durs, t, out):
    """Write the position at time ``t`` into ``out`` (length 3)."""
    i = _segment_index(starts, t)
    dt = t - starts[i]
    if dt < 0.0:
        dt = 0.0
    elif dt > durs[i]:
        dt = durs[i]
    for k in range(3):
        out[k] = origins[i, k] + vels[i, k] * dt


def position_at(traj, t):
    """Position of ``traj`` at time ``t`` as an ``(x, y, z)`` tuple."""
    if t < 0:
        raise ValueError("t must be >= 0")
    starts, origins, vels, durs = traj.arrays()
    out = np.empty(3)
    position_xyz(starts, origins, vels, durs, float(t), out)
    return tuple(float(v) for v in out)


def distance(a, b):
    return math.dist(a, b)


def midpoint(a, b):
    return tuple((x + y) / 2.0 for x, y in zip(a, b))


def _max_length_inside(x, y, dx, dy, side):
    """Length along (dx, dy) from (x, y) before leaving ``[0, side]^2``."""
    limit = math.inf
    if dx > 0:
        limit = min(limit, (side - x) / dx)
    elif dx < 0:
        limit = min(limit, -x / dx)
    if dy > 0:
        limit = min(limit, (side - y) / dy)
    elif dy < 0:
        limit = min(limit, -y / dy)
    return max(limit, 0.0)


def _clip(v, lo, hi):
    return min(max(v, lo), hi)


def generate_fen_trajectory(config, seed=None):
    """Random elementary movements of the FEN, one per ``delta`` epoch.

    Each epoch draws a heading uniform in [0, 2*pi) and a path length
    uniform in (0, fen_speed*delta]. The path is cut where it would leave
    the arena. The node flies the path at ``fen_speed`` and then hovers
    until the next epoch begins.
    """
    seed = config.seed if seed is None else seed
    side = config.arena_side
    z = config.altitude
    start_rng = substream(seed, "fen", "initial-position")
    heading_rng = substream(seed, "fen", "direction")
    length_rng = substream(seed, "fen", "length")

    x, y = start_rng.uniform(0.0, side, size=2)
    n_epochs = max(1, math.ceil(config.run_duration / config.delta))
    segments = []
    for epoch in range(n_epochs):
        t0 = epoch * config.delta
        theta = heading_rng.uniform(0.0, 2.0 * math.pi)
        # 1 - U[0, 1) lies in (0, 1]
        length = (1.0 - length_rng.random()) * config.fen_speed * config.delta
        dx, dy = math.cos(theta), math.sin(theta)
        length = min(length, _max_length_inside(x, y, dx, dy, side))
        t_move = length / config.fen_speed
        if t_move > 0:
            vel = (config.fen_speed * dx, config.fen_speed * dy, 0.0)
            segments.append(Segment(t0, (x, y, z), vel, t_move))
            x = _clip(x + vel[0] * t_move, 0.0, side)
            y = _clip(y + vel[1] * t_move, 0.0, side)
        hold = config.delta - t_move
        if hold > 0:
            segments.append(Segment(t0 + t_move, (x, y, z), (0.0, 0.0, 0.0), hold))
    return Trajectory("fen", tuple(segments))


def derive_fgw_trajectory(fen, config):
    """FGW path that keeps the gateway halfway between the BKH and the FEN.

    For every FEN segment the FGW flies from the midpoint of its start to
    the midpoint of its end over the same time span, so the midpoint
    relation holds at every instant, not just at segment boundaries.
    """
    bkh = tuple(float(c) for c in config.bkh_position)
    segments = []
    for seg in fen.segments:
        a = midpoint(bkh, seg.origin)
        if seg.duration > 0:
            b = midpoint(bkh, seg.end_position())
            vel = tuple((bj - aj) / seg.duration for aj, bj in zip(a, b))
        else:
            vel = (0.0, 0.0, 0.0)
        segments.append(Segment(seg.start_time, a, vel, seg.duration))
    return Trajectory("fgw", tuple(segments))


def static_trajectory(node_id, position, duration):
    return Trajectory(node_id, (Segment(0.0, tuple(float(c) for c in position), (0.0, 0.0, 0.0), float(duration)),))


def generate_scenario(config):
    fen = generate_fen_trajectory(config)
    fgw = derive_fgw_trajectory(fen, config)
    bkh = static_trajectory("bkh", config.bkh_position, config.run_duration)
    return Scenario(fen, fgw, bkh, config)


def static_scenario(fen_position, config, fgw_position=None):
    """Scenario with motionless nodes; the FGW defaults to the midpoint."""
    if fgw_position is None:
        fgw_position = midpoint(config.bkh_position, fen_position)
    d = config.run_duration
    return Scenario(
        static_trajectory("fen", fen_position, d),
        static_trajectory("fgw", fgw_position, d),
        static_trajectory("bkh", config.bkh_position, d),
        config,
    )


SCENARIO_COLUMNS = [
    "node_id", "segment_index", "start_time",
    "origin_x", "origin_y", "origin_z",
    "velocity_x", "velocity_y", "velocity_z",
    "duration",
]


def scenario_to_csv(scenario):
    """Serialize every trajectory segment; floats round-trip exactly."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCENARIO_COLUMNS)
    for traj in (scenario.fen, scenario.fgw, scenario.bkh):
        for i, s in enumerate(traj.segments):
            w.writerow([traj.node_id, i] + [repr(float(v)) for v in (s.start_time, *s.origin, *s.velocity, s.duration)])
    return buf.getvalue()


def trajectories_from_csv(text):
    """Parse :func:`scenario_to_csv` output into ``{node_id: Trajectory}``."""
    rows = list(csv.DictReader(io.StringIO(text)))
    missing = set(SCENARIO_COLUMNS) - set(rows[0].keys() if rows else SCENARIO_COLUMNS)
    if missing:
        raise ValueError(f"scenario CSV missing columns: {sorted(missing)}")
    by_node = {}
    for row in rows:
        seg = Segment(
            float(row["start_time"]),
            (float(row["origin_x"]), float(row["origin_y"]), float(row["origin_z"])),
            (float(row["velocity_x"]), float(row["velocity_y"]), float(row["velocity_z"])),
            float(row["duration"]),
        )
        by_node.setdefault(row["node_id"], []).append((int(row["segment_index"]), seg))
    return {
        node: Trajectory(node, tuple(s for _, s in sorted(segs, key=lambda p: p[0])))
        for node, segs in by_node.items()
    }
