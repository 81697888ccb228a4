"""Two-hop relay simulation: FEN -> FGW (access) and FGW -> BKH (relay).

The FEN is always backlogged. Frames delivered over the access link join
a drop-tail queue at the FGW, which the relay link drains. The two links
use separate channels, so they share nothing except that queue.

Time advances in rate-control intervals of length ``tau``. At every
interval boundary the controllers refresh their statistics; within an
interval the access link runs first (its deliveries are the queue's
arrivals), then the relay link catches up to the same boundary.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .channel import (
    MCS_PHY_RATE, N_MCS, RadioConfig, build_threshold_table, fspl_db_raw, success_prob_raw,
)
from .kinematics import ScenarioConfig, generate_scenario, position_xyz
from .mac import MacTimingConfig, airtime_table, effective_rates, frame_airtime
from .rate_control import (
    EWMA_WEIGHT, IDEAL, MAX_STAGES, MINSTREL, RETRY_BUDGETS, SAMPLE_PERIOD, TARA,
    TARA_ATTEMPTS, algorithm_id, chain_schedule, ideal_mcs, promote_tara, record_frame,
    sample_rate, select_rates, update_stats_raw,
)
from .streams import substream

__all__ = [
    "LINKS", "MacTimingConfig", "SimulationConfig", "RunMetrics", "frame_airtime",
    "attempt_frame", "run_simulation", "run_batch", "format_float",
]

LINKS = ("access", "relay")
TRACE_FIELDS = ("max_tp", "max_tp2", "max_prob", "mcs_tara", "first_stage_mcs")


def format_float(x):
    return f"{x:.9g}"


def default_radios():
    return {
        "access": RadioConfig(carrier_frequency_hz=5.18e9),
        "relay": RadioConfig(carrier_frequency_hz=5.24e9),
    }


@dataclass
class SimulationConfig:
    """Everything a run needs besides the scenario and the algorithm."""

    timing: MacTimingConfig = field(default_factory=MacTimingConfig)
    radios: dict = field(default_factory=default_radios)
    tau: float = 0.05
    target_ber: float = 1e-6
    queue_capacity: int = 1000
    ewma_weight: float = EWMA_WEIGHT
    sample_period: int = SAMPLE_PERIOD
    retry_budgets: tuple = RETRY_BUDGETS
    initial_prob: float = 1.0
    tara_prediction: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")
        if set(self.radios) != set(LINKS):
            raise ValueError(f"radios must be given for links {LINKS}")

    def threshold_table(self):
        return build_threshold_table(self.target_ber)


@dataclass
class RunMetrics:
    algorithm: str
    seed: int
    duration: float
    tau: float
    delivered_bits: np.ndarray  # (2, seconds)
    busy_time: np.ndarray  # (2, seconds)
    distance: np.ndarray  # (2, seconds), sampled mid-second
    frames_delivered: np.ndarray  # (2,)
    attempts: np.ndarray  # (2,)
    retry_drops: np.ndarray  # (2,)
    queue_drops: int
    trace: np.ndarray  # (2, ticks, len(TRACE_FIELDS))

    @property
    def mean_throughput(self):
        """Mean delivered payload bits/s per link over the whole run."""
        if self.duration <= 0:
            return np.zeros(2)
        return self.delivered_bits.sum(axis=1) / self.duration

    def throughput(self, link):
        return self.delivered_bits[LINKS.index(link)]

    def first_stage_per_second(self):
        n_sec = self.delivered_bits.shape[1]
        ticks = np.minimum(np.round(np.arange(n_sec) / self.tau).astype(int), max(self.trace.shape[1] - 1, 0))
        if self.trace.shape[1] == 0:
            return np.zeros((2, n_sec), dtype=np.int64)
        return self.trace[:, ticks, TRACE_FIELDS.index("first_stage_mcs")]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_s", "link", "delivered_bits", "distance_m", "first_stage_mcs"])
        fs = self.first_stage_per_second()
        for s in range(self.delivered_bits.shape[1]):
            for li, link in enumerate(LINKS):
                w.writerow([s, link, format_float(self.delivered_bits[li, s]),
                            format_float(self.distance[li, s]), int(fs[li, s])])
        return buf.getvalue()

    def trace_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "link", *TRACE_FIELDS])
        for k in range(self.trace.shape[1]):
            for li, link in enumerate(LINKS):
                w.writerow([format_float(k * self.tau), link, *(int(v) for v in self.trace[li, k])])
        return buf.getvalue()

    def summary_rows(self):
        mt = self.mean_throughput
        return [
            {"seed": self.seed, "algorithm": self.algorithm, "link": link,
             "mean_throughput_bps": format_float(mt[li]),
             "drops": int(self.retry_drops[li]) + (self.queue_drops if link == "access" else 0)}
            for li, link in enumerate(LINKS)
        ]


# ------------------------------------------------------------------ kernel

@njit(cache=True)
def _link_snr(link, t, seg_start, seg_origin, seg_vel, seg_dur, node_off, snr_offset, wavelength, pa, pb):
    # link 0: node 0 -> node 1, link 1: node 1 -> node 2
    a0, a1 = node_off[link], node_off[link + 1]
    b0, b1 = node_off[link + 1], node_off[link + 2]
    position_xyz(seg_start[a0:a1], seg_origin[a0:a1], seg_vel[a0:a1], seg_dur[a0:a1], t, pa)
    position_xyz(seg_start[b0:b1], seg_origin[b0:b1], seg_vel[b0:b1], seg_dur[b0:b1], t, pb)
    d = math.sqrt((pa[0] - pb[0]) ** 2 + (pa[1] - pb[1]) ** 2 + (pa[2] - pb[2]) ** 2)
    if d <= 0.0:
        raise ValueError("non-positive distance")
    return snr_offset[link] - fspl_db_raw(d, wavelength[link])


@njit(cache=True)
def _add_busy(busy_row, t0, t1, duration):
    t1 = min(t1, duration)
    while t0 < t1:
        s = int(t0)
        edge = min(float(s + 1), t1)
        busy_row[s] += edge - t0
        t0 = edge


@njit(cache=True)
def _send_frame(link, t, algo, st, traj, radio, mac, rng, out, scratch):
    """Transmit one frame on ``link`` starting at ``t``.

    Returns the completion time; ``out`` receives (success, attempts).
    """
    att, suc, ewma, sel, tara, ideal_snr, frame_ctr, ptr = st
    seg_start, seg_origin, seg_vel, seg_dur, node_off = traj
    snr_offset, wavelength, thresholds = radio
    airtime, budgets, cap, payload_bits, sample_period, busy, duration, _ = mac
    u_loss, u_sample = rng

    sm, sa, pa, pb = scratch
    if algo == IDEAL:
        sm[0] = ideal_mcs(thresholds, ideal_snr[link])
        sa[0] = cap
        n = 1
    else:
        lead, lead_n = -1, 0
        if algo == TARA and tara[link] >= 0:
            lead, lead_n = tara[link], TARA_ATTEMPTS
        else:
            frame_ctr[link] += 1
            if frame_ctr[link] >= sample_period:
                frame_ctr[link] = 0
                lead = sample_rate(sel[link, 0], u_sample[link, ptr[link, 1]], N_MCS)
                ptr[link, 1] += 1
                lead_n = 1
        n = chain_schedule(sel[link], lead, lead_n, budgets, cap, sm, sa)

    tried = 0
    success = False
    last_snr = 0.0
    for s in range(n):
        m = sm[s]
        for _ in range(sa[s]):
            snr = _link_snr(link, t, seg_start, seg_origin, seg_vel, seg_dur, node_off,
                            snr_offset, wavelength, pa, pb)
            p = success_prob_raw(m, snr, payload_bits)
            u = u_loss[link, ptr[link, 0]]
            ptr[link, 0] += 1
            _add_busy(busy[link], t, t + airtime[m], duration)
            t += airtime[m]
            tried += 1
            if u < p:
                success = True
                last_snr = snr
                break
        if success:
            break

    if algo == IDEAL:
        if success:
            ideal_snr[link] = last_snr
    else:
        record_frame(att[link], suc[link], sm, sa, n, tried, success)
    out[0] = 1 if success else 0
    out[1] = tried
    return t


@njit(cache=True)
def _run_kernel(algo, predict, tau, duration, queue_cap, weight, st, traj, radio, mac, rng,
                delivered, counters, trace):
    att, suc, ewma, sel, tara, ideal_snr, frame_ctr, ptr = st
    thresholds = radio[2]
    eff_rate = mac[7]
    payload_bits = mac[3]
    n_ticks = trace.shape[1]

    arrivals = np.empty(rng[0].shape[1], dtype=np.float64)
    n_arr = 0
    a_ptr = 0
    occ = 0
    t_acc = 0.0
    t_rel = 0.0
    out = np.zeros(2, dtype=np.int64)
    pa = np.empty(3)
    pb = np.empty(3)
    scratch = (np.empty(MAX_STAGES, dtype=np.int64), np.empty(MAX_STAGES, dtype=np.int64), pa, pb)

    for k in range(n_ticks):
        tick = k * tau
        end = min((k + 1) * tau, duration)
        for link in range(2):
            if algo != IDEAL and k > 0:
                update_stats_raw(att[link], suc[link], ewma[link], eff_rate, sel[link], weight)
            if algo == TARA and predict:
                snr = _link_snr(link, tick + 0.5 * tau, traj[0], traj[1], traj[2], traj[3], traj[4],
                                radio[0], radio[1], pa, pb)
                tara[link] = ideal_mcs(thresholds, snr)
                promote_tara(sel[link], tara[link], MCS_PHY_RATE)
            trace[link, k, 0] = sel[link, 0]
            trace[link, k, 1] = sel[link, 1]
            trace[link, k, 2] = sel[link, 2]
            trace[link, k, 3] = tara[link]
            if algo == IDEAL:
                trace[link, k, 4] = ideal_mcs(thresholds, ideal_snr[link])
            elif tara[link] >= 0:
                trace[link, k, 4] = tara[link]
            else:
                trace[link, k, 4] = sel[link, 0]

        # access link: always backlogged
        while t_acc < end:
            t_acc = _send_frame(0, t_acc, algo, st, traj, radio, mac, rng, out, scratch)
            counters[0, 1] += out[1]
            if out[0] == 1:
                arrivals[n_arr] = t_acc
                n_arr += 1
                if t_acc < duration:
                    delivered[0, int(t_acc)] += payload_bits
                    counters[0, 0] += 1
            else:
                counters[0, 2] += 1

        # relay link: drains the FGW queue
        while True:
            while a_ptr < n_arr and arrivals[a_ptr] <= t_rel:
                if occ < queue_cap:
                    occ += 1
                else:
                    counters[1, 3] += 1
                a_ptr += 1
            if occ == 0:
                if a_ptr < n_arr:
                    t_rel = max(t_rel, arrivals[a_ptr])
                    if t_rel >= end:
                        break
                    continue
                t_rel = max(t_rel, end)
                break
            if t_rel >= end:
                break
            t_rel = _send_frame(1, t_rel, algo, st, traj, radio, mac, rng, out, scratch)
            counters[1, 1] += out[1]
            while a_ptr < n_arr and arrivals[a_ptr] <= t_rel:
                if occ < queue_cap:
                    occ += 1
                else:
                    counters[1, 3] += 1
                a_ptr += 1
            occ -= 1
            if out[0] == 1:
                if t_rel < duration:
                    delivered[1, int(t_rel)] += payload_bits
                    counters[1, 0] += 1
            else:
                counters[1, 2] += 1


# ------------------------------------------------------------------ Python API

def _pack_trajectories(scenario):
    starts, origins, vels, durs, offs = [], [], [], [], [0]
    for traj in (scenario.fen, scenario.fgw, scenario.bkh):
        s, o, v, d = traj.arrays()
        starts.append(s)
        origins.append(o)
        vels.append(v)
        durs.append(d)
        offs.append(offs[-1] + len(s))
    return (np.concatenate(starts), np.concatenate(origins), np.concatenate(vels),
            np.concatenate(durs), np.array(offs, dtype=np.int64))


def _link_distances(scenario, n_sec):
    """Link lengths at the middle of every simulated second."""
    out = np.zeros((2, n_sec))
    pts = {}
    for name in ("fen", "fgw", "bkh"):
        traj = scenario.node(name)
        s, o, v, d = traj.arrays()
        buf = np.empty(3)
        arr = np.empty((n_sec, 3))
        for i in range(n_sec):
            position_xyz(s, o, v, d, i + 0.5, buf)
            arr[i] = buf
        pts[name] = arr
    out[0] = np.linalg.norm(pts["fen"] - pts["fgw"], axis=1)
    out[1] = np.linalg.norm(pts["fgw"] - pts["bkh"], axis=1)
    return out


def attempt_frame(radio, tx_pos, rx_pos, mcs, rng, timing=MacTimingConfig()):
    """One Bernoulli transmission attempt between two fixed positions.

    Consumes exactly one uniform draw from ``rng``.
    """
    d = math.dist(tx_pos, rx_pos)
    if d <= 0:
        raise ValueError("non-positive distance")
    snr = radio.snr_offset_db - fspl_db_raw(d, radio.wavelength)
    p = success_prob_raw(int(mcs), snr, float(timing.payload_bits))
    return bool(rng.random() < p)


def run_simulation(scenario, algorithm, sim=None, seed=None, table=None):
    """Simulate one scenario under one rate-control algorithm.

    Loss and sampling draws come from streams keyed by ``(seed, link)``
    only, so two algorithms run on the same seed see the same randomness.
    """
    sim = sim or SimulationConfig()
    algo = algorithm_id(algorithm)
    seed = scenario.config.seed if seed is None else seed
    table = table or sim.threshold_table()
    timing = sim.timing
    duration = float(scenario.config.run_duration)
    if duration < 0:
        raise ValueError("run_duration must be >= 0")
    n_sec = int(math.ceil(duration))
    n_ticks = int(math.ceil(duration / sim.tau - 1e-9)) if duration > 0 else 0

    airtime = airtime_table(timing)
    eff_rate = effective_rates(timing)
    max_attempts = int(duration / airtime.min()) + timing.retry_cap + 2
    max_samples = max_attempts // max(sim.sample_period, 1) + 2
    u_loss = np.stack([substream(seed, link, "loss").random(max_attempts) for link in LINKS])
    u_sample = np.stack([substream(seed, link, "sampling").random(max_samples) for link in LINKS])

    ewma = np.full((2, N_MCS), float(sim.initial_prob))
    sel = np.zeros((2, 3), dtype=np.int64)
    for li in range(2):
        select_rates(ewma[li], eff_rate, sel[li])
    state = (
        np.zeros((2, N_MCS), dtype=np.int64),
        np.zeros((2, N_MCS), dtype=np.int64),
        ewma,
        sel,
        np.full(2, -1, dtype=np.int64),
        np.full(2, np.nan),
        np.zeros(2, dtype=np.int64),
        np.zeros((2, 2), dtype=np.int64),
    )
    radios = [sim.radios[link] for link in LINKS]
    radio = (
        np.array([r.snr_offset_db for r in radios]),
        np.array([r.wavelength for r in radios]),
        table.as_array(),
    )
    busy = np.zeros((2, max(n_sec, 1)))
    mac = (airtime, np.asarray(sim.retry_budgets, dtype=np.int64), int(timing.retry_cap),
           float(timing.payload_bits), int(sim.sample_period), busy, duration, eff_rate)
    delivered = np.zeros((2, max(n_sec, 1)))
    counters = np.zeros((2, 4), dtype=np.int64)  # delivered, attempts, retry drops, queue drops
    trace = np.zeros((2, n_ticks, len(TRACE_FIELDS)), dtype=np.int64)

    if n_ticks:
        _run_kernel(algo, bool(sim.tara_prediction), float(sim.tau), duration, int(sim.queue_capacity),
                    float(sim.ewma_weight), state, _pack_trajectories(scenario), radio, mac,
                    (u_loss, u_sample), delivered, counters, trace)

    return RunMetrics(
        algorithm=algorithm.lower(),
        seed=int(seed),
        duration=duration,
        tau=float(sim.tau),
        delivered_bits=delivered[:, :n_sec],
        busy_time=busy[:, :n_sec],
        distance=_link_distances(scenario, n_sec),
        frames_delivered=counters[:, 0].copy(),
        attempts=counters[:, 1].copy(),
        retry_drops=counters[:, 2].copy(),
        queue_drops=int(counters[1, 3]),
        trace=trace,
    )


def _run_seed(args):
    config, algorithms, seed, sim = args
    scenario = generate_scenario(_with_seed(config, seed))
    table = sim.threshold_table()
    return seed, scenario, {a: run_simulation(scenario, a, sim, seed, table) for a in algorithms}


def _with_seed(config, seed):
    from dataclasses import replace
    return replace(config, seed=int(seed))


def run_batch(config, algorithms, seeds, sim=None, jobs=1, on_result=None):
    """Paired runs: one scenario per seed, every algorithm on that scenario.

    Returns ``{(seed, algorithm): RunMetrics}``. ``on_result(seed,
    scenario, runs)`` is called as each seed finishes, in seed order.
    """
    if not algorithms or not seeds:
        raise ValueError("algorithms and seeds must be non-empty")
    for a in algorithms:
        algorithm_id(a)
    sim = sim or SimulationConfig()
    tasks = [(config, list(algorithms), int(s), sim) for s in seeds]
    results = {}
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = pool.map(_run_seed, tasks)
            for seed, scenario, runs in outcomes:
                _collect(results, seed, scenario, runs, on_result)
    else:
        for task in tasks:
            _collect(results, *_run_seed(task), on_result)
    return results


def _collect(results, seed, scenario, runs, on_result):
    for a, m in runs.items():
        results[(seed, a)] = m
    if on_result is not None:
        on_result(seed, scenario, runs)
