"""Per-link rate controllers: Minstrel-HT, TARA and Ideal.

The decision logic lives in small compiled functions that work on plain
arrays, so the simulator's inner loop and the Python-facing state classes
below share a single implementation.

Stage schedules are written into a pair of caller-owned arrays
``(stage_mcs, stage_attempts)`` and the number of stages is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .channel import MCS_PHY_RATE, N_MCS, mcs_for_snr_raw
from .mac import MacTimingConfig, effective_rates

MINSTREL, TARA, IDEAL = 0, 1, 2
ALGORITHMS = {"minstrel": MINSTREL, "tara": TARA, "ideal": IDEAL}

EWMA_WEIGHT = 0.25
SAMPLE_PERIOD = 16
RETRY_BUDGETS = (3, 3, 4)
RETRY_CAP = 10
TARA_ATTEMPTS = 3  # first try + 2 retries
MAX_STAGES = 8
NO_MCS = -1


def algorithm_id(name):
    try:
        return ALGORITHMS[name.lower()]
    except (KeyError, AttributeError):
        raise ValueError(f"unknown algorithm {name!r}; expected one of {sorted(ALGORITHMS)}") from None


# ---------------------------------------------------------------- kernels

@njit(cache=True)
def select_rates(ewma, eff_rate, sel):
    """Fill ``sel`` with (max_tp, max_tp2, max_prob); ties go to the higher MCS."""
    n = ewma.shape[0]
    best, second = 0, -1
    best_tp = ewma[0] * eff_rate[0]
    for i in range(1, n):
        tp = ewma[i] * eff_rate[i]
        if tp >= best_tp:
            second = best
            best, best_tp = i, tp
        elif second < 0 or tp >= ewma[second] * eff_rate[second]:
            second = i
    prob = 0
    for i in range(1, n):
        if ewma[i] >= ewma[prob]:
            prob = i
    sel[0] = best
    sel[1] = second
    sel[2] = prob


@njit(cache=True)
def update_stats_raw(attempts, successes, ewma, eff_rate, sel, weight):
    for i in range(ewma.shape[0]):
        if attempts[i] > 0:
            ewma[i] = (1.0 - weight) * ewma[i] + weight * (successes[i] / attempts[i])
        attempts[i] = 0
        successes[i] = 0
    select_rates(ewma, eff_rate, sel)


@njit(cache=True)
def promote_tara(sel, mcs_tara, phy_rate):
    """Put the predicted MCS at the head of the selection if it is faster."""
    if mcs_tara >= 0 and phy_rate[mcs_tara] > phy_rate[sel[0]]:
        sel[1] = sel[0]
        sel[0] = mcs_tara


@njit(cache=True)
def _push_stage(stage_mcs, stage_att, n, total, mcs, attempts, cap):
    room = cap - total
    if attempts > room:
        attempts = room
    if attempts <= 0:
        return n, total
    if n > 0 and stage_mcs[n - 1] == mcs:
        stage_att[n - 1] += attempts
    else:
        stage_mcs[n] = mcs
        stage_att[n] = attempts
        n += 1
    return n, total + attempts


@njit(cache=True)
def chain_schedule(sel, lead_mcs, lead_attempts, budgets, cap, stage_mcs, stage_att):
    """Retry chain ``[lead?] + (max_tp, max_tp2, max_prob)`` capped at ``cap`` attempts.

    A negative ``lead_mcs`` means no leading stage. Adjacent stages that use
    the same MCS are merged.
    """
    n, total = 0, 0
    if lead_mcs >= 0:
        n, total = _push_stage(stage_mcs, stage_att, n, total, lead_mcs, lead_attempts, cap)
    for k in range(3):
        n, total = _push_stage(stage_mcs, stage_att, n, total, sel[k], budgets[k], cap)
    return n


@njit(cache=True)
def sample_rate(max_tp, u, n_rates):
    """Map a uniform draw onto one of the rates other than ``max_tp``."""
    k = int(u * (n_rates - 1))
    if k >= n_rates - 1:
        k = n_rates - 2
    return k if k < max_tp else k + 1


@njit(cache=True)
def ideal_mcs(thresholds, last_snr):
    if np.isnan(last_snr):
        return 0
    return mcs_for_snr_raw(thresholds, last_snr)


@njit(cache=True)
def record_frame(attempts, successes, stage_mcs, stage_att, n_stages, n_tried, success):
    """Credit ``n_tried`` attempts walked along the schedule; the last one succeeded if ``success``."""
    left = n_tried
    last = stage_mcs[0]
    for s in range(n_stages):
        if left <= 0:
            break
        k = stage_att[s] if stage_att[s] < left else left
        attempts[stage_mcs[s]] += k
        left -= k
        last = stage_mcs[s]
    if success:
        successes[last] += 1


# ---------------------------------------------------------------- Python API

@dataclass(frozen=True)
class TxDecision:
    stages: tuple  # ((mcs, max_attempts), ...)
    sampling: bool = False

    @property
    def total_attempts(self):
        return sum(a for _, a in self.stages)

    @property
    def first_mcs(self):
        return self.stages[0][0]

    def mcs_for_attempt(self, attempt_index):
        left = attempt_index
        for mcs, n in self.stages:
            if left < n:
                return mcs
            left -= n
        raise IndexError("attempt index beyond schedule")

    @classmethod
    def from_arrays(cls, stage_mcs, stage_att, n, sampling=False):
        return cls(tuple((int(stage_mcs[i]), int(stage_att[i])) for i in range(n)), sampling)


@dataclass(frozen=True)
class TxFeedback:
    mcs_used: int
    attempt_index: int
    success: bool
    rx_snr_db: float = float("nan")

    def __post_init__(self):
        if not 0 <= self.attempt_index < RETRY_CAP:
            raise ValueError("attempt_index must be below the retry cap")


@dataclass
class MinstrelParams:
    ewma_weight: float = EWMA_WEIGHT
    sample_period: int = SAMPLE_PERIOD
    retry_budgets: tuple = RETRY_BUDGETS
    retry_cap: int = RETRY_CAP
    tau: float = 0.05
    initial_prob: float = 1.0
    timing: MacTimingConfig = field(default_factory=MacTimingConfig)

    def effective_rates(self):
        return effective_rates(self.timing)


@dataclass
class MinstrelState:
    """Minstrel-HT statistics for one link and the current retry-chain picks."""

    params: MinstrelParams = field(default_factory=MinstrelParams)
    attempts: np.ndarray = None
    successes: np.ndarray = None
    ewma: np.ndarray = None
    selection: np.ndarray = None  # (max_tp, max_tp2, max_prob)
    frames_since_sample: int = 0
    last_update: float = 0.0

    def __post_init__(self):
        self.eff_rate = self.params.effective_rates()
        if self.attempts is None:
            self.attempts = np.zeros(N_MCS, dtype=np.int64)
        if self.successes is None:
            self.successes = np.zeros(N_MCS, dtype=np.int64)
        if self.ewma is None:
            self.ewma = np.full(N_MCS, self.params.initial_prob)
        if self.selection is None:
            self.selection = np.zeros(3, dtype=np.int64)
            select_rates(self.ewma, self.eff_rate, self.selection)

    @property
    def max_tp(self):
        return int(self.selection[0])

    @property
    def max_tp2(self):
        return int(self.selection[1])

    @property
    def max_prob(self):
        return int(self.selection[2])

    @property
    def expected_throughput(self):
        return self.ewma * self.eff_rate

    def update_stats(self, now):
        update_stats_raw(self.attempts, self.successes, self.ewma, self.eff_rate,
                         self.selection, self.params.ewma_weight)
        self.last_update = now
        return self

    def _schedule(self, lead_mcs, lead_attempts, sampling=False):
        sm = np.empty(MAX_STAGES, dtype=np.int64)
        sa = np.empty(MAX_STAGES, dtype=np.int64)
        n = chain_schedule(self.selection, lead_mcs, lead_attempts,
                           np.asarray(self.params.retry_budgets, dtype=np.int64),
                           self.params.retry_cap, sm, sa)
        return TxDecision.from_arrays(sm, sa, n, sampling)

    def decide(self, rng=None):
        """Retry chain for the next data frame.

        Every ``sample_period``-th frame leads with a single attempt at a
        random rate other than max_tp; ``rng`` must be given for those.
        """
        self.frames_since_sample += 1
        if self.frames_since_sample >= self.params.sample_period:
            self.frames_since_sample = 0
            if rng is None:
                raise ValueError("a sampling frame needs a random stream")
            probe = sample_rate(self.max_tp, rng.random(), N_MCS)
            return self._schedule(probe, 1, sampling=True)
        return self._schedule(NO_MCS, 0)

    def on_feedback(self, decision, fb):
        sm = np.array([m for m, _ in decision.stages], dtype=np.int64)
        sa = np.array([a for _, a in decision.stages], dtype=np.int64)
        record_frame(self.attempts, self.successes, sm, sa, len(sm), fb.attempt_index + 1, fb.success)
        return self


@dataclass
class TaraState:
    """Minstrel-HT plus a trajectory-predicted MCS that leads the retry chain."""

    inner: MinstrelState = field(default_factory=MinstrelState)
    mcs_tara: int = NO_MCS
    tara_retry_limit: int = 2

    @property
    def max_tp(self):
        return self.inner.max_tp

    @property
    def max_tp2(self):
        return self.inner.max_tp2

    @property
    def max_prob(self):
        return self.inner.max_prob

    def update_stats(self, now, predicted_snr_db=None, table=None):
        self.inner.update_stats(now)
        if predicted_snr_db is not None:
            self.mcs_tara = int(mcs_for_snr_raw(table.as_array(), float(predicted_snr_db)))
            promote_tara(self.inner.selection, self.mcs_tara, MCS_PHY_RATE)
        return self

    def decide(self, rng=None):
        if self.mcs_tara < 0:
            return self.inner.decide(rng)
        return self.inner._schedule(self.mcs_tara, self.tara_retry_limit + 1)

    def on_feedback(self, decision, fb):
        self.inner.on_feedback(decision, fb)
        return self


@dataclass
class IdealState:
    thresholds: np.ndarray
    retry_cap: int = RETRY_CAP
    last_feedback_snr_db: float = float("nan")

    def update_stats(self, now):
        return self

    def decide(self, rng=None):
        return TxDecision(((int(ideal_mcs(self.thresholds, self.last_feedback_snr_db)), self.retry_cap),))

    def on_feedback(self, decision, fb):
        if fb.success:
            self.last_feedback_snr_db = float(fb.rx_snr_db)
        return self


def minstrel_update_stats(state, now):
    return state.update_stats(now)


def tara_update_stats(state, predicted_snr_db, table, now):
    return state.update_stats(now, predicted_snr_db, table)


def minstrel_decide(state, rng=None):
    return state.decide(rng)


def tara_decide(state, rng=None):
    return state.decide(rng)


def ideal_decide(state, table=None):
    if table is not None:
        state.thresholds = table.as_array()
    return state.decide()


def on_feedback(state, decision, fb):
    return state.on_feedback(decision, fb)


def make_controller(name, table, params=None):
    params = params or MinstrelParams()
    algo = algorithm_id(name)
    if algo == MINSTREL:
        return MinstrelState(params)
    if algo == TARA:
        return TaraState(MinstrelState(params))
    return IdealState(table.as_array(), params.retry_cap)
