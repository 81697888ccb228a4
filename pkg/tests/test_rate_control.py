import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tarasim.channel import _CODE_WEIGHTS, build_threshold_table, mcs_for_snr
from tarasim.rate_control import (
    IdealState, MinstrelParams, MinstrelState, TaraState, TxDecision, TxFeedback,
    ideal_decide, make_controller, minstrel_decide, minstrel_update_stats, on_feedback,
    tara_decide, tara_update_stats,
)

TABLE = build_threshold_table(1e-6)


class FixedRng:
    def __init__(self, u=0.0):
        self.u = u

    def random(self):
        return self.u


def state_with(max_tp, max_tp2, max_prob):
    s = MinstrelState()
    s.selection[:] = (max_tp, max_tp2, max_prob)
    return s


# ---------------------------------------------------------------- Minstrel

def test_ewma_update():
    s = MinstrelState()
    s.attempts[3] = 10
    s.successes[3] = 0
    minstrel_update_stats(s, 0.05)
    assert s.ewma[3] == pytest.approx(0.75)
    assert s.attempts.sum() == 0 and s.successes.sum() == 0
    assert s.last_update == 0.05


def test_ewma_unchanged_without_attempts():
    s = MinstrelState()
    s.ewma[:] = np.linspace(0.1, 0.8, 8)
    before = s.ewma.copy()
    minstrel_update_stats(s, 0.05)
    assert np.array_equal(s.ewma, before)


def test_equal_throughput_tie_goes_to_higher_index():
    s = MinstrelState()
    rates = s.eff_rate
    s.ewma[:] = 0.0
    s.ewma[2] = 1.0
    s.ewma[3] = rates[2] / rates[3]
    minstrel_update_stats(s, 0.05)
    assert s.max_tp == 3


def test_selection_ordering_invariants():
    s = MinstrelState()
    s.ewma[:] = [1.0, 0.95, 0.9, 0.8, 0.6, 0.2, 0.1, 0.0]
    minstrel_update_stats(s, 0.05)
    et = s.expected_throughput
    assert et[s.max_tp] >= et[s.max_tp2]
    assert s.max_tp != s.max_tp2
    assert s.ewma[s.max_prob] == s.ewma.max()


def test_fresh_state_starts_at_top_rate():
    s = MinstrelState()
    d = minstrel_decide(s)
    assert d.first_mcs == 7 == s.max_tp


def test_non_sampling_chain_order():
    s = state_with(5, 4, 2)
    d = minstrel_decide(s)
    assert d.stages == ((5, 3), (4, 3), (2, 4))
    assert not d.sampling


def test_every_16th_frame_samples_once():
    s = state_with(5, 4, 2)
    decisions = [minstrel_decide(s, FixedRng(0.99)) for _ in range(32)]
    sampling = [i for i, d in enumerate(decisions) if d.sampling]
    assert sampling == [15, 31]
    probe = decisions[15]
    assert probe.stages[0][1] == 1
    assert probe.first_mcs != 5
    assert probe.stages[1:] == ((5, 3), (4, 3), (2, 3))
    assert probe.total_attempts == 10


@settings(max_examples=200, deadline=None)
@given(u=st.floats(0.0, 1.0, exclude_max=True), max_tp=st.integers(0, 7))
def test_sample_rate_excludes_max_tp(u, max_tp):
    s = state_with(max_tp, (max_tp + 1) % 8, 0)
    s.frames_since_sample = 15
    d = minstrel_decide(s, FixedRng(u))
    assert d.sampling and d.first_mcs != max_tp and 0 <= d.first_mcs <= 7


def test_feedback_bookkeeping_success_first_attempt():
    s = state_with(5, 4, 2)
    d = minstrel_decide(s)
    on_feedback(s, d, TxFeedback(5, 0, True))
    assert s.attempts[5] == 1 and s.successes[5] == 1
    assert s.attempts.sum() == 1


def test_feedback_bookkeeping_drop():
    s = state_with(5, 4, 2)
    d = minstrel_decide(s)
    on_feedback(s, d, TxFeedback(2, 9, False))
    assert list(s.attempts) == [0, 0, 4, 0, 3, 3, 0, 0]
    assert s.successes.sum() == 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.booleans()), max_size=80))
def test_ewma_stays_a_probability(frames):
    s = MinstrelState()
    for i, (k, ok) in enumerate(frames):
        d = minstrel_decide(s, FixedRng((i * 0.37) % 1.0))
        k = min(k, d.total_attempts - 1)
        on_feedback(s, d, TxFeedback(d.mcs_for_attempt(k), k, ok))
        if i % 7 == 6:
            minstrel_update_stats(s, i * 0.05)
    minstrel_update_stats(s, 10.0)
    assert np.all((s.ewma >= 0) & (s.ewma <= 1))
    assert np.all(s.successes <= s.attempts)


# ---------------------------------------------------------------- TARA

def tara_with(max_tp, max_tp2, max_prob):
    return TaraState(state_with(max_tp, max_tp2, max_prob))


def snr_for(mcs):
    return TABLE.thresholds[mcs] + 0.05


def freeze_selection(state):
    # keep Minstrel's own re-selection from disturbing the hand-set picks
    state.inner.eff_rate = np.zeros(8)
    sel = state.inner.selection.copy()
    state.inner.update_stats = lambda now: (state.inner.selection.__setitem__(slice(None), sel), state.inner)[1]


def test_tara_promotes_faster_prediction():
    s = tara_with(5, 4, 2)
    freeze_selection(s)
    tara_update_stats(s, snr_for(7), TABLE, 0.05)
    assert (s.mcs_tara, s.max_tp, s.max_tp2, s.max_prob) == (7, 7, 5, 2)


def test_tara_keeps_selection_for_slower_prediction():
    s = tara_with(5, 4, 2)
    freeze_selection(s)
    tara_update_stats(s, snr_for(3), TABLE, 0.05)
    assert (s.mcs_tara, s.max_tp, s.max_tp2, s.max_prob) == (3, 5, 4, 2)


def test_tara_guard_is_strict():
    s = tara_with(5, 4, 2)
    freeze_selection(s)
    tara_update_stats(s, snr_for(5), TABLE, 0.05)
    assert (s.max_tp, s.max_tp2) == (5, 4)


def test_tara_first_three_attempts_use_prediction():
    s = tara_with(5, 4, 2)
    s.mcs_tara = 3
    d = tara_decide(s)
    assert [d.mcs_for_attempt(i) for i in range(4)] == [3, 3, 3, 5]
    assert d.stages == ((3, 3), (5, 3), (4, 3), (2, 1))
    assert d.total_attempts == 10


def test_tara_duplicate_stage_coalesces():
    s = tara_with(5, 4, 2)
    s.mcs_tara = 5
    assert tara_decide(s).stages == ((5, 6), (4, 3), (2, 1))


def test_tara_fallback_after_promotion_is_old_max_tp():
    s = tara_with(5, 4, 2)
    freeze_selection(s)
    tara_update_stats(s, snr_for(7), TABLE, 0.05)
    d = tara_decide(s)
    assert d.stages[0] == (7, 6)
    assert d.stages[1][0] == 5


def test_tara_without_prediction_is_minstrel():
    rng_a, rng_b = np.random.default_rng(1), np.random.default_rng(1)
    a, b = MinstrelState(), TaraState(MinstrelState())
    for i in range(200):
        da, db = minstrel_decide(a, rng_a), tara_decide(b, rng_b)
        assert da == db
        k = i % 4
        fb = TxFeedback(da.mcs_for_attempt(k), k, i % 3 != 0)
        on_feedback(a, da, fb)
        on_feedback(b, db, fb)
        if i % 20 == 19:
            minstrel_update_stats(a, i)
            b.update_stats(i)
            assert np.array_equal(a.selection, b.inner.selection)


def test_tara_feedback_credits_prediction():
    s = tara_with(5, 4, 2)
    s.mcs_tara = 6
    d = tara_decide(s)
    on_feedback(s, d, TxFeedback(6, 0, True))
    assert s.inner.attempts[6] == 1 and s.inner.successes[6] == 1


# ---------------------------------------------------------------- Ideal

def test_ideal_cold_start():
    s = IdealState(TABLE.as_array())
    assert ideal_decide(s).stages == ((0, 10),)


def test_ideal_uses_threshold_lookup():
    s = IdealState(TABLE.as_array())
    on_feedback(s, ideal_decide(s), TxFeedback(0, 0, True, 27.3))
    assert ideal_decide(s, TABLE).first_mcs == mcs_for_snr(TABLE, 27.3) == 7


def test_ideal_below_all_thresholds():
    s = IdealState(TABLE.as_array())
    on_feedback(s, ideal_decide(s), TxFeedback(0, 0, True, -5.0))
    assert ideal_decide(s).first_mcs == 0


def test_ideal_ignores_failures():
    s = IdealState(TABLE.as_array())
    on_feedback(s, ideal_decide(s), TxFeedback(0, 0, True, 18.0))
    on_feedback(s, ideal_decide(s), TxFeedback(4, 9, False, 40.0))
    assert s.last_feedback_snr_db == 18.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 60), min_size=1, max_size=20))
def test_ideal_depends_only_on_latest_success(snrs):
    a = IdealState(TABLE.as_array())
    b = IdealState(TABLE.as_array())
    for v in snrs:
        on_feedback(a, ideal_decide(a), TxFeedback(0, 0, True, v))
    on_feedback(b, ideal_decide(b), TxFeedback(0, 0, True, snrs[-1]))
    assert ideal_decide(a) == ideal_decide(b)


# ---------------------------------------------------------------- misc

def test_make_controller_by_name():
    assert isinstance(make_controller("Minstrel", TABLE), MinstrelState)
    assert isinstance(make_controller("tara", TABLE), TaraState)
    assert isinstance(make_controller("ideal", TABLE), IdealState)
    with pytest.raises(ValueError, match="unknown algorithm"):
        make_controller("arf", TABLE)


def test_feedback_attempt_index_bounded():
    with pytest.raises(ValueError):
        TxFeedback(0, 10, False)


def test_decision_attempt_lookup():
    d = TxDecision(((5, 3), (4, 3), (2, 4)))
    assert [d.mcs_for_attempt(i) for i in range(10)] == [5] * 3 + [4] * 3 + [2] * 4
    with pytest.raises(IndexError):
        d.mcs_for_attempt(10)


def test_custom_params_are_honoured():
    s = MinstrelState(MinstrelParams(sample_period=4, retry_budgets=(2, 2, 2), retry_cap=6))
    s.selection[:] = (5, 4, 2)
    ds = [minstrel_decide(s, FixedRng(0.0)) for _ in range(4)]
    assert ds[0].stages == ((5, 2), (4, 2), (2, 2))
    assert ds[3].sampling and ds[3].total_attempts == 6


# ---------------------------------------------------------------- code spectrum oracle

def _rate_half_information_spectrum(dmax):
    """Information-bit weights c_d of the K=7 (133, 171) code by trellis enumeration."""
    g = (0o133, 0o171)

    def step(state, bit):
        reg = (bit << 6) | state
        out = sum(bin(reg & gi).count("1") & 1 for gi in g)
        return reg >> 1, out

    # paths leave state 0 with a 1, wander through non-zero states, return to 0
    spectrum = np.zeros(dmax + 1)
    frontier = {}
    s, w = step(0, 1)
    frontier[(s, w)] = (1.0, 1.0)  # (path count, summed input weight)
    while frontier:
        nxt = {}
        for (s, w), (cnt, inw) in frontier.items():
            for bit in (0, 1):
                s2, o = step(s, bit)
                w2 = w + o
                if w2 > dmax:
                    continue
                add = (cnt, inw + bit * cnt)
                if s2 == 0:
                    spectrum[w2] += add[1]
                else:
                    c0, i0 = nxt.get((s2, w2), (0.0, 0.0))
                    nxt[(s2, w2)] = (c0 + add[0], i0 + add[1])
        frontier = nxt
    return spectrum


def test_rate_half_spectrum_matches_enumeration():
    spec = _rate_half_information_spectrum(16)
    assert [spec[d] for d in (10, 12, 14, 16)] == list(_CODE_WEIGHTS[0, :4])
    assert all(spec[d] == 0 for d in range(10) if d != 0)
