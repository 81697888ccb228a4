"""Link budget and OFDM error model for 802.11n, 1 spatial stream, 20 MHz.

SNR follows the Friis free-space law. Bit errors use the NIST OFDM model:
closed-form uncoded BER per constellation, then a union bound over the
distance spectrum of the K=7 convolutional code at each puncturing rate.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_HZ = -174.0
DEFAULT_NOISE_FIGURE_DB = 7.0

BPSK, QPSK, QAM16, QAM64 = 0, 1, 2, 3
MODULATION_NAMES = ("BPSK", "QPSK", "QAM16", "QAM64")
BITS_PER_SUBCARRIER = (1, 2, 4, 6)

DATA_SUBCARRIERS = 52
SYMBOL_DURATION_S = 4e-6  # long guard interval

SNR_SEARCH_LO_DB = -10.0
SNR_SEARCH_HI_DB = 60.0
SNR_RESOLUTION_DB = 0.01


def thermal_noise_dbm(bandwidth_hz, noise_figure_db=DEFAULT_NOISE_FIGURE_DB):
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


@dataclass(frozen=True)
class RadioConfig:
    tx_power_dbm: float = 20.0
    tx_gain_dbi: float = 0.0
    rx_gain_dbi: float = 0.0
    noise_power_dbm: float = thermal_noise_dbm(20e6)
    carrier_frequency_hz: float = 5.18e9
    bandwidth_hz: float = 20e6

    def __post_init__(self):
        if not self.carrier_frequency_hz > 0:
            raise ValueError("carrier_frequency_hz must be > 0")
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be > 0")
        if not self.noise_power_dbm < self.tx_power_dbm:
            raise ValueError("noise_power_dbm must be below tx_power_dbm")

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_frequency_hz

    @property
    def snr_offset_db(self):
        """Everything in the link budget except path loss."""
        return self.tx_power_dbm + self.tx_gain_dbi + self.rx_gain_dbi - self.noise_power_dbm


@dataclass(frozen=True)
class McsEntry:
    index: int
    modulation: int
    coding_rate: Fraction

    @property
    def modulation_name(self):
        return MODULATION_NAMES[self.modulation]

    @property
    def phy_rate_bps(self):
        bits = BITS_PER_SUBCARRIER[self.modulation]
        return float(DATA_SUBCARRIERS * bits * self.coding_rate / Fraction(4, 1_000_000))


MCS_TABLE = (
    McsEntry(0, BPSK, Fraction(1, 2)),
    McsEntry(1, QPSK, Fraction(1, 2)),
    McsEntry(2, QPSK, Fraction(3, 4)),
    McsEntry(3, QAM16, Fraction(1, 2)),
    McsEntry(4, QAM16, Fraction(3, 4)),
    McsEntry(5, QAM64, Fraction(2, 3)),
    McsEntry(6, QAM64, Fraction(3, 4)),
    McsEntry(7, QAM64, Fraction(5, 6)),
)
N_MCS = len(MCS_TABLE)

# compact arrays for compiled code
MCS_MODULATION = np.array([m.modulation for m in MCS_TABLE], dtype=np.int64)
MCS_CODE_ID = np.array(
    [{Fraction(1, 2): 0, Fraction(2, 3): 1, Fraction(3, 4): 2, Fraction(5, 6): 3}[m.coding_rate] for m in MCS_TABLE],
    dtype=np.int64,
)
MCS_PHY_RATE = np.array([m.phy_rate_bps for m in MCS_TABLE], dtype=np.float64)

# Information-bit weight spectrum of the K=7 (133, 171) code and its
# punctured variants: (first free distance, weights for d, d+step, ...).
# The union-bound sum is scaled by 1/(2*b) with b the puncturing period.
_CODE_DFREE = np.array([10, 6, 5, 4], dtype=np.int64)
_CODE_STEP = np.array([2, 1, 1, 1], dtype=np.int64)
_CODE_SCALE = np.array([0.5, 1.0 / 4.0, 1.0 / 6.0, 1.0 / 10.0])
_CODE_WEIGHTS = np.array([
    [36.0, 211.0, 1404.0, 11633.0, 77433.0, 502690.0, 3322763.0, 21292910.0, 134365911.0, 0.0],
    [3.0, 70.0, 285.0, 1276.0, 6160.0, 27128.0, 117019.0, 498860.0, 2103891.0, 8784123.0],
    [42.0, 201.0, 1492.0, 10469.0, 62935.0, 379644.0, 2253373.0, 13073811.0, 75152755.0, 428005675.0],
    [92.0, 528.0, 8694.0, 79453.0, 792114.0, 7375573.0, 67884974.0, 610875423.0, 5427275376.0, 47664215639.0],
])


def mcs(index):
    if not 0 <= index < N_MCS:
        raise ValueError(f"MCS index out of range: {index}")
    return MCS_TABLE[index]


def _modulation_id(modulation):
    if isinstance(modulation, str):
        return MODULATION_NAMES.index(modulation.upper().replace("-", ""))
    return int(modulation)


@njit(cache=True)
def fspl_db_raw(dist, wavelength):
    return 20.0 * math.log10(4.0 * math.pi * dist / wavelength)


def fspl_db(dist, wavelength):
    if not dist > 0:
        raise ValueError("non-positive distance")
    if not wavelength > 0:
        raise ValueError("non-positive wavelength")
    return fspl_db_raw(float(dist), float(wavelength))


def snr_db(radio, dist):
    return radio.snr_offset_db - fspl_db(dist, radio.wavelength)


@njit(cache=True)
def uncoded_ber_raw(modulation, gamma):
    if modulation == 0:
        return 0.5 * math.erfc(math.sqrt(gamma))
    if modulation == 1:
        return 0.5 * math.erfc(math.sqrt(gamma / 2.0))
    if modulation == 2:
        return 0.375 * math.erfc(math.sqrt(gamma / 10.0))
    return 7.0 / 24.0 * math.erfc(math.sqrt(gamma / 42.0))


@njit(cache=True)
def coded_ber_raw(mcs_index, gamma):
    p = uncoded_ber_raw(MCS_MODULATION[mcs_index], gamma)
    code = MCS_CODE_ID[mcs_index]
    bhatt = math.sqrt(4.0 * p * (1.0 - p))
    d = _CODE_DFREE[code]
    step = _CODE_STEP[code]
    total = 0.0
    for k in range(_CODE_WEIGHTS.shape[1]):
        total += _CODE_WEIGHTS[code, k] * bhatt ** (d + k * step)
    pe = _CODE_SCALE[code] * total
    return min(max(pe, 0.0), 1.0)


@njit(cache=True)
def success_prob_raw(mcs_index, snr_db_value, payload_bits):
    pe = coded_ber_raw(mcs_index, 10.0 ** (snr_db_value / 10.0))
    if pe >= 1.0:
        return 0.0
    return math.exp(payload_bits * math.log1p(-pe))


def uncoded_ber(modulation, snr_linear):
    if snr_linear < 0:
        raise ValueError("snr_linear must be >= 0")
    return uncoded_ber_raw(_modulation_id(modulation), float(snr_linear))


def _mcs_index(m):
    return m.index if isinstance(m, McsEntry) else int(m)


def coded_ber(m, snr_linear):
    if snr_linear < 0:
        raise ValueError("snr_linear must be >= 0")
    return coded_ber_raw(_mcs_index(m), float(snr_linear))


def frame_success_prob(m, snr_db_value, payload_bits):
    if payload_bits <= 0:
        raise ValueError("payload_bits must be > 0")
    return success_prob_raw(_mcs_index(m), float(snr_db_value), float(payload_bits))


@dataclass(frozen=True)
class ThresholdTable:
    target_ber: float
    thresholds: tuple  # dB, indexed by MCS

    def as_array(self):
        return np.array(self.thresholds, dtype=np.float64)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mcs", "modulation", "coding_rate", "phy_rate_bps", "snr_threshold_db"])
        for entry, thr in zip(MCS_TABLE, self.thresholds):
            w.writerow([entry.index, entry.modulation_name, str(entry.coding_rate),
                        f"{entry.phy_rate_bps:.9g}", f"{thr:.9g}"])
        return buf.getvalue()


def _threshold_for(mcs_index, target_ber, lo, hi):
    ber = lambda s: coded_ber_raw(mcs_index, 10.0 ** (s / 10.0))
    if ber(hi) > target_ber:
        raise ValueError("threshold out of range")
    if ber(lo) <= target_ber:
        return lo
    # invariant: ber(lo) > target >= ber(hi)
    while hi - lo > SNR_RESOLUTION_DB / 2:
        mid = 0.5 * (lo + hi)
        if ber(mid) <= target_ber:
            hi = mid
        else:
            lo = mid
    return hi


def build_threshold_table(target_ber, radio=None, search_range=(SNR_SEARCH_LO_DB, SNR_SEARCH_HI_DB)):
    """Least SNR (dB) per MCS whose coded BER meets ``target_ber``.

    ``radio`` is accepted for interface symmetry; thresholds depend only
    on the error model, not on the link budget.
    """
    if not 0 < target_ber < 1:
        raise ValueError("target_ber must lie in (0, 1)")
    lo, hi = search_range
    return ThresholdTable(float(target_ber), tuple(_threshold_for(i, target_ber, lo, hi) for i in range(N_MCS)))


@njit(cache=True)
def mcs_for_snr_raw(thresholds, snr):
    best = 0
    for i in range(thresholds.shape[0]):
        if snr >= thresholds[i]:
            best = i
    return best


def mcs_for_snr(table, snr_db_value):
    return int(mcs_for_snr_raw(table.as_array(), float(snr_db_value)))


def snr_distance_csv(radio, distances):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["distance_m", "snr_db"])
    for d in distances:
        w.writerow([f"{d:.9g}", f"{snr_db(radio, d):.9g}"])
    return buf.getvalue()
