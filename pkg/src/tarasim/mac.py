"""802.11 per-attempt channel time."""

from dataclasses import dataclass

import numpy as np

from .channel import MCS_TABLE, McsEntry


@dataclass(frozen=True)
class MacTimingConfig:
    slot_us: float = 9.0
    sifs_us: float = 16.0
    difs_us: float = 34.0
    phy_preamble_us: float = 40.0
    ack_duration_us: float = 44.0  # 14-byte ACK at the 6 Mb/s basic rate
    mean_backoff_slots: float = 7.5
    payload_bytes: int = 1400
    retry_cap: int = 10

    def __post_init__(self):
        for name in ("slot_us", "sifs_us", "difs_us", "phy_preamble_us", "ack_duration_us"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.mean_backoff_slots < 0:
            raise ValueError("mean_backoff_slots must be >= 0")
        if self.payload_bytes <= 0:
            raise ValueError("payload_bytes must be > 0")
        if self.retry_cap < 1:
            raise ValueError("retry_cap must be >= 1")

    @property
    def payload_bits(self):
        return 8 * self.payload_bytes

    @property
    def overhead_s(self):
        us = (self.difs_us + self.mean_backoff_slots * self.slot_us + self.phy_preamble_us
              + self.sifs_us + self.ack_duration_us)
        return us * 1e-6


def frame_airtime(mcs, timing=MacTimingConfig()):
    """Seconds of channel time consumed by one transmission attempt."""
    if not isinstance(mcs, McsEntry):
        mcs = MCS_TABLE[int(mcs)]
    return timing.overhead_s + timing.payload_bits / mcs.phy_rate_bps


def airtime_table(timing=MacTimingConfig()):
    return np.array([frame_airtime(m, timing) for m in MCS_TABLE])


def effective_rates(timing=MacTimingConfig()):
    """Payload bits per second of channel time at each MCS, loss-free."""
    return timing.payload_bits / airtime_table(timing)
