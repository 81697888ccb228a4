"""
Link budget and MCS thresholds
==============================

How far can each 802.11n rate reach between two drones in free space?
"""

import numpy as np

from tarasim import RadioConfig, build_threshold_table, snr_db
from tarasim.channel import MCS_TABLE

radio = RadioConfig()  # 20 dBm, 0 dBi, 5180 MHz, thermal noise floor
table = build_threshold_table(1e-6)

# SNR at a few distances
for d in (25, 50, 100, 200, 400, 800):
    print(f"{d:4d} m  SNR {snr_db(radio, d):6.2f} dB")

# the largest distance at which each MCS still meets the target BER
distances = np.linspace(1.0, 3000.0, 30000)
snr = np.array([snr_db(radio, d) for d in distances])
print()
for m, thr in zip(MCS_TABLE, table.thresholds):
    reach = distances[snr >= thr].max()
    print(f"MCS{m.index} {m.modulation_name:5s} {str(m.coding_rate):3s} "
          f"{m.phy_rate_bps / 1e6:5.1f} Mb/s  needs {thr:5.2f} dB  reach {reach:6.1f} m")
