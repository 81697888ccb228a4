"""Trajectory-aware rate adaptation for a FEN -> FGW -> BKH flying relay."""

from .analysis import ccdf, ccdf_percentile, gains, mean_ci99
from .channel import (
    MCS_TABLE, RadioConfig, ThresholdTable, build_threshold_table, coded_ber, fspl_db,
    frame_success_prob, mcs_for_snr, snr_db, uncoded_ber,
)
from .kinematics import (
    Scenario, ScenarioConfig, Segment, Trajectory, derive_fgw_trajectory, distance,
    generate_fen_trajectory, generate_scenario, position_at, static_scenario,
)
from .mac import MacTimingConfig, frame_airtime
from .simulator import RunMetrics, SimulationConfig, attempt_frame, run_batch, run_simulation

__version__ = "0.1.0"
