"""Run configuration as a flat ``key = value`` text file.

Lines starting with ``#`` are comments. Unknown keys and malformed values
raise :class:`ConfigError` naming the offending field. Defaults reproduce
the reference setup: 802.11n at 20 MHz, Friis loss, NIST error model,
20 dBm, 0 dBi antennas, target BER 1e-6, tau 50 ms, delta 30 s.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from .channel import RadioConfig, thermal_noise_dbm
from .kinematics import ScenarioConfig
from .mac import MacTimingConfig
from .rate_control import algorithm_id
from .simulator import SimulationConfig

_SECTION = "run"


class ConfigError(ValueError):
    pass


def parse_seeds(text):
    """``"1..100"`` (inclusive), ``"3"`` or ``"1,4,9"`` -> list of ints."""
    text = str(text).strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ValueError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(s) for s in text.split(",") if s.strip()]


def format_seeds(seeds):
    seeds = list(seeds)
    if len(seeds) > 1 and seeds == list(range(seeds[0], seeds[-1] + 1)):
        return f"{seeds[0]}..{seeds[-1]}"
    return ",".join(str(s) for s in seeds)


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    # scenario
    arena_side: float = 1000.0
    run_duration: float = 300.0
    delta: float = 30.0
    fen_speed: float = 8.0
    altitude: float = 20.0
    bkh_x: float = 0.0
    bkh_y: float = 500.0
    # radio
    tx_power_dbm: float = 20.0
    tx_gain_dbi: float = 0.0
    rx_gain_dbi: float = 0.0
    noise_power_dbm: float = thermal_noise_dbm(20e6)
    bandwidth_hz: float = 20e6
    access_frequency_hz: float = 5.18e9
    relay_frequency_hz: float = 5.24e9
    # MAC
    slot_us: float = 9.0
    sifs_us: float = 16.0
    difs_us: float = 34.0
    phy_preamble_us: float = 40.0
    ack_duration_us: float = 44.0
    mean_backoff_slots: float = 7.5
    payload_bytes: int = 1400
    retry_cap: int = 10
    queue_capacity: int = 1000
    # rate control
    algorithms: list = field(default_factory=lambda: ["minstrel", "tara", "ideal"])
    tau_ms: float = 50.0
    target_ber: float = 1e-6
    tara_prediction: bool = True
    # batch
    seeds: list = field(default_factory=lambda: list(range(1, 101)))
    out_dir: str = "out"
    jobs: int = 1

    def validate(self):
        try:
            for a in self.algorithms:
                algorithm_id(a)
        except ValueError as e:
            raise ConfigError(f"algorithms: {e}") from None
        if not self.seeds:
            raise ConfigError("seeds: empty seed list")
        if self.jobs < 1:
            raise ConfigError("jobs: must be >= 1")
        for name, build in (("scenario", self.scenario_config), ("simulation", self.simulation_config)):
            try:
                build()
            except ValueError as e:
                raise ConfigError(f"{name}: {e}") from None
        return self

    def scenario_config(self, seed=None):
        return ScenarioConfig(
            arena_side=self.arena_side,
            run_duration=self.run_duration,
            delta=self.delta,
            fen_speed=self.fen_speed,
            bkh_position=(self.bkh_x, self.bkh_y, self.altitude),
            altitude=self.altitude,
            seed=self.seeds[0] if seed is None else seed,
        )

    def radio(self, link):
        freq = self.access_frequency_hz if link == "access" else self.relay_frequency_hz
        return RadioConfig(self.tx_power_dbm, self.tx_gain_dbi, self.rx_gain_dbi,
                           self.noise_power_dbm, freq, self.bandwidth_hz)

    def timing(self):
        return MacTimingConfig(self.slot_us, self.sifs_us, self.difs_us, self.phy_preamble_us,
                               self.ack_duration_us, self.mean_backoff_slots, self.payload_bytes,
                               self.retry_cap)

    def simulation_config(self):
        return SimulationConfig(
            timing=self.timing(),
            radios={"access": self.radio("access"), "relay": self.radio("relay")},
            tau=self.tau_ms / 1000.0,
            target_ber=self.target_ber,
            queue_capacity=self.queue_capacity,
            tara_prediction=self.tara_prediction,
        )

    # ---- text form

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "algorithms":
                v = ",".join(v)
            elif f.name == "seeds":
                v = format_seeds(v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, **overrides):
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def _convert(f, raw):
    if f.name == "algorithms":
        return [a.strip().lower() for a in raw.split(",") if a.strip()]
    if f.name == "seeds":
        return parse_seeds(raw)
    default = f.default
    if isinstance(default, bool):
        return _parse_bool(raw)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


def parse_config(text, base=None):
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{_SECTION}]\n{text}")
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    known = {f.name: f for f in fields(RunConfig)}
    values = {}
    for key, raw in cp[_SECTION].items():
        if key not in known:
            raise ConfigError(f"{key}: unknown field")
        try:
            values[key] = _convert(known[key], raw)
        except ValueError as e:
            raise ConfigError(f"{key}: {e}") from None
    cfg = replace(base or RunConfig(), **values)
    return cfg.validate()


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as e:
        raise ConfigError(f"config file: {e}") from None
