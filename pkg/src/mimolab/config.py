"""Run configuration: dataclass schema, YAML loading, validation, hashing.

A single YAML file with nested sections configures every run. Every field
has a desk-scale default so an empty file is a valid config; the shipped
``configs/paper.yaml`` restores the full-scale values.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path

import yaml


class ConfigError(ValueError):
    """Bad configuration file or invalid parameter combination."""


#: Six built-in traffic mixes (UE count ratios A:B:C:D:E:F).
SCENARIO_RATIOS: dict[int, dict[str, float]] = {
    1: {"A": 1, "B": 1, "C": 1, "D": 1, "E": 1, "F": 1},
    2: {"A": 1, "B": 1, "C": 1, "D": 2, "E": 1, "F": 1},
    3: {"A": 1, "B": 1, "C": 1, "D": 1, "E": 1, "F": 2},
    4: {"A": 3, "B": 3, "C": 3, "D": 1, "E": 1, "F": 1},
    5: {"A": 1, "B": 1, "C": 2, "D": 2, "E": 1, "F": 1},
    6: {"A": 1, "B": 1, "C": 1, "D": 2, "E": 1, "F": 2},
}


@dataclass
class SystemConfig:
    antennas: int = 16
    total_ues: int = 60
    avg_concurrent_ues: float = 6.0
    #: hard cap on concurrently admitted sessions; also the state-vector slot count
    ue_slots: int = 12
    horizon_ttis: int = 2000
    bandwidth_hz: float = 20e6
    tx_power_dbm: float = 24.0
    tti_seconds: float = 1e-3
    cell_radius_m: float = 100.0

    @property
    def tx_power_w(self) -> float:
        return 10.0 ** ((self.tx_power_dbm - 30.0) / 10.0)


@dataclass
class ChannelConfig:
    carrier_hz: float = 3.5e9
    pathloss_exponent: float = 3.5
    #: AR(1) coefficient of the per-antenna fading process across TTIs
    ar1_coeff: float = 0.9
    noise_figure_db: float = 7.0
    pathloss_ref_distance_m: float = 1.0


@dataclass
class TrafficConfig:
    #: built-in scenario number (1..6); ignored when `ratios` is given
    scenario: int = 1
    ratios: dict | None = None
    #: mean session holding time in TTIs; None derives it from avg_concurrent_ues
    session_mean_ttis: float | None = None
    #: sessions start within the first fraction of the horizon
    arrival_window_frac: float = 0.9


@dataclass
class SchedulingConfig:
    pf_beta: float = 0.05
    pf_history_floor_bps: float = 1e3


@dataclass
class CeConfig:
    candidates: int = 64
    elites: int = 8
    iterations: int = 8
    smoothing: float = 0.7


@dataclass
class DdpgConfig:
    #: hidden layer widths; (512, 512, 512) at full scale
    hidden: list = field(default_factory=lambda: [64, 64])
    gamma: float = 0.9
    tau: float = 0.01
    actor_lr: float = 2e-3
    critic_lr: float = 1e-3
    batch_size: int = 128
    buffer_size: int = 20000
    noise_scale: float = 0.1
    noise_process: str = "gaussian"  # or "ou"
    dropout: float = 0.5
    #: store the bin-center (discretized) action in the replay buffer instead
    #: of the raw continuous actor output
    store_snapped_action: bool = False
    #: updates start once the buffer holds this many transitions (None = batch_size)
    warmup: int | None = None
    divergence_loss_cap: float = 1e6


@dataclass
class RewardConfig:
    alpha_gbr: float = 0.5
    #: clamp the GBR pace factor at pace_floor so rewards stay nonpositive
    pace_clamp: bool = True
    pace_floor: float = 1e-6
    deadline_clip_ttis: int = 100
    backlog_scale_bytes: float = 1e6


@dataclass
class TrainProtocolConfig:
    blocks_per_type: int = 2
    block_horizon_ttis: int = 1000
    max_epochs: int = 30
    plateau_epochs: int = 5
    plateau_tol: float = 0.01
    train_seed: int = 12345


@dataclass
class EvalConfig:
    seeds: list = field(default_factory=lambda: list(range(10)))


@dataclass
class RunConfig:
    out_dir: str = "runs"
    workers: int = 1
    verbosity: int = 0


@dataclass
class LabConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    scheduling: SchedulingConfig = field(default_factory=SchedulingConfig)
    ce: CeConfig = field(default_factory=CeConfig)
    ddpg: DdpgConfig = field(default_factory=DdpgConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    train: TrainProtocolConfig = field(default_factory=TrainProtocolConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def resolved_ratios(self) -> dict[str, float]:
        """Traffic-type mix for this run, from explicit ratios or scenario number."""
        if self.traffic.ratios is not None:
            return {str(k): float(v) for k, v in self.traffic.ratios.items()}
        return {k: float(v) for k, v in SCENARIO_RATIOS[self.traffic.scenario].items()}

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def copy(self) -> "LabConfig":
        return copy.deepcopy(self)

    def validate(self) -> "LabConfig":
        s, ch, tr = self.system, self.channel, self.traffic
        if s.antennas < 1:
            raise ConfigError("system.antennas must be >= 1")
        if s.total_ues < 1:
            raise ConfigError("system.total_ues must be >= 1 (empty system is meaningless)")
        if s.cell_radius_m <= 0:
            raise ConfigError("system.cell_radius_m must be > 0")
        if s.horizon_ttis < 1:
            raise ConfigError("system.horizon_ttis must be >= 1")
        if s.ue_slots < 1:
            raise ConfigError("system.ue_slots must be >= 1")
        if s.bandwidth_hz <= 0 or s.tti_seconds <= 0:
            raise ConfigError("bandwidth and TTI duration must be positive")
        if s.avg_concurrent_ues <= 0:
            raise ConfigError("system.avg_concurrent_ues must be > 0")
        if not 0.0 <= ch.ar1_coeff < 1.0:
            raise ConfigError("channel.ar1_coeff must be in [0, 1)")
        if ch.pathloss_exponent <= 0:
            raise ConfigError("channel.pathloss_exponent must be > 0")
        if tr.ratios is None and tr.scenario not in SCENARIO_RATIOS:
            raise ConfigError(f"traffic.scenario must be one of {sorted(SCENARIO_RATIOS)}")
        if tr.ratios is not None:
            if not tr.ratios or any(float(v) <= 0 for v in tr.ratios.values()):
                raise ConfigError("traffic.ratios must be a non-empty map of positive values")
        if not 0.0 < tr.arrival_window_frac <= 1.0:
            raise ConfigError("traffic.arrival_window_frac must be in (0, 1]")
        ce = self.ce
        if ce.candidates < 1 or ce.iterations < 1:
            raise ConfigError("ce.candidates and ce.iterations must be >= 1")
        if not 0 <= ce.elites < ce.candidates:
            raise ConfigError("ce.elites must satisfy 0 <= elites < candidates")
        if not 0.0 < ce.smoothing <= 1.0:
            raise ConfigError("ce.smoothing must be in (0, 1]")
        d = self.ddpg
        if not 0.0 < d.gamma < 1.0:
            raise ConfigError("ddpg.gamma must be in (0, 1)")
        if not 0.0 < d.tau <= 1.0:
            raise ConfigError("ddpg.tau must be in (0, 1]")
        if d.batch_size < 1:
            raise ConfigError("ddpg.batch_size must be >= 1")
        if d.buffer_size < d.batch_size:
            raise ConfigError("ddpg.buffer_size must be >= batch_size")
        if not 0.0 <= d.dropout < 1.0:
            raise ConfigError("ddpg.dropout must be in [0, 1)")
        if d.noise_process not in ("gaussian", "ou"):
            raise ConfigError("ddpg.noise_process must be 'gaussian' or 'ou'")
        if not d.hidden or any(int(h) < 1 for h in d.hidden):
            raise ConfigError("ddpg.hidden must be a non-empty list of positive widths")
        if self.reward.alpha_gbr < 0:
            raise ConfigError("reward.alpha_gbr must be >= 0")
        if self.reward.deadline_clip_ttis < 1:
            raise ConfigError("reward.deadline_clip_ttis must be >= 1")
        t = self.train
        if t.blocks_per_type < 1 or t.block_horizon_ttis < 1 or t.plateau_epochs < 1:
            raise ConfigError("train section values must be >= 1")
        if t.max_epochs < 0:
            raise ConfigError("train.max_epochs must be >= 0")
        if not self.eval.seeds:
            raise ConfigError("eval.seeds must not be empty")
        if any(int(x) < 0 for x in self.eval.seeds):
            raise ConfigError("eval.seeds must be non-negative")
        if self.run.workers < 1:
            raise ConfigError("run.workers must be >= 1")
        return self


def _coerce(value, template, path):
    """Coerce a YAML scalar to the type of the dataclass default it replaces."""
    if template is None:
        return value
    if isinstance(template, bool):
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{path}: expected a boolean, got {value!r}")
    if isinstance(template, int) and not isinstance(template, bool):
        if isinstance(value, bool):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if isinstance(template, float):
        if isinstance(value, bool):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                raise ConfigError(f"{path}: expected a number, got {value!r}") from None
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if isinstance(template, str):
        if isinstance(value, str):
            return value
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    if isinstance(template, list):
        if isinstance(value, list):
            return value
        raise ConfigError(f"{path}: expected a list, got {value!r}")
    if isinstance(template, dict):
        if isinstance(value, dict):
            return value
        raise ConfigError(f"{path}: expected a mapping, got {value!r}")
    return value


def _apply(section, data: dict, path: str):
    for key, value in data.items():
        if not hasattr(section, key):
            raise ConfigError(f"unknown config key '{path}.{key}'")
        current = getattr(section, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}.{key}: expected a mapping")
            _apply(current, value, f"{path}.{key}")
        else:
            setattr(section, key, _coerce(value, current, f"{path}.{key}"))


def config_from_dict(data: dict | None) -> LabConfig:
    cfg = LabConfig()
    if data:
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping of sections")
        _apply(cfg, data, "config")
    return cfg.validate()


def load_config(path: str | Path) -> LabConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1})" if mark is not None else ""
        raise ConfigError(f"cannot parse {p}{where}: {exc}") from exc
    return config_from_dict(data)


def dump_config(cfg: LabConfig, path: str | Path):
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))
