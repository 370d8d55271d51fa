"""Scenario configuration, loaded from JSON."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .faults import AttackPolicy, FaultStrategy


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce a run; times in milliseconds unless suffixed ``_s``."""

    n: int = 4
    f_actual: int = 0
    fault_strategy: FaultStrategy = FaultStrategy.NONE
    attack_policy: AttackPolicy = AttackPolicy.S1
    protocol: str = "active"
    faulty_ids: list | None = None

    delta: float = 30.0
    delay_mean: float = 10.0
    delay_jitter: float = 5.0
    gst: float = 0.0
    surge_prob: float = 0.0
    surge_factor: float = 20.0

    timeout_lo: float = 800.0
    epsilon: float = 400.0
    rotation_s: float | None = None
    policy_slack: float = 60.0
    max_campaign_retries: int = 3
    crash_leaders: bool = False

    batch_size: int = 8
    batch_wait: float | None = None
    clients: int = 8
    client_timeout: float | None = None
    think_ms: float = 0.0
    faulty_clients: int = 0

    gamma: float = 2.0 ** 30
    puzzle_mode: str = "modeled"
    puzzle_bits: int = 4
    hash_rate: float = 1e7
    refresh_threshold: int = 8
    c_delta: float = 1.0

    proc_ms_per_msg: float = 0.0
    proc_ms_per_tx: float = 0.0

    passive_timeout: float = 1000.0
    passive_rotation_s: float | None = None

    duration_s: float = 30.0
    seed: int = 1

    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.fault_strategy = FaultStrategy(self.fault_strategy)
        self.attack_policy = AttackPolicy(self.attack_policy)
        self.validate()

    @property
    def f(self) -> int:
        return (self.n - 1) // 3

    @property
    def timeout_hi(self) -> float:
        return self.timeout_lo + self.epsilon

    @property
    def effective_client_timeout(self) -> float:
        return self.client_timeout if self.client_timeout is not None else 4 * self.timeout_hi

    @property
    def effective_batch_wait(self) -> float:
        return self.batch_wait if self.batch_wait is not None else self.delay_mean

    def validate(self) -> None:
        if self.n < 4 or (self.n - 1) % 3:
            raise ConfigError(f"n must be 3f+1 with f >= 1, got {self.n}")
        if not 0 <= self.f_actual <= self.f:
            raise ConfigError(f"f_actual must lie in [0, {self.f}], got {self.f_actual}")
        if self.fault_strategy is FaultStrategy.NONE and self.f_actual:
            raise ConfigError("f_actual > 0 needs a fault_strategy")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.protocol not in ("active", "passive"):
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.puzzle_mode not in ("real", "modeled"):
            raise ConfigError(f"unknown puzzle mode {self.puzzle_mode!r}")
        if self.duration_s <= 0 or self.clients < 0 or self.batch_size < 1:
            raise ConfigError("duration, clients and batch_size must be positive")
        if self.faulty_ids is not None:
            ids = list(self.faulty_ids)
            if len(ids) != self.f_actual or len(set(ids)) != len(ids) or not all(0 <= i < self.n for i in ids):
                raise ConfigError("faulty_ids must list f_actual distinct server ids")

    def resolved_faulty_ids(self) -> list[int]:
        if self.faulty_ids is not None:
            return sorted(self.faulty_ids)
        return list(range(self.n - self.f_actual, self.n))

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["fault_strategy"] = self.fault_strategy.value
        out["attack_policy"] = self.attack_policy.value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)
