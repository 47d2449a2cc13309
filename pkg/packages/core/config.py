from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .errors import ConfigError


class ThreatMode(str, Enum):
    EVENTS_ONLY = "events-only"
    ADVERSARIAL = "adversarial"


class SavingsAccounting(str, Enum):
    ORIGINAL = "original"
    NET = "net"


@dataclass(frozen=True)
class Settings:
    tau: float = 0.5
    mitigation_budget: int = 10_000
    search_expansions: int = 200_000
    threat_mode: ThreatMode = ThreatMode.EVENTS_ONLY
    savings_accounting: SavingsAccounting = SavingsAccounting.ORIGINAL
    allow_deletes: bool = False
    wind_probability: float = 0.0
    wind_window: int | None = None
    trials: int = 100
    seed: int = 0
    cycles: int = 1
    database_url: str | None = None

    def validate(self) -> "Settings":
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must lie in [0, 1], got {self.tau}")
        if self.mitigation_budget < 1 or self.search_expansions < 1:
            raise ConfigError("budgets must be at least 1")
        if not 0.0 <= self.wind_probability <= 1.0:
            raise ConfigError(f"wind probability must lie in [0, 1], got {self.wind_probability}")
        if self.wind_window is not None and self.wind_window < 0:
            raise ConfigError("wind window must be nonnegative")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.cycles < 1:
            raise ConfigError("cycles must be at least 1")
        return self

    def with_overrides(self, **changes: object) -> "Settings":
        """Return a validated copy with the non-None overrides applied."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None}).validate()


settings = Settings()
