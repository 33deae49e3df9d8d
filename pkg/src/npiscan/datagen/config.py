"""Tunable knobs for unstructured corpus generation."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass


class ConfigError(ValueError):
    pass


@dataclass
class GeneratorConfig:
    num_samples: int
    bg_word_count_min: int = 10
    bg_word_count_max: int = 40
    prob_of_npi: float = 0.25
    prob_two_npi_together: float = 0.2
    prob_json: float = 0.05
    prob_structured: float = 0.25
    seed: int = 0

    @property
    def prob_sentence(self) -> float:
        # Derived, never stored.
        return 1.0 - self.prob_json - self.prob_structured

    def validate(self) -> None:
        if self.num_samples < 0:
            raise ConfigError("num_samples must be >= 0")
        if self.bg_word_count_min < 0 or self.bg_word_count_min > self.bg_word_count_max:
            raise ConfigError("need 0 <= bg_word_count_min <= bg_word_count_max")
        for name in ("prob_of_npi", "prob_two_npi_together", "prob_json", "prob_structured"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        if self.prob_json + self.prob_structured > 1.0 + 1e-12:
            raise ConfigError("prob_json + prob_structured must be <= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "GeneratorConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "num_samples" not in raw:
            raise ConfigError("config requires num_samples")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    @classmethod
    def from_json_file(cls, path: str) -> "GeneratorConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))
