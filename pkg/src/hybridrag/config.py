"""Pipeline configuration with flags > env > file > defaults precedence."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass


@dataclass
class Config:
    chunk_char_budget: int = 600
    sentence_char_cap: int = 200
    top_k_chunks: int = 10
    table_budget_reasoning: int = 4000
    table_budget_calc: int = 6000
    kg_char_cap: int = 1000
    n_icl_samples: int = 5
    calc_samples: int = 5
    worker_count: int = 4
    kg_mode: str = "rule-based"  # rule-based | function-calling
    calc_always: bool = False
    table_rank: bool = True
    attribute_method: str = "icl"  # icl | linear | fixed
    fixed_domain: str = "open"
    fixed_dynamism: str = "static"
    offline: bool = True
    model_endpoint: str | None = None
    kg_endpoint: str | None = None

    def validate(self) -> None:
        positive = (
            "chunk_char_budget", "sentence_char_cap", "top_k_chunks",
            "table_budget_reasoning", "table_budget_calc", "kg_char_cap",
            "n_icl_samples", "calc_samples", "worker_count",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_icl_samples % 2 == 0:
            raise ValueError("n_icl_samples must be odd")
        if self.kg_mode not in ("rule-based", "function-calling"):
            raise ValueError(f"unknown kg_mode {self.kg_mode!r}")
        if self.attribute_method not in ("icl", "linear", "fixed"):
            raise ValueError(f"unknown attribute_method {self.attribute_method!r}")

    def digest(self) -> str:
        canonical = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def load(
        cls,
        path: str | None = None,
        overrides: dict | None = None,
        env: dict | None = None,
    ) -> "Config":
        """Build a config from a JSON file, the environment, and explicit
        overrides (highest precedence)."""
        values: dict = {}
        if path:
            with open(path, encoding="utf-8") as fh:
                file_values = json.load(fh)
            unknown = set(file_values) - {f.name for f in dataclasses.fields(cls)}
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            values.update(file_values)
        env = os.environ if env is None else env
        if env.get("MODEL_ENDPOINT"):
            values["model_endpoint"] = env["MODEL_ENDPOINT"]
        if env.get("KG_ENDPOINT"):
            values["kg_endpoint"] = env["KG_ENDPOINT"]
        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = value
        config = cls(**values)
        config.validate()
        return config
