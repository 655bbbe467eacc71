"""Service configuration from file or environment.

Environment variables use the GROUNDCOREF_ prefix (GROUNDCOREF_PORT,
GROUNDCOREF_DATA_DIR, GROUNDCOREF_TEST_POOL, GROUNDCOREF_GATING_THRESHOLD).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path


@dataclass
class ServiceConfig:
    data_dir: Path = Path("./groundcoref-data")
    port: int = 8765
    gating_threshold: float = 0.9  # strict: score must exceed this to stay active
    time_limit_seconds: float = 600.0
    test_cadence: int = 5  # every fifth task is a secret test
    doubly_target: int = 30  # documents per source annotated twice
    min_approval_rate: float = 0.9
    require_native_english: bool = True
    test_pool_path: Path | None = None  # corpus file with gold documents + records
    markable_section_kinds: tuple[str, ...] = ("summary", "context", "question", "answer")

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls._from_mapping(raw)

    @classmethod
    def from_env(cls, env: dict[str, str] | None = None) -> "ServiceConfig":
        env = os.environ if env is None else env
        raw = {}
        for f in fields(cls):
            key = "GROUNDCOREF_" + f.name.upper()
            if key in env:
                raw[f.name] = env[key]
        if "GROUNDCOREF_TEST_POOL" in env:
            raw["test_pool_path"] = env["GROUNDCOREF_TEST_POOL"]
        return cls._from_mapping(raw)

    @classmethod
    def _from_mapping(cls, raw: dict) -> "ServiceConfig":
        kwargs: dict = {}
        for f in fields(cls):
            if f.name not in raw:
                continue
            value = raw[f.name]
            if f.name in ("data_dir", "test_pool_path"):
                value = Path(value) if value is not None else None
            elif f.name == "port" or f.name in ("test_cadence", "doubly_target"):
                value = int(value)
            elif f.name in ("gating_threshold", "time_limit_seconds", "min_approval_rate"):
                value = float(value)
            elif f.name == "require_native_english":
                value = value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
            elif f.name == "markable_section_kinds":
                value = tuple(value) if not isinstance(value, str) else tuple(value.split(","))
            kwargs[f.name] = value
        return cls(**kwargs)
