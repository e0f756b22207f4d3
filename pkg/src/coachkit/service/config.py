"""Service configuration: JSON file with environment-variable overrides.

Every field can be overridden by COACHKIT_<FIELD> (upper-case); list fields
take comma-separated values.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from coachkit.recommend import Policy


class ConfigError(Exception):
    pass


_LOCAL_HOSTS = ("127.0.0.1", "localhost", "::1")

ENV_PREFIX = "COACHKIT_"


@dataclass
class ServiceConfig:
    corpus_path: str
    questions_path: str
    model_path: str
    ledger_path: str
    vocab_path: str | None = None  # required for transformer artifacts
    report_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8080
    auth_tokens: list[str] = field(default_factory=list)
    per_agent_cap: int = 5
    batch_size: int = 6
    positive_fraction: float = 0.5
    window_days: int = 7
    feedback_to_corpus: bool = False

    def policy(self, whitelist: frozenset[str]) -> Policy:
        return Policy(
            whitelist=whitelist,
            per_agent_cap=self.per_agent_cap,
            batch_size=self.batch_size,
            positive_fraction=self.positive_fraction,
            window_days=self.window_days,
        )

    def validate(self) -> None:
        for name in ("corpus_path", "questions_path", "model_path"):
            path = getattr(self, name)
            if not Path(path).exists():
                raise ConfigError(f"{name} does not exist: {path}")
        ledger_parent = Path(self.ledger_path).parent
        if not ledger_parent.exists():
            raise ConfigError(f"ledger directory does not exist: {ledger_parent}")
        if self.host not in _LOCAL_HOSTS and not self.auth_tokens:
            raise ConfigError("serving on a non-localhost address requires auth tokens")


_INT_FIELDS = {"port", "per_agent_cap", "batch_size", "window_days"}
_FLOAT_FIELDS = {"positive_fraction"}
_BOOL_FIELDS = {"feedback_to_corpus"}
_LIST_FIELDS = {"auth_tokens"}


def load_config(path: str | Path) -> ServiceConfig:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in list(doc):
        if key not in ServiceConfig.__dataclass_fields__:
            raise ConfigError(f"unknown config field {key!r}")
    for name in ServiceConfig.__dataclass_fields__:
        env = os.environ.get(ENV_PREFIX + name.upper())
        if env is None:
            continue
        if name in _INT_FIELDS:
            doc[name] = int(env)
        elif name in _FLOAT_FIELDS:
            doc[name] = float(env)
        elif name in _BOOL_FIELDS:
            doc[name] = env.lower() in ("1", "true", "yes")
        elif name in _LIST_FIELDS:
            doc[name] = [t for t in env.split(",") if t]
        else:
            doc[name] = env
    try:
        return ServiceConfig(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad service config: {exc}") from exc
