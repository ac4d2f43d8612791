"""Engine configuration: one JSON file, command-line overrides, env for secrets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaFilterError


class ConfigError(SchemaFilterError):
    pass


@dataclass
class PathsConfig:
    schemas_dir: str = "schemas"
    values_dir: str = "values"
    artifacts_dir: str = "artifacts"


@dataclass
class ProviderConfig:
    kind: str = "hash"  # hash | remote
    dim: int = 256
    endpoint: str = ""
    max_batch: int = 64
    timeout: float = 10.0
    model_hint: str = ""
    auth_token_env: str = "SCHEMAFILTER_API_TOKEN"
    keys_endpoint: str = ""  # optional external key-prediction endpoint

    def validate(self) -> None:
        if self.kind not in ("hash", "remote"):
            raise ConfigError(f"provider.kind must be hash or remote, got {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ConfigError("provider.kind=remote requires provider.endpoint")
        if self.dim < 8:
            raise ConfigError("provider.dim must be >= 8")
        if self.max_batch < 1 or self.timeout <= 0:
            raise ConfigError("provider.max_batch must be >= 1 and timeout > 0")


@dataclass
class RerankerConfig:
    layers: int = 3
    hidden_dim: int = 256
    attn_dim: int | None = None
    margin: float = 1.0
    learning_rate: float = 5e-5
    epochs: int = 40
    batch_size: int = 32
    negatives_per_positive: int = 7
    seed: int = 0

    def validate(self) -> None:
        if not (0 <= self.layers <= 16):
            raise ConfigError("reranker.layers must be in [0, 16]")
        if self.hidden_dim < 1 or (self.attn_dim is not None and self.attn_dim < 1):
            raise ConfigError("reranker dims must be >= 1")
        if self.margin <= 0 or self.learning_rate <= 0:
            raise ConfigError("reranker.margin and learning_rate must be > 0")
        if self.epochs < 0 or self.batch_size < 1 or self.negatives_per_positive < 1:
            raise ConfigError("reranker schedule fields out of range")


@dataclass
class SelectionConfig:
    top_k: int | None = 20
    top_percent: float | None = None
    threshold: float | None = None
    steiner: bool = True

    def validate(self) -> None:
        modes = [m for m in (self.top_k, self.top_percent, self.threshold) if m is not None]
        if len(modes) != 1:
            raise ConfigError("exactly one of selection.top_k/top_percent/threshold must be set")
        if self.top_percent is not None and not (0 < self.top_percent <= 1):
            raise ConfigError("selection.top_percent must be in (0, 1]")


@dataclass
class EngineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    reranker: RerankerConfig = field(default_factory=RerankerConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    recall_floor: float = 0.99
    jobs: int = 1

    def validate(self) -> None:
        self.provider.validate()
        self.reranker.validate()
        self.selection.validate()
        if not (0 <= self.recall_floor <= 1):
            raise ConfigError("recall_floor must be in [0, 1]")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    # -- artifact layout ---------------------------------------------------

    def artifacts_path(self, *parts: str) -> Path:
        return Path(self.paths.artifacts_dir).joinpath(*parts)

    def graph_path(self, db_id: str) -> Path:
        return self.artifacts_path("graph", f"{db_id}.fdg")

    def schema_snapshot_path(self, db_id: str) -> Path:
        return self.artifacts_path("schema", f"{db_id}.json")

    def index_path(self, db_id: str) -> Path:
        return self.artifacts_path("index", f"{db_id}.vix")

    def weights_path(self) -> Path:
        return self.artifacts_path("weights", "reranker.sfw")

    def reports_dir(self) -> Path:
        return self.artifacts_path("reports")


def _update_dataclass(obj, data: dict, path: str) -> None:
    for key, value in data.items():
        if not hasattr(obj, key):
            raise ConfigError(f"unknown config field {path}.{key}")
        current = getattr(obj, key)
        if hasattr(current, "__dataclass_fields__") and isinstance(value, dict):
            _update_dataclass(current, value, f"{path}.{key}")
        else:
            setattr(obj, key, value)


def load_config(path: str | Path | None) -> EngineConfig:
    config = EngineConfig()
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file {path} does not exist") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold one JSON object")
        _update_dataclass(config, data, "$")
    config.validate()
    return config
