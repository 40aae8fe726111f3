"""Engine configuration: one TOML file, strict validation, environment
overrides of the form RESPCAST_<SECTION>__<KEY>.
"""

from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_PREFIX = "RESPCAST_"


class ConfigError(Exception):
    pass


@dataclass
class StorageConfig:
    posts: str = "data/posts.jsonl"
    articles: str = "data/articles.jsonl"
    triples: str = "data/triples.jsonl"
    dense_index: str = "data/dense_index.jsonl"
    news_index: str = "data/news_index.jsonl"
    kg_index: str = "data/kg_index.jsonl"
    ideology_dir: str = "data/ideology"
    jobs: str = "data/jobs.jsonl"
    reports_dir: str = "data/reports"


@dataclass
class GatewaySection:
    kind: str = "offline"  # offline | mock | http
    endpoint: str = ""
    model: str = ""
    api_key_env: str = ""
    dimension: int = 64
    rate_per_second: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("offline", "mock", "http"):
            raise ConfigError(f"unknown gateway kind {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise ConfigError("http gateway requires an endpoint")


@dataclass
class RetrievalSection:
    k_p: int = 20
    k_delta: int = 20
    k_n: int = 5
    k_g: int = 5
    k_c: int = 5


@dataclass
class CommunitySection:
    reduced_dim: int = 8
    ideology_scale: float = 1.0
    min_cluster_size: int = 5
    min_samples: int = 5
    lambda_mmr: float = 0.7
    reduction_enabled: bool = True
    seed: int = 0


@dataclass
class GenerationSection:
    m_total: int = 30
    mode: str = "auto"
    temperature: float = 0.9
    include_outlier_sides: bool = True
    news_mode: str = "sparse"

    def __post_init__(self) -> None:
        if self.mode not in ("auto", "sequential", "parallel"):
            raise ConfigError(f"unknown generation mode {self.mode!r}")
        if self.news_mode not in ("sparse", "dense"):
            raise ConfigError(f"unknown news mode {self.news_mode!r}")


@dataclass
class EvaluationSection:
    membership_rule: str = "max_radius"

    def __post_init__(self) -> None:
        if self.membership_rule not in ("max_radius", "p95"):
            raise ConfigError(f"unknown membership rule {self.membership_rule!r}")


@dataclass
class ServiceSection:
    host: str = "127.0.0.1"
    port: int = 8000
    cors_origins: list[str] = field(default_factory=lambda: ["http://localhost:5173"])


@dataclass
class EngineConfig:
    storage: StorageConfig = field(default_factory=StorageConfig)
    embedding_gateway: GatewaySection = field(default_factory=GatewaySection)
    chat_gateway: GatewaySection = field(default_factory=GatewaySection)
    retrieval: RetrievalSection = field(default_factory=RetrievalSection)
    community: CommunitySection = field(default_factory=CommunitySection)
    generation: GenerationSection = field(default_factory=GenerationSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    service: ServiceSection = field(default_factory=ServiceSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def redacted_dict(self) -> dict:
        out = self.to_dict()
        for key in ("embedding_gateway", "chat_gateway"):
            out[key]["api_key_env"] = "***" if out[key]["api_key_env"] else ""
        return out


_SECTION_TYPES = {
    "storage": StorageConfig,
    "embedding_gateway": GatewaySection,
    "chat_gateway": GatewaySection,
    "retrieval": RetrievalSection,
    "community": CommunitySection,
    "generation": GenerationSection,
    "evaluation": EvaluationSection,
    "service": ServiceSection,
}


def _coerce(value, target_type, context: str):
    if target_type is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if target_type is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{context}: expected a boolean, got {value!r}")
    if target_type is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        raise ConfigError(f"{context}: expected an integer, got {value!r}")
    if target_type is str and not isinstance(value, str):
        raise ConfigError(f"{context}: expected a string, got {value!r}")
    return value


def _build_section(cls, data: dict, section: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, value in data.items():
        ftype = known[name].type
        base = {"str": str, "int": int, "float": float, "bool": bool}.get(str(ftype), None)
        if base is not None:
            value = _coerce(value, base, f"[{section}] {name}")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{section}] section: {exc}") from exc


def _parse_env_value(raw: str, current):
    if isinstance(current, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"cannot parse boolean override {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, list):
        return [item.strip() for item in raw.split(",") if item.strip()]
    return raw


def apply_env_overrides(config: EngineConfig, environ: dict | None = None) -> EngineConfig:
    environ = dict(os.environ if environ is None else environ)
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX) or "__" not in key:
            continue
        section_name, field_name = key[len(ENV_PREFIX) :].lower().split("__", 1)
        if section_name not in _SECTION_TYPES:
            raise ConfigError(f"environment override targets unknown section {section_name!r}")
        section = getattr(config, section_name)
        if not hasattr(section, field_name):
            raise ConfigError(
                f"environment override targets unknown key {field_name!r} in {section_name!r}"
            )
        current = getattr(section, field_name)
        try:
            setattr(section, field_name, _parse_env_value(raw, current))
        except ValueError as exc:
            raise ConfigError(f"bad override {key}={raw!r}: {exc}") from exc
    return config


def load_config(path: str | None = None, environ: dict | None = None) -> EngineConfig:
    """Config from TOML plus environment overrides; no file → defaults."""
    data: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config parse error in {path}: {exc}") from exc
    unknown = set(data) - set(_SECTION_TYPES)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    sections = {
        name: _build_section(cls, data.get(name, {}), name)
        for name, cls in _SECTION_TYPES.items()
    }
    return apply_env_overrides(EngineConfig(**sections), environ)
