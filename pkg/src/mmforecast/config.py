"""Pipeline run configuration: TOML file + flag overrides, resolved-file echo.

The resolved config written beside run outputs is itself a valid config file;
re-running from it reproduces the outputs byte-identically.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from datetime import date, time
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .features import AlignmentConfig
from .models import MODEL_VARIANTS, TrainConfig
from .newscorpus import MATCH_FIELDS

DEFAULT_TRAIN_END = date(2024, 3, 27)
DEFAULT_TEST_START = date(2024, 3, 28)


class ConfigError(ValueError):
    """Invalid or inconsistent pipeline configuration."""


@dataclass(frozen=True)
class PipelineConfig:
    candles_dir: str
    out_dir: str = "out"
    news_file: str | None = None
    registry_file: str | None = None
    supplement_file: str | None = None
    embedding_file: str | None = None
    retained_ids_file: str | None = None
    tickers: tuple[str, ...] = ()  # empty = every <TICKER>.csv in candles_dir
    modality: str = "single"
    aggregation: str = "mean"
    model: str = "lstm"
    train_end: date = DEFAULT_TRAIN_END
    test_start: date = DEFAULT_TEST_START
    seed: int = 0
    jobs: int = 1
    keywords_k: int = 30
    match_fields: tuple[str, ...] = MATCH_FIELDS
    train: TrainConfig = field(default_factory=TrainConfig)
    align: AlignmentConfig = field(default_factory=AlignmentConfig)
    model_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.modality not in ("single", "dual"):
            raise ConfigError(f"modality must be single or dual, got {self.modality!r}")
        if self.aggregation not in ("sum", "mean"):
            raise ConfigError(f"aggregation must be sum or mean, got {self.aggregation!r}")
        if self.model not in MODEL_VARIANTS:
            raise ConfigError(f"model must be one of {MODEL_VARIANTS}, got {self.model!r}")
        if self.train_end >= self.test_start:
            raise ConfigError(
                f"train_end {self.train_end} must precede test_start {self.test_start}"
            )
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        unknown = set(self.match_fields) - set(MATCH_FIELDS)
        if unknown:
            raise ConfigError(f"unknown match fields {sorted(unknown)}")
        if self.modality == "dual":
            for name in ("news_file", "registry_file", "embedding_file"):
                if not getattr(self, name):
                    raise ConfigError(f"modality=dual requires {name}")

    @property
    def model_label(self) -> str:
        if self.modality == "single":
            return self.model
        return f"{self.model}-dual-{self.aggregation}"

    def resolve_tickers(self) -> tuple[str, ...]:
        if self.tickers:
            return self.tickers
        candles = sorted(Path(self.candles_dir).glob("*.csv"))
        if not candles:
            raise ConfigError(f"no candle files in {self.candles_dir}")
        return tuple(p.stem for p in candles)


def config_from_dict(raw: dict) -> PipelineConfig:
    paths = dict(raw.get("paths", {}))
    run = dict(raw.get("run", {}))
    align = dict(raw.get("align", {}))
    train = dict(raw.get("train", {}))
    model_params = dict(raw.get("model_params", {}))

    def path_or_none(key: str) -> str | None:
        value = paths.get(key)
        return str(value) if value else None

    candles_dir = paths.get("candles_dir")
    if not candles_dir:
        raise ConfigError("paths.candles_dir is required")

    align_config = AlignmentConfig(
        market_open=_parse_open(align.get("market_open", "10:00")),
        window=int(align.get("window", 5)),
    )
    train_config = TrainConfig(
        epochs=int(train.get("epochs", 30)),
        batch_size=int(train.get("batch_size", 32)),
        learning_rate=float(train.get("learning_rate", 1e-3)),
        seed=int(train.get("seed", 0)),
        clip_norm=float(train.get("clip_norm", 5.0)),
        hidden_dim=int(train.get("hidden_dim", 64)),
        news_at=str(train.get("news_at", "last")),
        standardize=bool(train.get("standardize", False)),
    )
    return PipelineConfig(
        candles_dir=str(candles_dir),
        out_dir=str(paths.get("out_dir", "out")),
        news_file=path_or_none("news_file"),
        registry_file=path_or_none("registry_file"),
        supplement_file=path_or_none("supplement_file"),
        embedding_file=path_or_none("embedding_file"),
        retained_ids_file=path_or_none("retained_ids_file"),
        tickers=tuple(str(t) for t in run.get("tickers", [])),
        modality=str(run.get("modality", "single")),
        aggregation=str(run.get("aggregation", "mean")),
        model=str(run.get("model", "lstm")),
        train_end=_parse_date(run.get("train_end", DEFAULT_TRAIN_END)),
        test_start=_parse_date(run.get("test_start", DEFAULT_TEST_START)),
        seed=int(run.get("seed", 0)),
        jobs=int(run.get("jobs", 1)),
        keywords_k=int(run.get("keywords_k", 30)),
        match_fields=tuple(str(f) for f in run.get("match_fields", MATCH_FIELDS)),
        train=train_config,
        align=align_config,
        model_params=model_params,
    )


def load_config(path: str | Path) -> PipelineConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)


def apply_overrides(config: PipelineConfig, args) -> PipelineConfig:
    """Override file values with CLI flags (flags win when given)."""
    updates: dict = {}
    mapping = {
        "seed": "seed",
        "jobs": "jobs",
        "modality": "modality",
        "agg": "aggregation",
        "model": "model",
        "out": "out_dir",
    }
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            updates[key] = value
    if getattr(args, "train_end", None) is not None:
        updates["train_end"] = _parse_date(args.train_end)
    if getattr(args, "test_start", None) is not None:
        updates["test_start"] = _parse_date(args.test_start)
    if getattr(args, "tickers", None):
        updates["tickers"] = tuple(args.tickers)
    return replace(config, **updates) if updates else config


def config_to_dict(config: PipelineConfig) -> dict:
    """Fully resolved, defaults included; inverse of config_from_dict."""
    return {
        "paths": {
            "candles_dir": config.candles_dir,
            "out_dir": config.out_dir,
            "news_file": config.news_file or "",
            "registry_file": config.registry_file or "",
            "supplement_file": config.supplement_file or "",
            "embedding_file": config.embedding_file or "",
            "retained_ids_file": config.retained_ids_file or "",
        },
        "run": {
            "tickers": list(config.tickers),
            "modality": config.modality,
            "aggregation": config.aggregation,
            "model": config.model,
            "model_label": config.model_label,
            "train_end": config.train_end,
            "test_start": config.test_start,
            "seed": config.seed,
            "jobs": config.jobs,
            "keywords_k": config.keywords_k,
            "match_fields": list(config.match_fields),
        },
        "align": {
            "market_open": config.align.market_open.strftime("%H:%M"),
            "window": config.align.window,
        },
        "train": {
            "epochs": config.train.epochs,
            "batch_size": config.train.batch_size,
            "learning_rate": config.train.learning_rate,
            "seed": config.train.seed,
            "clip_norm": config.train.clip_norm,
            "hidden_dim": config.train.hidden_dim,
            "news_at": config.train.news_at,
            "standardize": config.train.standardize,
        },
        "model_params": dict(config.model_params),
    }


def dumps_toml(data: dict) -> str:
    """Serialize the nested config dict (str/int/float/bool/date/list values)."""
    lines = []
    for section, values in data.items():
        if not isinstance(values, dict):
            raise ConfigError(f"top-level entry {section!r} must be a table")
        lines.append(f"[{section}]")
        for key, value in values.items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def save_resolved_config(config: PipelineConfig, path: str | Path) -> None:
    resolved = config_to_dict(config)
    resolved["run"].pop("model_label")  # derived, not an input
    Path(path).write_text(dumps_toml(resolved), encoding="utf-8")


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize config value {value!r}")


def _parse_date(value) -> date:
    if isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value).strip())
    except ValueError as exc:
        raise ConfigError(f"unparseable date {value!r}") from exc


def _parse_open(value) -> time:
    if isinstance(value, time):
        return value
    try:
        return time.fromisoformat(str(value).strip())
    except ValueError as exc:
        raise ConfigError(f"unparseable market open time {value!r}") from exc
