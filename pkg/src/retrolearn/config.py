"""Run configuration files, overrides, manifests, and result tables.

Config files are INI-style with five sections: ``dataset``, ``model``,
``optimizer``, ``method``, and ``run``. Any value can be overridden from
the command line with ``--set section.key=value``. Unknown sections or
keys are rejected rather than silently ignored.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    LabeledDataset,
    corruption_indices,
    corrupt_labels,
    gaussian_blobs,
    load_csv,
    train_test_split,
    zscore_normalize,
)
from .trainer import TrainConfig, TrainReport, normalize_method

__all__ = [
    "ConfigError",
    "DataSpec",
    "ResolvedRun",
    "load_config",
    "apply_overrides",
    "resolve_run",
    "build_datasets",
    "run_id_for",
    "write_manifest",
    "RESULT_COLUMNS",
    "results_row",
]

SEED_ENV_VAR = "RETROLEARN_SEED"

DEFAULTS: dict[str, dict[str, str]] = {
    "dataset": {
        "kind": "blobs",
        "csv": "",
        "train_csv": "",
        "test_csv": "",
        "label_column": "",
        "has_header": "true",
        "test_fraction": "0.2",
        "split_seed": "",
        "normalize": "zscore",
        "noise_rate": "0.0",
        "classes": "3",
        "dims": "8",
        "per_class": "100",
        "separation": "4.0",
    },
    "model": {"hidden": "128,128"},
    "optimizer": {
        "name": "adam",
        "lr": "",
        "momentum": "0.9",
        "weight_decay": "0.0",
        "beta1": "0.9",
        "beta2": "0.999",
        "eps": "1e-8",
    },
    "method": {
        "name": "std",
        "tau": "5.0",
        "interval": "5",
        "lsr_epsilon": "0.1",
        "entropy_weight": "0.1",
        "fixed_alpha": "",
    },
    "run": {"epochs": "50", "batch_size": "16", "seed": "", "eval_every": "1"},
}


class ConfigError(ValueError):
    """The configuration file or an override is malformed."""


@dataclass(frozen=True)
class RawConfig:
    values: dict[str, dict[str, str]]
    provided: frozenset[tuple[str, str]]  # keys set by file or override, not defaults


def load_config(path) -> RawConfig:
    parser = configparser.ConfigParser(interpolation=None)
    if not parser.read(path, encoding="utf-8"):
        raise ConfigError(f"config file not found: {path}")
    values = {section: dict(defaults) for section, defaults in DEFAULTS.items()}
    provided: set[tuple[str, str]] = set()
    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, value in parser[section].items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            values[section][key] = value.strip()
            provided.add((section, key))
    return RawConfig(values=values, provided=frozenset(provided))


def apply_overrides(cfg: RawConfig, pairs: list[str]) -> RawConfig:
    """Apply ``section.key=value`` strings on top of a loaded config."""
    values = {section: dict(v) for section, v in cfg.values.items()}
    provided = set(cfg.provided)
    for pair in pairs:
        if "=" not in pair or "." not in pair.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {pair!r}")
        dotted, value = pair.split("=", 1)
        section, key = dotted.split(".", 1)
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigError(f"override names unknown setting {dotted!r}")
        values[section][key] = value.strip()
        provided.add((section, key))
    return RawConfig(values=values, provided=frozenset(provided))


def _parse_float(section: dict[str, str], key: str) -> float:
    try:
        return float(section[key])
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {section[key]!r}") from None


def _parse_int(section: dict[str, str], key: str) -> int:
    try:
        return int(section[key])
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {section[key]!r}") from None


def _parse_bool(section: dict[str, str], key: str) -> bool:
    value = section[key].lower()
    if value in ("true", "yes", "1"):
        return True
    if value in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key} must be true or false, got {section[key]!r}")


@dataclass(frozen=True)
class DataSpec:
    kind: str
    name: str
    csv: str = ""
    train_csv: str = ""
    test_csv: str = ""
    label_column: str | int = ""
    has_header: bool = True
    test_fraction: float = 0.2
    # pins the train/test partition independently of the run seed; None
    # derives it from the run seed instead
    split_seed: int | None = None
    normalize: str = "zscore"
    noise_rate: float = 0.0
    classes: int = 3
    dims: int = 8
    per_class: int = 100
    separation: float = 4.0


@dataclass(frozen=True)
class ResolvedRun:
    train_config: TrainConfig
    data: DataSpec
    warnings: tuple[str, ...]


def resolve_run(cfg: RawConfig, cli_seed: int | None = None) -> ResolvedRun:
    """Turn raw strings into a typed run description.

    Seed precedence: ``--seed`` flag, then ``run.seed`` in the file, then
    the ``RETROLEARN_SEED`` environment variable, then 0.
    """
    v = cfg.values
    warnings: list[str] = []

    if cli_seed is not None:
        seed = int(cli_seed)
    elif v["run"]["seed"] != "":
        seed = _parse_int(v["run"], "seed")
    elif os.environ.get(SEED_ENV_VAR, "") != "":
        try:
            seed = int(os.environ[SEED_ENV_VAR])
        except ValueError:
            raise ConfigError(
                f"{SEED_ENV_VAR} must be an integer, got {os.environ[SEED_ENV_VAR]!r}"
            ) from None
    else:
        seed = 0

    method = normalize_method(v["method"]["name"])
    if method != "lwr":
        for key in ("tau", "interval", "fixed_alpha"):
            if ("method", key) in cfg.provided:
                warnings.append(f"method {method!r} ignores method.{key}; value left unused")

    try:
        hidden = tuple(int(h) for h in v["model"]["hidden"].split(",") if h.strip())
    except ValueError:
        raise ConfigError(f"model.hidden must be comma-separated ints, got {v['model']['hidden']!r}") from None

    optimizer = v["optimizer"]["name"].strip().lower()
    if optimizer not in ("adam", "sgd_momentum"):
        raise ConfigError(f"optimizer.name must be adam or sgd_momentum, got {optimizer!r}")

    fixed_alpha = (
        None if v["method"]["fixed_alpha"] == "" else _parse_float(v["method"], "fixed_alpha")
    )
    train_config = TrainConfig(
        method=method,
        hidden=hidden,
        optimizer=optimizer,
        lr=None if v["optimizer"]["lr"] == "" else _parse_float(v["optimizer"], "lr"),
        momentum=_parse_float(v["optimizer"], "momentum"),
        weight_decay=_parse_float(v["optimizer"], "weight_decay"),
        beta1=_parse_float(v["optimizer"], "beta1"),
        beta2=_parse_float(v["optimizer"], "beta2"),
        adam_eps=_parse_float(v["optimizer"], "eps"),
        epochs=_parse_int(v["run"], "epochs"),
        batch_size=_parse_int(v["run"], "batch_size"),
        tau=_parse_float(v["method"], "tau"),
        interval=_parse_int(v["method"], "interval"),
        lsr_epsilon=_parse_float(v["method"], "lsr_epsilon"),
        entropy_weight=_parse_float(v["method"], "entropy_weight"),
        fixed_alpha=fixed_alpha,
        seed=seed,
        eval_every=_parse_int(v["run"], "eval_every"),
    )

    d = v["dataset"]
    kind = d["kind"].strip().lower()
    if kind not in ("csv", "blobs"):
        raise ConfigError(f"dataset.kind must be csv or blobs, got {kind!r}")
    has_header = _parse_bool(d, "has_header")
    label_column: str | int = d["label_column"]
    if kind == "csv":
        single = d["csv"] != ""
        paired = d["train_csv"] != "" and d["test_csv"] != ""
        if single == paired:
            raise ConfigError(
                "csv datasets need either dataset.csv (with test_fraction) "
                "or both dataset.train_csv and dataset.test_csv"
            )
        if label_column == "":
            raise ConfigError("csv datasets need dataset.label_column")
        if not has_header:
            try:
                label_column = int(label_column)
            except ValueError:
                raise ConfigError(
                    "headerless csv needs an integer dataset.label_column index"
                ) from None
        name = Path(d["csv"] or d["train_csv"]).stem
    else:
        name = "blobs"
    normalize = d["normalize"].strip().lower()
    if normalize not in ("zscore", "none"):
        raise ConfigError(f"dataset.normalize must be zscore or none, got {normalize!r}")
    noise_rate = _parse_float(d, "noise_rate")
    if not 0.0 <= noise_rate <= 1.0:
        raise ConfigError(f"dataset.noise_rate must be in [0, 1], got {noise_rate}")

    data = DataSpec(
        kind=kind,
        name=name,
        csv=d["csv"],
        train_csv=d["train_csv"],
        test_csv=d["test_csv"],
        label_column=label_column,
        has_header=has_header,
        test_fraction=_parse_float(d, "test_fraction"),
        split_seed=None if d["split_seed"] == "" else _parse_int(d, "split_seed"),
        normalize=normalize,
        noise_rate=noise_rate,
        classes=_parse_int(d, "classes"),
        dims=_parse_int(d, "dims"),
        per_class=_parse_int(d, "per_class"),
        separation=_parse_float(d, "separation"),
    )
    return ResolvedRun(train_config=train_config, data=data, warnings=tuple(warnings))


def _fingerprint(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def build_datasets(
    spec: DataSpec, seed: int
) -> tuple[LabeledDataset, LabeledDataset, dict]:
    """Materialize the train and test splits a run will see.

    Splitting, blob sampling, and label corruption each draw from seeds
    derived from the run seed, so a (config, seed) pair pins the data
    exactly. Corruption touches training labels only; test labels are
    produced before corruption and never revisited.
    """
    states = np.random.SeedSequence([int(seed), 101]).generate_state(3)
    split_seed, corrupt_seed, blob_seed = (int(s) for s in states)
    if spec.split_seed is not None:
        split_seed = spec.split_seed

    if spec.kind == "csv":
        if spec.csv:
            full = load_csv(spec.csv, spec.label_column, spec.has_header)
            train_ds, test_ds = train_test_split(full, spec.test_fraction, split_seed)
            source = {"csv": str(spec.csv), "test_fraction": spec.test_fraction,
                      "split_seed": split_seed}
        else:
            train_ds = load_csv(spec.train_csv, spec.label_column, spec.has_header)
            test_ds = load_csv(
                spec.test_csv, spec.label_column, spec.has_header, schema=train_ds.schema
            )
            source = {"train_csv": str(spec.train_csv), "test_csv": str(spec.test_csv)}
    else:
        full = gaussian_blobs(spec.classes, spec.dims, spec.per_class, spec.separation, blob_seed)
        train_ds, test_ds = train_test_split(full, spec.test_fraction, split_seed)
        source = {
            "blobs": {
                "classes": spec.classes,
                "dims": spec.dims,
                "per_class": spec.per_class,
                "separation": spec.separation,
                "seed": blob_seed,
            },
            "test_fraction": spec.test_fraction,
            "split_seed": split_seed,
        }

    info: dict = {
        "name": spec.name,
        "source": source,
        "n_train": train_ds.n,
        "n_test": test_ds.n,
        "dim": train_ds.dim,
        "num_classes": train_ds.num_classes,
        "class_names": list(train_ds.class_names) if train_ds.class_names else None,
        "noise_rate": spec.noise_rate,
    }

    if spec.normalize == "zscore":
        train_ds, stats = zscore_normalize(train_ds)
        test_ds, _ = zscore_normalize(test_ds, stats)
        if train_ds.dim <= 512:
            info["normalization"] = {
                "mean": [float(x) for x in stats.mean],
                "std": [float(x) for x in stats.std],
            }
        else:
            info["normalization"] = {
                "mean_sha256": _fingerprint(stats.mean),
                "std_sha256": _fingerprint(stats.std),
            }
    else:
        info["normalization"] = None

    if spec.noise_rate > 0.0:
        train_ds = corrupt_labels(train_ds, spec.noise_rate, corrupt_seed)
        idx = corruption_indices(train_ds.n, spec.noise_rate, corrupt_seed)
        info["corruption"] = {
            "seed": corrupt_seed,
            "count": int(idx.size),
            "indices_sha256": _fingerprint(idx),
        }
        if idx.size <= 10_000:
            info["corruption"]["indices"] = [int(i) for i in idx]
    else:
        info["corruption"] = None
    return train_ds, test_ds, info


def run_id_for(resolved: ResolvedRun) -> str:
    """Deterministic short id for one (config, data, seed) combination."""
    payload = {
        "train": asdict(resolved.train_config),
        "data": asdict(resolved.data),
    }
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
    return digest[:12]


def write_manifest(path, resolved: ResolvedRun, dataset_info: dict, extra: dict | None = None) -> None:
    """Record everything needed to reproduce and audit a run."""
    body = {
        "run_id": run_id_for(resolved),
        "tool_version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "seed": resolved.train_config.seed,
        "config": {
            "train": asdict(resolved.train_config),
            "data": asdict(resolved.data),
        },
        "dataset": dataset_info,
        "warnings": list(resolved.warnings),
    }
    if extra:
        body.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")


RESULT_COLUMNS = [
    "run_id",
    "method",
    "dataset",
    "seed",
    "tau",
    "k",
    "epochs",
    "batch",
    "noise_rate",
    "last_acc",
    "best_acc",
    "ece",
    "wall_time_s",
]


def results_row(resolved: ResolvedRun, report: TrainReport, ece: float) -> list[str]:
    """One raw results line; tau and k are blank for methods that ignore them."""
    config = resolved.train_config
    uses_retro = config.method == "lwr"
    return [
        run_id_for(resolved),
        config.method,
        resolved.data.name,
        str(config.seed),
        repr(config.tau) if uses_retro else "",
        str(config.interval) if uses_retro else "",
        str(config.epochs),
        str(config.batch_size),
        repr(resolved.data.noise_rate),
        repr(report.last_acc),
        repr(report.best_acc),
        repr(ece),
        repr(report.wall_time_s),
    ]
