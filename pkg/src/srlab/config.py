"""Experiment configuration: flat ``key = value`` text with dotted section
prefixes (e.g. ``noise.eta = 0.6``).

Unknown keys are hard errors so a typo cannot silently corrupt a sweep;
parse errors carry the line number and field. ``render_config`` writes a
canonical snapshot that re-parses to an identical configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

from .losses import LossSpec, SRConfig
from .trainer import OptimizerConfig


class ConfigError(ValueError):
    """Invalid experiment config; message carries line/field context."""


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("true", "yes", "1"):
        return True
    if value in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {raw!r}")


def _parse_int_list(raw: str) -> tuple:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(int(tok.strip()) for tok in raw.split(","))


_PARSERS = {"int": int, "float": float, "bool": _parse_bool,
            "str": lambda raw: raw.strip(), "ints": _parse_int_list}

# key -> (type, default)
SCHEMA = {
    "dataset.source": ("str", "blobs"),
    "dataset.k": ("int", 4),
    "dataset.n_per_class": ("int", 250),
    "dataset.d": ("int", 8),
    "dataset.separation": ("float", 6.0),
    "dataset.seed": ("int", 0),
    "dataset.test_fraction": ("float", 0.25),
    "dataset.images": ("str", ""),
    "dataset.labels": ("str", ""),
    "dataset.csv": ("str", ""),
    "dataset.imbalance": ("str", "none"),
    "dataset.imbalance_mu": ("float", 1.0),
    "dataset.step_minority_fraction": ("float", 0.5),
    "noise.kind": ("str", "none"),
    "noise.eta": ("float", 0.0),
    "noise.preset": ("str", "mnist"),
    "noise.seed": ("int", 1),
    "loss.kind": ("str", "ce"),
    "loss.gamma_f": ("float", 0.3),
    "loss.q": ("float", 0.7),
    "loss.a": ("float", -3.0),
    "loss.alpha": ("float", 1.0),
    "loss.beta": ("float", 1.0),
    "sr.enabled": ("bool", False),
    "sr.tau": ("float", 0.1),
    "sr.p": ("float", 0.1),
    "sr.lambda0": ("float", 4.0),
    "sr.rho": ("float", 2.0),
    "sr.r": ("int", 5),
    "sr.l2_normalize": ("bool", True),
    "model.hidden": ("ints", (128, 128)),
    "model.seed": ("int", 7),
    "optimizer.lr0": ("float", 0.1),
    "optimizer.momentum": ("float", 0.9),
    "optimizer.weight_decay": ("float", 1e-4),
    "optimizer.epochs": ("int", 50),
    "optimizer.batch_size": ("int", 128),
    "optimizer.cosine_annealing": ("bool", True),
    "run.repeats": ("int", 3),
    "run.seed": ("int", 0),
    "run.output_dir": ("str", ""),
}

_DATASET_SOURCES = ("blobs", "idx", "csv")
_IMBALANCES = ("none", "long_tailed", "step")
_NOISE_KINDS = ("none", "symmetric", "asymmetric")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment settings; ``values`` holds every schema key."""

    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    def loss_spec(self) -> LossSpec:
        return LossSpec(
            kind=self["loss.kind"], gamma_f=self["loss.gamma_f"],
            q=self["loss.q"], A=self["loss.a"],
            alpha=self["loss.alpha"], beta=self["loss.beta"],
        )

    def sr_config(self) -> SRConfig | None:
        if not self["sr.enabled"]:
            return None
        return SRConfig(
            tau=self["sr.tau"], p=self["sr.p"], lambda0=self["sr.lambda0"],
            rho=self["sr.rho"], r=self["sr.r"],
            l2_normalize_logits=self["sr.l2_normalize"],
        )

    def optimizer_config(self, seed: int) -> OptimizerConfig:
        return OptimizerConfig(
            lr0=self["optimizer.lr0"], momentum=self["optimizer.momentum"],
            weight_decay=self["optimizer.weight_decay"],
            epochs=self["optimizer.epochs"],
            batch_size=self["optimizer.batch_size"],
            cosine_annealing=self["optimizer.cosine_annealing"], seed=seed,
        )


def _validate(cfg: ExperimentConfig) -> None:
    v = cfg.values
    if v["dataset.source"] not in _DATASET_SOURCES:
        raise ConfigError(
            f"dataset.source: unknown source {v['dataset.source']!r}; "
            f"one of {_DATASET_SOURCES}"
        )
    if v["dataset.imbalance"] not in _IMBALANCES:
        raise ConfigError(
            f"dataset.imbalance: unknown profile {v['dataset.imbalance']!r}; "
            f"one of {_IMBALANCES}"
        )
    if v["noise.kind"] not in _NOISE_KINDS:
        raise ConfigError(
            f"noise.kind: unknown kind {v['noise.kind']!r}; one of {_NOISE_KINDS}"
        )
    if v["dataset.source"] == "idx" and not (v["dataset.images"] and v["dataset.labels"]):
        raise ConfigError("dataset.images and dataset.labels are required for idx")
    if v["dataset.source"] == "csv" and not v["dataset.csv"]:
        raise ConfigError("dataset.csv is required for the csv source")
    if not 0.0 < v["dataset.test_fraction"] < 1.0:
        raise ConfigError("dataset.test_fraction must be in (0, 1)")
    if v["noise.kind"] == "symmetric" and not 0.0 <= v["noise.eta"] < 1.0:
        raise ConfigError("noise.eta must be in [0, 1) for symmetric noise")
    if v["noise.kind"] == "asymmetric" and not 0.0 <= v["noise.eta"] <= 0.5:
        raise ConfigError("noise.eta must be in [0, 0.5] for asymmetric noise")
    if v["run.repeats"] < 1:
        raise ConfigError("run.repeats must be at least 1")
    if not v["run.output_dir"]:
        raise ConfigError("run.output_dir is required")
    # instantiating the owning types enforces their invariants
    try:
        cfg.loss_spec()
        cfg.sr_config()
        cfg.optimizer_config(seed=0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str) -> ExperimentConfig:
    values = {key: default for key, (_, default) in SCHEMA.items()}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        kind, _ = SCHEMA[key]
        try:
            values[key] = _PARSERS[kind](raw_value.strip())
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: field {key!r}: {exc}") from exc
    cfg = ExperimentConfig(values)
    _validate(cfg)
    return cfg


def parse_config_file(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def render_config(cfg: ExperimentConfig) -> str:
    """Canonical snapshot; parse_config(render_config(cfg)) == cfg."""
    lines = []
    for key in sorted(SCHEMA):
        value = cfg.values[key]
        kind, _ = SCHEMA[key]
        if kind == "bool":
            rendered = "true" if value else "false"
        elif kind == "ints":
            rendered = ",".join(str(w) for w in value)
        elif kind == "float":
            rendered = repr(float(value))
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"
