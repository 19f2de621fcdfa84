"""Experiment configuration: JSON schema with strict validation.

Unknown keys are rejected everywhere so that a typo cannot silently fall
back to a default.  See README for a full example; the minimal config is

    {
      "loss": "tukey",
      "data": {"target": "y", "features": ["x"]},
      "network": {"hidden": [64, 64, 64, 64]},
      "training": {"epochs": 30},
      "split": {"rule": "fraction", "fraction": 0.8, "seed": 0}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .loss import LinkConfig
from .nn.optim import AdamConfig
from .nn.train import TrainConfig
from .tgh import InverseSolverConfig


@dataclass(frozen=True)
class FractionSplit:
    fraction: float
    seed: int

    def apply(self, dataset):
        from .data import split_fraction

        return split_fraction(dataset, self.fraction, self.seed)

    def to_json(self) -> dict:
        return {"rule": "fraction", "fraction": self.fraction, "seed": self.seed}


@dataclass(frozen=True)
class ByColumnSplit:
    column: str
    val_values: tuple[float, ...]
    test_values: tuple[float, ...]

    def apply(self, dataset):
        from .data import split_by_column_values

        return split_by_column_values(
            dataset, self.column, self.val_values, self.test_values
        )

    def to_json(self) -> dict:
        return {
            "rule": "by_column_values",
            "column": self.column,
            "val_values": list(self.val_values),
            "test_values": list(self.test_values),
        }


@dataclass(frozen=True)
class ExperimentConfig:
    loss: str
    target: str
    features: tuple[str, ...]
    split: FractionSplit | ByColumnSplit
    hidden: tuple[int, ...]
    epochs: int
    late_columns: tuple[str, ...] = ()
    standardize: bool = True
    batch_norm: bool = True
    seed: int = 0
    batch_size: int = 4096
    clip_norm: float | None = 10.0
    adam: AdamConfig = field(default_factory=AdamConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    solver: InverseSolverConfig = field(default_factory=InverseSolverConfig)

    @property
    def head_dim(self) -> int:
        return 4 if self.loss == "tukey" else 2

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            clip_norm=self.clip_norm,
        )


def _check_keys(section: dict, where: str, required: tuple[str, ...],
                optional: tuple[str, ...] = ()) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(section) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = set(required) - set(section)
    if missing:
        raise ConfigError(f"{where}: missing required key(s) {sorted(missing)}")


def _string_list(value, where: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ConfigError(f"{where}: expected a list of strings")
    return tuple(value)


def _number_list(value, where: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ConfigError(f"{where}: expected a list of numbers")
    return tuple(float(v) for v in value)


def _parse_split(section: dict) -> FractionSplit | ByColumnSplit:
    if not isinstance(section, dict) or "rule" not in section:
        raise ConfigError("split: expected an object with a 'rule' key")
    rule = section["rule"]
    if rule == "fraction":
        _check_keys(section, "split", ("rule", "fraction"), ("seed",))
        return FractionSplit(
            fraction=float(section["fraction"]), seed=int(section.get("seed", 0))
        )
    if rule == "by_column_values":
        _check_keys(section, "split", ("rule", "column", "val_values", "test_values"))
        return ByColumnSplit(
            column=section["column"],
            val_values=_number_list(section["val_values"], "split.val_values"),
            test_values=_number_list(section["test_values"], "split.test_values"),
        )
    raise ConfigError(f"split.rule: unknown rule {rule!r}")


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a parsed JSON object into an ExperimentConfig."""
    _check_keys(
        raw, "config",
        ("loss", "data", "network", "training", "split"),
        ("seed", "optimizer", "link", "solver"),
    )
    loss = raw["loss"]
    if loss not in ("tukey", "gaussian"):
        raise ConfigError(f"loss: expected 'tukey' or 'gaussian', got {loss!r}")

    data = raw["data"]
    _check_keys(data, "data", ("target", "features"), ("late_columns", "standardize"))
    features = _string_list(data["features"], "data.features")
    late = _string_list(data.get("late_columns", []), "data.late_columns")
    for name in late:
        if name not in features:
            raise ConfigError(f"data.late_columns: {name!r} is not a feature")

    network = raw["network"]
    _check_keys(network, "network", ("hidden",), ("batch_norm",))
    hidden = network["hidden"]
    if (not isinstance(hidden, list) or not hidden
            or not all(isinstance(v, int) and v >= 1 for v in hidden)):
        raise ConfigError("network.hidden: expected a non-empty list of ints >= 1")

    training = raw["training"]
    _check_keys(training, "training", ("epochs",), ("batch_size", "clip_norm"))

    try:
        adam = AdamConfig(**{
            **raw.get("optimizer", {}),
            **(
                {"lr_drop_epochs": tuple(raw["optimizer"]["lr_drop_epochs"])}
                if "lr_drop_epochs" in raw.get("optimizer", {})
                else {}
            ),
        })
        link = LinkConfig(**raw.get("link", {}))
        solver = InverseSolverConfig(**raw.get("solver", {}))
    except TypeError as exc:
        raise ConfigError(f"unknown key: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    clip = training.get("clip_norm", 10.0)
    return ExperimentConfig(
        loss=loss,
        target=data["target"],
        features=features,
        late_columns=late,
        standardize=bool(data.get("standardize", True)),
        hidden=tuple(hidden),
        batch_norm=bool(network.get("batch_norm", True)),
        epochs=int(training["epochs"]),
        batch_size=int(training.get("batch_size", 4096)),
        clip_norm=None if clip is None else float(clip),
        seed=int(raw.get("seed", 0)),
        split=_parse_split(raw["split"]),
        adam=adam,
        link=link,
        solver=solver,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot open {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(raw)
