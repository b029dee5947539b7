"""Flat, typed run configuration.

Config files are TOML with top-level keys only, e.g.::

    d = 32
    n_sup = 64
    epochs = 100
    train_dirs = ["data/g0", "data/g1"]
    test_dirs = ["data/test"]

Unknown keys are rejected.  Relative directory paths are resolved against
the config file's directory.
"""

import dataclasses
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import InvalidArgumentError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# config key -> dataclass field, for keys that are Python keywords
_KEY_TO_FIELD = {"lambda": "lambda_"}
_FIELD_TO_KEY = {v: k for k, v in _KEY_TO_FIELD.items()}

_CHOICES = {
    "adjacency": ("sym_norm", "raw"),
    "similarity_channel": ("structure", "per_channel"),
    "aggregate": ("median", "mean"),
    "test_median": ("include_test", "train_only"),
    "aux_mode": ("merge", "finetune"),
    "triplet_anchor": ("normal", "anomaly"),
}


@dataclass(frozen=True)
class RunConfig:
    # model
    d: int = 256
    layers: int = 3
    tau: float = 1.0
    tau_a: float = 0.001
    n_sup: int = 2000
    k: object = 0.5
    adjacency: str = "sym_norm"
    similarity_channel: str = "structure"
    signed_sqrt: bool = False
    tie_attention: bool = False
    aggregate: str = "median"
    test_median: str = "include_test"
    # training
    lambda_: float = 0.2
    beta: float = 0.01
    lr: float = 3e-5
    epochs: int = 100
    pairs_per_graph: int = 512
    triplet_anchor: str = "normal"
    patience: int = 0
    seed: int = 0
    # experiment harness
    trials: int = 5
    train_dirs: tuple = ()
    test_dirs: tuple = ()
    aux_dirs: tuple = ()
    aux_mode: str = "merge"
    n_sup_sweep: tuple = ()
    checkpoint: str = ""
    finetune_epochs: int = 20

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name.endswith("_dirs") or f.name == "n_sup_sweep":
                object.__setattr__(self, f.name, tuple(v))
        self.validate()

    def validate(self):
        for key, allowed in _CHOICES.items():
            if getattr(self, key) not in allowed:
                raise InvalidArgumentError(f"{key} must be one of {allowed}, got {getattr(self, key)!r}")
        if self.d < 1 or self.layers < 2 or self.n_sup < 1:
            raise InvalidArgumentError("need d >= 1, layers >= 2, n_sup >= 1")
        if not (self.tau > 0 and self.tau_a > 0):
            raise InvalidArgumentError("tau and tau_a must be positive")
        if not self.lr >= 0 or self.lambda_ < 0 or self.beta < 0:
            raise InvalidArgumentError("lr, lambda and beta must be non-negative")
        if self.epochs < 0 or self.pairs_per_graph < 0 or self.trials < 1 or self.seed < 0:
            raise InvalidArgumentError("epochs, pairs_per_graph, seed must be >= 0 and trials >= 1")
        if isinstance(self.k, bool) or not isinstance(self.k, (int, float)):
            raise InvalidArgumentError(f"k must be an integer count or a fraction, got {self.k!r}")
        if self.k < 0 or (isinstance(self.k, float) and self.k >= 1):
            raise InvalidArgumentError(f"fractional k must lie in [0, 1), got {self.k!r}")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[_FIELD_TO_KEY.get(f.name, f.name)] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, data, base_dir=None):
        known = {_FIELD_TO_KEY.get(f.name, f.name): f for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise InvalidArgumentError(f"unknown config key {key!r}")
            f = known[key]
            kwargs[f.name] = _coerce(key, value, f.default)
            if key.endswith("_dirs") and base_dir is not None:
                kwargs[f.name] = tuple(str((Path(base_dir) / p)) if not Path(p).is_absolute() else p
                                       for p in kwargs[f.name])
            if key == "checkpoint" and value and base_dir is not None and not Path(value).is_absolute():
                kwargs[f.name] = str(Path(base_dir) / value)
        return cls(**kwargs)

    def attention_config(self):
        from .reconstruction import AttentionConfig
        return AttentionConfig(k=self.k, tau_a=self.tau_a, drop_outer_sqrt=not self.signed_sqrt,
                               similarity_channel=self.similarity_channel,
                               tie_attention=self.tie_attention)


def _coerce(key, value, default):
    if key == "k":
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise InvalidArgumentError(f"{key} must be a list")
        return tuple(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise InvalidArgumentError(f"{key} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise InvalidArgumentError(f"{key} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidArgumentError(f"{key} must be a number")
        return float(value)
    if not isinstance(value, str):
        raise InvalidArgumentError(f"{key} must be a string")
    return value


def load_config(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from None
    for key, value in data.items():
        if isinstance(value, dict):
            raise InvalidArgumentError(f"{path}: nested table {key!r} not allowed; keys must be top-level")
    return RunConfig.from_dict(data, base_dir=path.parent)


def parse_k(text):
    """CLI helper: ``"10"`` -> 10 (count), ``"0.25"`` -> 0.25 (fraction)."""
    try:
        return int(text)
    except ValueError:
        return float(text)
