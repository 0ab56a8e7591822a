"""One flat record of every experiment knob plus its documented default.

The CLI resolves settings in three layers: built-in defaults, then a
JSON config file, then explicit command-line flags.  The fully resolved
record lands in the run manifest so any run can be replayed from it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace

from .corpus import TP_POSITION_FRACTIONS
from .evaluation import ALL_ALGOS, AlgoSpec
from .summarizers import FIXED_TP_MODES, MODEL_KINDS, TrainConfig

__all__ = ["ExperimentConfig", "ConfigError", "DEFAULTS"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    # input and output paths
    corpus: str | None = None
    embeddings: str | None = None
    silver_labels: str | None = None
    tp_checkpoint: str | None = None
    model_checkpoint: str | None = None
    out_dir: str | None = None

    # what to run
    algo: str | None = None
    model: str | None = None

    # selection and scene graph
    ratio: float = 0.3
    lambda1: float = 0.7
    edge_threshold: float = 0.2
    charscore_union: bool = False
    power_iteration: bool = False

    # turning points
    tau: float = 0.01
    tp_threshold: float = 0.05
    window_fraction: float = 0.2
    sigma_fraction: float = 0.05
    centers: tuple = TP_POSITION_FRACTIONS
    fixed_tps: str = "none"

    # training
    hidden: int = 64
    attn_hidden: int = 64
    lr: float = 1e-3
    epochs: int = 300
    patience: int = 20
    dropout: float = 0.2
    reg_a: float = 0.15
    reg_b: float = 0.1
    kl_eps: float = 1e-4
    regularizers: bool = True
    freeze_encoder: bool = False
    dev_fraction: float = 0.1

    # harness
    folds: int = 10
    fold_spec: str | None = None
    seed: int = 0
    jobs: int = 1

    def validate(self):
        if self.algo is not None and self.algo not in ALL_ALGOS:
            raise ConfigError(
                f"unknown algorithm {self.algo!r}; expected one of {ALL_ALGOS}"
            )
        if self.model is not None and self.model not in MODEL_KINDS:
            raise ConfigError(
                f"unknown model kind {self.model!r}; expected one of {MODEL_KINDS}"
            )
        if self.fixed_tps not in FIXED_TP_MODES:
            raise ConfigError(
                f"unknown fixed-TP mode {self.fixed_tps!r}; "
                f"expected one of {FIXED_TP_MODES}"
            )
        if not 0.0 < self.ratio <= 1.0:
            raise ConfigError(f"ratio must be in (0, 1], got {self.ratio}")
        if not 0.0 <= self.lambda1 <= 1.0:
            raise ConfigError(f"lambda1 must be in [0, 1], got {self.lambda1}")
        if not 0.0 <= self.edge_threshold < 1.0:
            raise ConfigError(
                f"edge_threshold must be in [0, 1), got {self.edge_threshold}"
            )
        if not 0.0 <= self.tp_threshold < 1.0:
            raise ConfigError(
                f"tp_threshold must be in [0, 1), got {self.tp_threshold}"
            )
        if not 0.0 <= self.dev_fraction < 1.0:
            raise ConfigError(
                f"dev_fraction must be in [0, 1), got {self.dev_fraction}"
            )
        if self.folds < 2:
            raise ConfigError(f"folds must be at least 2, got {self.folds}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be at least 1, got {self.jobs}")
        if self.fold_spec is not None:
            self.parse_fold_spec()
        try:
            self.train_config().validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_dict(cls, data):
        """Build from a plain dict, rejecting any unknown key by name."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key {unknown[0]!r}")
        clean = dict(data)
        if "centers" in clean and clean["centers"] is not None:
            clean["centers"] = tuple(clean["centers"])
        return cls(**clean)

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must hold a JSON object of settings")
        return cls.from_dict(data)

    def merged(self, overrides):
        """New config with every non-None override applied."""
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigError(f"unknown config key {unknown[0]!r}")
        applied = {k: v for k, v in overrides.items() if v is not None}
        if "centers" in applied:
            applied["centers"] = tuple(applied["centers"])
        return replace(self, **applied)

    def to_dict(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    def parse_fold_spec(self):
        """``"K:I"`` -> (k, held-out fold index)."""
        try:
            k_text, i_text = self.fold_spec.split(":")
            k, i = int(k_text), int(i_text)
        except ValueError:
            raise ConfigError(
                f"fold_spec must look like 'K:I' (e.g. '10:0'), "
                f"got {self.fold_spec!r}"
            ) from None
        if k < 2 or not 0 <= i < k:
            raise ConfigError(
                f"fold_spec needs K >= 2 and 0 <= I < K, got {self.fold_spec!r}"
            )
        return k, i

    def train_config(self):
        return TrainConfig(
            hidden=self.hidden,
            attn_hidden=self.attn_hidden,
            lr=self.lr,
            epochs=self.epochs,
            patience=self.patience,
            dropout=self.dropout,
            tau=self.tau,
            window_fraction=self.window_fraction,
            sigma_fraction=self.sigma_fraction,
            centers=self.centers,
            reg_a=self.reg_a,
            reg_b=self.reg_b,
            kl_eps=self.kl_eps,
            ratio=self.ratio,
            seed=self.seed,
            freeze_encoder=self.freeze_encoder,
        )

    def algo_spec(self, tp_state=None):
        if self.algo is None:
            raise ConfigError("no algorithm selected (--algo)")
        return AlgoSpec(
            algo=self.algo,
            ratio=self.ratio,
            lambda1=self.lambda1,
            edge_threshold=self.edge_threshold,
            tp_threshold=self.tp_threshold,
            seed=self.seed,
            power_iter=self.power_iteration,
            charscore_union=self.charscore_union,
            tp_state=tp_state,
            train=self.train_config(),
            regularizers=self.regularizers,
            fixed_tps=self.fixed_tps,
            dev_fraction=self.dev_fraction,
        )


DEFAULTS = ExperimentConfig()
