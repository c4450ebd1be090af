"""Run configuration documents: schema validation, hashing, run directories.

A RunConfig is a canonical JSON document with sections {data, model, train,
eval, paths}. `model` and `train` are keyed by role so multi-stage commands
(bench-parity, ablate) can configure each stage; unknown keys anywhere are
rejected with the offending path named. The config hash (plus the command
name) addresses the run directory, making experiments content-addressed and
collision-proof against silent overwrites.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .catalog import (GridSpec, VariableCatalog, make_default_catalog,
                      make_level_catalog, make_surface_catalog)
from .ioutil import canonical_json
from .nn.models import ModelConfig
from .optim import TrainConfig


class ConfigError(ValueError):
    """Invalid run configuration; exit code 2 territory."""


SECTIONS = ("data", "model", "train", "eval", "paths")
ROLES = ("autoencoder", "downstream", "bespoke")

_DATA_KEYS = {"grid", "n_times", "seed", "start_time", "step_hours", "catalog", "split"}
_MODEL_KEYS = {"patch_size", "embed_dim", "latent_dim", "n_encoder_layers", "n_decoder_layers",
               "n_layers", "n_blocks", "mlp_ratio", "shrink_lambda", "mode_keep_fraction",
               "in_channels", "out_channels"}
_TRAIN_KEYS = {"lr0", "decay_gamma", "beta1", "beta2", "eps", "batch_size", "n_epochs",
               "seed", "loss_mask", "snapshot_every", "cache_latents", "target"}
_EVAL_KEYS = {"year", "variable", "variables", "ssim_window", "models", "max_rmse_ratio",
              "batch_size"}
_EVAL_MODEL_KEYS = {"tag", "variable", "checkpoint", "encoder_checkpoint"}
_PATHS_KEYS = {"run_root", "data", "stats", "encoder_checkpoint", "checkpoint", "out",
               "report", "format", "snapshot_dir"}


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def validate_config(cfg: dict) -> dict:
    """Structural validation of a full RunConfig document."""
    _reject_unknown(cfg, set(SECTIONS), "config")
    if "data" in cfg:
        _reject_unknown(cfg["data"], _DATA_KEYS, "data")
    if "model" in cfg:
        _reject_unknown(cfg["model"], set(ROLES), "model")
        for role, mc in cfg["model"].items():
            _reject_unknown(mc, _MODEL_KEYS, f"model.{role}")
    if "train" in cfg:
        _reject_unknown(cfg["train"], set(ROLES), "train")
        for role, tc in cfg["train"].items():
            _reject_unknown(tc, _TRAIN_KEYS, f"train.{role}")
    if "eval" in cfg:
        _reject_unknown(cfg["eval"], _EVAL_KEYS, "eval")
        for i, m in enumerate(cfg["eval"].get("models", [])):
            _reject_unknown(m, _EVAL_MODEL_KEYS, f"eval.models[{i}]")
            for req in ("tag", "variable", "checkpoint"):
                if req not in m:
                    raise ConfigError(f"eval.models[{i}] missing {req!r}")
    if "paths" in cfg:
        _reject_unknown(cfg["paths"], _PATHS_KEYS, "paths")
    return cfg


def load_config(path: str | Path) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except ValueError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    return validate_config(obj)


def catalog_from_config(data: dict) -> VariableCatalog:
    spec = data.get("catalog", "default")
    if spec == "default":
        return make_default_catalog()
    if spec == "surface":
        return make_surface_catalog()
    if isinstance(spec, dict) and set(spec) == {"levels"}:
        return make_level_catalog([int(v) for v in spec["levels"]])
    raise ConfigError(f"unknown catalog spec {spec!r}")


def grid_from_config(data: dict) -> GridSpec:
    if "grid" not in data:
        raise ConfigError("data.grid is required")
    g = data["grid"]
    if not (isinstance(g, list) and len(g) == 2):
        raise ConfigError("data.grid must be [n_lat, n_lon]")
    return GridSpec(int(g[0]), int(g[1]))


def model_config(cfg: dict, role: str, in_channels: int, out_channels: int) -> ModelConfig:
    section = cfg.get("model", {})
    if role not in section:
        raise ConfigError(f"config has no model.{role} section")
    fields = dict(section[role])
    fields.setdefault("in_channels", in_channels)
    fields.setdefault("out_channels", out_channels)
    try:
        return ModelConfig(role=role, **fields)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad model.{role}: {e}") from None


def train_config(cfg: dict, role: str) -> tuple[TrainConfig, str | None]:
    """TrainConfig plus the optional target variable name."""
    fields = dict(cfg.get("train", {}).get(role, {}))
    target = fields.pop("target", None)
    try:
        return TrainConfig(**fields), target
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad train.{role}: {e}") from None


def config_hash(command: str, cfg: dict) -> str:
    digest = hashlib.blake2b(canonical_json({"command": command, "config": cfg}),
                             digest_size=8).hexdigest()
    return digest


class RunDir:
    """Content-addressed run directory with a checksummed output manifest."""

    def __init__(self, command: str, cfg: dict, run_root: str | Path):
        self.hash = config_hash(command, cfg)
        self.path = Path(run_root) / f"{command}-{self.hash}"
        if (self.path / "manifest.json").exists():
            raise ConfigError(
                f"run directory {self.path} already holds a completed run "
                f"(same command + config); outputs are write-once")
        self.path.mkdir(parents=True, exist_ok=True)
        (self.path / "config.json").write_bytes(canonical_json(cfg) + b"\n")
        self._outputs: list[dict] = []

    def record(self, path: str | Path) -> Path:
        path = Path(path)
        data = path.read_bytes()
        self._outputs.append({
            "path": str(path),
            "bytes": len(data),
            "checksum": hashlib.blake2b(data, digest_size=8).hexdigest(),
        })
        return path

    def file(self, name: str) -> Path:
        return self.path / name

    def finalize(self) -> Path:
        manifest = self.path / "manifest.json"
        manifest.write_bytes(canonical_json({"hash": self.hash, "outputs": self._outputs}) + b"\n")
        return manifest
