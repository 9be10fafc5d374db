"""Run configuration files: flat key=value text in sections, strictly parsed.

Unknown sections or keys are hard errors; a typo in an experiment config
must fail loudly before any compute starts. All validation (model,
channel, training) happens at parse time.
"""

import configparser
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .channel import CHANNEL_KINDS
from .codec import ConfigError, ModelConfig, desk_config
from .gssm import CsiRestConfig
from .metrics import LOSSES

_MODEL_KEYS = {
    "stages", "blocks", "widths", "image_size", "cbr", "embed_downsample",
    "state_dim", "gen_dim", "csi_enabled", "csi_interval", "snr_scale",
    "seed", "stage4_downsample",
}
_CHANNEL_KEYS = {"kind", "snr_db", "snr_lo", "snr_hi", "adaptive",
                 "block_len"}
_TRAIN_KEYS = {"steps", "lr", "batch_size", "loss", "dataset"}
_SECTIONS = {"model": _MODEL_KEYS, "channel": _CHANNEL_KEYS,
             "train": _TRAIN_KEYS}


def _parse_bool(s, key):
    v = s.strip().lower()
    if v in ("1", "true", "yes"):
        return True
    if v in ("0", "false", "no"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {s!r}")


def _parse_float(s, key):
    v = s.strip().lower()
    if v in ("inf", "+inf", "infinity"):
        return float("inf")
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {s!r}") from None


@dataclass
class RunConfig:
    """Validated model + channel + training settings for the CLI."""

    model: ModelConfig = field(default_factory=desk_config)
    channel_kind: str = "awgn"
    snr_db: float = 10.0
    snr_range: Optional[tuple] = None
    block_len: Optional[int] = None
    steps: int = 2000
    lr: float = 1e-4
    batch_size: int = 8
    loss_kind: str = "mse"
    dataset_dir: Optional[str] = None

    def validate(self):
        self.model.validate()
        if self.channel_kind not in CHANNEL_KINDS:
            raise ConfigError(f"unknown channel kind {self.channel_kind!r}")
        if self.snr_range is not None:
            lo, hi = self.snr_range
            if not lo < hi:
                raise ConfigError(f"snr range [{lo}, {hi}] is empty")
        if self.loss_kind not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss_kind!r}")
        if self.steps < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ConfigError("steps/batch_size/lr out of range")
        if self.model.csi.enabled:
            inj = self.snr_db if self.snr_range is None else self.snr_range[0]
            import math
            if not math.isfinite(inj):
                raise ConfigError(
                    "csi injection needs a finite SNR; disable csi or set "
                    "a finite snr_db")
        return self

    @property
    def train_snr_range(self):
        return self.snr_range


def load_run_config(path) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as f:
            parser.read_file(f)
    except OSError as e:
        raise FileNotFoundError(f"cannot read config {path}: {e}") from e
    except configparser.Error as e:
        raise ConfigError(f"malformed config {path}: {e}") from e

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")

    cfg = RunConfig()
    if parser.has_section("model"):
        cfg.model = _model_from_section(parser["model"])
    if parser.has_section("channel"):
        s = parser["channel"]
        cfg.channel_kind = s.get("kind", cfg.channel_kind).strip()
        if "snr_db" in s:
            cfg.snr_db = _parse_float(s["snr_db"], "snr_db")
        if "adaptive" in s and _parse_bool(s["adaptive"], "adaptive"):
            lo = _parse_float(s.get("snr_lo", "0"), "snr_lo")
            hi = _parse_float(s.get("snr_hi", "20"), "snr_hi")
            cfg.snr_range = (lo, hi)
        if "block_len" in s and s["block_len"].strip():
            cfg.block_len = int(s["block_len"])
    if parser.has_section("train"):
        s = parser["train"]
        cfg.steps = int(s.get("steps", cfg.steps))
        cfg.lr = _parse_float(s.get("lr", str(cfg.lr)), "lr")
        cfg.batch_size = int(s.get("batch_size", cfg.batch_size))
        cfg.loss_kind = s.get("loss", cfg.loss_kind).strip()
        if "dataset" in s:
            cfg.dataset_dir = s["dataset"].strip()
    return cfg.validate()


def _model_from_section(s) -> ModelConfig:
    base = desk_config()
    try:
        stages = int(s.get("stages", base.stages))
        blocks = tuple(int(b) for b in s.get(
            "blocks", ",".join(map(str, base.blocks))).split(","))
        widths = tuple(int(w) for w in s.get(
            "widths", ",".join(map(str, base.widths))).split(","))
        if "image_size" in s:
            parts = s["image_size"].lower().split("x")
            image_size = (int(parts[0]), int(parts[1 if len(parts) > 1 else 0]))
        else:
            image_size = base.image_size
        gen_dim_raw = s.get("gen_dim", "auto").strip()
        return ModelConfig(
            stages=stages, blocks=blocks, widths=widths,
            image_size=image_size,
            cbr=Fraction(s.get("cbr", str(base.cbr))),
            embed_downsample=int(s.get("embed_downsample",
                                       base.embed_downsample)),
            state_dim=int(s.get("state_dim", base.state_dim)),
            gen_dim=None if gen_dim_raw == "auto" else int(gen_dim_raw),
            csi=CsiRestConfig(
                refresh_interval=int(s.get("csi_interval",
                                           base.csi.refresh_interval)),
                enabled=_parse_bool(s.get("csi_enabled", "1"), "csi_enabled"),
                snr_scale=_parse_float(s.get("snr_scale", "1.0"),
                                       "snr_scale")),
            seed=int(s.get("seed", base.seed)),
            stage4_downsample=_parse_bool(s.get("stage4_downsample", "0"),
                                          "stage4_downsample"),
        )
    except ValueError as e:
        raise ConfigError(f"bad model config value: {e}") from e
