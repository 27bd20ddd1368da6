"""Flat key=value run configuration.

One schema serves every command: keys are RunConfig field names, values
are coerced from text by the declared field type.  A config file holds
"key = value" lines ('#' comments, blank lines allowed); command-line
flags use the same keys and win over the file.  Unknown keys are
rejected rather than ignored so typos cannot silently change a run.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import get_type_hints

from .errors import ConfigError
from .training import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    # command-level parameters
    task: int = 1
    examples: int = 1000
    story_length: int = 10
    data: str = ""
    out: str = ""
    checkpoint: str = ""
    story: str = ""
    question: str = ""
    lengths: tuple[int, ...] = (1000, 10000, 100000, 1000000)
    probes: int = 100
    resume: bool = False
    # training parameters (mirror TrainConfig)
    seed: int = 0
    stages: tuple[int, ...] = (1000, 1000, 1000)
    n: int = 3
    enc_beam: int = 2
    store_samples: int = 5
    prog_beam: int = 30
    alpha: float = 0.1
    lr: float = 1e-2
    clip_norm: float = 5.0
    embed_dim: int = 8
    hidden_dim: int = 8
    zn_samples: int = 8
    zn_cap: int = 512
    normalize_weights: bool = True
    use_baseline: bool = True
    ae_baseline: bool = True
    use_ae: bool = True
    use_tweaks: bool = True
    max_tweaks_per_piece: int = 4
    max_tweak_stores: int = 8
    val_fraction: float = 0.1
    early_stop: float = 0.0
    patience: int = 3
    reset_moments_between_stages: bool = False

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            n=self.n, enc_beam=self.enc_beam,
            store_samples=self.store_samples, prog_beam=self.prog_beam,
            stage_epochs=tuple(self.stages), alpha=self.alpha, lr=self.lr,
            clip_norm=self.clip_norm, embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim, seed=self.seed,
            zn_samples=self.zn_samples, zn_cap=self.zn_cap,
            normalize_weights=self.normalize_weights,
            use_baseline=self.use_baseline, ae_baseline=self.ae_baseline,
            use_ae=self.use_ae, use_tweaks=self.use_tweaks,
            max_tweaks_per_piece=self.max_tweaks_per_piece,
            max_tweak_stores=self.max_tweak_stores,
            val_fraction=self.val_fraction, early_stop=self.early_stop,
            patience=self.patience,
            reset_moments_between_stages=self.reset_moments_between_stages)


_TYPES = get_type_hints(RunConfig)
KEYS = tuple(f.name for f in fields(RunConfig))


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    parts = [p for p in text.split(",") if p.strip()]
    return tuple(int(p) for p in parts)


def coerce(key: str, text: str):
    """Parse `text` according to the declared type of RunConfig.`key`."""
    if key not in _TYPES:
        raise ConfigError(f"unknown config key: {key}")
    tp = _TYPES[key]
    try:
        if tp is bool:
            return _parse_bool(text)
        if tp is int:
            return int(text)
        if tp is float:
            return float(text)
        if tp is str:
            return text
        return _parse_int_tuple(text)
    except ValueError as err:
        raise ConfigError(f"bad value for {key}: {err}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw key -> value text pairs from key=value lines."""
    pairs: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected key=value, "
                              f"got {raw!r}")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def load_config_file(path: str) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=path)


def make_run_config(*pair_maps: dict[str, str]) -> RunConfig:
    """Merge raw pair maps left to right (later wins) and coerce."""
    merged: dict[str, str] = {}
    for pairs in pair_maps:
        merged.update(pairs)
    values = {key: coerce(key, text) for key, text in merged.items()}
    return RunConfig(**values)


def format_run_config(config: RunConfig) -> str:
    """Echo the effective configuration as a reparseable file."""
    lines = []
    for key in sorted(KEYS):
        value = getattr(config, key)
        if isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
