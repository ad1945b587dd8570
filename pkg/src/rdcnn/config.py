"""Plain ``key = value`` experiment configuration files.

One assignment per line, ``#`` starts a comment, lists are comma-separated.
Keys not present keep the full-scale defaults of :class:`ExperimentConfig`.
"""

from __future__ import annotations

from dataclasses import fields, replace
from pathlib import Path

from rdcnn.bench import ExperimentConfig
from rdcnn.dcnn import TrainConfig
from rdcnn.errors import ConfigurationError

CONFIG_MAGIC = "# rdcnn-config v1"


def _batch(text):
    return "full" if text == "full" else int(text)


def _list(conv):
    def parse(text):
        return tuple(conv(v.strip()) for v in text.split(",") if v.strip())
    return parse


# key -> (parser, owner); owner "train" routes into TrainConfig
_KEYS = {
    "sample_rate_hz": (float, "exp"),
    "duration_s": (float, "exp"),
    "signals_per_iteration": (int, "exp"),
    "iterations": (int, "exp"),
    "f0_range_hz": (_list(float), "exp"),
    "harmonic_counts": (_list(int), "exp"),
    "input_snr_db": (_list(float), "exp"),
    "dcnn_layer_counts": (_list(int), "exp"),
    "kernel_len": (int, "exp"),
    "ar_window_lens": (_list(int), "exp"),
    "resample_epsilon": (float, "exp"),
    "rational_method": (str, "exp"),
    "delay": (int, "exp"),
    "master_seed": (int, "exp"),
    "methods": (_list(str), "exp"),
    "ar_ridge": (float, "exp"),
    "taps_per_phase": (int, "exp"),
    "attenuation_db": (float, "exp"),
    "learning_rate": (float, "train"),
    "epochs": (int, "train"),
    "batch_size": (_batch, "train"),
    "init_scale": (float, "train"),
    "train_seed": (int, "train"),
}


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    exp, train, seen = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in _KEYS:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        parser, owner = _KEYS[key]
        try:
            parsed = parser(value)
        except ValueError:
            raise ConfigurationError(f"{source}:{lineno}: bad value for {key!r}: {value!r}") from None
        if owner == "train":
            train["seed" if key == "train_seed" else key] = parsed
        else:
            exp[key] = parsed
    try:
        train_cfg = TrainConfig(**train)
        return ExperimentConfig(train_cfg=train_cfg, **exp)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None


def parse_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    return parse_config_text(p.read_text(encoding="utf-8"), str(path))


def _render(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps_config(cfg: ExperimentConfig) -> str:
    """Fully resolved config; parsing it back yields an equal ``ExperimentConfig``."""
    lines = [CONFIG_MAGIC]
    for f in fields(ExperimentConfig):
        if f.name != "train_cfg":
            lines.append(f"{f.name} = {_render(getattr(cfg, f.name))}")
    t = cfg.train_cfg
    lines += [
        f"learning_rate = {_render(t.learning_rate)}",
        f"epochs = {t.epochs}",
        f"batch_size = {t.batch_size}",
        f"init_scale = {_render(t.init_scale)}",
        f"train_seed = {t.seed}",
    ]
    return "\n".join(lines) + "\n"


def write_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(dumps_config(cfg), encoding="utf-8")


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(cfg, master_seed=seed)
