"""Run configuration stored as a flat ``key = value`` text file.

Lines starting with ``#`` are comments. Tuples are comma separated, seed
ranges are ``start:stop``. Keys:

    side, widths, depths, reductions, heads, patch, global_dim, decoder_dim,
    max_tokens, use_global, rescale_mode, lr_encoder, lr_branch, lr_decoder,
    halve_every, epochs, batch_size, seed, train_seeds, val_seeds, augment,
    out_dir
"""
import dataclasses
import hashlib
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError
from .scaling import RESCALE_MODES


@dataclass
class RunConfig:
    side: int = 64
    widths: tuple = (16, 32, 64, 128)
    depths: tuple = (1, 1, 2, 1)
    reductions: tuple = (4, 2, 1, 1)
    heads: int = 2
    patch: int = 16
    global_dim: int = 32
    decoder_dim: int = 32
    max_tokens: int = 1024
    use_global: bool = True
    rescale_mode: str = "pixel_shuffle"
    lr_encoder: float = 2e-4
    lr_branch: float = 2e-4
    lr_decoder: float = 2e-3
    halve_every: int = 20
    epochs: int = 60
    batch_size: int = 8
    seed: int = 1
    train_seeds: tuple = (0, 800)
    val_seeds: tuple = (800, 900)
    augment: bool = True
    out_dir: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.side % 32:
            raise ConfigurationError(f"side must be divisible by 32, got {self.side}")
        if self.side % self.patch:
            raise ConfigurationError(f"patch {self.patch} must divide side {self.side}")
        for name in ("widths", "depths", "reductions"):
            if len(getattr(self, name)) != 4:
                raise ConfigurationError(f"{name} needs 4 entries")
        if self.rescale_mode not in RESCALE_MODES:
            raise ConfigurationError(f"rescale_mode must be one of {RESCALE_MODES}")
        for name in ("lr_encoder", "lr_branch", "lr_decoder"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if self.batch_size < 1 or self.epochs < 0 or self.halve_every < 1:
            raise ConfigurationError("batch_size, halve_every must be >= 1 and epochs >= 0")
        if self.global_dim % 16:
            raise ConfigurationError("global_dim must be divisible by 16 to pixel-shuffle onto stage 1")

    @property
    def train_range(self):
        return range(*self.train_seeds)

    @property
    def val_range(self):
        return range(*self.val_seeds)

    def lrs(self, epoch=0):
        """Per-group learning rates after halving every ``halve_every`` epochs."""
        factor = 0.5 ** (epoch // self.halve_every)
        return {"encoder": self.lr_encoder * factor, "branch": self.lr_branch * factor,
                "decoder": self.lr_decoder * factor}

    def to_text(self):
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name in ("train_seeds", "val_seeds"):
                v = f"{v[0]}:{v[1]}"
            elif isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            else:
                v = repr(v) if isinstance(v, float) else str(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_text())

    def fingerprint(self, exclude=("out_dir",)):
        """Stable hash of everything that affects a run's numbers."""
        text = "\n".join(l for l in self.to_text().splitlines() if l.split(" = ")[0] not in exclude)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_text(cls, text, overrides=None):
        values = parse_pairs(text.splitlines())
        values.update(overrides or {})
        return cls.from_mapping(values)

    @classmethod
    def from_file(cls, path, overrides=None):
        return cls.from_text(Path(path).read_text(), overrides)

    @classmethod
    def from_mapping(cls, values):
        kwargs = {}
        fields = {f.name: f for f in dataclasses.fields(cls)}
        for key, raw in values.items():
            if key not in fields:
                raise ConfigurationError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, fields[key].default, raw)
        return cls(**kwargs)


def parse_pairs(lines):
    values = {}
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {n}: expected key = value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def _coerce(key, default, raw):
    if not isinstance(raw, str):
        return raw
    try:
        if key in ("train_seeds", "val_seeds"):
            a, b = raw.split(":")
            return (int(a), int(b))
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if isinstance(default, tuple):
            return tuple(int(x) for x in raw.split(","))
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from exc
    return raw
