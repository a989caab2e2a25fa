from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from ..errors import ConfigInvalid

ARCHS = ("cf-ffn", "ca-ffn", "rnn")


@dataclass
class NerConfig:
    """Hyper-parameters of one term classifier.

    ``w`` is the half-window, ``h`` the units per layer (one entry per layer),
    ``p`` the share of positive instances when sampling (FFNs), ``decay`` the
    power-schedule rate per update. ``finetune`` lets the embedding table
    train with the rest of the model.
    """

    arch: str = "cf-ffn"
    m: int = 100
    w: int = 0
    l: int = 2  # noqa: E741
    h: list[int] = field(default_factory=lambda: [100, 100])
    d: float = 0.0
    p: float = 0.1
    e: int = 5
    r: float = 0.01
    decay: float = 0.002
    b: int = 50
    activation: str = "sigmoid"
    finetune: bool = False

    @classmethod
    def defaults(cls, arch: str, **overrides) -> "NerConfig":
        if arch == "cf-ffn":
            cfg = cls(arch=arch)
        elif arch == "ca-ffn":
            cfg = cls(arch=arch, w=5, l=2, h=[500, 100], r=0.001, decay=0.0)
        elif arch == "rnn":
            cfg = cls(arch=arch, w=15, l=1, h=[100], e=3, r=0.001, decay=0.0, finetune=True)
        else:
            raise ConfigInvalid(f"unknown architecture {arch!r}; expected one of {ARCHS}")
        cfg = replace(cfg, **overrides)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.arch not in ARCHS:
            raise ConfigInvalid(f"unknown architecture {self.arch!r}")
        if self.l != len(self.h) or self.l < 1:
            raise ConfigInvalid(f"l={self.l} but h has {len(self.h)} entries")
        if any(u < 1 for u in self.h):
            raise ConfigInvalid("layer sizes must be positive")
        if not 0.0 <= self.d < 1.0:
            raise ConfigInvalid(f"dropout {self.d} outside [0, 1)")
        if not 0.0 < self.p <= 1.0:
            raise ConfigInvalid(f"positive proportion {self.p} outside (0, 1]")
        if self.w < 0 or (self.arch == "ca-ffn" and self.w < 1):
            raise ConfigInvalid(f"invalid half-window {self.w} for {self.arch}")
        if self.m < 1 or self.e < 0 or self.b < 1 or self.r < 0 or self.decay < 0:
            raise ConfigInvalid("m, b must be >= 1 and e, r, decay >= 0")
        if self.activation not in ("tanh", "sigmoid", "relu"):
            raise ConfigInvalid(f"unknown activation {self.activation!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NerConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(f"unknown NER config keys: {sorted(unknown)}")
        arch = data.get("arch", "cf-ffn")
        return cls.defaults(arch, **{k: v for k, v in data.items() if k != "arch"})
