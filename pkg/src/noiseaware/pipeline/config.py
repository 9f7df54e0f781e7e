"""INI-style pipeline configuration.

Every key has a default, so an empty file is a valid configuration. Keys are
grouped into sections::

    [run]        seed, out, models, detector, method, kernel, median_passes
    [corpus]     n_images, defect_rate, split, kinds
    [noise]      gaussian_sigma, sp_density, sp_salt_ratio,
                 periodic_amplitude, periodic_freq_min, periodic_freq_max
    [detect]     tau_sp, exclusion_radius, threshold_k
    [denoiser]   n_pairs, split, enc_channels, skip_indices, epochs, batch_size, lr
    [noiseclf]   n_images, split, conv_channels, epochs, batch_size, lr, patience
    [defectclf]  conv_channels, epochs, batch_size, lr, patience
    [lift]       seeds, n_images
    [casting]    geometry keys of :class:`~noiseaware.casting.CastingGeometry`

Lists are comma separated. Split ratios must sum to 1 within 1e-9.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..casting import CastingGeometry
from ..models import FREQUENCY, SPATIAL, AutoencoderConfig, ClassifierConfig
from ..noisegen import NoiseGrid, NoiseKind

DETECTORS = ("learned", "rule")
METHODS = ("auto", "median", "autoencoder", "identity")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _check_ratios(name: str, ratios: tuple[float, ...], parts: int) -> None:
    if len(ratios) != parts:
        raise ConfigError(f"{name} needs {parts} ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise ConfigError(f"{name} ratios must be non-negative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"{name} ratios sum to {sum(ratios)!r}, not 1")


@dataclass(frozen=True)
class DetectConfig:
    tau_sp: float = 0.01
    exclusion_radius: int = 8
    threshold_k: float = 6.0


@dataclass(frozen=True)
class DenoiserSetup:
    n_pairs: int = 588
    split: tuple[float, float] = (0.85, 0.15)
    enc_channels: tuple[int, ...] = (16, 32, 64)
    skip_indices: tuple[int, ...] = (0, 1, 2)
    epochs: int = 20
    batch_size: int = 16
    lr: float = 2e-3

    def model_config(self, size: int) -> AutoencoderConfig:
        return AutoencoderConfig(size, self.enc_channels, self.skip_indices, self.epochs, self.batch_size, self.lr)


@dataclass(frozen=True)
class ClassifierSetup:
    conv_channels: tuple[int, ...] = (8, 16, 32)
    epochs: int = 30
    batch_size: int = 32
    lr: float = 2e-3
    patience: int = 5

    def model_config(self, n_classes: int, domain: str, size: int) -> ClassifierConfig:
        return ClassifierConfig(
            n_classes, domain, size, self.conv_channels, self.epochs, self.batch_size, self.lr, self.patience
        )


@dataclass(frozen=True)
class NoiseClfSetup(ClassifierSetup):
    """Classifier hyperparameters plus the size and split of its own corpus."""

    n_images: int = 1250
    split: tuple[float, float, float] = (0.60, 0.20, 0.20)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a pipeline command needs, with defaults for every key."""

    seed: int = 0
    out: str = "out"
    models: str = ""
    detector: str = "learned"
    method: str = "auto"
    kernel: int = 3
    median_passes: int = 3
    n_images: int = 1000
    defect_rate: float = 0.5
    split: tuple[float, float, float] = (0.70, 0.15, 0.15)
    kinds: tuple[NoiseKind, ...] = tuple(NoiseKind)
    grid: NoiseGrid = field(default_factory=NoiseGrid)
    detect: DetectConfig = field(default_factory=DetectConfig)
    denoiser: DenoiserSetup = field(default_factory=DenoiserSetup)
    noiseclf: NoiseClfSetup = field(default_factory=NoiseClfSetup)
    defectclf: ClassifierSetup = field(
        default_factory=lambda: ClassifierSetup(conv_channels=(16, 32, 64), epochs=60, batch_size=16, lr=1e-3)
    )
    lift_seeds: tuple[int, ...] = (1, 2, 3)
    lift_images: int = 300
    geometry: CastingGeometry = field(default_factory=CastingGeometry)

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.detector not in DETECTORS:
            raise ConfigError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError(f"kernel must be a positive odd integer, got {self.kernel}")
        if self.median_passes < 1:
            raise ConfigError("median_passes must be >= 1")
        if self.n_images < 2 or self.lift_images < 2:
            raise ConfigError("corpus sizes must be at least 2")
        if not 0.0 < self.defect_rate < 1.0:
            raise ConfigError("defect_rate must lie strictly between 0 and 1")
        if not self.kinds or len(set(self.kinds)) != len(self.kinds):
            raise ConfigError("kinds must be a non-empty list without repeats")
        if not self.lift_seeds:
            raise ConfigError("lift needs at least one seed")
        _check_ratios("corpus split", self.split, 3)
        _check_ratios("denoiser split", self.denoiser.split, 2)
        _check_ratios("noiseclf split", self.noiseclf.split, 3)
        if self.noiseclf.n_images < 2 * len(NoiseKind):
            raise ConfigError("noiseclf n_images is too small")
        if self.detect.exclusion_radius * 2 >= self.geometry.size:
            raise ConfigError("exclusion_radius does not fit the image size")
        # the model configs validate channel / size compatibility
        self.denoiser.model_config(self.size)
        self.noiseclf.model_config(len(NoiseKind), FREQUENCY, self.size)
        self.defectclf.model_config(2, SPATIAL, self.size)

    @property
    def size(self) -> int:
        return self.geometry.size

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def models_dir(self) -> Path:
        return Path(self.models) if self.models else self.out_dir / "models"

    def with_overrides(self, **values) -> "PipelineConfig":
        """Copy with the given top-level keys replaced; ``None`` values are ignored."""
        values = {k: v for k, v in values.items() if v is not None}
        try:
            return replace(self, **values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_ini(self) -> str:
        def fmt(value):
            if isinstance(value, tuple):
                return ", ".join(v.label if isinstance(v, NoiseKind) else repr(v) for v in value)
            return repr(value) if isinstance(value, float) else str(value)

        out = ["[run]"]
        for key in ("seed", "out", "models", "detector", "method", "kernel", "median_passes"):
            out.append(f"{key} = {fmt(getattr(self, key))}")
        out += ["", "[corpus]"]
        for key in ("n_images", "defect_rate", "split", "kinds"):
            out.append(f"{key} = {fmt(getattr(self, key))}")
        for section, obj in (
            ("noise", self.grid),
            ("detect", self.detect),
            ("denoiser", self.denoiser),
            ("noiseclf", self.noiseclf),
            ("defectclf", self.defectclf),
        ):
            out += ["", f"[{section}]"]
            out += [f"{k} = {fmt(v)}" for k, v in asdict(obj).items()]
        out += ["", "[lift]", f"seeds = {fmt(self.lift_seeds)}", f"n_images = {self.lift_images}", ""]
        out.append(self.geometry.to_ini())
        return "\n".join(out)

    def digest(self) -> str:
        """SHA-256 of the canonical INI rendering (ignores output locations)."""
        canon = replace(self, out="", models="")
        return hashlib.sha256(canon.to_ini().encode()).hexdigest()


def _coerce(cls, name: str, raw: str):
    default = getattr(cls(), name)
    if isinstance(default, tuple):
        return _floats(raw) if default and isinstance(default[0], float) else _ints(raw)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def _section(parser, name: str, cls, base):
    if not parser.has_section(name):
        return base
    known = {f.name for f in fields(cls)}
    values = {}
    for key, raw in parser[name].items():
        if key not in known:
            raise ConfigError(f"unknown key [{name}] {key}")
        values[key] = _coerce(cls, key, raw)
    return replace(base, **values)


def parse_config(text: str) -> PipelineConfig:
    """Parse INI text into a :class:`PipelineConfig`; raises :class:`ConfigError`."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
        allowed = {"run", "corpus", "noise", "detect", "denoiser", "noiseclf", "defectclf", "lift", "casting"}
        extra = set(parser.sections()) - allowed
        if extra:
            raise ConfigError(f"unknown sections {sorted(extra)}")
        top = {}
        run = parser["run"] if parser.has_section("run") else {}
        types = {"seed": int, "out": str, "models": str, "detector": str, "method": str, "kernel": int,
                 "median_passes": int}
        for key, raw in run.items():
            if key not in types:
                raise ConfigError(f"unknown key [run] {key}")
            top[key] = types[key](raw)
        corpus = parser["corpus"] if parser.has_section("corpus") else {}
        for key, raw in corpus.items():
            if key == "n_images":
                top["n_images"] = int(raw)
            elif key == "defect_rate":
                top["defect_rate"] = float(raw)
            elif key == "split":
                top["split"] = _floats(raw)
            elif key == "kinds":
                top["kinds"] = tuple(NoiseKind.parse(v) for v in raw.split(",") if v.strip())
            else:
                raise ConfigError(f"unknown key [corpus] {key}")
        lift = parser["lift"] if parser.has_section("lift") else {}
        for key, raw in lift.items():
            if key == "seeds":
                top["lift_seeds"] = _ints(raw)
            elif key == "n_images":
                top["lift_images"] = int(raw)
            else:
                raise ConfigError(f"unknown key [lift] {key}")
        defaults = PipelineConfig()
        for section, key, cls in (
            ("noise", "grid", NoiseGrid),
            ("detect", "detect", DetectConfig),
            ("denoiser", "denoiser", DenoiserSetup),
            ("noiseclf", "noiseclf", NoiseClfSetup),
            ("defectclf", "defectclf", ClassifierSetup),
        ):
            top[key] = _section(parser, section, cls, getattr(defaults, key))
        if parser.has_section("casting"):
            top["geometry"] = CastingGeometry.from_ini(text)
        return PipelineConfig(**top)
    except ConfigError:
        raise
    except (configparser.Error, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def load_config(path) -> PipelineConfig:
    """Read a config file; ``None`` gives the defaults."""
    if path is None:
        return PipelineConfig()
    return parse_config(Path(path).read_text())
