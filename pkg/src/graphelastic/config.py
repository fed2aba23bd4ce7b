"""Run configuration: one JSON document with a section per pipeline stage."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

from .fung import FungConstants
from .graph import PROPAGATION_MODES, RENORMALIZED_ADJACENCY
from .homogenization import HOMOGENIZERS, FftConfig
from .nn import Architecture
from .phasefield import PhaseFieldParams
from .training import UNITS, TrainConfig


CHECK_NAMES = ("objectivity", "gradient", "convexity", "anisotropy")


class ConfigError(ValueError):
    pass


@dataclass
class GenerationSection:
    seed: int = 0
    n_rves: int = 1
    grains_min: int = 10
    grains_max: int = 20
    grid: list = field(default_factory=lambda: [16, 16, 16])
    n_samples_per_rve: int = 200
    homogenizer: str = "taylor"
    odf_half_width_deg: float = 10.0
    paper_scale: bool = False

    def effective(self) -> "GenerationSection":
        """Full-scale switch: 49^3 grids with 40-50 grains."""
        if not self.paper_scale:
            return self
        return GenerationSection(**{**asdict(self), "grid": [49, 49, 49], "grains_min": 40, "grains_max": 50})


@dataclass
class HomogenizationSection:
    ref_stiffness_scale: float = 2.0
    max_iter: int = 500
    tol: float = 1e-8

    def fft(self) -> FftConfig:
        return FftConfig(self.ref_stiffness_scale, self.max_iter, self.tol)


@dataclass
class MaterialSection:
    c: float = 2.0
    lam: list = field(default_factory=lambda: FungConstants().lam.tolist())
    mu: list = field(default_factory=lambda: FungConstants().mu.tolist())

    def constants(self) -> FungConstants:
        return FungConstants.from_dict(asdict(self))


@dataclass
class ModelSection:
    n_max: int = 50
    gcn_channels: list = field(default_factory=lambda: [32, 64])
    encoder_hidden: list = field(default_factory=lambda: [64])
    encoded_dim: int = 9
    mlp_hidden: list = field(default_factory=lambda: [64, 64])
    propagation_mode: str = RENORMALIZED_ADJACENCY

    def architecture(self) -> Architecture:
        return Architecture(
            n_max=self.n_max,
            gcn_channels=tuple(self.gcn_channels),
            encoder_hidden=tuple(self.encoder_hidden),
            encoded_dim=self.encoded_dim,
            mlp_hidden=tuple(self.mlp_hidden),
            propagation_mode=self.propagation_mode,
        )


@dataclass
class TrainingSection:
    variant: str = "M_H1_reg"
    epochs: int = 500
    batch_size: int = 32
    learning_rate: float = 1e-3
    patience: int = 20
    decay: float = 0.5
    min_learning_rate: float = 1e-6
    validation_fraction: float = 0.1
    validation_unit: str = "sample"
    seed: int = 0
    normalization: str = "minmax"
    dropout_rate: float = 0.2
    l2_coefficient: float = 1e-4
    k: int = 5
    unit: str = "rve"
    test_fold: int = 0

    def train_config(self) -> TrainConfig:
        keys = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in asdict(self).items() if k in keys})


@dataclass
class VerificationSection:
    seed: int = 0
    n_rotations: int = 100
    n_pairs: int = 10_000
    n_probes: int = 50
    convexity_min_fraction: float = 0.99
    mandatory: list = field(default_factory=lambda: ["objectivity", "gradient"])


@dataclass
class DemoSection:
    rve_id: int = 0
    rotation_z_deg: float = 0.0
    F_end: list = field(default_factory=lambda: [[1.1, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    n_steps: int = 400
    ramp_steps: int = 200
    g_c: float = 1.2e-4
    l_0: float = 1.2e-3
    eta: float = 1e-6
    r: float = 0.0
    dt: float = 5e-8

    def params(self) -> PhaseFieldParams:
        return PhaseFieldParams(self.g_c, self.l_0, self.eta, self.r, self.dt)


@dataclass
class RunConfig:
    generation: GenerationSection = field(default_factory=GenerationSection)
    homogenization: HomogenizationSection = field(default_factory=HomogenizationSection)
    material: MaterialSection = field(default_factory=MaterialSection)
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    verification: VerificationSection = field(default_factory=VerificationSection)
    demo: DemoSection = field(default_factory=DemoSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def validate(self) -> "RunConfig":
        g = self.generation
        if g.homogenizer not in HOMOGENIZERS:
            raise ConfigError(f"generation.homogenizer must be one of {HOMOGENIZERS}")
        if not 1 <= g.grains_min <= g.grains_max:
            raise ConfigError("need 1 <= grains_min <= grains_max")
        if len(g.grid) != 3 or min(g.grid) < 2:
            raise ConfigError("generation.grid must be three integers >= 2")
        if g.n_rves < 1 or g.n_samples_per_rve < 1:
            raise ConfigError("n_rves and n_samples_per_rve must be >= 1")
        if self.model.propagation_mode not in PROPAGATION_MODES:
            raise ConfigError(f"model.propagation_mode must be one of {PROPAGATION_MODES}")
        v = self.verification
        if not 0.0 <= v.convexity_min_fraction <= 1.0:
            raise ConfigError("verification.convexity_min_fraction must lie in [0, 1]")
        unknown = sorted(set(v.mandatory) - set(CHECK_NAMES))
        if unknown:
            raise ConfigError(f"verification.mandatory: unknown checks {unknown}")
        if self.training.unit not in UNITS:
            raise ConfigError(f"training.unit must be one of {UNITS}")
        try:
            self.training.train_config()
            self.homogenization.fft()
            self.material.constants()
            self.model.architecture()
            self.demo.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        default = known[name].default_factory() if callable(known[name].default_factory) else None
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}.{name}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return _build(RunConfig, data, "config").validate()


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())
