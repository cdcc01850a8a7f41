"""Parameter groups for every stage of the pipeline and the run-level config.

Defaults follow the published setup where one exists (p=64, r=16, T=1000) and
standard dark-channel practice otherwise. Each group validates itself on
construction; ``RunConfig.from_mapping`` rejects unknown keys.
"""
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .exceptions import ParameterError

GRAY_METHODS = ("rec601", "pca")
GRAD_FILTERS = ("gaussian", "bilateral")


def _check(condition, message):
    if not condition:
        raise ParameterError(message)


@dataclass(frozen=True)
class DcpParams:
    omega: float = 0.95
    window: int = 15
    guided_radius: int = 60
    guided_reg: float = 1e-3
    t0: float = 0.1
    tau_g: float = 0.05
    tau_b: float = 0.7
    feather_sigma: float = 5.0
    grad_sigma: float = 1.0
    grad_filter: str = "gaussian"
    gray_method: str = "rec601"
    airlight_fraction: float = 0.001

    def __post_init__(self):
        _check(0 < self.omega <= 1, f"omega must be in (0, 1], got {self.omega}")
        _check(self.window >= 1 and self.window % 2 == 1, f"window must be odd and >= 1, got {self.window}")
        _check(self.guided_radius >= 1, f"guided_radius must be >= 1, got {self.guided_radius}")
        _check(self.guided_reg > 0, f"guided_reg must be > 0, got {self.guided_reg}")
        _check(0 < self.t0 < 1, f"t0 must be in (0, 1), got {self.t0}")
        _check(0 <= self.tau_g <= 1, f"tau_g must be in [0, 1], got {self.tau_g}")
        _check(0 <= self.tau_b <= 1, f"tau_b must be in [0, 1], got {self.tau_b}")
        _check(self.feather_sigma > 0, f"feather_sigma must be > 0, got {self.feather_sigma}")
        _check(self.grad_sigma > 0, f"grad_sigma must be > 0, got {self.grad_sigma}")
        _check(self.grad_filter in GRAD_FILTERS, f"grad_filter must be one of {GRAD_FILTERS}, got {self.grad_filter!r}")
        _check(self.gray_method in GRAY_METHODS, f"gray_method must be one of {GRAY_METHODS}, got {self.gray_method!r}")
        _check(0 < self.airlight_fraction <= 1, f"airlight_fraction must be in (0, 1], got {self.airlight_fraction}")


@dataclass(frozen=True)
class ScheduleParams:
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02

    def __post_init__(self):
        _check(self.T >= 1, f"T must be >= 1, got {self.T}")
        _check(0 < self.beta_start <= self.beta_end < 1,
               f"need 0 < beta_start <= beta_end < 1, got {self.beta_start}, {self.beta_end}")


@dataclass(frozen=True)
class PistParams:
    a: float = 0.002
    T: int = 1000
    enabled: bool = True

    def __post_init__(self):
        _check(self.a >= 0, f"pist a must be >= 0, got {self.a}")
        _check(self.T >= 1, f"pist T must be >= 1, got {self.T}")


@dataclass(frozen=True)
class HadtpParams:
    kappa: float = 0.25
    enabled: bool = True

    def __post_init__(self):
        _check(self.kappa >= 0, f"kappa must be >= 0, got {self.kappa}")


@dataclass(frozen=True)
class SamplerConfig:
    patch: int = 64
    stride: int = 16
    T: int = 1000
    steps: int = 0  # 0 visits every timestep
    deterministic: bool = False
    seed: int = 0
    workers: int = 1
    pist: PistParams = field(default_factory=PistParams)
    hadtp: HadtpParams = field(default_factory=HadtpParams)

    def __post_init__(self):
        _check(self.patch >= 1, f"patch must be >= 1, got {self.patch}")
        _check(1 <= self.stride < self.patch, f"stride must satisfy 1 <= r < p, got r={self.stride}, p={self.patch}")
        _check(self.T >= 1, f"T must be >= 1, got {self.T}")
        _check(0 <= self.steps <= self.T, f"steps must be in [0, T={self.T}], got {self.steps}")
        _check(self.workers >= 1, f"workers must be >= 1, got {self.workers}")
        _check(self.pist.T == self.T, f"pist T={self.pist.T} differs from sampler T={self.T}")


@dataclass(frozen=True)
class TrainParams:
    scenes: int = 16
    size: int = 64
    steps: int = 2000
    batch_size: int = 8
    patch: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    log_every: int = 100

    def __post_init__(self):
        _check(self.scenes >= 1, f"scenes must be >= 1, got {self.scenes}")
        _check(self.size >= 16, f"size must be >= 16, got {self.size}")
        _check(self.steps >= 0, f"steps must be >= 0, got {self.steps}")
        _check(self.batch_size >= 1, f"batch_size must be >= 1, got {self.batch_size}")
        _check(4 <= self.patch <= self.size, f"patch must be in [4, size], got {self.patch}")
        _check(self.lr > 0, f"lr must be > 0, got {self.lr}")
        _check(0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, f"Adam betas must be in [0, 1), got {self.beta1}, {self.beta2}")
        _check(self.log_every >= 1, f"log_every must be >= 1, got {self.log_every}")


# Sampler keys that are filled in from sibling sections, never set directly.
SAMPLER_DERIVED = ("T", "seed", "pist", "hadtp")

SECTIONS = {
    "dcp": DcpParams,
    "schedule": ScheduleParams,
    "pist": PistParams,
    "hadtp": HadtpParams,
    "sampler": SamplerConfig,
    "train": TrainParams,
}


def _section(cls, name, values):
    if not isinstance(values, dict):
        raise ParameterError(f"config section {name!r} must be a mapping, got {type(values).__name__}")
    allowed = {f.name for f in fields(cls)}
    if cls is SamplerConfig:
        allowed -= set(SAMPLER_DERIVED)
    if cls is PistParams:
        allowed.discard("T")
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise ParameterError(f"unknown key(s) in config section {name!r}: {', '.join(unknown)}")
    return values


@dataclass(frozen=True)
class RunConfig:
    dcp: DcpParams = field(default_factory=DcpParams)
    schedule: ScheduleParams = field(default_factory=ScheduleParams)
    pist: PistParams = field(default_factory=PistParams)
    hadtp: HadtpParams = field(default_factory=HadtpParams)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    train: TrainParams = field(default_factory=TrainParams)
    seed: int = 0

    @classmethod
    def assemble(cls, dcp=None, schedule=None, pist=None, hadtp=None, sampler=None, train=None, seed=0):
        """Build a config whose derived fields (T, seed) agree across sections."""
        schedule = schedule or ScheduleParams()
        pist = replace(pist or PistParams(), T=schedule.T)
        hadtp = hadtp or HadtpParams()
        base = sampler or SamplerConfig(T=schedule.T, pist=pist)
        sampler = replace(base, T=schedule.T, seed=seed, pist=pist, hadtp=hadtp)
        return cls(dcp=dcp or DcpParams(), schedule=schedule, pist=pist, hadtp=hadtp,
                   sampler=sampler, train=train or TrainParams(), seed=seed)

    @classmethod
    def from_mapping(cls, data):
        data = dict(data or {})
        unknown = sorted(set(data) - set(SECTIONS) - {"seed"})
        if unknown:
            raise ParameterError(f"unknown config section(s): {', '.join(unknown)}")
        seed = data.pop("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ParameterError(f"seed must be a non-negative integer, got {seed!r}")

        values = {name: _section(klass, name, data.get(name, {})) for name, klass in SECTIONS.items()}
        schedule = ScheduleParams(**values["schedule"])
        pist = PistParams(T=schedule.T, **values["pist"])
        steps = values["sampler"].get("steps", 0)
        _check(steps <= schedule.T, f"sampler steps={steps} exceeds T={schedule.T}")
        sampler = SamplerConfig(T=schedule.T, pist=pist, **values["sampler"])
        return cls.assemble(
            dcp=DcpParams(**values["dcp"]),
            schedule=schedule,
            pist=pist,
            hadtp=HadtpParams(**values["hadtp"]),
            sampler=sampler,
            train=TrainParams(**values["train"]),
            seed=seed,
        )

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_mapping(data)

    def with_overrides(self, section=None, **values):
        """Return a copy with flag values applied; ``None`` means the flag was not given."""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        data = self.to_dict()
        if section is None:
            data.update(values)
        else:
            data[section] = {**data[section], **values}
        return RunConfig.from_mapping(data)

    def to_dict(self):
        sampler = {k: v for k, v in asdict(self.sampler).items() if k not in SAMPLER_DERIVED}
        pist = {k: v for k, v in asdict(self.pist).items() if k != "T"}
        return {
            "dcp": asdict(self.dcp),
            "schedule": asdict(self.schedule),
            "pist": pist,
            "hadtp": asdict(self.hadtp),
            "sampler": sampler,
            "train": asdict(self.train),
            "seed": self.seed,
        }

    def run_id(self, *extra):
        payload = json.dumps([self.to_dict(), [str(e) for e in extra]], sort_keys=True)
        return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:10]
