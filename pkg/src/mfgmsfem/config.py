"""JSON experiment configuration."""
from dataclasses import asdict, dataclass, field, fields
import json
import math

from .errors import ConfigError

MODELS = ("linear", "semilinear")
SWEEP_KINDS = ("gamma", "nt")


@dataclass
class ExperimentConfig:
    """Settings for one study.

    ``permeability`` is a raster path, the name of a shipped field
    (``"linear"`` or ``"semilinear"``) or a generator spec dict.  When it is
    omitted the shipped field matching ``model`` is used.  The
    ``gamma``-kind sweep runs every ``gamma`` and ``M`` at ``sweep_nt``
    steps; the ``nt``-kind sweep runs every ``M`` and ``N_t`` at
    ``sweep_gamma``.
    """

    nx: int = 100
    ny: int = 100
    n_points: int = 121
    permeability: object = None
    contrast: float = 1e4
    seed: int = 0
    beta: float = 0.01
    gamma: list = field(default_factory=lambda: [3.0])
    M: list = field(default_factory=lambda: [5])
    N_t: list = field(default_factory=lambda: [50])
    t_max: float = 0.2
    model: str = "linear"
    reference_nt: int = 30000
    picard: int = 1
    sweeps: list = field(default_factory=lambda: list(SWEEP_KINDS))
    sweep_nt: int = 50
    sweep_gamma: float = 3.0
    output_dir: str = "out"

    def __post_init__(self):
        self.validate()

    @property
    def permeability_source(self):
        return self.model if self.permeability is None else self.permeability

    def validate(self):
        def positive_int(key, value):
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(key, f"must be a positive integer, got {value!r}")

        def real(key, value):
            if isinstance(value, bool) or not isinstance(value, (int, float)) \
                    or not math.isfinite(value):
                raise ConfigError(key, f"must be a finite number, got {value!r}")

        for key in ("nx", "ny", "n_points", "reference_nt", "picard", "sweep_nt"):
            positive_int(key, getattr(self, key))
        for key in ("contrast", "beta", "t_max", "sweep_gamma"):
            real(key, getattr(self, key))
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed", f"must be a nonnegative integer, got {self.seed!r}")
        if self.contrast < 1:
            raise ConfigError("contrast", "must be >= 1")
        if self.beta < 0:
            raise ConfigError("beta", "must be >= 0")
        if self.t_max <= 0:
            raise ConfigError("t_max", "must be positive")
        if self.model not in MODELS:
            raise ConfigError("model", f"must be one of {MODELS}, got {self.model!r}")
        for key in ("gamma", "M", "N_t", "sweeps"):
            value = getattr(self, key)
            if not isinstance(value, list) or not value:
                raise ConfigError(key, "must be a nonempty list")
        for g in self.gamma + [self.sweep_gamma]:
            real("gamma", g)
            if g <= 1:
                raise ConfigError("gamma", f"coverage parameter must exceed 1, got {g}")
        for m in self.M:
            positive_int("M", m)
        for n in self.N_t:
            positive_int("N_t", n)
        for kind in self.sweeps:
            if kind not in SWEEP_KINDS:
                raise ConfigError("sweeps", f"unknown sweep kind {kind!r}")
        perm = self.permeability
        if perm is not None and not isinstance(perm, (str, dict)):
            raise ConfigError("permeability", "must be a path, a shipped name or a generator dict")
        if not isinstance(self.output_dir, str):
            raise ConfigError("output_dir", "must be a string")

    def to_dict(self):
        return asdict(self)


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    data = dict(data)
    # scalars are accepted where lists are expected
    for key in ("gamma", "M", "N_t", "sweeps"):
        if key in data and not isinstance(data[key], list):
            data[key] = [data[key]]
    if "gamma" in data and "sweep_gamma" not in data and data["gamma"]:
        data["sweep_gamma"] = data["gamma"][0]
    for key in ("gamma", "sweep_gamma"):
        value = data.get(key)
        if isinstance(value, list):
            data[key] = [float(v) if isinstance(v, int) and not isinstance(v, bool) else v
                         for v in value]
        elif isinstance(value, int) and not isinstance(value, bool):
            data[key] = float(value)
    return ExperimentConfig(**data)


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(config, path):
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
