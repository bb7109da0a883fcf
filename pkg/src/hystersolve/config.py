"""Simulation configuration: flat ``section.key = value`` text files.

Every line holds one dotted key and a JSON scalar::

    # comments start with '#'
    mesh.nodes = 101
    preisach.density.kind = "constant"
    laws.u_star.left1 = 0.8

Floats are written with ``repr`` so that writing and re-reading a config is
bit-exact. Keys left out take the defaults of the dataclasses below; a key
that is written as ``null`` means "unset" (for example an unbounded support).
"""


import dataclasses
import json
import os
import typing
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError


@dataclass
class MeshSpec:
    length: float = 1.0
    nodes: int = 101


@dataclass
class TimeSpec:
    final: float = 1.0
    steps: int = 200


@dataclass
class DensitySpec:
    kind: str = "constant"          # constant | separable | tabulated
    value: float = 1.0              # constant value or separable scale
    r_support: Optional[float] = None
    v_support: Optional[float] = None
    x_slope: float = 0.0
    r_decay: float = 0.0
    v_decay: float = 0.0
    file: Optional[str] = None
    panels: int = 64


@dataclass
class OuterSpec:
    kind: str = "none"              # none | sinh
    strength: float = 1.0


@dataclass
class PreisachSpec:
    thresholds: int = 128
    lambda_max: float = 1.0
    offset: float = 0.0
    density: DensitySpec = field(default_factory=DensitySpec)
    outer: OuterSpec = field(default_factory=OuterSpec)


@dataclass
class KappaSpec:
    kind: str = "constant"          # constant | tanh
    value: float = 1.0
    k_min: float = 0.5
    k_max: float = 1.5
    slope: float = 1.0
    s_mid: float = 0.0


@dataclass
class UStarSpec:
    kind: str = "constant"          # constant | ramp | sinusoid | csv
    left0: float = 0.0
    left1: Optional[float] = None
    right0: float = 0.0
    right1: Optional[float] = None
    amplitude: float = 0.0
    frequency: float = 1.0
    file: Optional[str] = None


@dataclass
class LawsSpec:
    gamma_left: float = 1.0
    gamma_right: float = 1.0
    u_star_bound: float = 1.0
    kappa: KappaSpec = field(default_factory=KappaSpec)
    u_star: UStarSpec = field(default_factory=UStarSpec)


@dataclass
class U0Spec:
    kind: str = "constant"          # constant | quadratic
    value: float = 0.0
    curvature: float = 0.0


@dataclass
class MemorySpec:
    kind: str = "loaded"            # loaded | from_top | from_bottom | csv
    file: Optional[str] = None


@dataclass
class CompatSpec:
    L: Optional[float] = None
    r0: Optional[float] = None


@dataclass
class InitialSpec:
    u0: U0Spec = field(default_factory=U0Spec)
    memory: MemorySpec = field(default_factory=MemorySpec)
    compat: CompatSpec = field(default_factory=CompatSpec)


@dataclass
class SolverSpec:
    tol: float = 1e-10
    max_iter: int = 200
    relaxation: float = 0.8
    retries: int = 3


@dataclass
class OutputSpec:
    directory: str = "out"
    stride: int = 10
    memory_snapshots: bool = False
    figures: bool = True


@dataclass
class SimulationConfig:
    mesh: MeshSpec = field(default_factory=MeshSpec)
    time: TimeSpec = field(default_factory=TimeSpec)
    preisach: PreisachSpec = field(default_factory=PreisachSpec)
    laws: LawsSpec = field(default_factory=LawsSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    # directory that relative file names are resolved against; not serialized
    base_dir: str = field(default=".", compare=False, repr=False)

    def resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def replace(self, **changes) -> "SimulationConfig":
        """Copy with dotted-key overrides, e.g. ``replace(**{"time.steps": 400})``."""
        flat = flatten(self)
        for key, val in changes.items():
            if key not in _schema():
                raise ConfigError(f"unknown key {key!r}")
            flat[key] = val
        return from_flat(flat, base_dir=self.base_dir)


def _walk(obj, prefix=""):
    for f in dataclasses.fields(obj):
        if f.name == "base_dir":
            continue
        val = getattr(obj, f.name)
        key = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(val):
            yield from _walk(val, key + ".")
        else:
            yield key, f, val


def flatten(config: SimulationConfig) -> dict:
    return {key: val for key, _, val in _walk(config)}


_SCHEMA_CACHE: dict = {}


def _schema() -> dict:
    """Map each dotted key to ``(base_type, optional)``."""
    if not _SCHEMA_CACHE:
        for key, f, _ in _walk(SimulationConfig()):
            tp, optional = f.type, False
            if typing.get_origin(tp) is typing.Union:
                optional = True
                tp = next(a for a in typing.get_args(tp) if a is not type(None))
            _SCHEMA_CACHE[key] = (tp, optional)
    return _SCHEMA_CACHE


def _coerce(key, spec, value, line=None):
    tp, optional = spec
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{key}: value may not be null", line=line)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}", line=line)
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}", line=line)
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}", line=line)
        return value
    if not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string, got {value!r}", line=line)
    return value


def from_flat(flat: dict, base_dir: str = ".", lines: Optional[dict] = None) -> SimulationConfig:
    schema = _schema()
    config = SimulationConfig(base_dir=base_dir)
    for key, value in flat.items():
        line = lines.get(key) if lines else None
        if key not in schema:
            raise ConfigError(f"unknown key {key!r}", line=line)
        value = _coerce(key, schema[key], value, line)
        *parents, name = key.split(".")
        target = config
        for p in parents:
            target = getattr(target, p)
        setattr(target, name, value)
    return config


def loads(text: str, base_dir: str = ".") -> SimulationConfig:
    """Parse config text without validating hypotheses."""
    flat, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, val = stripped.partition("=")
        key = key.strip()
        val = val.strip()
        if not key:
            raise ConfigError("empty key", line=lineno)
        if key in flat:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        try:
            flat[key] = json.loads(val)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{key}: cannot parse value {val!r} ({exc.msg})", line=lineno) from None
        lines[key] = lineno
    return from_flat(flat, base_dir=base_dir, lines=lines)


def dumps(config: SimulationConfig) -> str:
    out = []
    section = None
    for key, val in flatten(config).items():
        top = key.split(".")[0]
        if top != section:
            if section is not None:
                out.append("")
            section = top
        if isinstance(val, float):
            text = repr(val)
        else:
            text = json.dumps(val)
        out.append(f"{key} = {text}")
    return "\n".join(out) + "\n"


def write_config(config: SimulationConfig, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(config))


def validate(config: SimulationConfig) -> list:
    """Return the list of hypothesis violations (empty when the config is usable)."""
    from . import problem  # builders evaluate profiles and boundary data

    v = []
    if not config.mesh.length > 0:
        v.append("mesh: length must be positive")
    if config.mesh.nodes < 2:
        v.append("mesh: at least two nodes required")
    if not config.time.final > 0:
        v.append("time: final time must be positive")
    if config.time.steps < 1:
        v.append("time: at least one step required")
    pre = config.preisach
    if not pre.lambda_max > 0:
        v.append("hy1: Lambda must be positive")
    if pre.thresholds < 1:
        v.append("preisach: at least one threshold required")
    d = pre.density
    if d.kind not in ("constant", "separable", "tabulated"):
        v.append(f"preisach: unknown density kind {d.kind!r}")
    elif d.kind == "tabulated" and not d.file:
        v.append("preisach: tabulated density needs density.file")
    elif d.kind != "tabulated" and d.value <= 0:
        v.append("ge3a: density must be positive")
    if pre.outer.kind not in ("none", "sinh"):
        v.append(f"preisach: unknown outer function kind {pre.outer.kind!r}")
    laws = config.laws
    k = laws.kappa
    if k.kind == "constant":
        if not k.value > 0:
            v.append("hy2: kappa lower bound must be positive")
    elif k.kind == "tanh":
        if not k.k_min > 0:
            v.append("hy2: kappa lower bound must be positive")
        if k.k_max < k.k_min:
            v.append("hy2: kappa upper bound below lower bound")
    else:
        v.append(f"laws: unknown kappa kind {k.kind!r}")
    if laws.gamma_left < 0 or laws.gamma_right < 0:
        v.append("hy2: gamma must be nonnegative")
    if laws.gamma_left + laws.gamma_right <= 0:
        v.append("hy2: gamma integral zero")
    if not laws.u_star_bound > 0:
        v.append("hy2: U* must be positive")
    if laws.u_star.kind not in ("constant", "ramp", "sinusoid", "csv"):
        v.append(f"laws: unknown u_star kind {laws.u_star.kind!r}")
    if config.initial.u0.kind not in ("constant", "quadratic"):
        v.append(f"initial: unknown u0 kind {config.initial.u0.kind!r}")
    if config.initial.memory.kind not in ("loaded", "from_top", "from_bottom", "csv"):
        v.append(f"initial: unknown memory kind {config.initial.memory.kind!r}")
    s = config.solver
    if not s.tol > 0:
        v.append("solver: tol must be positive")
    if s.max_iter < 1:
        v.append("solver: max_iter must be at least 1")
    if not 0 < s.relaxation <= 1:
        v.append("solver: relaxation must lie in (0, 1]")
    if s.retries < 0:
        v.append("solver: retries must be nonnegative")
    if config.output.stride < 1:
        v.append("output: stride must be at least 1")
    if v:
        return v

    try:
        mesh = problem.build_mesh(config)
        series = problem.boundary_series(config)
        u0 = problem.initial_pressure(config, mesh.nodes)
    except (OSError, ValueError) as exc:
        return [f"input: {exc}"]
    U_star = laws.u_star_bound
    if abs(series).max() > U_star * (1 + 1e-12):
        v.append(f"hy2: |u*| reaches {abs(series).max():.6g} > U* = {U_star:.6g}")
    if abs(u0).max() > pre.lambda_max * (1 + 1e-12):
        v.append(f"hy1: sup|u0| = {abs(u0).max():.6g} exceeds Lambda = {pre.lambda_max:.6g}")
    return v


def parse_config(path) -> SimulationConfig:
    """Read and validate a config file; raises :class:`ConfigError` with tagged violations."""
    with open(path) as fh:
        text = fh.read()
    config = loads(text, base_dir=os.path.dirname(os.path.abspath(path)))
    violations = validate(config)
    if violations:
        raise ConfigError(violations)
    return config
