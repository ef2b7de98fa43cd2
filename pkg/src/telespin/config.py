"""Flat key = value configuration files for single runs and grid sweeps.

Format: `key = value` lines grouped under bracketed section headers, with
`#` comments.  Unknown, duplicate, and missing keys are rejected with the
offending key name and line number.  All physical quantities are in the
same energy/time units as the model parameters.

Sections and keys (single run):

    [bath]     kappa | alpha (exactly one), omega0, gamma, beta
    [system]   epsilon0, tunneling
    [noise]    omega_amp | color (exactly one), nu        (section optional)
    [solver]   method (nz|tcl|both), horizon, step (optional),
               averaging (exact|monte_carlo), trajectories, seed, batch
    [outputs]  quantities = trace, blp, tau_d             (section optional)

A sweep file adds a [sweep] section (quantity = N_nz|N_tcl|tau_d, and for
each axis: axisN, axisN_min, axisN_max, axisN_count, axisN_scale) and uses
the remaining sections as the fixed template.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bath import BathParams
from .dynamics import SystemParams, default_step
from .errors import ConfigError
from .noise import NoiseParams

_AXIS_NAMES = (
    "alpha", "kappa", "omega0", "gamma", "beta",
    "epsilon0", "tunneling", "nu", "omega_amp", "color",
)
_OUTPUTS = ("trace", "blp", "tau_d")
_QUANTITIES = ("N_nz", "N_tcl", "tau_d")


@dataclass(frozen=True)
class SolverSpec:
    """Solver selection for a run; `methods` expands the `both` tag."""

    methods: tuple[str, ...]
    horizon: float
    step: float | None
    averaging: str = "exact"
    trajectories: int = 0
    seed: int = 0
    batch: int = 2000


@dataclass(frozen=True)
class RunConfig:
    bath: BathParams
    system: SystemParams
    noise: NoiseParams | None
    solver: SolverSpec
    outputs: tuple[str, ...] = _OUTPUTS


@dataclass(frozen=True)
class AxisSpec:
    name: str
    lo: float
    hi: float
    count: int
    scale: str = "linear"

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class SweepConfig:
    axis1: AxisSpec
    axis2: AxisSpec
    fixed: RunConfig
    quantity: str


class _Section(dict):
    """key -> (raw value, line number)"""

    def __init__(self, name: str, lineno: int):
        super().__init__()
        self.name = name
        self.lineno = lineno


def _read_sections(path: str) -> dict[str, _Section]:
    sections: dict[str, _Section] = {}
    current: _Section | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                name = line[1:-1].strip().lower()
                if name in sections:
                    raise ConfigError(f"line {lineno}: duplicate section [{name}]")
                current = _Section(name, lineno)
                sections[name] = current
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
            if current is None:
                raise ConfigError(f"line {lineno}: key outside any [section]")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in current:
                raise ConfigError(
                    f"line {lineno}: duplicate key {key!r} in [{current.name}]"
                )
            current[key.lower()] = (value, lineno)
    return sections


class _SectionReader:
    def __init__(self, section: _Section):
        self.section = section
        self.seen: set[str] = set()

    def _raw(self, key: str):
        if key not in self.section:
            raise ConfigError(f"[{self.section.name}]: missing key {key!r}")
        self.seen.add(key)
        return self.section[key]

    def has(self, key: str) -> bool:
        return key in self.section

    def number(self, key: str, default: float | None = None) -> float:
        if default is not None and key not in self.section:
            return default
        value, lineno = self._raw(key)
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: {key} = {value!r} is not a number") from None

    def integer(self, key: str, default: int | None = None) -> int:
        if default is not None and key not in self.section:
            return default
        value, lineno = self._raw(key)
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: {key} = {value!r} is not an integer") from None

    def word(self, key: str, choices: tuple[str, ...], default: str | None = None) -> str:
        if default is not None and key not in self.section:
            return default
        value, lineno = self._raw(key)
        lowered = value.strip().lower()
        for choice in choices:
            if lowered == choice.lower():
                return choice
        raise ConfigError(
            f"line {lineno}: {key} must be one of {', '.join(choices)}, got {value!r}"
        )

    def finish(self):
        unknown = set(self.section) - self.seen
        if unknown:
            key = sorted(unknown)[0]
            _, lineno = self.section[key]
            raise ConfigError(
                f"line {lineno}: unknown key {key!r} in [{self.section.name}]"
            )


def _parse_bath(section: _Section) -> BathParams:
    r = _SectionReader(section)
    omega0 = r.number("omega0")
    gamma = r.number("gamma")
    beta = r.number("beta")
    has_kappa, has_alpha = r.has("kappa"), r.has("alpha")
    if has_kappa == has_alpha:
        raise ConfigError(
            f"[bath] (line {section.lineno}): give exactly one of kappa / alpha"
        )
    try:
        if has_kappa:
            bath = BathParams(kappa=r.number("kappa"), omega0=omega0, gamma=gamma, beta=beta)
        else:
            bath = BathParams.from_alpha(r.number("alpha"), omega0=omega0, gamma=gamma, beta=beta)
    except ValueError as exc:
        raise ConfigError(f"[bath]: {exc}") from None
    r.finish()
    return bath


def _parse_noise(section: _Section) -> NoiseParams:
    r = _SectionReader(section)
    nu = r.number("nu")
    has_amp, has_color = r.has("omega_amp"), r.has("color")
    if has_amp == has_color:
        raise ConfigError(
            f"[noise] (line {section.lineno}): give exactly one of omega_amp / color "
            "(K = omega_amp/nu would be over-determined)"
        )
    try:
        if has_amp:
            noise = NoiseParams(omega_amp=r.number("omega_amp"), nu=nu)
        else:
            noise = NoiseParams.from_color(r.number("color"), nu=nu)
    except ValueError as exc:
        raise ConfigError(f"[noise]: {exc}") from None
    r.finish()
    return noise


def _parse_system(section: _Section) -> SystemParams:
    r = _SectionReader(section)
    try:
        sysp = SystemParams(epsilon0=r.number("epsilon0"), tunneling=r.number("tunneling"))
    except ValueError as exc:
        raise ConfigError(f"[system]: {exc}") from None
    r.finish()
    return sysp


def _parse_solver(section: _Section) -> SolverSpec:
    r = _SectionReader(section)
    method = r.word("method", ("nz", "tcl", "both"), default="both")
    methods = ("nz", "tcl") if method == "both" else (method,)
    horizon = r.number("horizon")
    step = r.number("step") if r.has("step") else None
    averaging = r.word("averaging", ("exact", "monte_carlo"), default="exact")
    trajectories = r.integer("trajectories", default=0)
    seed = r.integer("seed", default=0)
    batch = r.integer("batch", default=2000)
    r.finish()
    if horizon <= 0:
        raise ConfigError(f"[solver] (line {section.lineno}): horizon must be positive")
    if step is not None and step <= 0:
        raise ConfigError(f"[solver] (line {section.lineno}): step must be positive")
    if averaging == "monte_carlo" and trajectories < 100:
        raise ConfigError(
            f"[solver] (line {section.lineno}): monte_carlo needs trajectories >= 100"
        )
    return SolverSpec(
        methods=methods, horizon=horizon, step=step, averaging=averaging,
        trajectories=trajectories, seed=seed, batch=batch,
    )


def _parse_outputs(section: _Section | None) -> tuple[str, ...]:
    if section is None:
        return _OUTPUTS
    r = _SectionReader(section)
    value, lineno = r._raw("quantities")
    items = tuple(part.strip().lower() for part in value.split(",") if part.strip())
    for item in items:
        if item not in _OUTPUTS:
            raise ConfigError(
                f"line {lineno}: unknown output {item!r} (choose from {', '.join(_OUTPUTS)})"
            )
    r.finish()
    return items


def _parse_axis(r: _SectionReader, which: str) -> AxisSpec:
    name = r.word(which, _AXIS_NAMES)
    lo = r.number(f"{which}_min")
    hi = r.number(f"{which}_max")
    count = r.integer(f"{which}_count")
    scale = r.word(f"{which}_scale", ("linear", "log"), default="linear")
    if count < 2:
        raise ConfigError(f"[sweep]: {which}_count must be >= 2")
    if scale == "log" and (lo <= 0 or hi <= 0):
        raise ConfigError(f"[sweep]: log scale on {which} requires positive bounds")
    return AxisSpec(name=name, lo=lo, hi=hi, count=count, scale=scale)


def parse_config(path: str) -> RunConfig | SweepConfig:
    """Parse `path`; the presence of a [sweep] section selects SweepConfig."""
    sections = _read_sections(path)
    known = {"bath", "system", "noise", "solver", "outputs", "sweep"}
    for name, sec in sections.items():
        if name not in known:
            raise ConfigError(f"line {sec.lineno}: unknown section [{name}]")
    for required in ("bath", "system", "solver"):
        if required not in sections:
            raise ConfigError(f"missing section [{required}]")

    run = RunConfig(
        bath=_parse_bath(sections["bath"]),
        system=_parse_system(sections["system"]),
        noise=_parse_noise(sections["noise"]) if "noise" in sections else None,
        solver=_parse_solver(sections["solver"]),
        outputs=_parse_outputs(sections.get("outputs")),
    )
    if "sweep" not in sections:
        return run

    r = _SectionReader(sections["sweep"])
    quantity = r.word("quantity", _QUANTITIES)
    axis1 = _parse_axis(r, "axis1")
    axis2 = _parse_axis(r, "axis2")
    r.finish()
    for axis in (axis1, axis2):
        if axis.name in ("nu", "omega_amp", "color") and run.noise is None:
            raise ConfigError(
                f"[sweep]: axis {axis.name!r} needs a [noise] section in the template"
            )
    return SweepConfig(axis1=axis1, axis2=axis2, fixed=run, quantity=quantity)


def apply_axis(run: RunConfig, name: str, value: float) -> RunConfig:
    """Return a copy of `run` with one named parameter replaced."""
    bath, sysp, noise = run.bath, run.system, run.noise
    if name in ("kappa", "omega0", "gamma", "beta"):
        kw = dict(kappa=bath.kappa, omega0=bath.omega0, gamma=bath.gamma, beta=bath.beta)
        kw[name] = value
        bath = BathParams(**kw)
    elif name == "alpha":
        bath = BathParams.from_alpha(value, omega0=bath.omega0, gamma=bath.gamma,
                                     beta=bath.beta)
    elif name in ("epsilon0", "tunneling"):
        kw = dict(epsilon0=sysp.epsilon0, tunneling=sysp.tunneling)
        kw[name] = value
        sysp = SystemParams(**kw)
    elif name in ("nu", "omega_amp", "color"):
        if noise is None:
            raise ConfigError(f"axis {name!r} requires a noise block")
        if name == "nu":
            noise = NoiseParams(omega_amp=noise.omega_amp, nu=value)
        elif name == "omega_amp":
            noise = NoiseParams(omega_amp=value, nu=noise.nu)
        else:
            noise = NoiseParams.from_color(value, nu=noise.nu)
    else:
        raise ConfigError(f"unknown axis parameter {name!r}")
    return RunConfig(bath=bath, system=sysp, noise=noise, solver=run.solver,
                     outputs=run.outputs)


def resolve_step(run: RunConfig) -> float:
    """The configured step, or the default rule snapped to the horizon."""
    if run.solver.step is not None:
        h = run.solver.step
        n = round(run.solver.horizon / h)
        if n < 10 or not math.isclose(n * h, run.solver.horizon, rel_tol=1e-6):
            raise ConfigError("horizon/step must be an integer >= 10")
        return run.solver.horizon / n
    return default_step(run.system, run.noise, run.bath.omega0, run.solver.horizon)
