"""Plain-text run configuration: [section] headers with key = value lines,
'#' comments. The whole file is validated before any allocation; unknown
sections or keys are errors."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field as dc_field

from .diagnostics import DiagnosticsConfig, LyapunovConstants
from .scenarios import SCENARIO_KINDS, ScenarioConfig
from .solver import PhysicalParams, SolverConfig

__all__ = ["ConfigError", "RunConfig", "parse_config", "config_hash", "DEFAULT_CONFIG"]


class ConfigError(ValueError):
    """One or more invalid configuration entries; exit code 2 at the CLI."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


_SCHEMA = {
    "grid": {"n", "L", "dim"},
    "params": {"mu", "lambda", "gamma"},
    "solver": {"dt", "cfl", "scheme", "T", "cadence", "adaptive", "strict_mode"},
    "scenario": {
        "kind",
        "epsilon",
        "p0",
        "seed",
        "eps_osc",
        "amplitude",
        "vertical_amplitude",
        "p",
        "smallness_constant",
        "eps_pert",
        "R0",
        "bump_radius",
    },
    "diagnostics": {
        "norms",
        "p_list",
        "p0_list",
        "C_split",
        "R0",
        "lyapunov",
        "holder_alpha",
        "holder_every",
        "holder_radius",
        "fit_norm",
        "fit_window",
    },
    "output": {"directory", "formats", "checkpoint_every"},
}


@dataclass
class RunConfig:
    grid_n: int = 32
    grid_L: float = 8.0 * math.pi
    grid_dim: int = 3
    params: PhysicalParams = dc_field(default_factory=PhysicalParams)
    solver: SolverConfig = dc_field(default_factory=SolverConfig)
    scenario: ScenarioConfig = dc_field(
        default_factory=lambda: ScenarioConfig(kind="equilibrium_perturbation")
    )
    diagnostics: DiagnosticsConfig = dc_field(default_factory=DiagnosticsConfig)
    fit_norm: str = "l2_au"
    fit_window: tuple | None = None
    out_directory: str = "out"
    out_formats: tuple = ("csv", "json", "checkpoint")
    checkpoint_every: int = 0  # 0: final checkpoint only
    raw_text: str = ""

    def echo(self) -> dict:
        return {
            "grid": {"n": self.grid_n, "L": self.grid_L, "dim": self.grid_dim},
            "params": {
                "mu": self.params.mu,
                "lambda": self.params.lam,
                "gamma": self.params.gamma,
            },
            "solver": {
                "dt": self.solver.dt,
                "cfl": self.solver.cfl_target,
                "scheme": self.solver.scheme,
                "T": self.solver.T,
                "cadence": self.solver.cadence,
                "adaptive": self.solver.adaptive,
                "strict_mode": self.solver.strict_mode,
            },
            "scenario": {
                "kind": self.scenario.kind,
                "epsilon": self.scenario.epsilon,
                "p0": self.scenario.p0,
                "seed": self.scenario.seed,
                "eps_osc": self.scenario.eps_osc,
                "amplitude": self.scenario.amplitude,
                "vertical_amplitude": self.scenario.vertical_amplitude,
                "p": self.scenario.p,
                "smallness_constant": self.scenario.smallness_constant,
                "eps_pert": self.scenario.eps_pert,
                "R0": self.scenario.R0,
                "bump_radius": self.scenario.bump_radius,
            },
            "diagnostics": {
                "p_list": list(self.diagnostics.p_list),
                "p0_list": list(self.diagnostics.p0_list),
                "C_split": self.diagnostics.c_split,
                "R0": self.diagnostics.R0,
                "holder_alpha": self.diagnostics.holder_alpha,
                "fit_norm": self.fit_norm,
                "fit_window": list(self.fit_window) if self.fit_window else None,
            },
            "output": {
                "directory": self.out_directory,
                "formats": list(self.out_formats),
                "checkpoint_every": self.checkpoint_every,
            },
        }


def _parse_sections(text: str):
    problems = []
    sections: dict[str, dict[str, str]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in _SCHEMA:
                problems.append(f"line {lineno}: unknown section [{current}]")
                current = None
            else:
                sections.setdefault(current, {})
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected key = value, got {line!r}")
            continue
        if current is None:
            problems.append(f"line {lineno}: key outside any valid section")
            continue
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA[current]:
            problems.append(f"line {lineno}: unknown key {key!r} in section [{current}]")
            continue
        if key in sections[current]:
            problems.append(f"line {lineno}: duplicate key {key!r} in section [{current}]")
            continue
        sections[current][key] = val
    return sections, problems


def _get(sections, sec, key, conv, default, problems):
    raw = sections.get(sec, {}).get(key)
    if raw is None:
        return default
    try:
        return conv(raw)
    except (ValueError, TypeError) as exc:
        problems.append(f"[{sec}] {key} = {raw!r}: {exc}")
        return default


def _as_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _as_float_list(raw: str):
    return [float(x) for x in raw.split(",") if x.strip()]


def parse_config(text: str) -> RunConfig:
    sections, problems = _parse_sections(text)

    n = _get(sections, "grid", "n", int, 32, problems)
    L = _get(sections, "grid", "L", float, 8.0 * math.pi, problems)
    dim = _get(sections, "grid", "dim", int, 3, problems)

    mu = _get(sections, "params", "mu", float, 1.0, problems)
    lam = _get(sections, "params", "lambda", float, 0.0, problems)
    gamma = _get(sections, "params", "gamma", float, 1.4, problems)

    dt = _get(sections, "solver", "dt", float, 0.01, problems)
    cfl = _get(sections, "solver", "cfl", float, 0.4, problems)
    scheme = _get(sections, "solver", "scheme", str, "imex2", problems)
    horizon = _get(sections, "solver", "T", float, 1.0, problems)
    cadence = _get(sections, "solver", "cadence", str, "geometric", problems)
    adaptive = _get(sections, "solver", "adaptive", _as_bool, True, problems)
    strict = _get(sections, "solver", "strict_mode", _as_bool, False, problems)

    kind = _get(sections, "scenario", "kind", str, "equilibrium_perturbation", problems)
    scen_kwargs = dict(
        epsilon=_get(sections, "scenario", "epsilon", float, 1e-2, problems),
        p0=_get(sections, "scenario", "p0", float, 1.0, problems),
        seed=_get(sections, "scenario", "seed", int, 0, problems),
        eps_osc=_get(sections, "scenario", "eps_osc", float, 0.25, problems),
        amplitude=_get(sections, "scenario", "amplitude", float, 1.0, problems),
        vertical_amplitude=_get(
            sections, "scenario", "vertical_amplitude", float, 1.0, problems
        ),
        p=_get(sections, "scenario", "p", float, 2.0, problems),
        smallness_constant=_get(
            sections, "scenario", "smallness_constant", float, 1.0, problems
        ),
        eps_pert=_get(sections, "scenario", "eps_pert", float, 1e-3, problems),
        R0=_get(sections, "scenario", "R0", float, 1.0, problems),
    )
    bump_raw = sections.get("scenario", {}).get("bump_radius")
    if bump_raw not in (None, "", "none"):
        try:
            scen_kwargs["bump_radius"] = float(bump_raw)
        except ValueError:
            problems.append(f"[scenario] bump_radius = {bump_raw!r}: not a float")

    norm_entries = _get(sections, "diagnostics", "norms", str, "", problems)
    norms = []
    if norm_entries:
        for entry in norm_entries.split(";"):
            entry = entry.strip()
            if not entry:
                continue
            try:
                norms.append(DiagnosticsConfig.parse_norm_entry(entry))
            except ValueError as exc:
                problems.append(f"[diagnostics] norms: {exc}")
    p_list = _get(sections, "diagnostics", "p_list", _as_float_list, [2.0], problems)
    p0_list = _get(sections, "diagnostics", "p0_list", _as_float_list, [1.0], problems)
    c_split = _get(sections, "diagnostics", "C_split", float, 1.0, problems)
    r0 = _get(sections, "diagnostics", "R0", float, 1.0, problems)
    lyap_raw = _get(sections, "diagnostics", "lyapunov", str, "calibrate", problems)
    if lyap_raw == "calibrate":
        lyapunov = "calibrate"
    else:
        try:
            vals = _as_float_list(lyap_raw)
            if len(vals) != 6:
                raise ValueError("need 6 comma-separated constants or 'calibrate'")
            lyapunov = LyapunovConstants(*vals)
        except ValueError as exc:
            problems.append(f"[diagnostics] lyapunov: {exc}")
            lyapunov = "calibrate"
    holder_alpha_raw = sections.get("diagnostics", {}).get("holder_alpha")
    holder_alpha = None
    if holder_alpha_raw not in (None, "", "none"):
        try:
            holder_alpha = float(holder_alpha_raw)
        except ValueError:
            problems.append(f"[diagnostics] holder_alpha = {holder_alpha_raw!r}: not a float")
    holder_every = _get(sections, "diagnostics", "holder_every", int, 1, problems)
    holder_radius = _get(sections, "diagnostics", "holder_radius", int, 4, problems)
    fit_norm = _get(sections, "diagnostics", "fit_norm", str, "l2_au", problems)
    fit_window_raw = sections.get("diagnostics", {}).get("fit_window")
    fit_window = None
    if fit_window_raw:
        try:
            vals = _as_float_list(fit_window_raw)
            if len(vals) != 2:
                raise ValueError("fit_window needs exactly two times")
            fit_window = (vals[0], vals[1])
        except ValueError as exc:
            problems.append(f"[diagnostics] fit_window: {exc}")

    out_dir = _get(sections, "output", "directory", str, "out", problems)
    fmt_raw = _get(sections, "output", "formats", str, "csv,json,checkpoint", problems)
    formats = tuple(x.strip() for x in fmt_raw.split(",") if x.strip())
    for f in formats:
        if f not in ("csv", "json", "checkpoint", "plots"):
            problems.append(f"[output] formats: unknown format {f!r}")
    ckpt_every = _get(sections, "output", "checkpoint_every", int, 0, problems)

    # construct validated immutable pieces, folding their errors into the list
    params = solver = scenario = None
    try:
        params = PhysicalParams(mu=mu, lam=lam, gamma=gamma)
        if strict:
            params.validate_strict()
    except ValueError as exc:
        problems.append(f"[params] {exc}")
    try:
        solver = SolverConfig(
            dt=dt, cfl_target=cfl, scheme=scheme, T=horizon, cadence=cadence,
            adaptive=adaptive, strict_mode=strict,
        )
    except ValueError as exc:
        problems.append(f"[solver] {exc}")
    try:
        if kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {kind!r}")
        scenario = ScenarioConfig(kind=kind, **scen_kwargs)
    except ValueError as exc:
        problems.append(f"[scenario] {exc}")
    try:
        from .spectral import _has_large_factor

        if not (isinstance(n, int) and n >= 8 and n % 2 == 0 and not _has_large_factor(n)):
            raise ValueError(f"n must be an even radix-2/3 size >= 8, got {n}")
        if not L > 0:
            raise ValueError("L must be positive")
        if dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {dim}")
    except ValueError as exc:
        problems.append(f"[grid] {exc}")

    if problems:
        raise ConfigError(problems)

    diag = DiagnosticsConfig(
        norms=norms,
        p_list=p_list,
        p0_list=p0_list,
        c_split=c_split,
        R0=r0,
        lyapunov=lyapunov,
        holder_alpha=holder_alpha,
        holder_every=holder_every,
        holder_radius=holder_radius,
    )
    return RunConfig(
        grid_n=n,
        grid_L=L,
        grid_dim=dim,
        params=params,
        solver=solver,
        scenario=scenario,
        diagnostics=diag,
        fit_norm=fit_norm,
        fit_window=fit_window,
        out_directory=out_dir,
        out_formats=formats,
        checkpoint_every=ckpt_every,
        raw_text=text,
    )


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


DEFAULT_CONFIG = """\
[grid]
n = 32
L = 25.132741228718345   # 8*pi
dim = 3

[params]
mu = 1.0
lambda = 0.0
gamma = 1.4

[solver]
dt = 0.02
cfl = 0.4
scheme = imex2
T = 2.0
cadence = geometric
adaptive = true
strict_mode = true

[scenario]
kind = equilibrium_perturbation
epsilon = 0.01
p0 = 1.0
seed = 7

[diagnostics]
norms = a:besov:s=0.5,p=2,r=1; u:besov:s=0.5,p=2,r=1
p_list = 2
p0_list = 1, 2
C_split = 1.0
R0 = 1.0
lyapunov = calibrate

[output]
directory = out
formats = csv,json,checkpoint
"""
