"""Run configuration: a flat ``dotted.key = value`` text file.

Recognised keys and defaults::

    params.alpha = -0.5        params.a = 1        params.m = 1
    params.gamma = 1           params.T = 1
    grid.physical.extent = 12  grid.physical.nodes = 96   grid.physical.panels = 1
    grid.spectral.extent = 12  grid.spectral.nodes = 96   grid.spectral.panels = 1
    grid.time.steps = 256
    data.g = zero              data.f = zero              data.f_time = const
    data.phi = zero            data.psi = zero            data.input = zero
    output.dir = .
    tolerance.transform = none tolerance.residual = 1e-2
    stability.epsilons = 1,0.5,0.1
    stability.profile = gaussian(1, 0, 1)

Node counts are per half-axis. Profiles are ``zero``,
``gaussian(sigma, center, amplitude)`` for ``amplitude * exp(-((x - center) / sigma)^2)``,
``gausspoly(sigma, center, amplitude, c0, c1, ...)`` for the same Gaussian times
``c0 + c1 (x - center) + ...``, or a path to a function CSV (``csv:`` prefix
optional when the name ends in ``.csv``; relative to the config file). CSV samples are interpolated with a
cubic spline and taken as zero outside their range. ``data.f_time`` is
``const`` or ``decay(rate)`` for a source ``f(x) exp(-rate t)``.
``stability.profile`` is the final-data perturbation scaled by each epsilon.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .dunkl import PhysicalGrid, ProblemParams, SpectralGrid
from .forward import Grids
from .fractional import TimeGrid
from .serialize import read_function_csv

__all__ = ["ConfigError", "Profile", "TimeProfile", "RunConfig", "parse_profile", "parse_time_profile",
           "load_config", "parse_config_text"]


class ConfigError(ValueError):
    """The configuration is malformed or inconsistent."""


_CALL = re.compile(r"^([a-z_]+)\s*\((.*)\)$")


def _numbers(text: str, what: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",")] if text.strip() else []
    except ValueError:
        raise ConfigError(f"non-numeric argument in {what}") from None


@dataclass(frozen=True)
class Profile:
    """A named sample profile in one variable."""

    kind: str
    args: tuple[float, ...] = ()
    path: Path | None = None

    def sample(self, nodes: np.ndarray) -> np.ndarray:
        x = np.asarray(nodes, dtype=float)
        if self.kind == "zero":
            return np.zeros(x.shape, dtype=complex)
        if self.kind in ("gaussian", "gausspoly"):
            sigma, center, amplitude = self.args[:3]
            shifted = x - center
            out = amplitude * np.exp(-((shifted / sigma) ** 2))
            if self.kind == "gausspoly":
                out = out * np.polynomial.polynomial.polyval(shifted, self.args[3:])
            return out.astype(complex)
        _, _, coords, values = read_function_csv(self.path)
        inside = (x >= coords[0]) & (x <= coords[-1])
        out = np.zeros(x.shape, dtype=complex)
        out[inside] = CubicSpline(coords, values)(x[inside])
        return out

    def csv_kind(self) -> str | None:
        return read_function_csv(self.path)[0] if self.kind == "csv" else None


def parse_profile(text: str, base: Path | None = None) -> Profile:
    text = text.strip()
    if text == "zero":
        return Profile("zero")
    if text.startswith("csv:") or text.endswith(".csv"):
        path = Path(text[4:] if text.startswith("csv:") else text)
        if base is not None and not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ConfigError(f"profile file {path} does not exist")
        try:
            read_function_csv(path)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return Profile("csv", path=path)
    match = _CALL.match(text)
    if not match:
        raise ConfigError(f"cannot parse profile {text!r}")
    name, args = match.group(1), _numbers(match.group(2), text)
    if name == "gaussian" and len(args) == 3 or name == "gausspoly" and len(args) >= 4:
        if not args[0] > 0:
            raise ConfigError(f"profile width must be positive in {text!r}")
        return Profile(name, tuple(args))
    raise ConfigError(f"unknown profile or wrong argument count: {text!r}")


@dataclass(frozen=True)
class TimeProfile:
    """Time modulation ``f(t, x) = f(x) * exp(-rate t)``; ``const`` is rate 0."""

    rate: float = 0.0

    def factor(self, t: np.ndarray) -> np.ndarray:
        return np.exp(-self.rate * np.asarray(t, dtype=float))

    def derivative(self, t: np.ndarray) -> np.ndarray:
        return -self.rate * self.factor(t)


def parse_time_profile(text: str) -> TimeProfile:
    text = text.strip()
    if text == "const":
        return TimeProfile(0.0)
    match = _CALL.match(text)
    if match and match.group(1) == "decay":
        args = _numbers(match.group(2), text)
        if len(args) == 1 and math.isfinite(args[0]):
            return TimeProfile(args[0])
    raise ConfigError(f"cannot parse time profile {text!r}")


_DEFAULTS: dict[str, str] = {
    "params.alpha": "-0.5",
    "params.a": "1",
    "params.m": "1",
    "params.gamma": "1",
    "params.T": "1",
    "grid.physical.extent": "12",
    "grid.physical.nodes": "96",
    "grid.physical.panels": "1",
    "grid.spectral.extent": "12",
    "grid.spectral.nodes": "96",
    "grid.spectral.panels": "1",
    "grid.time.steps": "256",
    "data.g": "zero",
    "data.f": "zero",
    "data.f_time": "const",
    "data.phi": "zero",
    "data.psi": "zero",
    "data.input": "zero",
    "output.dir": ".",
    "tolerance.transform": "none",
    "tolerance.residual": "1e-2",
    "stability.epsilons": "1,0.5,0.1",
    "stability.profile": "gaussian(1, 0, 1)",
}


@dataclass(frozen=True)
class RunConfig:
    params: ProblemParams
    physical_extent: float
    physical_nodes: int
    physical_panels: int
    spectral_extent: float
    spectral_nodes: int
    spectral_panels: int
    time_steps: int
    profiles: dict = field(default_factory=dict)
    f_time: TimeProfile = TimeProfile()
    output_dir: Path = Path(".")
    transform_tol: float | None = None
    residual_tol: float = 1e-2
    epsilons: tuple[float, ...] = (1.0, 0.5, 0.1)

    def grids(self) -> Grids:
        return Grids(
            PhysicalGrid.gauss_legendre(self.physical_extent, self.physical_nodes, self.physical_panels),
            SpectralGrid.gauss_legendre(self.params.alpha, self.spectral_extent, self.spectral_nodes,
                                        self.spectral_panels),
            TimeGrid.uniform(self.params.T, self.time_steps),
        )

    def describe(self) -> dict:
        p = self.params
        return {
            "params": {"alpha": p.alpha, "a": p.a, "m": p.m, "gamma": p.gamma, "T": p.T},
            "grid": {
                "physical": {"kind": "gauss-legendre", "extent": self.physical_extent,
                             "nodes_per_half_axis": self.physical_nodes, "panels": self.physical_panels},
                "spectral": {"kind": "gauss-legendre", "extent": self.spectral_extent,
                             "nodes_per_half_axis": self.spectral_nodes, "panels": self.spectral_panels},
                "time": {"kind": "uniform", "T": p.T, "steps": self.time_steps},
            },
        }


def _strip_value(raw: str) -> str:
    raw = raw.strip()
    if raw[:1] in ("'", '"'):
        end = raw.find(raw[0], 1)
        if end < 0:
            raise ConfigError(f"unterminated quote in {raw!r}")
        return raw[1:end]
    return raw.split("#", 1)[0].strip()


def parse_config_text(text: str, base: Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Parse config text; any bad entry rejects the whole file."""
    values = dict(_DEFAULTS)
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        values[key] = _strip_value(raw)
    values.update(overrides or {})
    return _build(values, base)


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    if path is None:
        return parse_config_text("", None, overrides)
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, path.parent, overrides)


def _build(values: dict[str, str], base: Path | None) -> RunConfig:
    def real(key: str) -> float:
        try:
            v = float(values[key])
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {values[key]!r}") from None
        if not math.isfinite(v):
            raise ConfigError(f"{key}: must be finite")
        return v

    def count(key: str, minimum: int = 8) -> int:
        v = real(key)
        if v != int(v) or v < minimum:
            raise ConfigError(f"{key}: expected an integer >= {minimum}, got {values[key]!r}")
        return int(v)

    def extent(key: str) -> float:
        v = real(key)
        if not v > 0:
            raise ConfigError(f"{key}: must be positive")
        return v

    try:
        params = ProblemParams(real("params.alpha"), real("params.a"), real("params.m"),
                               real("params.gamma"), real("params.T"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    grid = {}
    for side in ("physical", "spectral"):
        nodes = count(f"grid.{side}.nodes")
        panels = count(f"grid.{side}.panels", 1)
        if nodes % panels:
            raise ConfigError(f"grid.{side}.nodes must be a multiple of grid.{side}.panels")
        grid[side] = (extent(f"grid.{side}.extent"), nodes, panels)

    profiles = {name: parse_profile(values[f"data.{name}"], base) for name in ("g", "f", "phi", "psi", "input")}
    profiles["stability"] = parse_profile(values["stability.profile"], base)
    tol_text = values["tolerance.transform"].strip().lower()
    transform_tol = None if tol_text in ("", "none") else extent("tolerance.transform")
    epsilons = tuple(_numbers(values["stability.epsilons"], "stability.epsilons"))
    if not epsilons:
        raise ConfigError("stability.epsilons must list at least one value")
    return RunConfig(
        params=params,
        physical_extent=grid["physical"][0], physical_nodes=grid["physical"][1],
        physical_panels=grid["physical"][2],
        spectral_extent=grid["spectral"][0], spectral_nodes=grid["spectral"][1],
        spectral_panels=grid["spectral"][2],
        time_steps=count("grid.time.steps"),
        profiles=profiles,
        f_time=parse_time_profile(values["data.f_time"]),
        output_dir=Path(values["output.dir"]),
        transform_tol=transform_tol,
        residual_tol=extent("tolerance.residual"),
        epsilons=epsilons,
    )
