"""CSV and JSON serialization with full-precision, deterministic number formatting.

Function files start with ``# kind,alpha,n`` followed by ``coordinate,re,im`` rows.
Grid files start with ``# kind-grid,alpha,n`` followed by ``node,weight`` rows.
Field files start with ``# field,alpha,nt,nx`` followed by ``t,x,re,im`` rows.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dunkl import PhysicalFunction, PhysicalGrid, SpectralFunction, SpectralGrid

__all__ = [
    "fmt",
    "write_function_csv",
    "read_function_csv",
    "write_grid_csv",
    "write_field_csv",
    "read_field_csv",
    "write_json",
]


def fmt(value: float) -> str:
    """Shortest round-tripping decimal form of a float."""
    return repr(float(value))


def _header(path: Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    if not first.startswith("#"):
        raise ValueError(f"{path}: missing '# kind,...' header line")
    return [p.strip() for p in first[1:].split(",")]


def write_function_csv(path, f: PhysicalFunction | SpectralFunction, alpha: float) -> None:
    kind = "spectral" if isinstance(f, SpectralFunction) else "physical"
    lines = [f"# {kind},{fmt(alpha)},{f.grid.size}"]
    for c, v in zip(f.grid.nodes, f.values):
        lines.append(f"{fmt(c)},{fmt(v.real)},{fmt(v.imag)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_function_csv(path) -> tuple[str, float, np.ndarray, np.ndarray]:
    """Return ``(kind, alpha, coordinates, complex values)``."""
    path = Path(path)
    head = _header(path)
    if len(head) != 3 or head[0] not in ("physical", "spectral"):
        raise ValueError(f"{path}: expected '# physical|spectral,alpha,n' header")
    kind, alpha, n = head[0], float(head[1]), int(head[2])
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape != (n, 3):
        raise ValueError(f"{path}: expected {n} rows of coordinate,re,im, got shape {data.shape}")
    return kind, alpha, data[:, 0], data[:, 1] + 1j * data[:, 2]


def write_grid_csv(path, grid: PhysicalGrid | SpectralGrid, alpha: float) -> None:
    kind = "spectral-grid" if isinstance(grid, SpectralGrid) else "physical-grid"
    lines = [f"# {kind},{fmt(alpha)},{grid.size}"]
    lines += [f"{fmt(x)},{fmt(w)}" for x, w in zip(grid.nodes, grid.weights)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_field_csv(path, tnodes: np.ndarray, xnodes: np.ndarray, values: np.ndarray, alpha: float) -> None:
    lines = [f"# field,{fmt(alpha)},{tnodes.size},{xnodes.size}"]
    for t, row in zip(tnodes, values):
        ts = fmt(t)
        lines += [f"{ts},{fmt(x)},{fmt(v.real)},{fmt(v.imag)}" for x, v in zip(xnodes, row)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_field_csv(path) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(alpha, t nodes, x nodes, complex values[t, x])``."""
    path = Path(path)
    head = _header(path)
    if len(head) != 4 or head[0] != "field":
        raise ValueError(f"{path}: expected '# field,alpha,nt,nx' header")
    alpha, nt, nx = float(head[1]), int(head[2]), int(head[3])
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape != (nt * nx, 4):
        raise ValueError(f"{path}: expected {nt * nx} rows of t,x,re,im")
    t = data[::nx, 0]
    x = data[:nx, 1]
    return alpha, t, x, (data[:, 2] + 1j * data[:, 3]).reshape(nt, nx)


def write_json(path, record: dict) -> None:
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
