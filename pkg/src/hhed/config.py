"""TOML run configurations.

A config has a ``[model]`` table in exactly one of three styles, an
optional ``[run]`` table and an optional ``[output]`` table::

    [model]                  # style 1: named preset
    preset = "star4"         # chainN, ringN, starN, dimer, lieb-cell
    t0 = -1.0
    U0 = 8.0
    g0 = 0.5
    omega = 1.0

    [model]                  # style 2: explicit matrices
    sites = ["a", "b"]
    sublattice = ["A", "B"]  # optional, derived from t when absent
    t = [[0, -1], [-1, 0]]
    U = [[4, 0], [0, 4]]
    g = [[0.5, 0], [0, 0.5]]
    omega = 1.0
    positions = [[0], [1]]   # optional, needed for susceptibility

    [model]                  # style 3: Fourier samples on a periodic box
    omega = 2.0
    t0 = -1.0                # nearest-neighbour hopping
    [model.fourier]
    d = 1
    L = 2
    G = 1.0                  # number, or flat list of (2L)^d mesh samples
    U = 4.0

See README.md for the ``[run]`` and ``[output]`` keys.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, ParseError, ValidationError
from .model import (
    FourierCouplingSpec,
    ModelSpec,
    build_model,
    fourier_model,
    nearest_neighbor_hopping,
)
from .presets import preset_model

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CHECK_NAMES = ("uniqueness", "total_spin", "sign_pattern", "lro", "susceptibility",
               "adiabatic", "heisenberg")
DEFAULT_CHECKS = ("uniqueness", "total_spin", "sign_pattern", "lro")
FORMATS = ("json", "csv", "txt")
FRAMES = ("bare", "displaced")

_MODEL_KEYS = {
    "preset": {"preset", "t0", "U0", "g0", "omega"},
    "explicit": {"sites", "sublattice", "t", "U", "g", "omega", "positions"},
    "fourier": {"fourier", "omega", "t0"},
}
_FOURIER_KEYS = {"d", "L", "G", "U", "primitive_vectors"}
_RUN_KEYS = {"M", "cutoffs", "thetas", "U0_grid", "k", "checks", "frame", "max_dim",
             "adiabatic_cutoffs"}
_OUTPUT_KEYS = {"directory", "formats"}


@dataclass
class RunConfig:
    model: ModelSpec
    style: str
    M: list | None = None
    cutoffs: list = field(default_factory=lambda: [4, 5, 6])
    thetas: list = field(default_factory=lambda: [1, 2, 4, 8, 16, 32])
    U0_grid: list = field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64, 128, 256])
    adiabatic_cutoffs: list = field(default_factory=lambda: [5, 6])
    k_points: np.ndarray | None = None
    checks: list = field(default_factory=lambda: list(DEFAULT_CHECKS))
    frame: str = "displaced"
    max_dim: int = 2000
    output_dir: str = "hhed-out"
    formats: list = field(default_factory=lambda: list(FORMATS))
    description: str = ""


def _loads(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        msg = getattr(exc, "msg", str(exc))
        if line is None:
            m = re.search(r"line (\d+), column (\d+)", str(exc))
            if m:
                line, col = int(m.group(1)), int(m.group(2))
            msg = re.sub(r"\s*\(at line \d+, column \d+\)", "", msg)
        raise ParseError(msg, line, col) from None


def _number(table, key, name, required=False, default=None, positive=False):
    if key not in table:
        if required:
            raise ValidationError(f"{key} required", name)
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{name} must be a number", name)
    if positive and not v > 0:
        raise ValidationError(f"{name} must be positive", name)
    return float(v)


def _matrix(table, key, n=None):
    name = f"model.{key}"
    if key not in table:
        raise ValidationError(f"{key} required", name)
    try:
        m = np.array(table[key], dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a numeric matrix", name) from None
    if m.ndim != 2 or m.shape[0] != m.shape[1] or (n is not None and m.shape[0] != n):
        raise ValidationError(f"{name} must be a square {n}x{n} matrix", name)
    return m


def _grid(table, key, section, kind=float, minimum=None):
    name = f"{section}.{key}"
    v = table[key]
    if not isinstance(v, list) or not v:
        raise ValidationError(f"{name} must be a nonempty list", name)
    if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        raise ValidationError(f"{name} must contain numbers", name)
    if kind is int and any(float(x) != int(x) for x in v):
        raise ValidationError(f"{name} must contain integers", name)
    vals = [kind(x) for x in v]
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValidationError(f"{name} must be strictly increasing", name)
    if minimum is not None and vals[0] < minimum:
        raise ValidationError(f"{name} entries must be >= {minimum}", name)
    return vals


def _unknown(table, allowed, section):
    extra = sorted(set(table) - allowed)
    if extra:
        raise ValidationError(f"unknown key {extra[0]!r} in [{section}]", f"{section}.{extra[0]}")


def _model_style(model: dict) -> str:
    styles = []
    if "preset" in model:
        styles.append("preset")
    if "fourier" in model:
        styles.append("fourier")
    if any(k in model for k in ("sites", "t", "U", "g")):
        styles.append("explicit")
    if len(styles) != 1:
        raise ValidationError(
            "model must use exactly one of: preset, explicit matrices, [model.fourier]"
            + (f" (found {', '.join(styles)})" if styles else ""), "model")
    return styles[0]


def _build_preset(model: dict) -> ModelSpec:
    _unknown(model, _MODEL_KEYS["preset"], "model")
    omega = _number(model, "omega", "model.omega", required=True, positive=True)
    kw = {k: _number(model, k, f"model.{k}", default=d)
          for k, d in (("t0", -1.0), ("U0", 4.0), ("g0", 0.0))}
    if not isinstance(model["preset"], str):
        raise ValidationError("model.preset must be a string", "model.preset")
    try:
        return preset_model(model["preset"], omega=omega, **kw)
    except KeyError as exc:
        raise ValidationError(exc.args[0], "model.preset") from None


def _build_explicit(model: dict) -> ModelSpec:
    _unknown(model, _MODEL_KEYS["explicit"], "model")
    omega = _number(model, "omega", "model.omega", required=True, positive=True)
    if "sites" not in model:
        raise ValidationError("sites required", "model.sites")
    sites = model["sites"]
    if not isinstance(sites, list) or not sites:
        raise ValidationError("model.sites must be a nonempty list", "model.sites")
    n = len(sites)
    t, U, g = (_matrix(model, k, n) for k in ("t", "U", "g"))
    sub = model.get("sublattice")
    if sub is not None and (not isinstance(sub, list) or len(sub) != n
                            or any(s not in ("A", "B") for s in sub)):
        raise ValidationError(f"model.sublattice must list 'A'/'B' for all {n} sites",
                              "model.sublattice")
    positions = None
    if "positions" in model:
        try:
            positions = np.array(model["positions"], dtype=float)
        except (TypeError, ValueError):
            raise ValidationError("model.positions must be numeric", "model.positions") from None
        if positions.ndim == 1:
            positions = positions[:, None]
        if positions.ndim != 2 or positions.shape[0] != n:
            raise ValidationError(f"model.positions must have {n} rows", "model.positions")
    return build_model(sites, sub, t, U, g, omega, positions=positions)


def _build_fourier(model: dict) -> ModelSpec:
    _unknown(model, _MODEL_KEYS["fourier"], "model")
    omega = _number(model, "omega", "model.omega", required=True, positive=True)
    t0 = _number(model, "t0", "model.t0", default=-1.0)
    fb = model["fourier"]
    if not isinstance(fb, dict):
        raise ValidationError("model.fourier must be a table", "model.fourier")
    _unknown(fb, _FOURIER_KEYS, "model.fourier")
    for key in ("d", "L", "G", "U"):
        if key not in fb:
            raise ValidationError(f"{key} required", f"model.fourier.{key}")
    d, L = fb["d"], fb["L"]
    if not isinstance(d, int) or isinstance(d, bool) or d not in (1, 2, 3):
        raise ValidationError("model.fourier.d must be 1, 2 or 3", "model.fourier.d")
    if not isinstance(L, int) or isinstance(L, bool) or L < 1:
        raise ValidationError("model.fourier.L must be a positive integer", "model.fourier.L")
    shape = (2 * L,) * d
    samples = {}
    for key in ("G", "U"):
        v = fb[key]
        try:
            arr = np.array(v, dtype=float)
        except (TypeError, ValueError):
            raise ValidationError(f"model.fourier.{key} must be numeric", f"model.fourier.{key}") from None
        if arr.ndim == 0:
            samples[key] = float(arr)
        elif arr.size == int(np.prod(shape)):
            samples[key] = arr.reshape(shape)
        else:
            raise ValidationError(f"model.fourier.{key} needs 1 or {int(np.prod(shape))} samples",
                                  f"model.fourier.{key}")
    a = fb.get("primitive_vectors")
    if a is not None:
        a = np.array(a, dtype=float)
        if a.shape != (d, d):
            raise ValidationError(f"model.fourier.primitive_vectors must be {d}x{d}",
                                  "model.fourier.primitive_vectors")
    spec = FourierCouplingSpec.create(d, L, samples["G"], samples["U"], a)
    fm = fourier_model(spec)
    t = nearest_neighbor_hopping(d, L, t0)
    sites = [",".join(str(int(round(c))) for c in row) for row in
             np.rint(fm.positions @ np.linalg.inv(spec.primitive_vectors))]
    return build_model(sites, None, t, fm.U, fm.g, omega, positions=fm.positions,
                       k_points=fm.k_points)


def _describe(style: str, table: dict, model: ModelSpec) -> str:
    if style == "preset":
        pars = ", ".join(f"{k}={table[k]:g}" for k in ("t0", "U0", "g0", "omega") if k in table)
        return f"preset {table['preset']} ({pars})"
    if style == "fourier":
        f = table["fourier"]
        return f"fourier d={f.get('d')} L={f.get('L')} omega={model.omega:g}"
    return f"explicit {model.n_sites} sites omega={model.omega:g}"


def parse_config(text: str) -> RunConfig:
    data = _loads(text)
    _unknown(data, {"model", "run", "output"}, "top level")
    if "model" not in data or not isinstance(data["model"], dict):
        raise ValidationError("model table required", "model")
    style = _model_style(data["model"])
    builder = {"preset": _build_preset, "explicit": _build_explicit, "fourier": _build_fourier}[style]
    try:
        model = builder(data["model"])
    except ModelError as exc:
        raise ValidationError(str(exc), "model") from exc
    cfg = RunConfig(model=model, style=style, description=_describe(style, data["model"], model))
    cfg.k_points = model.k_points

    run = data.get("run", {})
    _unknown(run, _RUN_KEYS, "run")
    if "M" in run:
        ms = _grid(run, "M", "run")
        if any(abs(2 * m - round(2 * m)) > 1e-12 or abs(m) > model.n_sites / 2 for m in ms):
            raise ValidationError("run.M entries must be half-integers within +-|sites|/2", "run.M")
        cfg.M = ms
    if "cutoffs" in run:
        cfg.cutoffs = _grid(run, "cutoffs", "run", int, minimum=0)
    if "adiabatic_cutoffs" in run:
        cfg.adiabatic_cutoffs = _grid(run, "adiabatic_cutoffs", "run", int, minimum=0)
    if "thetas" in run:
        cfg.thetas = _grid(run, "thetas", "run", minimum=1)
    if "U0_grid" in run:
        cfg.U0_grid = _grid(run, "U0_grid", "run")
        if cfg.U0_grid[0] <= 0:
            raise ValidationError("run.U0_grid entries must be positive", "run.U0_grid")
    if "k" in run:
        try:
            ks = np.array(run["k"], dtype=float)
        except (TypeError, ValueError):
            raise ValidationError("run.k must be numeric", "run.k") from None
        d = model.positions.shape[1] if model.positions is not None else 1
        if ks.ndim < 2:
            ks = ks.reshape(-1, d)
        if ks.ndim != 2 or ks.shape[1] != d or ks.shape[0] == 0:
            raise ValidationError(f"run.k must be a list of {d}-dimensional vectors", "run.k")
        cfg.k_points = ks
    if "checks" in run:
        checks = run["checks"]
        if not isinstance(checks, list) or not checks:
            raise ValidationError("run.checks must be a nonempty list", "run.checks")
        bad = [c for c in checks if c not in CHECK_NAMES]
        if bad:
            raise ValidationError(f"unknown check {bad[0]!r}", "run.checks")
        cfg.checks = list(dict.fromkeys(checks))
    if "frame" in run:
        if run["frame"] not in FRAMES:
            raise ValidationError("run.frame must be 'bare' or 'displaced'", "run.frame")
        cfg.frame = run["frame"]
    if "max_dim" in run:
        v = run["max_dim"]
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise ValidationError("run.max_dim must be a nonnegative integer", "run.max_dim")
        cfg.max_dim = v

    out = data.get("output", {})
    _unknown(out, _OUTPUT_KEYS, "output")
    if "directory" in out:
        if not isinstance(out["directory"], str) or not out["directory"]:
            raise ValidationError("output.directory must be a nonempty string", "output.directory")
        cfg.output_dir = out["directory"]
    if "formats" in out:
        fm = out["formats"]
        if not isinstance(fm, list) or any(f not in FORMATS for f in fm):
            raise ValidationError(f"output.formats must be drawn from {list(FORMATS)}",
                                  "output.formats")
        cfg.formats = list(dict.fromkeys(fm))
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
