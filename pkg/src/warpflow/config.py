"""Run configuration: the ``key = value`` grammar and its validation.

A config file is UTF-8 text with one ``key = value`` per line. Blank lines
and lines starting with ``#`` are ignored; a ``#`` after a value starts a
comment. Values are

* double-quoted strings (JSON escapes), e.g. ``phi = "exp(1, 0.5)"``,
* ``true`` / ``false``,
* integer or float literals,
* anything else is taken verbatim as a bare string (``base = sphere``).

:func:`parse_config` reports every problem it finds, not just the first,
through a single :class:`ConfigError`.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .base import BaseGrid, parse_base
from .errors import ConfigError, OutOfBand, ParseError, ValidationError
from .expr import ExpressionError, compile_expression, evaluate
from .warping import WarpingProfile, make_profile, parse_phi

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_INT = re.compile(r"^[+-]?\d+$")
_FLOAT = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")

REQUIRED = ("phi", "base", "resolution", "K", "t_max", "rho0")
DEFAULTS = {
    "cfl": 0.2,
    "tol_osc": 1e-8,
    "record_every": 100,
    "override_conditions": False,
    "output_dir": "out",
    "emit_states": False,
    "h_evolution": False,
    "r0": None,
    "r_bar": None,
}
KEYS = REQUIRED + tuple(DEFAULTS)
MIN_RESOLUTION = 8


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration (see the module docstring for the grammar)."""

    phi: str
    base: str
    resolution: int
    K: float
    t_max: float
    rho0: str
    cfl: float = 0.2
    tol_osc: float = 1e-8
    record_every: int = 100
    override_conditions: bool = False
    output_dir: str = "out"
    emit_states: bool = False
    h_evolution: bool = False
    r0: float | None = None
    r_bar: float | None = None
    source_dir: str = field(default=".", compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source_dir")
        return d

    def replace(self, **changes) -> "RunConfig":
        d = asdict(self)
        d.update(changes)
        return RunConfig(**d)


def _parse_value(raw: str, lineno: int):
    raw = raw.strip()
    if raw.startswith('"'):
        try:
            value, end = json.JSONDecoder().raw_decode(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"bad string literal: {exc.msg}") from None
        rest = raw[end:].strip()
        if rest and not rest.startswith("#"):
            raise ParseError(lineno, f"unexpected text after string: {rest!r}")
        return value
    raw = raw.split("#", 1)[0].strip()
    if not raw:
        raise ParseError(lineno, "missing value")
    if raw in ("true", "false"):
        return raw == "true"
    if _INT.match(raw):
        return int(raw)
    if _FLOAT.match(raw):
        return float(raw)
    return raw


def _lex(text: str):
    """Yield (lineno, key, value) triples and collect ParseErrors."""
    entries, errors = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            errors.append(ParseError(lineno, f"expected 'key = value', got {stripped!r}"))
            continue
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if not _KEY.match(key):
            errors.append(ParseError(lineno, f"invalid key {key!r}"))
            continue
        try:
            entries.append((lineno, key, _parse_value(raw, lineno)))
        except ParseError as exc:
            errors.append(exc)
    return entries, errors


def _real(key, v, errors, positive=False, allow_zero=True):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        errors.append(ValidationError(key, f"expected a finite number, got {v!r}"))
        return None
    v = float(v)
    if positive and (v < 0 or (v == 0 and not allow_zero)):
        errors.append(ValidationError(key, f"must be {'non-negative' if allow_zero else 'positive'}, got {v!r}"))
        return None
    return v


def _validate(values: dict, errors: list, source_dir: Path):
    out = {}
    for key in REQUIRED:
        if key not in values:
            errors.append(ValidationError(key, "required key is missing"))

    for key in ("phi", "base", "rho0", "output_dir"):
        if key in values and not isinstance(values[key], str):
            errors.append(ValidationError(key, f"expected a string, got {values[key]!r}"))
        elif key in values:
            out[key] = values[key]

    if "resolution" in values:
        v = values["resolution"]
        if isinstance(v, bool) or not isinstance(v, int) or v < MIN_RESOLUTION:
            errors.append(ValidationError("resolution", f"expected an integer >= {MIN_RESOLUTION}, got {v!r}"))
        else:
            out["resolution"] = v
    if "record_every" in values:
        v = values["record_every"]
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            errors.append(ValidationError("record_every", f"expected a positive integer, got {v!r}"))
        else:
            out["record_every"] = v
    for key in ("override_conditions", "emit_states", "h_evolution"):
        if key in values:
            if not isinstance(values[key], bool):
                errors.append(ValidationError(key, f"expected true or false, got {values[key]!r}"))
            else:
                out[key] = values[key]

    if "cfl" in values:
        v = _real("cfl", values["cfl"], errors)
        if v is not None and not 0.0 < v <= 1.0:
            errors.append(ValidationError("cfl", f"must lie in (0, 1], got {v!r}"))
        elif v is not None:
            out["cfl"] = v
    for key in ("t_max", "tol_osc"):
        if key in values:
            v = _real(key, values[key], errors, positive=True, allow_zero=False)
            if v is not None:
                out[key] = v
    if "K" in values:
        v = _real("K", values["K"], errors, positive=True)
        if v is not None:
            out["K"] = v
    for key in ("r0", "r_bar"):
        if key in values:
            v = _real(key, values[key], errors)
            if v is not None:
                out[key] = v

    grid = None
    if "base" in out:
        try:
            grid = parse_base(out["base"], out.get("resolution", MIN_RESOLUTION))
        except (ValueError, ExpressionError) as exc:
            errors.append(ValidationError("base", str(exc)))
            out.pop("base")

    profile = None
    if "phi" in out:
        try:
            spec = parse_phi(out["phi"])
        except ValueError as exc:
            errors.append(ValidationError("phi", str(exc)))
        else:
            if spec["kind"] == "table" and not _resolve(spec["path"], source_dir).is_file():
                errors.append(ValidationError("phi", f"table file {spec['path']!r} not found"))
            elif not any(e.key in ("r0", "r_bar") for e in errors if isinstance(e, ValidationError)):
                try:
                    profile = make_profile(out["phi"], out.get("r0"), out.get("r_bar"),
                                           grid.n if grid is not None else 2, base_dir=source_dir)
                except (ValueError, OSError) as exc:
                    errors.append(ValidationError("phi", str(exc)))

    if "rho0" in out:
        _validate_rho0(out["rho0"], grid, profile, out, errors, source_dir)
    return out


def _resolve(path: str, source_dir: Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else source_dir / p


def _validate_rho0(text, grid, profile, out, errors, source_dir):
    if text.startswith("file:"):
        path = text[len("file:"):].strip()
        if not path:
            errors.append(ValidationError("rho0", "file: needs a path"))
        elif not _resolve(path, source_dir).is_file():
            errors.append(ValidationError("rho0", f"initial data file {path!r} not found"))
        return
    if not text.startswith("expr:"):
        errors.append(ValidationError("rho0", "expected 'expr:<formula>' or 'file:<path>'"))
        return
    formula = text[len("expr:"):]
    if grid is None:
        variables = ("theta", "θ", "x", "y")
    else:
        variables = tuple(grid.variables())
    try:
        compile_expression(formula, variables)
    except ExpressionError as exc:
        errors.append(ValidationError("rho0", str(exc)))
        return
    if grid is None or profile is None:
        return
    values = np.broadcast_to(evaluate(formula, grid.variables()), grid.shape)
    if not np.all(np.isfinite(values)):
        errors.append(ValidationError("rho0", "initial data is not finite on the grid"))
    elif not profile.in_band(values):
        errors.append(ValidationError(
            "rho0", f"initial data spans [{values.min()!r}, {values.max()!r}], "
                    f"outside the band [{profile.r0!r}, {profile.r_bar!r}]"))


def parse_config(text: str, source_dir=".") -> RunConfig:
    """Parse and validate config text.

    ``source_dir`` anchors relative ``table:`` and ``file:`` paths.

    Raises
    ------
    ConfigError
        Carrying every :class:`ParseError` and :class:`ValidationError`.
    """
    source_dir = Path(source_dir)
    entries, errors = _lex(text)
    values = {}
    for lineno, key, value in entries:
        if key not in KEYS:
            errors.append(ParseError(lineno, f"unknown key {key!r}"))
        elif key in values:
            errors.append(ParseError(lineno, f"duplicate key {key!r}"))
        else:
            values[key] = value
    out = _validate(values, errors, source_dir)
    if errors:
        raise ConfigError(errors)
    merged = dict(DEFAULTS)
    merged.update(out)
    return RunConfig(source_dir=str(source_dir), **merged)


def load_config(path) -> RunConfig:
    """Read and parse a config file (relative paths resolve next to it)."""
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), source_dir=path.parent)


# ------------------------------------------------------------------ builders
def build_grid(config: RunConfig) -> BaseGrid:
    return parse_base(config.base, config.resolution)


def build_warping(config: RunConfig, grid: BaseGrid) -> WarpingProfile:
    return make_profile(config.phi, config.r0, config.r_bar, grid.n, base_dir=config.source_dir)


def read_state_file(path, grid: BaseGrid) -> np.ndarray:
    """Load initial data written as ``state_<k>.csv`` or as one value per line.

    The last column holds rho; rows follow the grid's node order (theta on
    the sphere, x-major then y on the torus).
    """
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        first = fh.readline()
    try:
        [float(v) for v in re.split(r"[,\s]+", first.strip())]
        skip = 0
    except ValueError:
        skip = 1

    data = np.loadtxt(path, delimiter="," if "," in first else None, skiprows=skip, ndmin=2)
    values = data[:, -1]
    if values.size != int(np.prod(grid.shape)):
        raise ValueError(f"{path}: {values.size} values for a grid of {int(np.prod(grid.shape))} nodes")
    return values.reshape(grid.shape)


def initial_rho(config: RunConfig, grid: BaseGrid, profile: WarpingProfile) -> np.ndarray:
    """Evaluate ``rho0`` on the grid; raises OutOfBand for data outside the band."""
    text = config.rho0
    if text.startswith("expr:"):
        rho = np.broadcast_to(evaluate(text[len("expr:"):], grid.variables()), grid.shape)
    else:
        rho = read_state_file(_resolve(text[len("file:"):].strip(), Path(config.source_dir)), grid)
    rho = grid.field(rho)
    profile.check_band(rho)
    if np.min(profile.phi(rho)) <= 0:
        raise OutOfBand(float(rho.min()), profile.r0, profile.r_bar)
    return rho


def format_errors(exc: ConfigError) -> str:
    return "\n".join(f"  {e}" for e in exc.errors)


__all__ = [
    "RunConfig", "parse_config", "load_config", "build_grid", "build_warping",
    "initial_rho", "read_state_file", "format_errors", "KEYS", "REQUIRED", "DEFAULTS",
]

