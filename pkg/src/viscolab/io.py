"""Config files, CSV series and binary snapshots.

Config files hold one ``key = value`` pair per line with ``#`` comments.
Series are decimal CSV written with 17 significant digits, so a write/read
round trip reproduces every double exactly.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import struct
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from .monitor import FunctionalReport, NormSeries
from .simulation import FlowState, SimConfig
from .spectral import Grid, SpectralField

SNAPSHOT_MAGIC = b"VEC1"
_HEADER = struct.Struct("<4sIIddd")
BLOCK_COLUMNS = ("t", "q", "field", "p", "norm")
REPORT_COLUMNS = ("t", "X_p1", "X_p2", "Y_s", "Z_p1", "Z_p2", "U_tilde", "r_det", "r_divT", "r_compat")
DIAGNOSTIC_COLUMNS = ("t", "grad_v_inf", "U_tilde", "energy", "r_det", "r_divT", "r_compat", "stress_gap")


class ConfigError(ValueError):
    pass


class CorruptFileError(ValueError):
    pass


def fmt(x: float) -> str:
    return "%.17g" % x


# -- config -------------------------------------------------------------------


def _as_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _as_int(text: str) -> int:
    value = float(text) if any(ch in text for ch in ".eE") else int(text)
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {text!r}")
        value = int(value)
    return value


def _optional(conv):
    def parse(text: str):
        if text.lower() in ("none", "auto"):
            return None
        return conv(text)

    return parse


_CONVERTERS = {
    "dim": _as_int,
    "M": _as_int,
    "L": float,
    "mu": float,
    "dt": float,
    "T": float,
    "output_every": _as_int,
    "dealias": float,
    "seed": _as_int,
    "data": str,
    "amplitude": float,
    "pseudo_time": float,
    "band": _as_int,
    "eps": float,
    "p_osc": float,
    "envelope": _optional(float),
    "R0": _optional(float),
    "q_min": _optional(_as_int),
    "q_max": _optional(_as_int),
    "p1": float,
    "p2": float,
    "s": float,
    "r": float,
    "lambda1": float,
    "nonlinear": _as_bool,
    "stress_form": str,
}
assert set(_CONVERTERS) == set(SimConfig.field_names())


def parse_config(text: str) -> SimConfig:
    """Parse ``key = value`` text into a validated :class:`SimConfig`."""
    values: Dict[str, Any] = {}
    lines: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONVERTERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: key {key!r} repeated (first on line {lines[key]})")
        if not value:
            raise ConfigError(f"line {lineno}: key {key!r} has no value")
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: key {key!r}: {exc}") from None
        lines[key] = lineno
    try:
        return SimConfig(**values)
    except ValueError as exc:
        msg = str(exc)
        key = msg.split(" ", 1)[0]
        where = f"line {lines[key]}: " if key in lines else ""
        raise ConfigError(f"{where}{msg}") from None


def load_config(path: Union[str, Path]) -> SimConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def serialize_config(config: SimConfig) -> str:
    out = []
    for f in fields(config):
        value = getattr(config, f.name)
        if value is None:
            text = "none"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        out.append(f"{f.name} = {text}")
    return "\n".join(out) + "\n"


# -- CSV ----------------------------------------------------------------------


def _open_for_write(path: Union[str, Path]):
    try:
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_series_csv(obj: Union[NormSeries, FunctionalReport], path: Union[str, Path], ps=None) -> None:
    """Write block norms (``t,q,field,p,norm``) or a functional report."""
    if isinstance(obj, FunctionalReport):
        write_report_csv(obj, path, ps)
        return
    if not isinstance(obj, NormSeries):
        raise TypeError(f"cannot write {type(obj).__name__} as a series")
    with _open_for_write(path) as fh:
        w = _writer(fh)
        w.writerow(BLOCK_COLUMNS)
        keys = sorted(obj.norms, key=lambda k: (k[0], k[1]))
        for i, t in enumerate(obj.times):
            for name, p in keys:
                row = obj.norms[(name, p)][i]
                for q, val in zip(obj.q, row):
                    w.writerow((fmt(t), int(q), name, fmt(p), fmt(val)))


def _read_rows(path, columns):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != tuple(columns):
        raise CorruptFileError(f"{path}: header does not match {','.join(columns)}")
    return rows[1:]


def read_series_csv(
    path: Union[str, Path], grad_v_inf=None, U_tilde=None
) -> NormSeries:
    """Inverse of :func:`write_series_csv` for block series.

    Block CSV files carry no gradient column; pass ``grad_v_inf`` (and
    optionally ``U_tilde``) from the diagnostics file, otherwise zeros are used.
    """
    rows = _read_rows(path, BLOCK_COLUMNS)
    times: List[float] = []
    qs: List[int] = []
    cells: Dict[tuple, Dict[tuple, float]] = {}
    for row in rows:
        t, q, name, p, val = float(row[0]), int(row[1]), row[2], float(row[3]), float(row[4])
        if not times or times[-1] != t:
            times.append(t)
        if q not in qs:
            qs.append(q)
        cells.setdefault((name, p), {})[(t, q)] = val
    norms = {}
    for key, table in cells.items():
        try:
            norms[key] = np.array([[table[(t, q)] for q in qs] for t in times])
        except KeyError as exc:
            raise CorruptFileError(f"{path}: missing entry {exc} for {key}") from None
    g = np.zeros(len(times)) if grad_v_inf is None else np.asarray(grad_v_inf, dtype=float)
    return NormSeries(np.array(times), np.array(qs, dtype=int), norms, g, U_tilde)


def write_report_csv(report: FunctionalReport, path: Union[str, Path], ps=None) -> None:
    ps = sorted(report.X) if ps is None else [float(p) for p in ps]
    if len(ps) == 1:
        ps = ps * 2
    p1, p2 = ps[0], ps[-1]
    n = len(report.times)
    nan = np.full(n, math.nan)
    res = [report.residuals.get(k, nan) for k in ("r_det", "r_divT", "r_compat")]
    cols = [report.times, report.X[p1], report.X[p2], report.Y, report.Z[p1], report.Z[p2], report.U_tilde] + res
    with _open_for_write(path) as fh:
        w = _writer(fh)
        w.writerow(REPORT_COLUMNS)
        for i in range(n):
            w.writerow([fmt(c[i]) for c in cols])


def read_report_csv(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    rows = _read_rows(path, REPORT_COLUMNS)
    data = np.array([[float(x) for x in r] for r in rows]).reshape(len(rows), len(REPORT_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(REPORT_COLUMNS)}


def write_table_csv(columns: Dict[str, np.ndarray], path: Union[str, Path]) -> None:
    """Generic numeric table, one column per key, 17 significant digits."""
    names = list(columns)
    arrays = [np.asarray(columns[k], dtype=float) for k in names]
    n = len(arrays[0]) if arrays else 0
    with _open_for_write(path) as fh:
        w = _writer(fh)
        w.writerow(names)
        for i in range(n):
            w.writerow([fmt(a[i]) for a in arrays])


def read_table_csv(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise CorruptFileError(f"{path}: empty file")
    names = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(len(rows) - 1, len(names))
    return {name: data[:, i] for i, name in enumerate(names)}


# -- snapshots ----------------------------------------------------------------


def write_snapshot(state: FlowState, path: Union[str, Path]) -> None:
    g = state.grid
    head = _HEADER.pack(SNAPSHOT_MAGIC, g.dim, g.M, g.L, state.mu, state.t)
    body = np.concatenate([state.v.coeffs.ravel(), state.E.coeffs.ravel()]).astype("<c16")
    try:
        with open(path, "wb") as fh:
            fh.write(head)
            fh.write(body.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None


def read_snapshot(path: Union[str, Path]) -> FlowState:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from None
    if len(raw) < _HEADER.size:
        raise CorruptFileError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, dim, M, L, mu, t = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise CorruptFileError(f"{path}: bad magic {magic!r}")
    try:
        grid = Grid(dim, M, L)
    except ValueError as exc:
        raise CorruptFileError(f"{path}: bad grid header ({exc})") from None
    ncomp = dim + dim * dim
    expected = _HEADER.size + 16 * ncomp * M**dim
    if len(raw) != expected:
        raise CorruptFileError(f"{path}: size {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).astype(complex)
    nv = dim * M**dim
    v = data[:nv].reshape((dim,) + grid.shape)
    E = data[nv:].reshape((dim, dim) + grid.shape)
    try:
        return FlowState(SpectralField(grid, v), SpectralField(grid, E), t, mu)
    except ValueError as exc:
        raise CorruptFileError(f"{path}: {exc}") from None


# -- manifest -----------------------------------------------------------------


def package_version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"


@dataclass
class RunManifest:
    config: Dict[str, Any]
    command: str
    version: str = field(default_factory=package_version)
    seed: int = 0
    grid: Dict[str, Any] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    status: str = "running"
    started: float = field(default_factory=time.time)
    wall_clock: Optional[float] = None
    message: str = ""

    @classmethod
    def start(cls, config: SimConfig, command: str) -> "RunManifest":
        return cls(
            config={k: v for k, v in asdict(config).items()},
            command=command,
            seed=config.seed,
            grid={"dim": config.dim, "M": config.M, "L": config.L},
        )

    def finish(self, status: str, message: str = "") -> None:
        self.status = status
        self.message = message
        self.wall_clock = time.time() - self.started

    def write(self, path: Union[str, Path]) -> None:
        text = json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=True)
        with _open_for_write(path) as fh:
            fh.write(text + "\n")

    @classmethod
    def read(cls, path: Union[str, Path]) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))
