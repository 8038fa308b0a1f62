"""Plain-text scan datasets, theory files and reconstruction reports.

A dataset is a header of ``key: <json value>`` lines followed by named
matrix blocks, one scan row (fixed ``t``) per line::

    # chronoq scan dataset
    format_version: "1"
    center_frequency_hz: 194000000000000.0
    ...
    xi_shifts: [-4.0, -3.8, ...]
    t_shifts: [-4.0, -3.8, ...]
    counts:
    0 0 1 ...
    background:
    0.0 0.0 ...

Floats are written with ``repr`` so write -> read -> write is byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import FrequencyGrid, PhaseSpaceGrid, PulseSpec, SpectralAmplitude, SpectralCorrelation, make_grid
from .forward import CountMap, QFunction, QpgModel
from .mle import ReconstructionResult

__all__ = [
    "FORMAT_VERSION",
    "DatasetError",
    "ScanDataset",
    "TheoryFile",
    "write_dataset",
    "read_dataset",
    "write_theory",
    "read_theory",
    "theory_path_for",
    "write_reconstruction",
    "read_reconstruction_correlation",
]

FORMAT_VERSION = "1"
DATASET_TITLE = "# chronoq scan dataset"
THEORY_TITLE = "# chronoq theoretical Q-function"


class DatasetError(ValueError):
    """Malformed or inconsistent data file; ``field`` names the offending entry."""

    def __init__(self, field, message, source="<dataset>", line=None):
        self.field = field
        self.source = source
        self.line = line
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {field}: {message}")


@dataclass(frozen=True)
class GridMeta:
    center_frequency_hz: float
    sigma_c_hz: float
    n_points: int
    span_in_sigma: float

    def frequency_grid(self) -> FrequencyGrid:
        return make_grid(
            2 * math.pi * self.center_frequency_hz,
            self.span_in_sigma,
            self.n_points,
            2 * math.pi * self.sigma_c_hz,
        )


@dataclass(frozen=True, eq=False)
class ScanDataset:
    grid_meta: GridMeta
    qpg: dict
    counts: CountMap
    background_level: float
    pulse: dict | None  # PulseSpec fields, or None for external data

    @property
    def grid(self) -> FrequencyGrid:
        return self.grid_meta.frequency_grid()

    def qpg_model(self) -> QpgModel:
        return _qpg_model(self.qpg)


@dataclass(frozen=True, eq=False)
class TheoryFile:
    grid_meta: GridMeta
    qpg: dict
    q: QFunction
    amplitude: SpectralAmplitude
    pulse: dict | None


def _qpg_model(d: dict) -> QpgModel:
    if d.get("ideal", True):
        return QpgModel()
    return QpgModel(ideal=False, pm_width=2 * math.pi * d["pm_width_hz"])


def theory_path_for(dataset_path) -> Path:
    p = Path(dataset_path)
    return p.with_name(p.stem + ".theory" + (p.suffix or ".txt"))


# -- generic document ---------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_doc(path, title, header: dict, blocks: list[tuple[str, np.ndarray]]):
    lines = [title]
    for key, value in header.items():
        lines.append(f"{key}: {json.dumps(value, sort_keys=False)}")
    for name, mat in blocks:
        lines.append(f"{name}:")
        for row in np.atleast_2d(mat):
            lines.append(" ".join(_fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _read_doc(path, title, block_names):
    source = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DatasetError("file", f"cannot read ({exc.strerror})", source) from None
    lines = text.splitlines()
    if not lines or lines[0].strip() != title:
        raise DatasetError("title", f"expected first line {title!r}", source, 1)
    header, lines_of = {}, {}
    blocks = {}
    current = None
    for no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.endswith(":") and line[:-1] in block_names:
            current = line[:-1]
            blocks[current] = []
            lines_of[current] = no
            continue
        if current is not None:
            blocks[current].append((no, line))
            continue
        key, sep, value = line.partition(":")
        key = key.strip()
        if not sep:
            raise DatasetError(key or "header", "expected 'key: value'", source, no)
        try:
            header[key] = json.loads(value)
        except json.JSONDecodeError:
            raise DatasetError(key, f"cannot parse value {value.strip()!r}", source, no) from None
        lines_of[key] = no
    if "format_version" not in header:
        raise DatasetError("format_version", "missing", source)
    if header["format_version"] != FORMAT_VERSION:
        raise DatasetError(
            "format_version",
            f"unsupported version {header['format_version']!r} (expected {FORMAT_VERSION!r})",
            source,
            lines_of["format_version"],
        )
    for name in block_names:
        if name not in blocks:
            raise DatasetError(name, "block missing", source)
    return header, lines_of, blocks, source


def _require(header, lines_of, key, kind, source, check=None, msg=""):
    if key not in header:
        raise DatasetError(key, "missing", source)
    v = header[key]
    ok = True
    if kind is int:
        ok = isinstance(v, int) and not isinstance(v, bool)
    elif kind is float:
        ok = isinstance(v, (int, float)) and not isinstance(v, bool)
        v = float(v) if ok else v
    elif kind is list:
        ok = isinstance(v, list) and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)
    elif kind is dict:
        ok = isinstance(v, dict)
    if not ok:
        raise DatasetError(key, f"wrong type ({type(v).__name__})", source, lines_of.get(key))
    if check is not None and not check(v):
        raise DatasetError(key, msg, source, lines_of.get(key))
    return v


def _parse_block(name, rows, shape, dtype, source):
    if len(rows) != shape[0]:
        line = rows[-1][0] if rows else None
        raise DatasetError(name, f"expected {shape[0]} rows, found {len(rows)}", source, line)
    out = np.empty(shape, dtype=dtype)
    for i, (no, line) in enumerate(rows):
        parts = line.split()
        if len(parts) != shape[1]:
            raise DatasetError(name, f"row has {len(parts)} entries, expected {shape[1]}", source, no)
        try:
            out[i] = [dtype(p) for p in parts]
        except ValueError:
            raise DatasetError(name, "non-numeric entry", source, no) from None
    return out


def _grid_header(meta: GridMeta) -> dict:
    return {
        "center_frequency_hz": float(meta.center_frequency_hz),
        "sigma_c_hz": float(meta.sigma_c_hz),
        "n_points": int(meta.n_points),
        "span_in_sigma": float(meta.span_in_sigma),
    }


def _read_grid_meta(header, lines_of, source) -> GridMeta:
    meta = GridMeta(
        _require(header, lines_of, "center_frequency_hz", float, source, lambda v: v >= 0, "must be >= 0"),
        _require(header, lines_of, "sigma_c_hz", float, source, lambda v: v > 0, "must be > 0"),
        _require(header, lines_of, "n_points", int, source, lambda v: v >= 8, "must be >= 8"),
        _require(header, lines_of, "span_in_sigma", float, source, lambda v: v >= 6, "must be >= 6"),
    )
    return meta


def _read_scan(header, lines_of, source) -> PhaseSpaceGrid:
    xi = _require(header, lines_of, "xi_shifts", list, source)
    t = _require(header, lines_of, "t_shifts", list, source)
    for key, arr in (("xi_shifts", xi), ("t_shifts", t)):
        if not arr or np.any(np.diff(arr) <= 0):
            raise DatasetError(key, "must be a non-empty increasing list", source, lines_of.get(key))
    return PhaseSpaceGrid(np.array(xi, dtype=float), np.array(t, dtype=float))


def _read_pulse(header, lines_of, source):
    if "pulse" not in header:
        raise DatasetError("pulse", "missing", source)
    p = header["pulse"]
    if p == "external":
        return None
    if not isinstance(p, dict):
        raise DatasetError("pulse", "expected a pulse record or \"external\"", source, lines_of.get("pulse"))
    try:
        PulseSpec.from_dict(p)
    except (TypeError, ValueError) as exc:
        raise DatasetError("pulse", str(exc), source, lines_of.get("pulse")) from None
    return p


def _read_qpg(header, lines_of, source):
    q = _require(header, lines_of, "qpg", dict, source)
    if set(q) - {"ideal", "pm_width_hz"} or not isinstance(q.get("ideal", True), bool):
        raise DatasetError("qpg", "expected {\"ideal\": bool, \"pm_width_hz\": number}", source, lines_of.get("qpg"))
    if not q.get("ideal", True):
        w = q.get("pm_width_hz")
        if not isinstance(w, (int, float)) or not w > 0:
            raise DatasetError("qpg", "pm_width_hz must be > 0 when not ideal", source, lines_of.get("qpg"))
    return q


# -- datasets -----------------------------------------------------------------


def write_dataset(path, ds: ScanDataset):
    cm = ds.counts
    header = {"format_version": FORMAT_VERSION}
    header.update(_grid_header(ds.grid_meta))
    header["qpg"] = ds.qpg
    header["scale"] = float(cm.scale)
    header["background_level"] = float(ds.background_level)
    header["seed"] = int(cm.seed)
    header["pulse"] = ds.pulse if ds.pulse is not None else "external"
    header["xi_shifts"] = [float(x) for x in cm.ps_grid.xi_shifts]
    header["t_shifts"] = [float(x) for x in cm.ps_grid.t_shifts]
    _write_doc(path, DATASET_TITLE, header, [("counts", cm.counts), ("background", cm.background)])


def read_dataset(path) -> ScanDataset:
    header, lines_of, blocks, source = _read_doc(path, DATASET_TITLE, ("counts", "background"))
    meta = _read_grid_meta(header, lines_of, source)
    qpg = _read_qpg(header, lines_of, source)
    scale = _require(header, lines_of, "scale", float, source, lambda v: v > 0, "must be > 0")
    bg = _require(header, lines_of, "background_level", float, source, lambda v: v >= 0, "must be >= 0")
    seed = _require(header, lines_of, "seed", int, source, lambda v: v >= 0, "must be >= 0")
    pulse = _read_pulse(header, lines_of, source)
    scan = _read_scan(header, lines_of, source)
    counts = _parse_block("counts", blocks["counts"], scan.shape, int, source)
    background = _parse_block("background", blocks["background"], scan.shape, float, source)
    if np.any(counts < 0):
        raise DatasetError("counts", "negative count", source, lines_of["counts"])
    if np.any(background < 0):
        raise DatasetError("background", "negative background", source, lines_of["background"])
    cm = CountMap(scan, counts, background, scale, seed)
    return ScanDataset(meta, qpg, cm, bg, pulse)


# -- theory files ---------------------------------------------------------------


def write_theory(path, th: TheoryFile):
    header = {"format_version": FORMAT_VERSION}
    header.update(_grid_header(th.grid_meta))
    header["qpg"] = th.qpg
    header["pulse"] = th.pulse if th.pulse is not None else "external"
    header["xi_shifts"] = [float(x) for x in th.q.ps_grid.xi_shifts]
    header["t_shifts"] = [float(x) for x in th.q.ps_grid.t_shifts]
    amp = np.column_stack([th.amplitude.values.real, th.amplitude.values.imag])
    _write_doc(path, THEORY_TITLE, header, [("q", th.q.values), ("amplitude", amp)])


def read_theory(path) -> TheoryFile:
    header, lines_of, blocks, source = _read_doc(path, THEORY_TITLE, ("q", "amplitude"))
    meta = _read_grid_meta(header, lines_of, source)
    qpg = _read_qpg(header, lines_of, source)
    pulse = _read_pulse(header, lines_of, source)
    scan = _read_scan(header, lines_of, source)
    q = _parse_block("q", blocks["q"], scan.shape, float, source)
    amp = _parse_block("amplitude", blocks["amplitude"], (meta.n_points, 2), float, source)
    grid = meta.frequency_grid()
    try:
        qf = QFunction(scan, q)
    except ValueError as exc:
        raise DatasetError("q", str(exc), source, lines_of["q"]) from None
    return TheoryFile(meta, qpg, qf, SpectralAmplitude(grid, amp[:, 0] + 1j * amp[:, 1]), pulse)


# -- reconstruction reports -----------------------------------------------------


def _write_table(path, header: str, mat):
    lines = [header]
    rows = mat if isinstance(mat, list) else np.atleast_2d(mat)
    for row in rows:
        lines.append("\t".join(_fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_reconstruction(out_dir, result: ReconstructionResult, dominant: SpectralAmplitude, weight: float):
    """Write spectrum, eigenvalues, |W|, arg W and diagnostics into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = dominant.grid
    v = dominant.values
    _write_table(
        out / "spectrum.tsv",
        "# offset_rad_s\txi_in\tabs\targ",
        np.column_stack([grid.offsets, grid.xi, np.abs(v), np.angle(v)]),
    )
    lam = result.eigenvalues
    _write_table(out / "eigenvalues.tsv", "# n\tlambda", [(i, x) for i, x in enumerate(lam)])
    W = result.correlation.matrix
    _write_table(out / "w_abs.tsv", "# |W(xi_in', xi_in)|, rows xi_in', columns xi_in", np.abs(W))
    _write_table(out / "w_arg.tsv", "# arg W(xi_in', xi_in)", np.angle(W))
    d = {
        "iterations": result.iterations,
        "log_likelihood": result.final_log_likelihood,
        "converged": result.converged,
        "dominant_weight": weight,
    }
    d.update(result.diagnostics)
    meta = {
        "center_frequency_rad_s": grid.center_frequency,
        "spacing_rad_s": grid.spacing,
        "n_points": grid.n_points,
        "sigma_c_rad_s": grid.sigma_c,
    }
    d.update(meta)
    (out / "diagnostics.txt").write_text("".join(f"{k}: {json.dumps(_plain(v))}\n" for k, v in d.items()))


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _read_table(path, name):
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DatasetError(name, f"cannot read {path} ({exc.strerror})", str(path)) from None
    rows = [ln.split("\t") for ln in lines if ln and not ln.startswith("#")]
    try:
        return np.array([[float(x) for x in r] for r in rows])
    except ValueError:
        raise DatasetError(name, "non-numeric entry", str(path)) from None


def read_diagnostics(out_dir) -> dict:
    path = Path(out_dir) / "diagnostics.txt"
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DatasetError("diagnostics", f"cannot read ({exc.strerror})", str(path)) from None
    out = {}
    for no, line in enumerate(lines, start=1):
        key, _, value = line.partition(":")
        try:
            out[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            raise DatasetError(key.strip(), "cannot parse value", str(path), no) from None
    return out


def read_reconstruction_correlation(out_dir, grid: FrequencyGrid) -> SpectralCorrelation:
    """Rebuild ``W_e`` from the magnitude and phase tables of a report."""
    out = Path(out_dir)
    mag = _read_table(out / "w_abs.tsv", "w_abs")
    arg = _read_table(out / "w_arg.tsv", "w_arg")
    n = grid.n_points
    if mag.shape != (n, n) or arg.shape != (n, n):
        raise DatasetError("w_abs", f"matrix shape {mag.shape} does not match grid size {n}", str(out))
    try:
        return SpectralCorrelation(grid, mag * np.exp(1j * arg))
    except ValueError as exc:
        raise DatasetError("w_abs", str(exc), str(out)) from None
