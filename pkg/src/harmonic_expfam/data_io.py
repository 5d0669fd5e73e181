"""Dataset ingestion, model files and grid export.

Model file (UTF-8, one key per line, then one coefficient per line)::

    harmonic-expfam-model 1
    manifold s2
    bandlimit 20
    oversample 2.0
    reg_scheme plancherel
    alpha_reg 0.001
    count 440
    coefficients
    0.123...
    ...

Grid file: ``#``-prefixed header lines (format tag, manifold, B, one line
per axis with its node list), a column header, then one tab-separated row
per node in canonical order: coordinates, weight, value.  Floats are
written with ``repr`` so a read-back is bit-exact.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .expfam import NaturalParams
from .special_functions import Manifold, num_coeffs
from .transforms import GridFunction, make_grid

log = logging.getLogger(__name__)

MODEL_MAGIC = "harmonic-expfam-model"
MODEL_VERSION = 1
GRID_MAGIC = "harmonic-expfam-grid"
GRID_VERSION = 1

LATITUDE_NAMES = ("latitude", "lat")
LONGITUDE_NAMES = ("longitude", "lon", "long")

AXIS_NAMES = {
    Manifold.S1: ("theta",),
    Manifold.S2: ("beta", "phi"),
    Manifold.SO3: ("alpha", "beta", "gamma"),
}


class FormatError(ValueError):
    """Malformed model or grid file."""


def _open_text(source, mode="r"):
    if isinstance(source, (str, Path)):
        return open(source, mode, encoding="utf-8", newline="")
    return None


# ---------------------------------------------------------------------------
# Earthquakes


@dataclass
class EarthquakeData:
    """Parsed sphere points (beta, phi) plus discard counts."""

    points: np.ndarray
    missing: int = 0
    invalid: int = 0

    @property
    def discarded(self) -> int:
        return self.missing + self.invalid


def latlon_to_sphere(lat, lon) -> np.ndarray:
    """Degrees (north, east) to (colatitude, longitude in [0, 2pi)) radians."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    beta = np.radians(90.0 - lat)
    phi = np.mod(np.radians(lon), 2 * np.pi)
    return np.stack([beta, phi], axis=-1)


def _find_column(header: list[str], wanted, names) -> int:
    if isinstance(wanted, int):
        if not 0 <= wanted < len(header):
            raise KeyError(f"column index {wanted} out of range")
        return wanted
    lowered = [h.strip().lower() for h in header]
    for name in ([wanted] if wanted else []) + list(names):
        if name.lower() in lowered:
            return lowered.index(name.lower())
    raise KeyError(f"no column named any of {([wanted] if wanted else []) + list(names)}; header is {header}")


def parse_earthquakes(stream, lat_col: str | int | None = None, lon_col: str | int | None = None, delimiter="\t") -> EarthquakeData:
    """Read a tab-separated table with a header row into sphere points.

    Columns are found by name (case-insensitive; defaults cover the NGDC
    ``Latitude``/``Longitude`` and ``LATITUDE``/``LONGITUDE`` headers) or
    by explicit index.  Rows with an empty coordinate count as missing,
    rows with unparseable or out-of-range coordinates as invalid.
    """
    own = _open_text(stream)
    fh = own or stream
    try:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise FormatError("empty earthquake file")
        ilat = _find_column(header, lat_col, LATITUDE_NAMES)
        ilon = _find_column(header, lon_col, LONGITUDE_NAMES)
        lats, lons = [], []
        missing = invalid = 0
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            la = row[ilat].strip() if ilat < len(row) else ""
            lo = row[ilon].strip() if ilon < len(row) else ""
            if not la or not lo:
                missing += 1
                continue
            try:
                fla, flo = float(la), float(lo)
            except ValueError:
                invalid += 1
                continue
            if not (math.isfinite(fla) and math.isfinite(flo) and -90 <= fla <= 90 and -180 <= flo <= 360):
                invalid += 1
                continue
            lats.append(fla)
            lons.append(flo)
    finally:
        if own:
            own.close()
    if invalid:
        log.warning("discarded %d rows with unparseable coordinates", invalid)
    pts = latlon_to_sphere(lats, lons) if lats else np.zeros((0, 2))
    return EarthquakeData(pts, missing, invalid)


def read_points(path, manifold, lat_col=None, lon_col=None) -> EarthquakeData:
    """Points for any manifold: lat/lon degrees on S2, radian angle columns otherwise."""
    manifold = Manifold.parse(manifold)
    if manifold is Manifold.S2:
        return parse_earthquakes(path, lat_col, lon_col)
    names = AXIS_NAMES[manifold]
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None:
            raise FormatError("empty point file")
        cols = [_find_column(header, None, (n,)) for n in names]
        rows, invalid = [], 0
        for row in reader:
            if not row:
                continue
            try:
                rows.append([float(row[i]) for i in cols])
            except (ValueError, IndexError):
                invalid += 1
    return EarthquakeData(np.array(rows, dtype=float).reshape(-1, manifold.ndim), 0, invalid)


# ---------------------------------------------------------------------------
# Model files


@dataclass(eq=False)
class ModelFile:
    eta: NaturalParams
    oversample: float = 2.0
    reg_scheme: str = "none"
    alpha_reg: float = 0.0
    extra: dict = field(default_factory=dict)

    def __eq__(self, other):
        return (
            isinstance(other, ModelFile)
            and self.eta.manifold is other.eta.manifold
            and self.eta.L == other.eta.L
            and np.array_equal(self.eta.eta, other.eta.eta)
            and self.oversample == other.oversample
            and self.reg_scheme == other.reg_scheme
            and self.alpha_reg == other.alpha_reg
        )


_MODEL_KEYS = ("manifold", "bandlimit", "oversample", "reg_scheme", "alpha_reg", "count")


def format_model(model: ModelFile) -> str:
    eta = model.eta
    lines = [
        f"{MODEL_MAGIC} {MODEL_VERSION}",
        f"manifold {eta.manifold.value}",
        f"bandlimit {eta.L}",
        f"oversample {float(model.oversample)!r}",
        f"reg_scheme {model.reg_scheme}",
        f"alpha_reg {float(model.alpha_reg)!r}",
        f"count {eta.eta.size}",
        "coefficients",
    ]
    lines += [repr(float(v)) for v in eta.eta]
    return "\n".join(lines) + "\n"


def write_model(model: ModelFile, dest) -> None:
    text = format_model(model)
    own = _open_text(dest, "w")
    if own:
        with own:
            own.write(text)
    else:
        dest.write(text)


def _parse_float(text: str, lineno: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise FormatError(f"line {lineno}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise FormatError(f"line {lineno}: non-finite value {text!r}")
    return v


def parse_model(text: str) -> ModelFile:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty model file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MODEL_MAGIC:
        raise FormatError(f"line 1: not a model file (expected '{MODEL_MAGIC} <version>')")
    if head[1] != str(MODEL_VERSION):
        raise FormatError(f"line 1: unsupported model format version {head[1]!r} (this reader handles {MODEL_VERSION})")
    fields: dict[str, str] = {}
    i = 1
    while i < len(lines) and lines[i].strip() != "coefficients":
        parts = lines[i].split(None, 1)
        if len(parts) != 2:
            raise FormatError(f"line {i + 1}: malformed header line {lines[i]!r}")
        if parts[0] not in _MODEL_KEYS:
            raise FormatError(f"line {i + 1}: unknown field {parts[0]!r} for format version {MODEL_VERSION}")
        fields[parts[0]] = parts[1].strip()
        i += 1
    if i == len(lines):
        raise FormatError("missing 'coefficients' section")
    for key in _MODEL_KEYS:
        if key not in fields:
            raise FormatError(f"missing header field {key!r}")
    try:
        manifold = Manifold.parse(fields["manifold"])
    except ValueError as e:
        raise FormatError(str(e)) from None
    try:
        L, count = int(fields["bandlimit"]), int(fields["count"])
    except ValueError:
        raise FormatError("bandlimit and count must be integers") from None
    expected = num_coeffs(manifold, L) - 1
    body = [(n + i + 2, s.strip()) for n, s in enumerate(lines[i + 1 :]) if s.strip()]
    if count != expected:
        raise FormatError(f"count {count} does not match {expected} coefficients for {manifold.value} bandlimit {L}")
    if len(body) != expected:
        raise FormatError(f"expected {expected} coefficients, found {len(body)}")
    eta = np.array([_parse_float(s, n) for n, s in body])
    return ModelFile(
        NaturalParams(manifold, L, eta),
        oversample=_parse_float(fields["oversample"], 4),
        reg_scheme=fields["reg_scheme"],
        alpha_reg=_parse_float(fields["alpha_reg"], 6),
    )


def read_model(source) -> ModelFile:
    own = _open_text(source)
    if own:
        with own:
            return parse_model(own.read())
    return parse_model(source.read())


# ---------------------------------------------------------------------------
# Grid files


def export_grid(f: GridFunction, stream) -> None:
    spec = f.spec
    names = AXIS_NAMES[spec.manifold]
    out = io.StringIO()
    out.write(f"# {GRID_MAGIC} {GRID_VERSION}\n")
    out.write(f"# manifold {spec.manifold.value}\n")
    out.write(f"# B {spec.B}\n")
    for name, axis in zip(names, spec.axes):
        out.write(f"# axis {name} " + " ".join(repr(float(v)) for v in axis) + "\n")
    out.write("\t".join(names + ("weight", "value")) + "\n")
    nodes = spec.nodes()
    w = spec.weights.ravel()
    v = f.values.ravel()
    for k in range(nodes.shape[0]):
        out.write("\t".join([repr(float(c)) for c in nodes[k]] + [repr(float(w[k])), repr(float(v[k]))]) + "\n")
    text = out.getvalue()
    own = _open_text(stream, "w")
    if own:
        with own:
            own.write(text)
    else:
        stream.write(text)


def read_grid(source) -> GridFunction:
    """Inverse of ``export_grid``; the grid is rebuilt from (manifold, B)."""
    own = _open_text(source)
    try:
        lines = (own or source).read().splitlines()
    finally:
        if own:
            own.close()
    header = {}
    rows = []
    for n, line in enumerate(lines, 1):
        if line.startswith("#"):
            parts = line[1:].split(None, 1)
            if parts:
                header.setdefault(parts[0], parts[1] if len(parts) > 1 else "")
            continue
        if not line.strip():
            continue
        rows.append((n, line))
    magic = header.get(GRID_MAGIC)
    if magic is None:
        raise FormatError("not a grid file")
    if magic.strip() != str(GRID_VERSION):
        raise FormatError(f"unsupported grid format version {magic.strip()!r}")
    try:
        manifold = Manifold.parse(header["manifold"].strip())
        B = int(header["B"])
    except (KeyError, ValueError) as e:
        raise FormatError(f"bad grid header: {e}") from None
    spec = make_grid(manifold, B)
    data = rows[1:]
    if len(data) != spec.size:
        raise FormatError(f"expected {spec.size} grid rows, found {len(data)}")
    values = np.empty(spec.size)
    for k, (n, line) in enumerate(data):
        cols = line.split("\t")
        if len(cols) != manifold.ndim + 2:
            raise FormatError(f"line {n}: expected {manifold.ndim + 2} columns")
        values[k] = _parse_float(cols[-1], n)
    return GridFunction(spec, values)
