"""On-disk formats for fields and diagnostics.

A field snapshot is one text header line followed by raw binary data:

    nswave-field <dim> <N_1..N_dim> <L_1..L_dim> <components> <complex>
        <dealias_fraction> [profile <c>]

(one line, tokens space-separated). The sizes are integers; periods and
the dealias fraction print with full precision so the grid reconstructs
exactly. <complex> is 1 for fields whose physical values are complex and
0 for real-valued ones. The optional trailing pair marks a plane-wave
profile in (w, z) coordinates and carries its rational speed as m/n.

The payload is the spectral coefficient array written as little-endian
float64 (re, im) pairs, components first, then row-major over modes.
Coefficients rather than grid values are stored because they are the
primary representation: a write/read round trip is bit for bit.

Diagnostics tables are CSV with the fixed column order
t, lp_p3, lp_p6, lp_pinf, hs, energy, div_resid, M_bound and %.17g
formatting, so equal runs produce byte-identical files.
"""

from __future__ import annotations

import io
from fractions import Fraction

import numpy as np

from .field import SpectralField
from .grid import GridSpec

__all__ = [
    "write_field",
    "read_field",
    "write_diagnostics_csv",
    "read_diagnostics_csv",
    "DIAGNOSTIC_COLUMNS",
]

_MAGIC = "nswave-field"

DIAGNOSTIC_COLUMNS = ("t", "lp_p3", "lp_p6", "lp_pinf", "hs", "energy",
                      "div_resid", "M_bound")


def _format_speed(c: Fraction) -> str:
    c = Fraction(c)
    return f"{c.numerator}/{c.denominator}"


def write_field(path, field: SpectralField, *, wave_speed=None) -> None:
    """Write a field snapshot; wave_speed marks a (w, z) profile file."""
    grid = field.grid
    tokens = [_MAGIC, str(grid.dim)]
    tokens += [str(n) for n in grid.points_per_axis]
    tokens += [f"{p:.17g}" for p in grid.period_per_axis]
    tokens.append(str(field.components))
    tokens.append("0" if field.real_space else "1")
    tokens.append(f"{grid.dealias_fraction:.17g}")
    if wave_speed is not None:
        tokens += ["profile", _format_speed(wave_speed)]
    flat = np.empty(field.coeffs.size * 2, dtype="<f8")
    flat[0::2] = field.coeffs.real.ravel()
    flat[1::2] = field.coeffs.imag.ravel()
    with open(path, "wb") as fh:
        fh.write((" ".join(tokens) + "\n").encode("ascii"))
        fh.write(flat.tobytes())


def read_field(path) -> tuple[SpectralField, Fraction | None]:
    """Read a snapshot back; returns (field, wave speed or None)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        payload = fh.read()
    if not header or header[0] != _MAGIC:
        raise ValueError(f"{path} is not a field snapshot")
    pos = 1
    dim = int(header[pos]); pos += 1
    points = tuple(int(x) for x in header[pos:pos + dim]); pos += dim
    periods = tuple(float(x) for x in header[pos:pos + dim]); pos += dim
    components = int(header[pos]); pos += 1
    is_complex = header[pos] == "1"; pos += 1
    dealias = float(header[pos]); pos += 1
    speed = None
    if pos < len(header):
        if header[pos] != "profile" or pos + 1 >= len(header):
            raise ValueError(f"{path}: malformed snapshot header")
        speed = Fraction(header[pos + 1])
    grid = GridSpec(dim, points, periods, dealias_fraction=dealias)
    flat = np.frombuffer(payload, dtype="<f8")
    expected = 2 * components * grid.num_points
    if flat.size != expected:
        raise ValueError(
            f"{path}: payload holds {flat.size} floats, header promises "
            f"{expected}")
    coeffs = (flat[0::2] + 1j * flat[1::2]).reshape((components, *grid.shape))
    field = SpectralField(grid, coeffs, real_space=not is_complex)
    return field, speed


def _row_values(row) -> list[float]:
    d = row.as_dict()
    missing = [c for c in DIAGNOSTIC_COLUMNS if c not in d]
    if missing:
        raise ValueError(
            f"diagnostics row lacks columns {missing}; runs must include "
            "p = 3, 6 and inf in their diagnostic norms")
    return [d[c] for c in DIAGNOSTIC_COLUMNS]


def write_diagnostics_csv(path, rows) -> None:
    """Write diagnostics rows (or a Trajectory) as a fixed-layout CSV."""
    rows = getattr(rows, "diagnostics", rows)
    buf = io.StringIO()
    buf.write(",".join(DIAGNOSTIC_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(f"{v:.17g}" for v in _row_values(row)) + "\n")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(buf.getvalue())


def read_diagnostics_csv(path) -> dict:
    """Read a diagnostics CSV into {column: array}."""
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if tuple(header) != DIAGNOSTIC_COLUMNS:
        raise ValueError(f"{path}: unexpected columns {header}")
    if data.size == 0:
        data = data.reshape(0, len(header))
    return {name: data[:, j] for j, name in enumerate(header)}
