"""Uniformly sampled grid functions, modulation fields, and their file formats.

Grid functions are complex-valued samples on a uniform 1D interval or 2D
rectangle.  Out-of-grid reads follow the compact-support convention (zero),
with linear / bilinear interpolation in between; every operator precondition
is phrased so the needed translates stay inside the grid.

File formats:
  * CSV: a comment header (`# grid1d origin h n` or
    `# grid2d x1_origin h1 n1 x2_origin h2 n2`) followed by one `re,im`
    line per sample, row-major for 2D.
  * Binary: little-endian, magic `CFGF`, version byte, dims byte, the same
    header fields as float64/uint64, then the interleaved re,im payload.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CoverageError

__all__ = [
    "GridFunction1D",
    "GridFunction2D",
    "ModulationField",
    "read_grid_function",
    "write_grid_function",
]

_MAGIC = b"CFGF"
_VERSION = 1


def _as_complex_vector(values) -> np.ndarray:
    v = np.ascontiguousarray(np.asarray(values, dtype=np.complex128))
    if v.ndim != 1 or v.size < 2:
        raise ValueError("1D grid function needs a 1-d array of length >= 2")
    return v


@dataclass(frozen=True)
class GridFunction1D:
    origin: float
    step: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        object.__setattr__(self, "values", _as_complex_vector(self.values))
        object.__setattr__(self, "origin", float(self.origin))
        object.__setattr__(self, "step", float(self.step))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def x_max(self) -> float:
        return self.origin + self.step * (self.n - 1)

    def xs(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.n)

    def covers(self, lo: float, hi: float, tol: float = 1e-12) -> bool:
        pad = tol * (1.0 + abs(lo) + abs(hi))
        return self.origin <= lo + pad and self.x_max >= hi - pad

    def sample(self, x) -> np.ndarray:
        """Linear interpolation with zero extension outside the grid."""
        x = np.asarray(x, dtype=float)
        pos = (x - self.origin) / self.step
        inside = (pos >= 0.0) & (pos <= self.n - 1)
        i0 = np.clip(np.floor(pos).astype(np.int64), 0, self.n - 2)
        frac = np.clip(pos - i0, 0.0, 1.0)
        out = self.values[i0] * (1.0 - frac) + self.values[i0 + 1] * frac
        return np.where(inside, out, 0.0 + 0.0j)

    def with_values(self, values) -> "GridFunction1D":
        return GridFunction1D(self.origin, self.step, values)


@dataclass(frozen=True)
class GridFunction2D:
    x1_origin: float
    h1: float
    x2_origin: float
    h2: float
    values: np.ndarray = field(repr=False)  # shape (n1, n2), row index = x1

    def __post_init__(self):
        if not (self.h1 > 0 and self.h2 > 0):
            raise ValueError("grid steps must be positive")
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.complex128))
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 2:
            raise ValueError("2D grid function needs an (n1, n2) array, both >= 2")
        object.__setattr__(self, "values", v)
        for name in ("x1_origin", "h1", "x2_origin", "h2"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def n1(self) -> int:
        return self.values.shape[0]

    @property
    def n2(self) -> int:
        return self.values.shape[1]

    @property
    def x1_max(self) -> float:
        return self.x1_origin + self.h1 * (self.n1 - 1)

    @property
    def x2_max(self) -> float:
        return self.x2_origin + self.h2 * (self.n2 - 1)

    def x1s(self) -> np.ndarray:
        return self.x1_origin + self.h1 * np.arange(self.n1)

    def x2s(self) -> np.ndarray:
        return self.x2_origin + self.h2 * np.arange(self.n2)

    def covers(self, lo1, hi1, lo2, hi2, tol: float = 1e-12) -> bool:
        pad1 = tol * (1.0 + abs(lo1) + abs(hi1))
        pad2 = tol * (1.0 + abs(lo2) + abs(hi2))
        return (
            self.x1_origin <= lo1 + pad1
            and self.x1_max >= hi1 - pad1
            and self.x2_origin <= lo2 + pad2
            and self.x2_max >= hi2 - pad2
        )

    def sample(self, x1, x2) -> np.ndarray:
        """Bilinear interpolation with zero extension outside the grid."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        p1 = (x1 - self.x1_origin) / self.h1
        p2 = (x2 - self.x2_origin) / self.h2
        inside = (p1 >= 0.0) & (p1 <= self.n1 - 1) & (p2 >= 0.0) & (p2 <= self.n2 - 1)
        i = np.clip(np.floor(p1).astype(np.int64), 0, self.n1 - 2)
        j = np.clip(np.floor(p2).astype(np.int64), 0, self.n2 - 2)
        fi = np.clip(p1 - i, 0.0, 1.0)
        fj = np.clip(p2 - j, 0.0, 1.0)
        v = self.values
        out = (
            v[i, j] * (1 - fi) * (1 - fj)
            + v[i + 1, j] * fi * (1 - fj)
            + v[i, j + 1] * (1 - fi) * fj
            + v[i + 1, j + 1] * fi * fj
        )
        return np.where(inside, out, 0.0 + 0.0j)

    def with_values(self, values) -> "GridFunction2D":
        return GridFunction2D(self.x1_origin, self.h1, self.x2_origin, self.h2, values)


@dataclass(frozen=True)
class ModulationField:
    """The measurable modulation u, in one of four closed representations."""

    kind: str  # 'constant' | 'piecewise' | 'polynomial' | 'grid'
    const: float = 0.0
    breakpoints: Optional[np.ndarray] = field(default=None, repr=False)
    levels: Optional[np.ndarray] = field(default=None, repr=False)
    coeffs: Optional[np.ndarray] = field(default=None, repr=False)
    grid: Optional[GridFunction1D] = field(default=None, repr=False)

    @staticmethod
    def constant(value: float) -> "ModulationField":
        return ModulationField(kind="constant", const=float(value))

    @staticmethod
    def piecewise(breakpoints: Sequence[float], levels: Sequence[float]) -> "ModulationField":
        b = np.asarray(breakpoints, dtype=float)
        v = np.asarray(levels, dtype=float)
        if b.ndim != 1 or v.ndim != 1 or v.size != b.size + 1:
            raise ValueError("piecewise needs len(levels) == len(breakpoints) + 1")
        if b.size and not np.all(np.diff(b) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        return ModulationField(kind="piecewise", breakpoints=b, levels=v)

    @staticmethod
    def polynomial(coeffs: Sequence[float]) -> "ModulationField":
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("polynomial needs a non-empty coefficient vector")
        return ModulationField(kind="polynomial", coeffs=c)

    @staticmethod
    def from_grid(gf: GridFunction1D) -> "ModulationField":
        return ModulationField(kind="grid", grid=gf)

    def eval(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape, self.const)
        if self.kind == "piecewise":
            idx = np.searchsorted(self.breakpoints, x, side="right")
            return self.levels[idx]
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(x, self.coeffs)
        if self.kind == "grid":
            # modulation must stay defined: clamp to edge values, never zero-fill
            return np.interp(x, self.grid.xs(), self.grid.values.real)
        raise ValueError(f"unknown modulation kind {self.kind!r}")

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "piecewise":
            return bool(np.all(self.levels == self.levels[0]))
        if self.kind == "polynomial":
            return bool(np.all(self.coeffs[1:] == 0.0))
        return False


def write_grid_function(path: str, f: Union[GridFunction1D, GridFunction2D], fmt: Optional[str] = None) -> None:
    if fmt is None:
        fmt = "csv" if str(path).lower().endswith(".csv") else "binary"
    if fmt == "csv":
        _write_csv(path, f)
    elif fmt == "binary":
        _write_binary(path, f)
    else:
        raise ValueError(f"unknown grid-function format {fmt!r}")


def read_grid_function(path: str) -> Union[GridFunction1D, GridFunction2D]:
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _MAGIC:
        return _read_binary(path)
    return _read_csv(path)


def _write_csv(path, f) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if isinstance(f, GridFunction1D):
            fh.write(f"# grid1d {f.origin!r} {f.step!r} {f.n}\n")
            flat = f.values
        else:
            fh.write(
                f"# grid2d {f.x1_origin!r} {f.h1!r} {f.n1} {f.x2_origin!r} {f.h2!r} {f.n2}\n"
            )
            flat = f.values.reshape(-1)
        for z in flat:
            fh.write(f"{z.real:.17g},{z.imag:.17g}\n")


def _read_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        parts = header.split()
        if len(parts) >= 2 and parts[0] == "#" and parts[1] in ("grid1d", "grid2d"):
            kind = parts[1]
        else:
            raise ValueError(f"{path}: missing grid-function CSV header")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    values = data[:, 0] + 1j * data[:, 1]
    if kind == "grid1d":
        origin, step, n = float(parts[2]), float(parts[3]), int(parts[4])
        if n != values.size:
            raise ValueError(f"{path}: header promises {n} samples, file has {values.size}")
        return GridFunction1D(origin, step, values)
    x1o, h1, n1 = float(parts[2]), float(parts[3]), int(parts[4])
    x2o, h2, n2 = float(parts[5]), float(parts[6]), int(parts[7])
    if n1 * n2 != values.size:
        raise ValueError(f"{path}: header promises {n1}x{n2} samples, file has {values.size}")
    return GridFunction2D(x1o, h1, x2o, h2, values.reshape(n1, n2))


def _write_binary(path, f) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        if isinstance(f, GridFunction1D):
            fh.write(struct.pack("<BB", _VERSION, 1))
            fh.write(struct.pack("<ddQ", f.origin, f.step, f.n))
            payload = f.values
        else:
            fh.write(struct.pack("<BB", _VERSION, 2))
            fh.write(struct.pack("<ddQddQ", f.x1_origin, f.h1, f.n1, f.x2_origin, f.h2, f.n2))
            payload = f.values.reshape(-1)
        inter = np.empty(2 * payload.size, dtype="<f8")
        inter[0::2] = payload.real
        inter[1::2] = payload.imag
        fh.write(inter.tobytes())


def _read_binary(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a grid-function binary file")
        version, dims = struct.unpack("<BB", fh.read(2))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        if dims == 1:
            origin, step, n = struct.unpack("<ddQ", fh.read(24))
            raw = np.frombuffer(fh.read(16 * n), dtype="<f8")
            values = raw[0::2] + 1j * raw[1::2]
            return GridFunction1D(origin, step, values)
        if dims == 2:
            x1o, h1, n1, x2o, h2, n2 = struct.unpack("<ddQddQ", fh.read(48))
            raw = np.frombuffer(fh.read(16 * n1 * n2), dtype="<f8")
            values = (raw[0::2] + 1j * raw[1::2]).reshape(n1, n2)
            return GridFunction2D(x1o, h1, x2o, h2, values)
        raise ValueError(f"{path}: unsupported dimension byte {dims}")
