"""Periodic grids, fields, and Fourier-multiplier machinery.

Everything downstream works on a truncated periodic box [-L, L)^N with
N in {1, 2} and a power-of-two point count per axis, so that discrete
frequencies are xi_k = pi k / L and symbols act diagonally under the FFT.
Conventions: x_j = -L + j dx with dx = 2L/n, so x = 0 sits exactly on the
lattice; transforms are plain complex FFTs and real parts are taken on
the way back.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalFailureError

_FIELD_MAGIC = b"FHK1"


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [-half_width, half_width)^dim."""

    dim: int
    half_width: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigurationError(f"dim must be 1 or 2, got {self.dim}")
        if not (self.half_width > 0 and np.isfinite(self.half_width)):
            raise ConfigurationError(f"half_width must be positive, got {self.half_width}")
        if not (_is_power_of_two(self.points) and self.points >= 16):
            raise ConfigurationError(
                f"points must be a power of two >= 16, got {self.points}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.dim

    def axis_coords(self) -> np.ndarray:
        """Grid coordinates along one axis; x = 0 is at index points//2."""
        n = self.points
        return (np.arange(n) - n // 2) * self.spacing

    def axis_freqs(self) -> np.ndarray:
        """Angular frequencies xi_k = pi k / L in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    def coords(self) -> tuple:
        """Meshgrid coordinate arrays, one per axis (ij indexing)."""
        x = self.axis_coords()
        if self.dim == 1:
            return (x,)
        return tuple(np.meshgrid(x, x, indexing="ij"))

    def freq_magnitude(self) -> np.ndarray:
        """|xi| on the full frequency lattice (Nyquist enters unsigned)."""
        xi = self.axis_freqs()
        if self.dim == 1:
            return np.abs(xi)
        kx, ky = np.meshgrid(xi, xi, indexing="ij")
        return np.hypot(kx, ky)


def make_grid(dim: int, half_width: float, points: int) -> GridSpec:
    return GridSpec(dim=int(dim), half_width=float(half_width), points=int(points))


@dataclass(frozen=True)
class Field:
    """Real scalar field sampled on a GridSpec."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ConfigurationError(
                f"field shape {v.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericalFailureError("field contains non-finite values")
        object.__setattr__(self, "values", v)


def make_field(grid: GridSpec, values) -> Field:
    return Field(grid=grid, values=np.asarray(values, dtype=np.float64))


def delta_field(grid: GridSpec) -> Field:
    """Discrete delta at the origin with unit discrete integral."""
    v = np.zeros(grid.shape)
    origin = (grid.points // 2,) * grid.dim
    v[origin] = 1.0 / grid.cell_volume
    return Field(grid=grid, values=v)


def integral(f: Field) -> float:
    return float(np.sum(f.values) * f.grid.cell_volume)


@dataclass(frozen=True)
class SpectralSymbol:
    """Fourier symbol on a grid's frequency lattice.

    kind "mixed" is |xi|^2 + |xi|^alpha (the generator of the mixed
    local/nonlocal flow), "fractional" is |xi|^alpha alone, "laplacian"
    is |xi|^2. alpha = 2 collapses the mixed symbol to 2|xi|^2 and is
    only allowed as an explicit diagnostic.
    """

    grid: GridSpec
    alpha: float
    kind: str
    values: np.ndarray = field(repr=False)


def make_symbol(grid: GridSpec, alpha: float, kind: str = "mixed",
                diagnostic_alpha2: bool = False) -> SpectralSymbol:
    if kind not in ("mixed", "fractional", "laplacian"):
        raise ConfigurationError(f"unknown symbol kind {kind!r}")
    if kind != "laplacian":
        if not (0.0 < alpha < 2.0 or (alpha == 2.0 and diagnostic_alpha2)):
            raise ConfigurationError(
                f"alpha must lie in (0, 2) (alpha = 2 needs diagnostic_alpha2), got {alpha}")
    mag = grid.freq_magnitude()
    if kind == "mixed":
        values = mag ** 2 + mag ** alpha
    elif kind == "fractional":
        values = mag ** alpha
    else:
        values = mag ** 2
    return SpectralSymbol(grid=grid, alpha=float(alpha), kind=kind, values=values)


def apply_symbol(f: Field, symbol: SpectralSymbol, scale: float = 1.0,
                 mode: str = "multiplier") -> Field:
    """Apply scale*m(xi) (mode "multiplier") or exp(-scale*m(xi))
    (mode "semigroup") to a field in frequency space.

    The zero mode of a semigroup multiplier is exactly 1, so the discrete
    integral is preserved to rounding. Output is the real part of the
    inverse transform; the imaginary leakage of a real input is at
    rounding level by conjugate symmetry of the symbol.
    """
    if f.grid != symbol.grid:
        raise ConfigurationError("field and symbol live on different grids")
    if mode == "multiplier":
        mult = scale * symbol.values
    elif mode == "semigroup":
        if scale < 0:
            raise ConfigurationError(f"semigroup scale must be >= 0, got {scale}")
        mult = np.exp(-scale * symbol.values)
    else:
        raise ConfigurationError(f"unknown apply_symbol mode {mode!r}")
    out = np.fft.ifftn(mult * np.fft.fftn(f.values)).real
    if not np.all(np.isfinite(out)):
        raise NumericalFailureError("apply_symbol produced non-finite values")
    return Field(grid=f.grid, values=out)


def frac_laplacian_spectral(f: Field, alpha: float) -> Field:
    """Fractional Laplacian (-Lap)^(alpha/2) f via the |xi|^alpha multiplier."""
    return apply_symbol(f, make_symbol(f.grid, alpha, kind="fractional"),
                        scale=1.0, mode="multiplier")


def convolve(f: Field, g: Field) -> Field:
    """Periodic convolution int f(y) g(x - y) dy on the grid.

    The FFT product computes an index-circular convolution; with the
    origin at index n//2 the result comes back shifted by half a period
    per axis, so it is rolled into place.
    """
    if f.grid != g.grid:
        raise ConfigurationError("convolve needs both fields on one grid")
    grid = f.grid
    raw = np.fft.ifftn(np.fft.fftn(f.values) * np.fft.fftn(g.values)).real
    shift = (-(grid.points // 2),) * grid.dim
    out = np.roll(raw, shift, axis=tuple(range(grid.dim))) * grid.cell_volume
    if not np.all(np.isfinite(out)):
        raise NumericalFailureError("convolve produced non-finite values")
    return Field(grid=grid, values=out)


def spectral_gradient(f: Field) -> list:
    """Per-axis spectral derivatives; the odd i*xi multiplier has its
    Nyquist mode zeroed so real input maps to real output."""
    grid = f.grid
    xi = grid.axis_freqs()
    ixi = 1j * xi
    ixi[grid.points // 2] = 0.0  # Nyquist slot of an odd multiplier
    spectrum = np.fft.fftn(f.values)
    out = []
    for axis in range(grid.dim):
        shape = [1] * grid.dim
        shape[axis] = grid.points
        deriv = np.fft.ifftn(spectrum * ixi.reshape(shape)).real
        out.append(Field(grid=grid, values=deriv))
    return out


def dealias(f: Field) -> Field:
    """Zero all modes with any axis frequency above 2/3 of Nyquist."""
    grid = f.grid
    xi = grid.axis_freqs()
    cutoff = (2.0 / 3.0) * np.pi / grid.spacing
    keep_axis = np.abs(xi) <= cutoff
    spectrum = np.fft.fftn(f.values)
    for axis in range(grid.dim):
        shape = [1] * grid.dim
        shape[axis] = grid.points
        spectrum = spectrum * keep_axis.reshape(shape)
    return Field(grid=grid, values=np.fft.ifftn(spectrum).real)


def write_field(f: Field, path) -> None:
    """Serialize a field: magic 'FHK1', u8 dim, u64 points per axis,
    f64 half_width, then row-major little-endian f64 samples."""
    header = struct.pack("<4sBQd", _FIELD_MAGIC, f.grid.dim,
                         f.grid.points, f.grid.half_width)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_field(path) -> Field:
    header_size = struct.calcsize("<4sBQd")
    with open(path, "rb") as fh:
        header = fh.read(header_size)
        if len(header) != header_size:
            raise ConfigurationError(f"{path}: truncated field header")
        magic, dim, points, half_width = struct.unpack("<4sBQd", header)
        if magic != _FIELD_MAGIC:
            raise ConfigurationError(f"{path}: bad magic {magic!r}")
        grid = make_grid(dim, half_width, points)
        payload = fh.read()
    expected = points ** dim * 8
    if len(payload) != expected:
        raise ConfigurationError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype="<f8").reshape(grid.shape)
    return Field(grid=grid, values=values.copy())
