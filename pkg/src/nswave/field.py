"""Spectral representation of vector and scalar fields on a periodic grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as _fft

from .grid import GridSpec, fft_workers


def _fftn(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    axes = tuple(range(-grid.dim, 0))
    return _fft.fftn(values, axes=axes, workers=fft_workers())


def _ifftn(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    axes = tuple(range(-grid.dim, 0))
    return _fft.ifftn(coeffs, axes=axes, workers=fft_workers())


@dataclass
class SpectralField:
    """Fourier coefficients of a (vector) field, indexed (component, *modes).

    real_space marks fields that represent real-valued functions; those
    carry Hermitian symmetry coeffs(-k) = conj(coeffs(k)) up to roundoff
    and transform back through the real part. Genuinely complex fields
    (Ginzburg-Landau states) set real_space=False.
    """

    grid: GridSpec
    coeffs: np.ndarray
    real_space: bool = True

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.ndim == self.grid.dim:
            self.coeffs = self.coeffs[np.newaxis]
        if self.coeffs.ndim != self.grid.dim + 1 or self.coeffs.shape[1:] != self.grid.shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} inconsistent with grid {self.grid.shape}"
            )

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def from_physical(cls, grid: GridSpec, values: np.ndarray, real_space: bool | None = None) -> "SpectralField":
        values = np.asarray(values)
        if real_space is None:
            real_space = not np.iscomplexobj(values)
        if values.ndim == grid.dim:
            values = values[np.newaxis]
        if values.shape[1:] != grid.shape:
            raise ValueError(f"physical shape {values.shape} inconsistent with grid {grid.shape}")
        return cls(grid, _fftn(values.astype(np.complex128), grid), real_space=real_space)

    @classmethod
    def zeros(cls, grid: GridSpec, components: int, real_space: bool = True) -> "SpectralField":
        return cls(grid, np.zeros((components, *grid.shape), dtype=np.complex128), real_space=real_space)

    def to_physical(self) -> np.ndarray:
        values = _ifftn(self.coeffs, self.grid)
        return values.real if self.real_space else values

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy(), real_space=self.real_space)

    def zeros_like(self) -> "SpectralField":
        return SpectralField.zeros(self.grid, self.components, real_space=self.real_space)

    def hermitian_defect(self) -> float:
        """Relative departure from coeffs(-k) = conj(coeffs(k))."""
        flipped = self.coeffs
        for ax in range(1, self.grid.dim + 1):
            flipped = np.flip(np.roll(flipped, -1, axis=ax), axis=ax)
        num = np.linalg.norm(self.coeffs - np.conj(flipped))
        den = np.linalg.norm(self.coeffs)
        return float(num / den) if den > 0 else 0.0

    def mean_value(self) -> np.ndarray:
        """Spatial mean of each component (the k=0 coefficient over N)."""
        zero = (slice(None),) + (0,) * self.grid.dim
        return self.coeffs[zero] / self.grid.num_points

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_same(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs,
                             real_space=self.real_space and other.real_space)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_same(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs,
                             real_space=self.real_space and other.real_space)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar, real_space=self.real_space)

    __rmul__ = __mul__

    def _check_same(self, other: "SpectralField") -> None:
        if not self.grid.compatible(other.grid):
            raise ValueError("grid mismatch between fields")
        if self.components != other.components:
            raise ValueError(
                f"component mismatch: {self.components} vs {other.components}"
            )


@dataclass
class PressureField:
    """Scalar pressure in spectral form; the k=0 coefficient is pinned to zero."""

    grid: GridSpec
    coeffs: np.ndarray
    zero_mean: bool = field(default=True)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(
                f"pressure coefficient shape {self.coeffs.shape} inconsistent with grid {self.grid.shape}"
            )
        zero = (0,) * self.grid.dim
        self.coeffs[zero] = 0.0

    def to_physical(self) -> np.ndarray:
        return _ifftn(self.coeffs, self.grid).real

    def as_field(self) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[np.newaxis].copy())
