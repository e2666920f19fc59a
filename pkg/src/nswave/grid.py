"""Periodic grid description and Fourier-space bookkeeping.

Everything downstream works on a uniform periodic box. The forward
transform is unnormalized, the inverse carries the 1/N factor (the
numpy/scipy convention); quadrature weights show up explicitly in the
norm routines instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_DEALIAS = 2.0 / 3.0

_fft_workers = 1


def set_fft_workers(n: int) -> None:
    """Set the FFT worker count used by all transforms (default 1)."""
    global _fft_workers
    if n < 1:
        raise ValueError(f"fft workers must be >= 1, got {n}")
    _fft_workers = int(n)


def fft_workers() -> int:
    return _fft_workers


def _fft_friendly(n: int) -> bool:
    if n < 8 or n % 2:
        return False
    for p in (2, 3, 5):
        while n % p == 0:
            n //= p
    return n == 1


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on a d-dimensional box.

    points_per_axis entries must be even, at least 8, and factor into
    primes 2, 3 and 5 so transform sizes stay fast and mode indexing is
    unambiguous. Wavevectors with any |k_i| at or above dealias_fraction
    of the axis Nyquist are zeroed after nonlinear products (fraction 1
    disables truncation entirely).
    """

    dim: int
    points_per_axis: tuple[int, ...]
    period_per_axis: tuple[float, ...]
    dealias_fraction: float = DEFAULT_DEALIAS

    def __post_init__(self):
        object.__setattr__(self, "points_per_axis", tuple(int(n) for n in self.points_per_axis))
        object.__setattr__(self, "period_per_axis", tuple(float(p) for p in self.period_per_axis))
        if self.dim not in (2, 3):
            raise ValueError(f"grid dim must be 2 or 3, got {self.dim}")
        if len(self.points_per_axis) != self.dim or len(self.period_per_axis) != self.dim:
            raise ValueError("points_per_axis/period_per_axis length must equal dim")
        for n in self.points_per_axis:
            if not _fft_friendly(n):
                raise ValueError(
                    f"points per axis must be even, >= 8, with prime factors in {{2,3,5}}, got {n}")
        for p in self.period_per_axis:
            if not p > 0:
                raise ValueError(f"periods must be positive, got {p}")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError(f"dealias_fraction must be in (0, 1], got {self.dealias_fraction}")

    @classmethod
    def of(cls, points, periods, dealias_fraction: float = DEFAULT_DEALIAS) -> "GridSpec":
        """Build a GridSpec, broadcasting scalar points/periods to all axes."""
        if np.isscalar(points) and np.isscalar(periods):
            raise ValueError("at least one of points/periods must fix the dimension")
        if np.isscalar(points):
            points = (int(points),) * len(periods)
        if np.isscalar(periods):
            periods = (float(periods),) * len(points)
        return cls(len(points), tuple(points), tuple(periods), dealias_fraction)

    @classmethod
    def cube(cls, n: int, period: float, dim: int,
             dealias_fraction: float = DEFAULT_DEALIAS) -> "GridSpec":
        """Isotropic grid: n points and the same period on every axis."""
        return cls(dim, (int(n),) * dim, (float(period),) * dim, dealias_fraction)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points_per_axis

    @property
    def num_points(self) -> int:
        return int(np.prod(self.points_per_axis))

    @property
    def volume(self) -> float:
        return float(np.prod(self.period_per_axis))

    @property
    def cell_volume(self) -> float:
        return self.volume / self.num_points

    @property
    def dx_min(self) -> float:
        return min(p / n for p, n in zip(self.period_per_axis, self.points_per_axis))

    def mode_indices(self, axis: int) -> np.ndarray:
        """Signed integer mode indices along one axis, fft layout."""
        n = self.points_per_axis[axis]
        return np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)

    def k_axis(self, axis: int) -> np.ndarray:
        """Angular wavenumbers along one axis, fft layout."""
        n = self.points_per_axis[axis]
        return 2.0 * np.pi * np.fft.fftfreq(n, d=self.period_per_axis[axis] / n)

    @cached_property
    def k_vectors(self) -> tuple[np.ndarray, ...]:
        """Broadcastable wavevector component arrays (one per axis)."""
        out = []
        for ax in range(self.dim):
            shape = [1] * self.dim
            shape[ax] = self.points_per_axis[ax]
            out.append(self.k_axis(ax).reshape(shape))
        return tuple(out)

    @cached_property
    def k_squared(self) -> np.ndarray:
        ks = self.k_vectors
        out = np.zeros(self.shape)
        for k in ks:
            out = out + k**2
        return out

    @cached_property
    def inv_k_squared(self) -> np.ndarray:
        """1/|k|^2 with the k=0 entry set to zero."""
        k2 = self.k_squared.copy()
        zero = k2 == 0.0
        k2[zero] = 1.0
        out = 1.0 / k2
        out[zero] = 0.0
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Boolean keep-mask implementing the truncation rule.

        Modes strictly below the fractional Nyquist survive; keeping the
        boundary mode when the cut lands on an integer would let alias
        images of quadratic products fall back inside the retained band.
        """
        keep = np.ones(self.shape, dtype=bool)
        if self.dealias_fraction >= 1.0:
            return keep
        for ax in range(self.dim):
            n = self.points_per_axis[ax]
            cut = self.dealias_fraction * (n / 2)
            m = np.abs(self.mode_indices(ax))
            shape = [1] * self.dim
            shape[ax] = n
            keep &= (m < cut).reshape(shape)
        return keep

    def axes_physical(self) -> list[np.ndarray]:
        return [
            np.arange(n) * (p / n)
            for n, p in zip(self.points_per_axis, self.period_per_axis)
        ]

    def meshgrid(self) -> list[np.ndarray]:
        return list(np.meshgrid(*self.axes_physical(), indexing="ij"))

    def compatible(self, other: "GridSpec") -> bool:
        return (
            self.dim == other.dim
            and self.points_per_axis == other.points_per_axis
            and np.allclose(self.period_per_axis, other.period_per_axis, rtol=1e-12, atol=0.0)
        )
