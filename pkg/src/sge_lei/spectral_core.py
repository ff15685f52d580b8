"""Periodic grids, discrete Fourier transforms, and diagonal spectral operators.

Conventions used throughout the package:

* Mode indices per axis follow the standard transform ordering
  {0, 1, ..., M/2 - 1, -M/2, ..., -1}.
* The forward transform divides by the node count, so a coefficient array
  holds u_tilde_l = (1/M) sum_j u_j exp(-i mu_l (x_j - a)).  Multi-axis
  data is stored row-major over (l1, l2).
* Sobolev-type norms are plain coefficient sums without a domain-measure
  factor: ||u||_{H^m}^2 = sum_l (1 + |mu_l|^2)^m |u_tilde_l|^2.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


class TransformStats:
    """Process-wide tally of executed transforms.

    Every discrete transform in the package routes through
    fft_coefficients / ifft_values, so this counter is an exact account
    of the O(M log M) work performed.  Reset it, run a computation, and
    read the totals to audit per-step cost.
    """

    def __init__(self) -> None:
        self.forward = 0
        self.inverse = 0

    def reset(self) -> None:
        self.forward = 0
        self.inverse = 0

    @property
    def total(self) -> int:
        return self.forward + self.inverse


TRANSFORM_STATS = TransformStats()


def fft_coefficients(values: np.ndarray, grid: "PeriodicGrid") -> np.ndarray:
    """Forward transform node values to normalized coefficients."""
    TRANSFORM_STATS.forward += 1
    return np.fft.fftn(values) / grid.size


def ifft_values(coefficients: np.ndarray, grid: "PeriodicGrid") -> np.ndarray:
    """Inverse transform normalized coefficients back to node values."""
    TRANSFORM_STATS.inverse += 1
    return np.fft.ifftn(coefficients) * grid.size


class PeriodicGrid:
    """Tensor-product periodic grid on [a_i, b_i) with M_i nodes per axis.

    Exposes the wavenumbers mu_l = 2 pi l / (b - a) and the diagonal
    symbol delta_l = sqrt(1 + |mu_l|^2) of the operator sqrt(1 - Laplace).
    delta_l >= 1 for every mode, so its inverse is always well defined.
    """

    def __init__(self, endpoints: Sequence[tuple[float, float]], modes: Sequence[int]):
        endpoints = [(float(a), float(b)) for a, b in endpoints]
        modes = [int(m) for m in modes]
        if len(endpoints) != len(modes):
            raise ValueError("endpoints and modes must have equal length")
        if len(modes) not in (1, 2):
            raise ValueError("only 1D and 2D grids are supported")
        for m in modes:
            if m < 4 or m % 2 != 0:
                raise ValueError(f"mode count must be even and >= 4, got {m}")
        for a, b in endpoints:
            if not b > a:
                raise ValueError(f"interval endpoints must satisfy b > a, got ({a}, {b})")

        self.endpoints = tuple(endpoints)
        self.modes = tuple(modes)
        self.dim = len(modes)
        self.shape = tuple(modes)
        self.size = int(np.prod(modes))
        self.spacings = tuple((b - a) / m for (a, b), m in zip(endpoints, modes))

        # Integer mode indices in transform order, then physical wavenumbers.
        self._mode_axes = tuple(np.fft.fftfreq(m, d=1.0 / m) for m in modes)
        self.mu_axes = tuple(
            2.0 * np.pi * idx / (b - a)
            for idx, (a, b) in zip(self._mode_axes, endpoints)
        )
        musq = np.zeros(self.shape)
        for axis, mu in enumerate(self.mu_axes):
            bcast = [1] * self.dim
            bcast[axis] = modes[axis]
            musq = musq + (mu**2).reshape(bcast)
        self.mu_squared = musq
        self.delta = np.sqrt(1.0 + musq)

    def nodes(self) -> tuple[np.ndarray, ...]:
        """Node coordinate arrays, broadcast to the full grid shape."""
        axes = [
            a + h * np.arange(m)
            for (a, _), h, m in zip(self.endpoints, self.spacings, self.modes)
        ]
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def same_domain(self, other: "PeriodicGrid") -> bool:
        return self.dim == other.dim and self.endpoints == other.endpoints

    def volume(self) -> float:
        out = 1.0
        for a, b in self.endpoints:
            out *= b - a
        return out

    def cell_volume(self) -> float:
        out = 1.0
        for h in self.spacings:
            out *= h
        return out

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, PeriodicGrid)
            and self.endpoints == other.endpoints
            and self.modes == other.modes
        )

    def __hash__(self) -> int:
        return hash((self.endpoints, self.modes))

    def __repr__(self) -> str:
        spans = ", ".join(f"({a:g}, {b:g})" for a, b in self.endpoints)
        return f"PeriodicGrid([{spans}], modes={list(self.modes)})"


class SpectralField:
    """A field stored as node values, coefficients, or both.

    The two representations are synchronized lazily; asking for the
    missing one triggers exactly one transform.  Synchronization mutates
    internal caches only, so a field is safe to read concurrently once
    both representations exist.
    """

    __slots__ = ("grid", "_values", "_coefficients")

    def __init__(self, grid: PeriodicGrid, values=None, coefficients=None):
        if values is None and coefficients is None:
            raise ValueError("need values or coefficients")
        self.grid = grid
        self._values = None if values is None else self._as_grid_array(values)
        self._coefficients = (
            None if coefficients is None else self._as_grid_array(coefficients)
        )

    def _as_grid_array(self, data) -> np.ndarray:
        arr = np.asarray(data, dtype=np.complex128)
        if arr.shape != self.grid.shape:
            raise ValueError(f"array shape {arr.shape} does not match grid {self.grid.shape}")
        return arr

    @classmethod
    def from_values(cls, grid: PeriodicGrid, values) -> "SpectralField":
        return cls(grid, values=values)

    @classmethod
    def from_coefficients(cls, grid: PeriodicGrid, coefficients) -> "SpectralField":
        return cls(grid, coefficients=coefficients)

    @classmethod
    def zero(cls, grid: PeriodicGrid) -> "SpectralField":
        return cls(grid, coefficients=np.zeros(grid.shape, dtype=np.complex128))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = ifft_values(self._coefficients, self.grid)
        return self._values

    @property
    def coefficients(self) -> np.ndarray:
        if self._coefficients is None:
            self._coefficients = fft_coefficients(self._values, self.grid)
        return self._coefficients

    def copy(self) -> "SpectralField":
        out = SpectralField.__new__(SpectralField)
        out.grid = self.grid
        out._values = None if self._values is None else self._values.copy()
        out._coefficients = (
            None if self._coefficients is None else self._coefficients.copy()
        )
        return out


def forward_transform(field: SpectralField) -> SpectralField:
    """Return the field with its coefficient representation realized."""
    field.coefficients
    return field


def inverse_transform(field: SpectralField) -> SpectralField:
    """Return the field with its node-value representation realized."""
    field.values
    return field


def apply_nabla_bracket(field: SpectralField, power: int) -> SpectralField:
    """Apply sqrt(1 - Laplace) (power +1) or its inverse (power -1).

    Diagonal in coefficient space: multiply mode l by delta_l^power.
    """
    if power not in (-1, 1):
        raise ValueError(f"power must be -1 or +1, got {power}")
    sym = field.grid.delta if power == 1 else 1.0 / field.grid.delta
    return SpectralField.from_coefficients(field.grid, field.coefficients * sym)


def sobolev_norm(field: SpectralField, m: float = 0.0) -> float:
    """Discrete H^m norm; m = 0 gives the L^2 (coefficient-sum) norm."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    c = field.coefficients
    if m == 0:
        return float(np.sqrt(np.sum(np.abs(c) ** 2)))
    weights = (1.0 + field.grid.mu_squared) ** m
    return float(np.sqrt(np.sum(weights * np.abs(c) ** 2)))


def _centered(coefficients: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(coefficients)


def _uncentered(coefficients: np.ndarray) -> np.ndarray:
    return np.fft.ifftshift(coefficients)


def resample(field: SpectralField, target: PeriodicGrid) -> SpectralField:
    """Re-expand the field on another grid over the same domain.

    Shared modes are copied; a finer target zero-pads the spectrum, a
    coarser one truncates it (spectral projection).  Exact for fields
    band-limited to the coarser of the two grids.
    """
    if not field.grid.same_domain(target):
        raise ValueError(
            f"grids span different domains: {field.grid.endpoints} vs {target.endpoints}"
        )
    if field.grid.modes == target.modes:
        return SpectralField.from_coefficients(target, field.coefficients.copy())

    src = _centered(field.coefficients)
    out = np.zeros(target.shape, dtype=np.complex128)
    # Per-axis slice of the centered spectrum: embed when the target is
    # finer, crop when it is coarser.
    src_slices = []
    dst_slices = []
    for ms, mt in zip(field.grid.modes, target.modes):
        if mt >= ms:
            src_slices.append(slice(0, ms))
            dst_slices.append(slice((mt - ms) // 2, (mt - ms) // 2 + ms))
        else:
            src_slices.append(slice((ms - mt) // 2, (ms - mt) // 2 + mt))
            dst_slices.append(slice(0, mt))
    out[tuple(dst_slices)] = src[tuple(src_slices)]
    return SpectralField.from_coefficients(target, _uncentered(out))


def reflected_conjugate(coefficients: np.ndarray) -> np.ndarray:
    """Coefficients of the complex conjugate field: conj(c) at index -l."""
    idx = tuple((-np.arange(m)) % m for m in coefficients.shape)
    return np.conj(coefficients[np.ix_(*idx)])
