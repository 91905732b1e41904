"""Periodic grids on the unit torus, spectral transforms, differentiation, and norms.

All fields live on uniform grids over [0,1)^n with n in {1,2}. Spectral
coefficients are stored in the numpy ``rfftn`` half-complex layout,
normalised so that ``coeffs[0,...,0]`` is the spatial mean; the field is
``f(x) = sum_k c_k exp(2*pi*i k.x)`` with ``c_{-k} = conj(c_k)`` implied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "ScalarField",
    "SpectralField",
    "SpeciesVector",
    "make_grid",
    "transform",
    "inverse_transform",
    "gradient",
    "divergence",
    "lp_norm",
    "dealias",
    "random_band_limited",
    "write_snapshot",
    "read_snapshot",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform N^n grid on the unit torus; nodes at x_j = j/N."""

    n: int
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"unsupported dimension n={self.n}; expected 1 or 2")
        if self.N < 8 or (self.N & (self.N - 1)) != 0:
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def num_nodes(self) -> int:
        return self.N**self.n

    def axes(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.N) / self.N
        return (x,) * self.n

    def meshgrid(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")


def make_grid(n: int, N: int) -> GridSpec:
    return GridSpec(n=n, N=N)


@dataclass(frozen=True)
class ScalarField:
    """One real scalar quantity sampled at the grid nodes."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: GridSpec, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "ScalarField":
        return cls(grid, np.asarray(fn(*grid.meshgrid()), dtype=float))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class SpectralField:
    """Frequency-side view of a real field (rfftn layout, mean-normalised)."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != rfft_shape(self.grid):
            raise ValueError(f"coeffs shape {c.shape} does not match grid {self.grid.shape}")
        _check_hermitian(self.grid, c)
        object.__setattr__(self, "coeffs", c)

    def coefficient(self, k) -> complex:
        """Fourier coefficient at integer frequency k (tuple or int), |k_m| <= N/2."""
        k = (k,) if np.isscalar(k) else tuple(int(km) for km in k)
        if len(k) != self.grid.n:
            raise ValueError(f"frequency has {len(k)} components, grid is {self.grid.n}-d")
        N = self.grid.N
        if any(abs(km) > N // 2 for km in k):
            raise ValueError(f"frequency {k} outside band |k| <= {N // 2}")
        if k[-1] < 0:
            return complex(np.conj(self.coefficient(tuple(-km for km in k))))
        idx = tuple(km % N for km in k[:-1]) + (k[-1],)
        return complex(self.coeffs[idx])


@dataclass(frozen=True)
class SpeciesVector:
    """Tuple of d scalar fields on one common grid."""

    fields: tuple[ScalarField, ...]

    def __post_init__(self):
        fields = tuple(self.fields)
        if not fields:
            raise ValueError("species vector must contain at least one field")
        grid = fields[0].grid
        if any(f.grid != grid for f in fields):
            raise ValueError("all species must share one grid")
        object.__setattr__(self, "fields", fields)

    @property
    def d(self) -> int:
        return len(self.fields)

    @property
    def grid(self) -> GridSpec:
        return self.fields[0].grid

    @classmethod
    def from_array(cls, grid: GridSpec, values: np.ndarray) -> "SpeciesVector":
        values = np.asarray(values, dtype=float)
        return cls(tuple(ScalarField(grid, values[i]) for i in range(values.shape[0])))

    def stack(self) -> np.ndarray:
        return np.stack([f.values for f in self.fields])

    def sup_norm(self) -> float:
        return max(f.sup_norm() for f in self.fields)

    def total(self) -> ScalarField:
        return ScalarField(self.grid, self.stack().sum(axis=0))


# -- spectral plumbing shared by the solver modules -------------------------


def rfft_shape(grid: GridSpec) -> tuple[int, ...]:
    return grid.shape[:-1] + (grid.N // 2 + 1,)


def to_coeffs(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Normalised rfftn over the trailing n axes (leading axes pass through)."""
    axes = tuple(range(values.ndim - grid.n, values.ndim))
    return np.fft.rfftn(values, axes=axes) / grid.num_nodes


def from_coeffs(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    axes = tuple(range(coeffs.ndim - grid.n, coeffs.ndim))
    return np.fft.irfftn(coeffs * grid.num_nodes, s=grid.shape, axes=axes)


def frequencies(grid: GridSpec) -> tuple[np.ndarray, ...]:
    """Integer wavenumber array per axis, broadcastable over rfft_shape."""
    N, n = grid.N, grid.n
    full = np.fft.fftfreq(N, d=1.0 / N)
    half = np.arange(N // 2 + 1, dtype=float)
    if n == 1:
        return (half,)
    return (full[:, None], half[None, :])


def laplacian_symbol(grid: GridSpec) -> np.ndarray:
    ks = frequencies(grid)
    k2 = sum(k**2 for k in ks)
    return -4.0 * math.pi**2 * k2


def derivative_symbol(grid: GridSpec, axis: int) -> np.ndarray:
    """Multiplier 2*pi*i*k_axis with the Nyquist mode zeroed (keeps fields real)."""
    N = grid.N
    k = frequencies(grid)[axis].copy()
    k[np.abs(k) == N // 2] = 0.0
    return np.broadcast_to(2.0j * math.pi * k, rfft_shape(grid)).copy()


def dealias_keep_mask(grid: GridSpec) -> np.ndarray:
    """2/3-rule keep mask: True where |k_m| <= N//3 for every axis."""
    cutoff = grid.N // 3
    keep = np.ones(rfft_shape(grid), dtype=bool)
    for k in frequencies(grid):
        keep &= np.broadcast_to(np.abs(k) <= cutoff, keep.shape)
    return keep


def _check_hermitian(grid: GridSpec, coeffs: np.ndarray, rtol: float = 1e-10):
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    tol = rtol * (scale + 1.0)
    N = grid.N
    if grid.n == 1:
        bad = max(abs(coeffs[0].imag), abs(coeffs[N // 2].imag))
    else:
        bad = 0.0
        for j in (0, N // 2):
            col = coeffs[:, j]
            bad = max(bad, float(np.max(np.abs(col - np.conj(col[-np.arange(N) % N])))))
    if bad > tol:
        raise ValueError("coefficients violate Hermitian symmetry; field would not be real")


# -- operations --------------------------------------------------------------


def transform(field: ScalarField) -> SpectralField:
    return SpectralField(field.grid, to_coeffs(field.values, field.grid))


def inverse_transform(sf: SpectralField) -> ScalarField:
    return ScalarField(sf.grid, from_coeffs(sf.coeffs, sf.grid))


def gradient(field: ScalarField) -> tuple[ScalarField, ...]:
    """Spectral gradient: exact derivative of the band-limited interpolant."""
    grid = field.grid
    chat = to_coeffs(field.values, grid)
    out = []
    for m in range(grid.n):
        out.append(ScalarField(grid, from_coeffs(derivative_symbol(grid, m) * chat, grid)))
    return tuple(out)


def divergence(components: Sequence[ScalarField]) -> ScalarField:
    grid = components[0].grid
    if len(components) != grid.n:
        raise ValueError(f"expected {grid.n} components, got {len(components)}")
    if any(c.grid != grid for c in components):
        raise ValueError("components must share one grid")
    acc = np.zeros(rfft_shape(grid), dtype=complex)
    for m, comp in enumerate(components):
        acc += derivative_symbol(grid, m) * to_coeffs(comp.values, grid)
    return ScalarField(grid, from_coeffs(acc, grid))


def lp_norm(field: ScalarField, p: float) -> float:
    """L^p norm over the unit torus by the uniform-node midpoint rule.

    p = inf returns the nodal max of |f|; no subgrid extremum search.
    """
    v = field.values
    if p == math.inf:
        return float(np.max(np.abs(v)))
    p = float(p)
    if p < 1.0:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    return float(np.mean(np.abs(v) ** p) ** (1.0 / p))


def dealias(field: ScalarField) -> ScalarField:
    grid = field.grid
    chat = to_coeffs(field.values, grid)
    chat[~dealias_keep_mask(grid)] = 0.0
    return ScalarField(grid, from_coeffs(chat, grid))


def random_band_limited(
    grid: GridSpec,
    rng: np.random.Generator,
    kmax: int,
    amplitude: float = 1.0,
    mean: float = 0.0,
) -> ScalarField:
    """Random real field supported on modes 0 < max|k_m| <= kmax.

    The draw order is fixed and independent of N, so the same (seed, kmax)
    yields the same continuum field on every grid resolution.
    """
    if kmax < 1 or kmax > grid.N // 2 - 1:
        raise ValueError(f"kmax must be in [1, N/2-1], got {kmax}")
    coeffs = np.zeros(rfft_shape(grid), dtype=complex)
    scale = amplitude / (2.0 * math.sqrt(kmax))
    if grid.n == 1:
        for k in range(1, kmax + 1):
            a, b = rng.standard_normal(2)
            coeffs[k] = scale * (a + 1j * b)
    else:
        N = grid.N
        # half-plane k2 > 0, plus the k2 = 0 column with k1 > 0; that column
        # needs its explicit axis-0 conjugate partner (the rfft layout only
        # implies symmetry along the last axis)
        for k1 in range(-kmax, kmax + 1):
            for k2 in range(0, kmax + 1):
                if k2 == 0 and k1 <= 0:
                    continue
                a, b = rng.standard_normal(2)
                c = scale * (a + 1j * b) / math.sqrt(2.0 * kmax)
                coeffs[k1 % N, k2] = c
                if k2 == 0:
                    coeffs[(-k1) % N, 0] = np.conj(c)
    coeffs[(0,) * grid.n] = mean
    return ScalarField(grid, from_coeffs(coeffs, grid))


# -- snapshot text format ----------------------------------------------------


def write_snapshot(field: ScalarField, t: float, path):
    """Columnar text snapshot: header '# n N t', one row 'x_1 .. x_n value' per node."""
    grid = field.grid
    coords = grid.meshgrid()
    flat = [c.ravel() for c in coords] + [field.values.ravel()]
    with open(path, "w") as fh:
        fh.write(f"# {grid.n} {grid.N} {t:.17g}\n")
        for row in zip(*flat):
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def read_snapshot(path) -> tuple[ScalarField, float]:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "#":
            raise ValueError(f"bad snapshot header in {path}")
        n, N, t = int(header[1]), int(header[2]), float(header[3])
        data = np.loadtxt(fh, ndmin=2)
    grid = GridSpec(n=n, N=N)
    values = data[:, -1].reshape(grid.shape)
    return ScalarField(grid, values), t
