"""Periodic multi-time grids, fields and the discrete operators acting on them.

Component layout of a state vector u in R^{n+np} (fixed for the whole package)::

    (x^1, ..., x^n, p_1^1, ..., p_1^p, p_2^1, ..., p_n^p)

i.e. positions first, then momenta grouped by position index i and, inside
each group, by time direction alpha.  ``momentum_index(n, p, i, alpha)``
returns the flat index of p_i^alpha (0-based).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Scheme",
    "MultiTimeGrid",
    "PeriodicField",
    "FieldJacobian",
    "state_dim",
    "momentum_index",
    "partial",
    "derivative",
    "derivative_array",
    "polysymplectic_apply",
    "polysymplectic_array",
    "apply_K",
    "apply_K_adjoint",
    "metric_inner",
    "mean",
    "zero_mean_project",
    "project_off_kernel",
    "derivative_symbols",
]


class Scheme(str, enum.Enum):
    CENTRAL2 = "central2"
    FOURIER = "fourier"

    @classmethod
    def coerce(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown derivative scheme {value!r}; expected one of "
                             f"{[s.value for s in cls]}") from None


def state_dim(n: int, p: int) -> int:
    return n + n * p


def momentum_index(n: int, p: int, i: int, alpha: int) -> int:
    return n + i * p + alpha


@dataclass(frozen=True)
class MultiTimeGrid:
    """Uniform periodic tensor grid over the box [0,T^1] x ... x [0,T^p].

    Node j along direction alpha sits at t^alpha = j * h_alpha with
    h_alpha = T^alpha / N_alpha; the node t^alpha = T^alpha is identified
    with t^alpha = 0 and is not stored.
    """

    periods: tuple
    resolution: tuple

    def __post_init__(self):
        periods = tuple(float(T) for T in np.atleast_1d(self.periods))
        resolution = tuple(int(N) for N in np.atleast_1d(self.resolution))
        if len(periods) != len(resolution):
            raise ValueError(f"periods has {len(periods)} entries but resolution has {len(resolution)}")
        if len(periods) < 1:
            raise ValueError("a grid needs at least one time dimension (p >= 1)")
        for a, T in enumerate(periods):
            if not np.isfinite(T) or T <= 0:
                raise ValueError(f"period T^{a + 1} = {T} must be > 0")
        for a, N in enumerate(resolution):
            if N < 4:
                raise ValueError(f"resolution N_{a + 1} = {N} violates N_alpha >= 4")
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "resolution", resolution)

    @property
    def p(self) -> int:
        return len(self.periods)

    @property
    def shape(self) -> tuple:
        return self.resolution

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def spacing(self) -> tuple:
        return tuple(T / N for T, N in zip(self.periods, self.resolution))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.periods))

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape ``(*shape, p)``."""
        axes = [np.arange(N) * h for N, h in zip(self.resolution, self.spacing)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    @property
    def flat_coordinates(self) -> np.ndarray:
        return self.coordinates.reshape(-1, self.p)

    def refine(self, resolution) -> "MultiTimeGrid":
        return MultiTimeGrid(self.periods, resolution)


@dataclass(frozen=True)
class PeriodicField:
    """Grid samples of t -> u(t) in R^{n+np}; values has shape ``(*grid.shape, n+np)``."""

    grid: MultiTimeGrid
    n: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = (*self.grid.shape, state_dim(self.n, self.grid.p))
        if values.shape != expected:
            raise ValueError(f"field values have shape {values.shape}, expected {expected}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def p(self) -> int:
        return self.grid.p

    @property
    def positions(self) -> np.ndarray:
        """x^i (or y^i) block, shape ``(*shape, n)``."""
        return self.values[..., : self.n]

    @property
    def momenta(self) -> np.ndarray:
        """p_i^alpha (or q_i^alpha) block, shape ``(*shape, n, p)``."""
        return self.values[..., self.n:].reshape(*self.grid.shape, self.n, self.p)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1, self.values.shape[-1])

    def with_values(self, values) -> "PeriodicField":
        return PeriodicField(self.grid, self.n, np.asarray(values, dtype=float).reshape(self.values.shape))

    @classmethod
    def zeros(cls, grid: MultiTimeGrid, n: int) -> "PeriodicField":
        return cls(grid, n, np.zeros((*grid.shape, state_dim(n, grid.p))))

    @classmethod
    def from_function(cls, grid: MultiTimeGrid, n: int, fn) -> "PeriodicField":
        """Sample ``fn(t)`` where t has shape ``(*shape, p)`` and the result ``(*shape, n+np)``."""
        return cls(grid, n, fn(grid.coordinates))

    @classmethod
    def from_blocks(cls, grid: MultiTimeGrid, positions, momenta) -> "PeriodicField":
        positions = np.asarray(positions, dtype=float)
        momenta = np.asarray(momenta, dtype=float)
        n = positions.shape[-1]
        flat_p = momenta.reshape(*grid.shape, n * grid.p)
        return cls(grid, n, np.concatenate([positions, flat_p], axis=-1))

    def __add__(self, other):
        other = other.values if isinstance(other, PeriodicField) else np.asarray(other)
        return self.with_values(self.values + other)

    def __sub__(self, other):
        other = other.values if isinstance(other, PeriodicField) else np.asarray(other)
        return self.with_values(self.values - other)

    def __mul__(self, scalar):
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


@dataclass(frozen=True)
class FieldJacobian:
    """d u_k / d t^alpha at every node; values has shape ``(*grid.shape, n+np, p)``."""

    grid: MultiTimeGrid
    n: int
    values: np.ndarray


def derivative_symbols(grid: MultiTimeGrid, alpha: int, scheme) -> np.ndarray:
    """Real multiplier s(k) with D_alpha e^{i k t} = i s(k) e^{i k t}, in FFT order."""
    scheme = Scheme.coerce(scheme)
    N = grid.resolution[alpha]
    h = grid.spacing[alpha]
    T = grid.periods[alpha]
    k = np.fft.fftfreq(N, d=1.0 / N)
    if scheme is Scheme.FOURIER:
        s = 2.0 * np.pi * k / T
        if N % 2 == 0:
            s[N // 2] = 0.0
        return s
    return np.sin(2.0 * np.pi * k / N) / h


def _check_scheme(grid: MultiTimeGrid, scheme: Scheme):
    if scheme is Scheme.FOURIER:
        odd = [a + 1 for a, N in enumerate(grid.resolution) if N % 2]
        if odd:
            raise ValueError(f"Fourier scheme requires even N_alpha; odd in direction(s) {odd}")


def partial(values: np.ndarray, grid: MultiTimeGrid, alpha: int, scheme) -> np.ndarray:
    """Periodic derivative along grid axis ``alpha`` of an array with leading grid axes."""
    scheme = Scheme.coerce(scheme)
    _check_scheme(grid, scheme)
    values = np.asarray(values, dtype=float)
    if scheme is Scheme.CENTRAL2:
        h = grid.spacing[alpha]
        return (np.roll(values, -1, axis=alpha) - np.roll(values, 1, axis=alpha)) / (2.0 * h)
    s = derivative_symbols(grid, alpha, scheme)
    shape = [1] * values.ndim
    shape[alpha] = -1
    spec = np.fft.fft(values, axis=alpha) * (1j * s.reshape(shape))
    return np.fft.ifft(spec, axis=alpha).real


def derivative_array(values: np.ndarray, grid: MultiTimeGrid, scheme) -> np.ndarray:
    """Stack of all p partial derivatives as a new trailing axis."""
    return np.stack([partial(values, grid, a, scheme) for a in range(grid.p)], axis=-1)


def derivative(field: PeriodicField, scheme) -> FieldJacobian:
    return FieldJacobian(field.grid, field.n, derivative_array(field.values, field.grid, scheme))


def polysymplectic_array(jac: np.ndarray, n: int, p: int) -> np.ndarray:
    """(delta x J) applied node-wise to a Jacobian array of shape ``(..., n+np, p)``.

    Block 1 (i = 1..n):        sum_alpha d p_i^alpha / d t^alpha
    Block 2 ((j, beta)):       - d x^j / d t^beta
    """
    d = state_dim(n, p)
    if jac.shape[-2:] != (d, p):
        raise ValueError(f"Jacobian trailing shape {jac.shape[-2:]} does not match (n+np, p) = {(d, p)}")
    lead = jac.shape[:-2]
    mom = jac[..., n:, :].reshape(*lead, n, p, p)
    divergence = np.trace(mom, axis1=-2, axis2=-1)
    minus_grad = -jac[..., :n, :].reshape(*lead, n * p)
    return np.concatenate([divergence, minus_grad], axis=-1)


def polysymplectic_apply(jac: FieldJacobian) -> PeriodicField:
    return PeriodicField(jac.grid, jac.n, polysymplectic_array(jac.values, jac.n, jac.grid.p))


def apply_K(field: PeriodicField, scheme) -> PeriodicField:
    """The composite operator v -> (delta x J) dv/dt (the v* map)."""
    return polysymplectic_apply(derivative(field, scheme))


def apply_K_adjoint(field: PeriodicField, scheme) -> PeriodicField:
    """Transpose of ``apply_K`` in the node-sum inner product.

    Built from the transpose of the block map and D_alpha^T = -D_alpha,
    which holds for both schemes on a periodic grid.
    """
    grid, n, p = field.grid, field.n, field.p
    a = field.positions
    b = field.momenta
    # block map transpose: a_i feeds d p_i^alpha / d t^alpha, -b_{j beta} feeds d x^j / d t^beta
    out_x = sum(-partial(-b[..., :, beta], grid, beta, scheme) for beta in range(p))
    out_p = np.stack([-partial(a, grid, alpha, scheme) for alpha in range(p)], axis=-1)
    return PeriodicField.from_blocks(grid, out_x, out_p)


def metric_inner(a, b):
    """G(a, b); G is the identity in the package coordinates.  Broadcasts over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return np.einsum("...k,...k->...", a, b)


def mean(field: PeriodicField) -> np.ndarray:
    """(1/vol) * integral over the box with the rectangle rule, i.e. the node average."""
    return field.flat.mean(axis=0)


def zero_mean_project(field: PeriodicField) -> PeriodicField:
    return field.with_values(field.values - mean(field))


def project_off_kernel(field: PeriodicField, scheme) -> PeriodicField:
    """Orthogonal projection onto the range of the v* map.

    The kernel of v -> (delta x J) dv/dt consists of fields with constant
    positions and divergence-free momenta (for p = 1 only constants, plus
    the grid-scale modes that a scheme cannot see).  Since the dual action
    is unchanged by adding kernel elements, removing them is the natural
    gauge fixing; it contains the zero-mean projection.
    """
    scheme = Scheme.coerce(scheme)
    grid, n, p = field.grid, field.n, field.p
    _check_scheme(grid, scheme)
    axes = tuple(range(p))
    spec = np.fft.fftn(field.values, axes=axes)
    symbols = np.meshgrid(*[derivative_symbols(grid, a, scheme) for a in range(p)], indexing="ij")
    s = np.stack(symbols, axis=-1)
    s2 = np.sum(s**2, axis=-1)
    alive = s2 > 1e-14 * max(1.0, float(s2.max()))
    spec_x = spec[..., :n] * alive[..., None]
    mom = spec[..., n:].reshape(*grid.shape, n, p)
    safe = np.where(alive, s2, 1.0)
    along = np.einsum("...ia,...a->...i", mom, s) / safe[..., None]
    mom = along[..., :, None] * s[..., None, :] * alive[..., None, None]
    out = np.concatenate([spec_x, mom.reshape(*grid.shape, n * p)], axis=-1)
    return field.with_values(np.fft.ifftn(out, axes=axes).real)
