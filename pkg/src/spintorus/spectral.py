"""Truncated Fourier series on the flat torus and diagonal frequency multipliers.

Conventions (used consistently across the package):

* lattice = { xi in Z^d : |xi_i| <= N } with lexicographic enumeration; a
  coefficient array has shape (2N+1,)*d + (d0,) and index i corresponds to
  xi_i = i - N along each axis.
* forward transform carries the 1/(2pi)^d factor, the inverse is the plain
  series sum, so Plancherel reads (2pi)^{-d} int |u|^2 dx = sum_xi |u^(xi)|^2
  and the L^2 norm of a field equals the l^2 norm of its coefficients.
* L^q norms on the torus use the normalised measure dx/(2pi)^d.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .clifford import GammaSet


@lru_cache(maxsize=32)
def _lattice_cache(d: int, radius: int):
    axes = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([axes] * d), indexing="ij")
    xi = np.stack(grids, axis=-1).astype(np.float64)  # shape + (d,)
    norm_sq = np.sum(xi * xi, axis=-1)
    bracket = np.sqrt(1.0 + norm_sq)
    xi.flags.writeable = False
    norm_sq.flags.writeable = False
    bracket.flags.writeable = False
    return xi, norm_sq, bracket


@dataclass(frozen=True)
class FrequencyLattice:
    """Symmetric cubic frequency lattice with per-axis cutoff ``radius``."""

    d: int
    radius: int

    def __post_init__(self):
        if self.d < 1 or self.radius < 1:
            raise ValueError("lattice needs d >= 1 and radius >= 1")

    @property
    def shape(self) -> tuple[int, ...]:
        return (2 * self.radius + 1,) * self.d

    @property
    def size(self) -> int:
        return (2 * self.radius + 1) ** self.d

    @property
    def xi(self) -> np.ndarray:
        """All lattice points, shape ``self.shape + (d,)``, lexicographic."""
        return _lattice_cache(self.d, self.radius)[0]

    @property
    def xi_norm_sq(self) -> np.ndarray:
        return _lattice_cache(self.d, self.radius)[1]

    @property
    def bracket(self) -> np.ndarray:
        """<xi> = (1 + |xi|^2)^(1/2) over the lattice."""
        return _lattice_cache(self.d, self.radius)[2]

    def min_grid(self) -> int:
        """Smallest alias-free spatial grid size per axis."""
        return 2 * self.radius + 1


def japanese_bracket(xi) -> float:
    """(1 + |xi|^2)^(1/2) for a single frequency."""
    xi = np.asarray(xi, dtype=float)
    return float(np.sqrt(1.0 + np.sum(xi * xi)))


@dataclass
class SpinorField:
    """C^{d0}-valued field stored as coefficients on a FrequencyLattice."""

    lattice: FrequencyLattice
    d0: int
    coeffs: np.ndarray  # shape lattice.shape + (d0,), complex128

    def __post_init__(self):
        expected = self.lattice.shape + (self.d0,)
        if self.coeffs.shape != expected:
            raise ValueError(
                f"coefficient array has shape {self.coeffs.shape}, expected {expected}"
            )
        if self.coeffs.dtype != np.complex128:
            self.coeffs = self.coeffs.astype(np.complex128)

    @classmethod
    def zeros(cls, lattice: FrequencyLattice, d0: int) -> "SpinorField":
        return cls(lattice, d0, np.zeros(lattice.shape + (d0,), dtype=np.complex128))

    def copy(self) -> "SpinorField":
        return SpinorField(self.lattice, self.d0, self.coeffs.copy())

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other: "SpinorField") -> "SpinorField":
        _check_compatible(self, other)
        return SpinorField(self.lattice, self.d0, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpinorField") -> "SpinorField":
        _check_compatible(self, other)
        return SpinorField(self.lattice, self.d0, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpinorField":
        return SpinorField(self.lattice, self.d0, self.coeffs * scalar)

    __rmul__ = __mul__

    def coefficient(self, xi) -> np.ndarray:
        """Coefficient vector at one lattice point."""
        idx = tuple(int(x) + self.lattice.radius for x in xi)
        for i in idx:
            if i < 0 or i >= 2 * self.lattice.radius + 1:
                raise ValueError(f"frequency {xi} outside the lattice")
        return self.coeffs[idx]

    def set_coefficient(self, xi, value) -> None:
        idx = tuple(int(x) + self.lattice.radius for x in xi)
        self.coeffs[idx] = value


def _check_compatible(a: SpinorField, b: SpinorField) -> None:
    if a.lattice != b.lattice or a.d0 != b.d0:
        raise ValueError("fields live on different lattices or spinor dimensions")


def plane_wave(lattice: FrequencyLattice, d0: int, xi, spinor) -> SpinorField:
    """Single-mode field u(x) = e^{i x.xi} * spinor."""
    f = SpinorField.zeros(lattice, d0)
    f.set_coefficient(xi, np.asarray(spinor, dtype=np.complex128))
    return f


def random_field(
    lattice: FrequencyLattice,
    d0: int,
    rng: np.random.Generator,
    annulus: tuple[float, float] | None = None,
) -> SpinorField:
    """Gaussian random coefficients, optionally restricted to r0 <= |xi| <= r1."""
    shape = lattice.shape + (d0,)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if annulus is not None:
        r0, r1 = annulus
        r = np.sqrt(lattice.xi_norm_sq)
        mask = (r >= r0) & (r <= r1)
        c = c * mask[..., None]
    return SpinorField(lattice, d0, c)


# ---------------------------------------------------------------------------
# transforms


def forward_fourier(samples: np.ndarray, lattice: FrequencyLattice) -> SpinorField:
    """Grid samples -> lattice coefficients with the 1/(2pi)^d normalisation.

    ``samples`` has shape (M,)*d + (d0,) for a uniform grid x_k = 2 pi k / M.
    Exact (to rounding) on fields band-limited to the lattice; M < 2N+1 would
    alias lattice modes and is rejected.
    """
    d, radius = lattice.d, lattice.radius
    if samples.ndim != d + 1:
        raise ValueError("samples must have one trailing spinor axis")
    m = samples.shape[0]
    if any(samples.shape[ax] != m for ax in range(d)):
        raise ValueError("spatial grid must be uniform across axes")
    if m < 2 * radius + 1:
        raise ValueError(
            f"grid with {m} points per axis aliases a radius-{radius} lattice"
        )
    spec = np.fft.fftn(samples, axes=tuple(range(d))) / float(m) ** d
    idx = np.arange(-radius, radius + 1) % m
    out = spec[np.ix_(*([idx] * d))]
    return SpinorField(lattice, samples.shape[-1], np.ascontiguousarray(out))


def inverse_fourier(f: SpinorField, grid: int | None = None) -> np.ndarray:
    """Evaluate the finite Fourier series on a uniform grid of ``grid``^d points."""
    d, radius = f.lattice.d, f.lattice.radius
    m = grid if grid is not None else f.lattice.min_grid()
    if m < 2 * radius + 1:
        raise ValueError("grid too coarse for the lattice (aliasing)")
    spec = np.zeros((m,) * d + (f.d0,), dtype=np.complex128)
    idx = np.arange(-radius, radius + 1) % m
    spec[np.ix_(*([idx] * d))] = f.coeffs
    return np.fft.ifftn(spec, axes=tuple(range(d))) * float(m) ** d


def lq_norm(f: SpinorField, q: float, grid: int | None = None) -> float:
    """Spatial L^q norm w.r.t. the normalised measure dx/(2pi)^d.

    q = 2 is an exact lattice sum (Plancherel); finite even q is exact on a
    grid of q*N+1 points per axis (|u|^q is a trigonometric polynomial of
    degree q*N); other q use the same grid as quadrature.
    """
    if q == 2:
        return f.l2_norm()
    n = f.lattice.radius
    if grid is None:
        qq = int(q) if q not in (np.inf,) and float(q).is_integer() else 4
        grid = max(qq, 4) * n + 1
    u = inverse_fourier(f, grid)
    mag = np.linalg.norm(u, axis=-1)
    if q == np.inf:
        return float(mag.max())
    return float(np.mean(mag**q) ** (1.0 / q))


# ---------------------------------------------------------------------------
# multipliers


@dataclass
class Multiplier:
    """Scalar- or matrix-valued symbol applied diagonally in frequency."""

    lattice: FrequencyLattice
    kind: str  # "scalar" | "matrix"
    values: np.ndarray

    def __post_init__(self):
        if self.kind == "scalar":
            if self.values.shape != self.lattice.shape:
                raise ValueError("scalar symbol must match the lattice shape")
        elif self.kind == "matrix":
            if (
                self.values.ndim != self.lattice.d + 2
                or self.values.shape[: self.lattice.d] != self.lattice.shape
                or self.values.shape[-1] != self.values.shape[-2]
            ):
                raise ValueError("matrix symbol must be lattice.shape + (d0, d0)")
        else:
            raise ValueError(f"unknown multiplier kind {self.kind!r}")


def scalar_multiplier(lattice: FrequencyLattice, values: np.ndarray) -> Multiplier:
    return Multiplier(lattice, "scalar", np.asarray(values))


def bracket_multiplier(lattice: FrequencyLattice) -> Multiplier:
    """Symbol <xi> of the relativistic dispersion operator."""
    return scalar_multiplier(lattice, lattice.bracket)


def apply_multiplier(m: Multiplier, f: SpinorField) -> SpinorField:
    """Coefficientwise product m(xi) u^(xi); linear in the field."""
    if m.lattice != f.lattice:
        raise ValueError("multiplier and field lattices differ")
    if m.kind == "scalar":
        return SpinorField(f.lattice, f.d0, f.coeffs * m.values[..., None])
    if m.values.shape[-1] != f.d0:
        raise ValueError("matrix symbol order does not match the spinor dimension")
    out = np.einsum("...ab,...b->...a", m.values, f.coeffs)
    return SpinorField(f.lattice, f.d0, out)


def partial_derivative(f: SpinorField, axis: int) -> SpinorField:
    """D_j f = -i d/dx^j f: multiplies coefficients by xi_j (axis is 1-based)."""
    if axis < 1 or axis > f.lattice.d:
        raise ValueError(f"axis {axis} out of range 1..{f.lattice.d}")
    xi_j = f.lattice.xi[..., axis - 1]
    return SpinorField(f.lattice, f.d0, f.coeffs * xi_j[..., None])


def derivative_monomial(f: SpinorField, alpha) -> SpinorField:
    """D^alpha f for a multi-index alpha (coefficients times prod xi_j^alpha_j)."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != f.lattice.d or any(a < 0 for a in alpha):
        raise ValueError("alpha must be a nonnegative multi-index of length d")
    sym = np.ones(f.lattice.shape)
    for j, a in enumerate(alpha):
        if a:
            sym = sym * f.lattice.xi[..., j] ** a
    return SpinorField(f.lattice, f.d0, f.coeffs * sym[..., None])


# ---------------------------------------------------------------------------
# Dirac projectors


def projector_symbol(g: GammaSet, xi, sign: int) -> np.ndarray:
    """The half-wave projector (I +- (sum alpha^j xi_j + beta)/<xi>)/2 at one xi."""
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    h = g.dirac_symbol(xi)
    eye = np.eye(g.d0, dtype=np.complex128)
    return 0.5 * (eye + (sign / japanese_bracket(xi)) * h)


def projector_multiplier(
    g: GammaSet, lattice: FrequencyLattice, sign: int
) -> Multiplier:
    """Matrix multiplier of the half-wave projector over the whole lattice."""
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    if lattice.d != g.d:
        raise ValueError("lattice dimension does not match the gamma set")
    shape = lattice.shape + (g.d0, g.d0)
    h = np.zeros(shape, dtype=np.complex128)
    for j in range(g.d):
        h += lattice.xi[..., j, None, None] * g.alpha[j]
    h += g.beta
    h *= (sign / lattice.bracket)[..., None, None]
    h += np.eye(g.d0, dtype=np.complex128)
    h *= 0.5
    return Multiplier(lattice, "matrix", h)


def project_dirac(g: GammaSet, f: SpinorField, sign: int) -> SpinorField:
    """Apply the half-wave projector; idempotent, and the two signs sum to f."""
    if g.d0 != f.d0:
        raise ValueError("spinor dimensions differ between gamma set and field")
    return apply_multiplier(projector_multiplier(g, f.lattice, sign), f)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Uniformly sampled time sequence of spinor fields on one lattice."""

    lattice: FrequencyLattice
    d0: int
    times: np.ndarray  # (M,)
    frames: np.ndarray  # (M,) + lattice.shape + (d0,)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size < 1:
            raise ValueError("a trajectory needs at least one frame")
        if self.frames.shape != (self.times.size,) + self.lattice.shape + (self.d0,):
            raise ValueError("frame array shape does not match times/lattice")
        if self.times.size > 1:
            steps = np.diff(self.times)
            if not np.allclose(steps, steps[0], rtol=1e-12, atol=1e-14):
                raise ValueError("time grid must be uniform")

    @property
    def n_frames(self) -> int:
        return self.times.size

    @property
    def dt(self) -> float:
        if self.times.size < 2:
            return 0.0
        return float(self.times[1] - self.times[0])

    def frame(self, k: int) -> SpinorField:
        return SpinorField(self.lattice, self.d0, self.frames[k])

    def copy(self) -> "Trajectory":
        return Trajectory(self.lattice, self.d0, self.times.copy(), self.frames.copy())

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        if self.lattice != other.lattice or self.frames.shape != other.frames.shape:
            raise ValueError("trajectories are not comparable")
        return Trajectory(self.lattice, self.d0, self.times, self.frames - other.frames)

    def __mul__(self, scalar) -> "Trajectory":
        return Trajectory(self.lattice, self.d0, self.times, self.frames * scalar)

    __rmul__ = __mul__

    def map_symbol(self, values: np.ndarray) -> "Trajectory":
        """Apply one scalar frequency symbol to every frame."""
        return Trajectory(
            self.lattice, self.d0, self.times, self.frames * values[None, ..., None]
        )


def trajectory_from_fields(times, fields: list[SpinorField]) -> Trajectory:
    frames = np.stack([f.coeffs for f in fields], axis=0)
    return Trajectory(fields[0].lattice, fields[0].d0, np.asarray(times), frames)
