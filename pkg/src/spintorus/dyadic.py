"""Frequency localisation operators: dyadic annuli, space-time modulation
cutoffs, angular cap covers of the sphere and lattice cube partitions.

All operators are diagonal in frequency (or in (tau, xi) for the modulation
cutoffs), hence linear, mutually commuting and L^2-contractive whenever their
symbols are bounded by one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import FrequencyLattice, SpinorField, Trajectory

# ---------------------------------------------------------------------------
# smooth cutoff profiles


def _expbump_step(y: np.ndarray) -> np.ndarray:
    """C^infinity step: 0 for y <= 0, 1 for y >= 1, monotone bridge between."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    out[y >= 1.0] = 1.0
    mid = (y > 0.0) & (y < 1.0)
    ym = y[mid]
    a = np.exp(-1.0 / ym)
    b = np.exp(-1.0 / (1.0 - ym))
    out[mid] = a / (a + b)
    return out


def lowpass_profile(s) -> np.ndarray:
    """Smooth even profile: 1 on [-1, 1], 0 outside [-2, 2], values in [0, 1]."""
    return _expbump_step(2.0 - np.abs(np.asarray(s, dtype=float)))


def annulus_profile(s) -> np.ndarray:
    """Dyadic annulus bump lowpass(s/2) - lowpass(s); supported in 1 <= |s| <= 4.

    The dilates s -> 2^{-j} s telescope: summed over all j they equal 1 for
    every s != 0, and the profile equals 1 at |s| = 2.
    """
    s = np.abs(np.asarray(s, dtype=float))
    return lowpass_profile(s / 2.0) - lowpass_profile(s)


def wide_annulus_profile(s, j: int) -> np.ndarray:
    """Sum of the three dyadic bumps at scales j-2, j-1, j.

    Telescopes to lowpass(2^{-j-1} s) - lowpass(2^{-j+2} s), hence equals 1
    exactly on 2^{j-1} <= |s| <= 2^{j+1}; in particular the scale-(j+1) wide
    profile is 1 on the support of the scale-j annulus bump, which is the
    absorption identity the solution-space estimates rely on.
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s, dtype=float)
    for i in (j - 2, j - 1, j):
        out += annulus_profile(np.ldexp(s, -i))
    return out


@dataclass(frozen=True)
class CutoffProfile:
    """Handles to the radial cutoff family used across the package."""

    lowpass = staticmethod(lowpass_profile)
    annulus = staticmethod(annulus_profile)
    wide_annulus = staticmethod(wide_annulus_profile)


# ---------------------------------------------------------------------------
# radial (Littlewood-Paley) blocks


def radial_symbol(lattice: FrequencyLattice, j: int) -> np.ndarray:
    """annulus_profile(2^{-j} |xi|) over the lattice."""
    r = np.sqrt(lattice.xi_norm_sq)
    return annulus_profile(np.ldexp(r, -j))


def wide_radial_symbol(lattice: FrequencyLattice, j: int) -> np.ndarray:
    r = np.sqrt(lattice.xi_norm_sq)
    return wide_annulus_profile(r, j)


def radial_block(f: SpinorField, j: int) -> SpinorField:
    """Restrict to the dyadic annulus 2^j <= |xi| <= 2^{j+2} (smoothly)."""
    return SpinorField(f.lattice, f.d0, f.coeffs * radial_symbol(f.lattice, j)[..., None])


def wide_radial_block(f: SpinorField, j: int) -> SpinorField:
    """Widened annulus restriction; acts as the identity on scale-(j-1) blocks."""
    return SpinorField(
        f.lattice, f.d0, f.coeffs * wide_radial_symbol(f.lattice, j)[..., None]
    )


def radial_block_trajectory(tr: Trajectory, j: int) -> Trajectory:
    return tr.map_symbol(radial_symbol(tr.lattice, j))


def radial_scale_range(lattice: FrequencyLattice) -> tuple[int, int]:
    """Scales j whose annulus intersects the nonzero lattice."""
    rmax = float(np.sqrt(lattice.d) * lattice.radius)
    jmax = int(np.ceil(np.log2(rmax)))
    return -2, jmax


# ---------------------------------------------------------------------------
# modulation blocks (space-time)


def window_length(tr: Trajectory) -> float:
    """Periodic window length of the discrete time transform (n_frames * dt)."""
    if tr.n_frames < 2:
        raise ValueError("modulation analysis needs at least 2 frames")
    return tr.n_frames * tr.dt


def time_frequencies(tr: Trajectory) -> np.ndarray:
    """Angular DFT frequencies of the frame grid, FFT order."""
    return 2.0 * np.pi * np.fft.fftfreq(tr.n_frames, d=tr.dt)


def modulation_distance(tr: Trajectory, sign: int) -> np.ndarray:
    """|tau +- <xi>| on the discrete (tau, xi) grid, shape (M,) + lattice.shape."""
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    tau = time_frequencies(tr)
    shape = (tr.n_frames,) + (1,) * tr.lattice.d
    return np.abs(tau.reshape(shape) + sign * tr.lattice.bracket[None, ...])


def modulation_symbol(tr: Trajectory, j: int, sign: int) -> np.ndarray:
    """annulus_profile(2^{-j} |tau +- <xi>|) on the discrete grid."""
    return annulus_profile(np.ldexp(modulation_distance(tr, sign), -j))


def hann_window(m: int) -> np.ndarray:
    k = np.arange(m)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / m)


def modulation_block(
    tr: Trajectory, j: int, sign: int, taper: bool = False
) -> Trajectory:
    """Restrict a trajectory to modulations 2^j <= |tau +- <xi>| <= 2^{j+2}.

    The finite window is treated as periodic; an optional Hann taper trades
    the partition property for reduced spectral leakage.
    """
    if tr.n_frames < 2:
        raise ValueError("modulation cutoff needs at least 2 frames")
    frames = tr.frames
    if taper:
        w = hann_window(tr.n_frames).reshape((-1,) + (1,) * (frames.ndim - 1))
        frames = frames * w
    spec = np.fft.fft(frames, axis=0)
    spec *= modulation_symbol(tr, j, sign)[..., None]
    out = np.fft.ifft(spec, axis=0)
    return Trajectory(tr.lattice, tr.d0, tr.times, out)


def modulation_scale_range(tr: Trajectory, sign: int) -> tuple[int, int]:
    """Scale range covering every nonzero modulation value on the grid."""
    w = modulation_distance(tr, sign)
    pos = w[w > 0]
    if pos.size == 0:
        return 0, 0
    jmin = int(np.floor(np.log2(pos.min()))) - 1
    jmax = int(np.ceil(np.log2(pos.max())))
    return jmin, jmax


# ---------------------------------------------------------------------------
# angular cap covers


def _icosahedron() -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = []
    for a, b in [(1.0, phi), (1.0, -phi), (-1.0, phi), (-1.0, -phi)]:
        verts += [(0.0, a, b), (a, b, 0.0), (b, 0.0, a)]
    v = np.array(verts)
    v /= np.linalg.norm(v, axis=1)[:, None]
    # faces by nearest-neighbour triples
    faces = []
    n = len(v)
    dots = v @ v.T
    edge_cos = np.cos(1.1071487177940904)  # icosahedral edge arc
    adj = dots > edge_cos - 1e-9
    np.fill_diagonal(adj, False)
    for i in range(n):
        for jj in range(i + 1, n):
            if not adj[i, jj]:
                continue
            for k in range(jj + 1, n):
                if adj[i, k] and adj[jj, k]:
                    faces.append((i, jj, k))
    return v, faces


def _subdivide(verts: np.ndarray, faces: list[tuple[int, int, int]]):
    verts = [tuple(p) for p in verts]
    cache: dict[tuple[int, int], int] = {}

    def midpoint(i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        if key in cache:
            return cache[key]
        p = np.array(verts[i]) + np.array(verts[j])
        p /= np.linalg.norm(p)
        verts.append(tuple(p))
        cache[key] = len(verts) - 1
        return cache[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.array(verts), new_faces


@dataclass
class CapCover:
    """Finitely overlapping symmetric cover of the unit sphere by caps.

    ``centers`` is antipodally closed; ``width`` is the geodesic support
    half-width of the smooth weights, which are normalised to a partition of
    unity on R^d \\ {0} (the zero frequency is always assigned weight 0).
    """

    d: int
    scale: int
    centers: np.ndarray  # (K, d) unit vectors
    width: float
    overlap_bound: int = 4
    _symbol_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_caps(self) -> int:
        return self.centers.shape[0]

    def raw_weights(self, directions: np.ndarray) -> np.ndarray:
        """Unnormalised bump values, shape (n_dirs, K)."""
        if self.d == 1:
            signs = np.sign(directions[:, 0])[:, None]
            return (signs == self.centers[None, :, 0]).astype(float)
        dots = np.clip(directions @ self.centers.T, -1.0, 1.0)
        dist = np.arccos(dots)
        x = dist / self.width
        out = np.zeros_like(x)
        inside = x < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
        return out

    def weights(self, directions: np.ndarray) -> np.ndarray:
        """Partition-of-unity weights at unit directions, shape (n_dirs, K)."""
        raw = self.raw_weights(directions)
        total = raw.sum(axis=1)
        if np.any(total <= 0.0):
            raise ValueError("cap cover does not cover some direction")
        return raw / total[:, None]


def _fibonacci_directions(n: int) -> np.ndarray:
    k = np.arange(n)
    z = 1.0 - (2.0 * k + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    th = np.pi * (1.0 + np.sqrt(5.0)) * k
    return np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)


def build_cap_cover(d: int, scale: int, overlap_bound: int = 4) -> CapCover:
    """Construct the scale-l cap cover (caps of angular size ~ 2^{-l}).

    d = 1 degenerates to the two half-line indicators; d = 2 uses evenly
    spaced arcs; d = 3 uses a subdivided icosahedron.  Dimensions above 3
    are not supported.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d > 3:
        raise ValueError("cap covers are only constructed for d <= 3")
    if d == 1:
        centers = np.array([[1.0], [-1.0]])
        return CapCover(d, scale, centers, width=1.0, overlap_bound=overlap_bound)
    delta = 2.0 ** (-scale)
    if d == 2:
        k = int(np.ceil(2.0 * np.pi / delta))
        if k % 2:
            k += 1
        k = max(k, 4)
        th = 2.0 * np.pi * np.arange(k) / k
        centers = np.stack([np.cos(th), np.sin(th)], axis=1)
        width = 0.75 * (2.0 * np.pi / k)
        cover = CapCover(d, scale, centers, width, overlap_bound)
        _validate_cover(cover, _circle_directions(4096))
        return cover
    # d == 3: subdivided icosahedron, spacing as close to delta as possible
    verts, faces = _icosahedron()
    edge = 1.1071487177940904
    subdivisions = max(0, int(np.ceil(np.log2(edge / delta))))
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
    edge_arcs = []
    for a, b, c in faces:
        for i, j in ((a, b), (b, c), (c, a)):
            edge_arcs.append(
                np.arccos(np.clip(np.dot(verts[i], verts[j]), -1.0, 1.0))
            )
    e_min, e_max = float(np.min(edge_arcs)), float(np.max(edge_arcs))
    width = max(0.604 * e_max, min(0.75 * delta, 0.85 * e_min))
    cover = CapCover(d, scale, verts, width, overlap_bound)
    _validate_cover(cover, _fibonacci_directions(8192))
    return cover


def _circle_directions(n: int) -> np.ndarray:
    th = 2.0 * np.pi * (np.arange(n) + 0.37) / n
    return np.stack([np.cos(th), np.sin(th)], axis=1)


def _validate_cover(cover: CapCover, sample: np.ndarray) -> None:
    raw = cover.raw_weights(sample)
    total = raw.sum(axis=1)
    if np.any(total <= 0.0):
        raise ValueError(
            f"cap cover (d={cover.d}, scale={cover.scale}) leaves coverage holes"
        )
    overlap = int((raw > 0.0).sum(axis=1).max())
    if overlap > cover.overlap_bound:
        raise ValueError(
            f"cap cover overlap {overlap} exceeds the bound {cover.overlap_bound}"
        )


def cap_symbols(cover: CapCover, lattice: FrequencyLattice) -> np.ndarray:
    """All cap weights on the lattice, shape (K,) + lattice.shape.

    The zero frequency gets weight 0 for every cap (the weights partition
    R^d minus the origin only).  Tables are cached on the cover.
    """
    if cover.d != lattice.d:
        raise ValueError("cover and lattice dimensions differ")
    key = (lattice.d, lattice.radius)
    cached = cover._symbol_cache.get(key)
    if cached is not None:
        return cached
    xi = lattice.xi.reshape(-1, lattice.d)
    r = np.linalg.norm(xi, axis=1)
    nonzero = r > 0
    table = np.zeros((xi.shape[0], cover.n_caps))
    dirs = xi[nonzero] / r[nonzero, None]
    table[nonzero] = cover.weights(dirs)
    table = np.moveaxis(table.reshape(lattice.shape + (cover.n_caps,)), -1, 0)
    cover._symbol_cache[key] = table
    return table


def cap_piece(f: SpinorField, cover: CapCover, cap_id: int) -> SpinorField:
    """Multiply by the cap weight eta_kappa; the pieces sum back to f - u^(0)."""
    if cap_id < 0 or cap_id >= cover.n_caps:
        raise ValueError(f"cap id {cap_id} out of range 0..{cover.n_caps - 1}")
    sym = cap_symbols(cover, f.lattice)[cap_id]
    return SpinorField(f.lattice, f.d0, f.coeffs * sym[..., None])


# ---------------------------------------------------------------------------
# lattice cube partitions


def _bump_1d(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def normalized_bump_1d(t) -> np.ndarray:
    """Bump divided by its integer translates; translates sum to 1 exactly."""
    t = np.asarray(t, dtype=float)
    u = t - np.floor(t)
    total = _bump_1d(u) + _bump_1d(u - 1.0)
    val = _bump_1d(t)
    out = np.zeros_like(val)
    nz = val > 0
    out[nz] = val[nz] / total[nz]
    return out


@dataclass
class CubeCover:
    """Partition of frequency space into smooth cubes of half-side 2^k."""

    lattice: FrequencyLattice
    k: int
    centers: np.ndarray  # (n_centers, d) integer multiples of 2^k inside the lattice

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]


def build_cube_cover(lattice: FrequencyLattice, k: int) -> CubeCover:
    """Centers 2^k Z^d intersected with the lattice box."""
    if k < 0:
        raise ValueError("cube scale must be >= 0")
    step = 2**k
    nmax = (lattice.radius // step) * step
    axis = np.arange(-nmax, nmax + 1, step)
    grids = np.meshgrid(*([axis] * lattice.d), indexing="ij")
    centers = np.stack([g.ravel() for g in grids], axis=1)
    return CubeCover(lattice, k, centers)


def cube_symbol(cover: CubeCover, center) -> np.ndarray:
    """gamma((xi - n)/2^k) over the lattice as a product of 1-d bumps."""
    center = np.asarray(center, dtype=float)
    lattice = cover.lattice
    scale = float(2**cover.k)
    sym = np.ones(lattice.shape)
    for j in range(lattice.d):
        sym = sym * normalized_bump_1d((lattice.xi[..., j] - center[j]) / scale)
    return sym


def cube_piece(f: SpinorField, cover: CubeCover, center) -> SpinorField:
    """Cube-localised piece of a field; the pieces over all centers sum to f
    away from the lattice boundary margin."""
    center = np.asarray(center)
    match = np.all(cover.centers == center[None, :], axis=1)
    if not np.any(match):
        raise ValueError(f"{center} is not a center of the scale-{cover.k} cube cover")
    sym = cube_symbol(cover, center)
    return SpinorField(f.lattice, f.d0, f.coeffs * sym[..., None])
