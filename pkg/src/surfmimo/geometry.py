"""Feed placement relative to the intelligent surface and transfer-matrix construction.

The surface sits in the y-z plane centered on the origin; element order matches
channel.upa_response (m_y fastest).  Active feeds sit on a ring of radius R_r in
the plane x = R_d and illuminate the surface with an axisymmetric cos^kappa
pattern.  Entry (m, n) of the transfer matrix is

    lam * sqrt(rho_srf * G(theta_mn)) / (4*pi*r_mn) * exp(-1j*2*pi*r_mn/lam)

with r_mn the feed-to-element distance and theta_mn the angle off the feed's
boresight.  Separate illumination physically shields cross terms, so those
entries are zeroed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .channel import ArrayGeometry

STRATEGIES = ("FI", "PI", "SI", "BlockageFreePI", "UniformSI")

# Strategies whose sub-surfaces are individually illuminated (boresight at the
# sub-surface centroid rather than the surface center).
_SUBSURFACE_AIMED = ("PI", "SI", "BlockageFreePI", "UniformSI")

FAR_FIELD_MIN_WAVELENGTHS = 5.0


class ConfigurationError(ValueError):
    """Raised for geometrically impossible or inconsistent configurations."""


@dataclass(frozen=True)
class IlluminationConfig:
    """Feed arrangement: strategy, feed count, ring geometry, pattern and efficiency."""

    strategy: str
    num_feeds: int
    surface: ArrayGeometry
    ring_radius: float
    feed_distance: float
    feed_exponent: float = 49.0
    surface_efficiency: float = 1.0
    ring_center: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown illumination strategy {self.strategy!r}")
        if self.num_feeds < 1:
            raise ConfigurationError("num_feeds must be >= 1")
        if self.feed_exponent < 2:
            raise ConfigurationError("feed pattern exponent must be >= 2")
        if not 0 < self.surface_efficiency <= 1:
            raise ConfigurationError("surface efficiency must lie in (0, 1]")
        if self.ring_radius < 0 or self.feed_distance <= 0:
            raise ConfigurationError("ring geometry must have R_r >= 0 and R_d > 0")
        if self.surface.num_elements % self.num_feeds != 0:
            raise ConfigurationError(
                f"num_feeds {self.num_feeds} must divide the element count "
                f"{self.surface.num_elements}"
            )

    @property
    def in_far_field(self) -> bool:
        """Whether R_d satisfies the usual far-field margin (>= 5 wavelengths)."""
        return self.feed_distance >= FAR_FIELD_MIN_WAVELENGTHS * self.surface.wavelength

    def center(self) -> np.ndarray:
        if self.ring_center is not None:
            return np.asarray(self.ring_center, dtype=float)
        half = self.surface.spacing * self.surface.side / 2
        if self.strategy == "BlockageFreePI":
            return np.array([self.feed_distance, half, half])
        return np.array([self.feed_distance, 0.0, 0.0])


@dataclass(frozen=True)
class FeedLayout:
    """Feed positions/boresights plus per-(element, feed) spherical geometry."""

    positions: np.ndarray  # (N, 3)
    boresights: np.ndarray  # (N, 3) unit vectors
    element_positions: np.ndarray  # (M, 3)
    distances: np.ndarray  # (M, N) r_mn > 0
    theta: np.ndarray  # (M, N) angle off boresight, [0, pi]
    phi: np.ndarray  # (M, N) azimuth about boresight
    partition: tuple[np.ndarray, ...]  # N disjoint index sets covering 0..M-1

    def __post_init__(self):
        if np.any(self.distances <= 0):
            raise ConfigurationError("all feed-to-element distances must be positive")
        m = self.element_positions.shape[0]
        stacked = np.sort(np.concatenate(self.partition))
        if stacked.size != m or np.any(stacked != np.arange(m)):
            raise ConfigurationError("partition must cover every element exactly once")


@dataclass(frozen=True)
class TransferMatrix:
    """Fixed M x N feed-to-surface matrix with its generating geometry."""

    matrix: np.ndarray
    layout: FeedLayout
    config: IlluminationConfig


def element_positions(surface: ArrayGeometry) -> np.ndarray:
    """(M, 3) element centers on the y-z plane, centered, m_y fastest."""
    side = surface.side
    offs = (np.arange(side) - (side - 1) / 2) * surface.spacing
    my, mz = np.meshgrid(offs, offs, indexing="ij")
    pos = np.zeros((surface.num_elements, 3))
    pos[:, 1] = my.reshape(-1, order="F")
    pos[:, 2] = mz.reshape(-1, order="F")
    return pos


def partition_surface(num_elements: int, num_feeds: int) -> list[np.ndarray]:
    """Split element indices into N contiguous sub-surfaces.

    A square grid of sub-squares when sqrt(N) is an integer dividing the side,
    otherwise N vertical strips of side/N columns each.
    """
    side = math.isqrt(num_elements)
    if side * side != num_elements:
        raise ConfigurationError("element count must be a perfect square")
    if num_feeds == 1:
        return [np.arange(num_elements)]
    if num_elements % num_feeds != 0:
        raise ConfigurationError(
            f"num_feeds {num_feeds} must divide the element count {num_elements}"
        )
    grid = math.isqrt(num_feeds)
    idx = np.arange(num_elements)
    my = idx % side
    mz = idx // side
    if grid * grid == num_feeds and side % grid == 0:
        w = side // grid
        return [
            idx[(my // w == by) & (mz // w == bz)]
            for bz in range(grid)
            for by in range(grid)
        ]
    if side % num_feeds == 0:
        w = side // num_feeds
        return [idx[my // w == n] for n in range(num_feeds)]
    raise ConfigurationError(
        f"cannot partition a {side}x{side} surface into {num_feeds} contiguous blocks"
    )


def _pairwise_geometry(
    positions: np.ndarray, boresights: np.ndarray, elements: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(r, theta, phi) arrays of shape (M, N) for feeds at `positions`."""
    diff = elements[:, None, :] - positions[None, :, :]  # (M, N, 3)
    r = np.linalg.norm(diff, axis=2)
    if np.any(r <= 0):
        raise ConfigurationError("a feed coincides with a surface element")
    direction = diff / r[:, :, None]
    cos_t = np.clip(np.einsum("mnk,nk->mn", direction, boresights), -1.0, 1.0)
    theta = np.arccos(cos_t)
    # Azimuth about the boresight axis; reference frame from the global z axis
    # (or y when the boresight is near-parallel to z).
    n_feeds = positions.shape[0]
    u = np.empty_like(boresights)
    for n in range(n_feeds):
        ref = np.array([0.0, 0.0, 1.0])
        if abs(boresights[n] @ ref) > 0.9:
            ref = np.array([0.0, 1.0, 0.0])
        perp = ref - (ref @ boresights[n]) * boresights[n]
        u[n] = perp / np.linalg.norm(perp)
    v = np.cross(boresights, u)
    phi = np.arctan2(
        np.einsum("mnk,nk->mn", direction, v), np.einsum("mnk,nk->mn", direction, u)
    )
    return r, theta, phi


def place_feeds(config: IlluminationConfig) -> FeedLayout:
    """Place N feeds on the ring and pair each with its nearest sub-surface.

    Feeds are uniformly spaced on the ring; with N = 4 the ring is rotated by
    pi/4 so the feeds line up with the sub-square centroids.  Boresights point
    at the surface center for FI and at the assigned sub-surface centroid
    otherwise.
    """
    surface = config.surface
    elems = element_positions(surface)
    n = config.num_feeds
    center = config.center()
    offset = math.pi / 4 if n == 4 else 0.0
    angles = 2 * math.pi * np.arange(n) / n + offset
    positions = center[None, :] + config.ring_radius * np.column_stack(
        [np.zeros(n), np.cos(angles), np.sin(angles)]
    )

    blocks = partition_surface(surface.num_elements, n)
    centroids = np.array([elems[b].mean(axis=0) for b in blocks])
    # Min-total-distance matching between feeds and sub-surface centroids.
    cost = np.linalg.norm(positions[:, None, :] - centroids[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    partition = tuple(blocks[cols[np.where(rows == i)[0][0]]] for i in range(n))
    targets = np.array(
        [
            np.zeros(3) if config.strategy == "FI" else elems[partition[i]].mean(axis=0)
            for i in range(n)
        ]
    )
    vecs = targets - positions
    boresights = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
    r, theta, phi = _pairwise_geometry(positions, boresights, elems)
    return FeedLayout(
        positions=positions,
        boresights=boresights,
        element_positions=elems,
        distances=r,
        theta=theta,
        phi=phi,
        partition=partition,
    )


def feed_gain(kappa: float, theta) -> np.ndarray | float:
    """Axisymmetric feed pattern 2*(1+kappa)*cos(theta)**kappa on [0, pi/2), else 0."""
    if kappa < 2:
        raise ConfigurationError("feed pattern exponent must be >= 2")
    theta = np.asarray(theta, dtype=float)
    c = np.where(theta < math.pi / 2, np.clip(np.cos(theta), 0.0, None), 0.0)
    g = 2 * (1 + kappa) * c**kappa
    return g if g.ndim else float(g)


def _support_mask(layout: FeedLayout) -> np.ndarray:
    mask = np.zeros((layout.element_positions.shape[0], len(layout.partition)))
    for n, idx in enumerate(layout.partition):
        mask[idx, n] = 1.0
    return mask


def build_transfer(
    config: IlluminationConfig, layout: FeedLayout | None = None
) -> TransferMatrix:
    """Transfer matrix for FI/PI/SI/BlockageFreePI; SI zeroes shielded cross terms."""
    if config.strategy == "UniformSI":
        raise ConfigurationError("UniformSI uses build_transfer_uniform_si")
    if layout is None:
        layout = place_feeds(config)
    lam = config.surface.wavelength
    gain = feed_gain(config.feed_exponent, layout.theta)
    amp = lam * np.sqrt(config.surface_efficiency * gain) / (4 * np.pi * layout.distances)
    t = amp * np.exp(-2j * np.pi * layout.distances / lam)
    if config.strategy == "SI":
        t = t * _support_mask(layout)
    return TransferMatrix(matrix=t, layout=layout, config=config)


def build_transfer_uniform_si(
    config: IlluminationConfig, layout: FeedLayout | None = None
) -> TransferMatrix:
    """Hypothetical uniform SI: constant modulus on each sub-surface, SI phases."""
    if config.strategy != "UniformSI":
        raise ConfigurationError("build_transfer_uniform_si requires strategy UniformSI")
    if layout is None:
        layout = place_feeds(config)
    lam = config.surface.wavelength
    mask = _support_mask(layout)
    r_mean = float(np.sum(layout.distances * mask) / config.surface.num_elements)
    theta0 = subsurface_extent(config)
    c = lam / (4 * np.pi * r_mean) * math.sqrt(
        2 * config.surface_efficiency / (1 - math.cos(theta0))
    )
    t = c * np.exp(-2j * np.pi * layout.distances / lam) * mask
    return TransferMatrix(matrix=t, layout=layout, config=config)


def make_transfer(config: IlluminationConfig) -> TransferMatrix:
    """Place feeds and build T for any strategy."""
    layout = place_feeds(config)
    if config.strategy == "UniformSI":
        return build_transfer_uniform_si(config, layout)
    return build_transfer(config, layout)


def angular_extent(num_elements: int, spacing: float, feed_distance: float) -> float:
    """Elevation half-angle of the equal-area circular stand-in for the surface."""
    return math.atan(spacing / feed_distance * math.sqrt(num_elements / math.pi))


def subsurface_extent(config: IlluminationConfig) -> float:
    """Angular extent of one feed's sub-surface (area M/N) at distance R_d."""
    return angular_extent(
        config.surface.num_elements // config.num_feeds,
        config.surface.spacing,
        config.feed_distance,
    )


def spillover_efficiency(kappa: float, theta0: float) -> float:
    """Closed-form captured-power fraction 1 - cos(theta0)**(kappa+1)."""
    if kappa < 2:
        raise ConfigurationError("kappa must be >= 2")
    if not 0 < theta0 <= math.pi / 2:
        raise ConfigurationError("theta0 must lie in (0, pi/2]")
    return 1 - math.cos(theta0) ** (kappa + 1)


def taper_efficiency(kappa: float, theta0: float) -> float:
    """Closed-form taper efficiency of the cos^kappa feed over a circular aperture.

    The kappa = 2 case is a removable 0/0 singularity; within |kappa - 2| < 1e-6
    the analytic limit is used instead.
    """
    if kappa < 2:
        raise ConfigurationError("kappa must be >= 2")
    if not 0 < theta0 < math.pi / 2:
        raise ConfigurationError("theta0 must lie in (0, pi/2)")
    c = math.cos(theta0)
    sec_term = 1 / c - 1
    if abs(kappa - 2) < 1e-6:
        return math.log(c) ** 2 / ((1 - c) * sec_term)
    half = kappa / 2 - 1
    return (
        (kappa - 1)
        / half**2
        * (1 - c**half) ** 2
        / ((1 - c ** (kappa - 1)) * sec_term)
    )


def condition_number(t: TransferMatrix | np.ndarray) -> float:
    """Ratio of extreme singular values; +inf for a rank-deficient matrix."""
    mat = t.matrix if isinstance(t, TransferMatrix) else np.asarray(t)
    if not np.any(mat):
        raise ValueError("condition number of an all-zero matrix is undefined")
    s = np.linalg.svd(mat, compute_uv=False)
    tol = s[0] * max(mat.shape) * np.finfo(float).eps
    if s[-1] <= tol:
        return math.inf
    return float(s[0] / s[-1])


def discrete_spillover(t: TransferMatrix) -> np.ndarray:
    """Per-feed fraction of radiated power captured by the surface, from T itself.

    Column energies of T normalized by the surface efficiency: |T_mn|^2 already
    equals rho_srf times the power fraction an isotropic element captures, so
    sum_m |T_mn|^2 / rho_srf is feed n's captured fraction.  Unlike the
    closed-form spillover this needs no circular-aperture or broadside-feed
    assumption.
    """
    energy = np.sum(np.abs(t.matrix) ** 2, axis=0)
    return energy / t.config.surface_efficiency


def default_ring_geometry(
    strategy: str, num_elements: int, num_feeds: int, spacing: float
) -> tuple[float, float]:
    """(R_d, R_r) scaling rules keeping the illuminated extent independent of M.

    Full-surface strategies (FI, BlockageFreePI) scale R_d with the whole
    aperture; per-sub-surface strategies (PI, SI, UniformSI) scale with the
    sub-aperture and push the ring out to the sub-surface centroids.
    """
    root_m = math.sqrt(num_elements)
    if strategy in ("FI", "BlockageFreePI"):
        return 4 * spacing * root_m / math.sqrt(math.pi), 2 * spacing
    if strategy in ("PI", "SI", "UniformSI"):
        r_d = 4 * spacing * root_m / math.sqrt(num_feeds * math.pi)
        return r_d, spacing * math.sqrt(2 * num_elements) / 4
    raise ConfigurationError(f"unknown illumination strategy {strategy!r}")


def dump_geometry_csv(t: TransferMatrix, path) -> None:
    """Write per-(feed, element) geometry rows: n, m, r, theta, |T| (1-based ids)."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "m", "r_m", "theta_rad", "abs_t"])
        m_count, n_count = t.matrix.shape
        for n in range(n_count):
            for m in range(m_count):
                writer.writerow(
                    [
                        n + 1,
                        m + 1,
                        f"{t.layout.distances[m, n]:.9g}",
                        f"{t.layout.theta[m, n]:.9g}",
                        f"{abs(t.matrix[m, n]):.9g}",
                    ]
                )


@dataclass(frozen=True)
class LensSetup:
    """Non-reconfigurable lens: fixed per-element phases and a K-feed focal arc."""

    t: np.ndarray  # (M, K)
    fixed_phase: np.ndarray  # (M,) unit-modulus diagonal
    positions: np.ndarray  # (K, 3)
    focal_distance: float


def build_lens(
    surface: ArrayGeometry,
    num_feeds: int,
    kappa: float = 49.0,
    surface_efficiency: float = 1.0,
) -> LensSetup:
    """Lens-array feed geometry: K feeds on the focal arc, fixed collimating phases.

    The focal distance is 4*lam*sqrt(M/pi).  The fixed phase of element m undoes
    the path delay from the on-axis focal point, collimating that feed to
    broadside.  Feeds are placed on the focal arc in the azimuth plane with
    sin(azimuth) sampled uniformly over [-1, 1] (cell midpoints).
    """
    if num_feeds < 1:
        raise ConfigurationError("a lens needs at least one feed")
    lam = surface.wavelength
    f_d = 4 * lam * math.sqrt(surface.num_elements / math.pi)
    elems = element_positions(surface)
    focal = np.array([f_d, 0.0, 0.0])
    r0 = np.linalg.norm(elems - focal[None, :], axis=1)
    fixed_phase = np.exp(2j * np.pi * r0 / lam)

    k = num_feeds
    sines = -1 + (2 * np.arange(1, k + 1) - 1) / k
    alphas = np.arcsin(sines)
    positions = np.column_stack(
        [f_d * np.cos(alphas), f_d * np.sin(alphas), np.zeros(k)]
    )
    boresights = -positions / np.linalg.norm(positions, axis=1, keepdims=True)
    r, theta, _ = _pairwise_geometry(positions, boresights, elems)
    gain = feed_gain(kappa, theta)
    amp = lam * np.sqrt(surface_efficiency * gain) / (4 * np.pi * r)
    t = amp * np.exp(-2j * np.pi * r / lam)
    return LensSetup(t=t, fixed_phase=fixed_phase, positions=positions, focal_distance=f_d)
