"""Sparse mmWave channel generation (Saleh-Valenzuela) and array responses.

The transmit/receive arrays are square uniform planar arrays (UPA) in the
y-z plane.  Element (m_y, m_z) of an array with spacing d and wavelength lam
contributes phase (2*pi*d/lam) * ((m_y-1)*cos(theta)*sin(phi) + (m_z-1)*sin(theta))
for elevation theta and azimuth phi.  Vectors are stacked column-major with
m_y running fastest; the geometry module enumerates element positions in the
same order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """Square UPA: element count (perfect square), spacing and wavelength in meters."""

    num_elements: int
    spacing: float
    wavelength: float

    def __post_init__(self):
        side = math.isqrt(int(self.num_elements))
        if self.num_elements < 1 or side * side != self.num_elements:
            raise ValueError(
                f"num_elements must be a positive perfect square, got {self.num_elements}"
            )
        if self.spacing <= 0:
            raise ValueError("element spacing must be positive")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")

    @property
    def side(self) -> int:
        return math.isqrt(int(self.num_elements))


@dataclass(frozen=True)
class Path:
    """One propagation path: complex gain plus (elevation, azimuth) AoD/AoA in radians."""

    gain: complex
    aod: tuple[float, float]
    aoa: tuple[float, float]

    def __post_init__(self):
        vals = (self.aod[0], self.aod[1], self.aoa[0], self.aoa[1], abs(self.gain))
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("path angles and gain must be finite")


@dataclass(frozen=True)
class AngleRanges:
    """Sampling intervals (radians) for AoD/AoA elevation and azimuth."""

    aod_theta: tuple[float, float] = (-2 * math.pi / 3, 2 * math.pi / 3)
    aod_phi: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    aoa_theta: tuple[float, float] = (-2 * math.pi / 3, 2 * math.pi / 3)
    aoa_phi: tuple[float, float] = (-math.pi / 2, math.pi / 2)

    def __post_init__(self):
        for lo, hi in (self.aod_theta, self.aod_phi, self.aoa_theta, self.aoa_phi):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValueError("angle ranges must be finite, nonempty intervals")


@dataclass(frozen=True)
class PathSet:
    """The L sampled paths underlying one channel realization."""

    paths: tuple[Path, ...]
    pathloss_distance: float
    pathloss_exponent: float

    def __post_init__(self):
        if len(self.paths) < 1:
            raise ValueError("a PathSet needs at least one path")
        if self.pathloss_distance <= 0:
            raise ValueError("pathloss distance must be positive")
        if self.pathloss_exponent < 0:
            raise ValueError("pathloss exponent must be nonnegative")

    @property
    def num_paths(self) -> int:
        return len(self.paths)

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=complex)

    @property
    def aods(self) -> np.ndarray:
        """(L, 2) array of departure (elevation, azimuth) pairs."""
        return np.array([p.aod for p in self.paths], dtype=float)

    @property
    def aoas(self) -> np.ndarray:
        """(L, 2) array of arrival (elevation, azimuth) pairs."""
        return np.array([p.aoa for p in self.paths], dtype=float)


@dataclass(frozen=True)
class NoiseModel:
    """Receiver noise: bandwidth in Hz, PSD in dBm/Hz, noise figure in dB."""

    bandwidth_hz: float
    psd_dbm_hz: float = -174.0
    noise_figure_db: float = 6.0

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class ChannelRealization:
    """J x M channel matrix together with the paths and geometries it was built from."""

    matrix: np.ndarray
    source: PathSet
    rx_geometry: ArrayGeometry
    tx_geometry: ArrayGeometry


def upa_response(geometry: ArrayGeometry, theta: float, phi: float) -> np.ndarray:
    """Unit-modulus UPA steering vector for elevation theta, azimuth phi (radians).

    Element (m_y, m_z) carries phase
    (2*pi*d/lam) * ((m_y-1)*cos(theta)*sin(phi) + (m_z-1)*sin(theta)),
    flattened with m_y fastest.
    """
    side = geometry.side
    k = 2 * np.pi * geometry.spacing / geometry.wavelength
    my = np.arange(side)[:, None]  # m_y - 1, fast axis
    mz = np.arange(side)[None, :]  # m_z - 1, slow axis
    phase = k * (my * np.cos(theta) * np.sin(phi) + mz * np.sin(theta))
    return np.exp(1j * phase).reshape(-1, order="F")


def mean_pathloss(wavelength: float, distance: float, exponent: float) -> float:
    """Deterministic pathloss component (lam / (4*pi*dist))**eta."""
    return float((wavelength / (4 * np.pi * distance)) ** exponent)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_paths(
    seed,
    num_paths: int,
    angle_ranges: AngleRanges,
    distance: float,
    exponent: float,
    wavelength: float,
) -> PathSet:
    """Draw L paths with i.i.d. uniform angles and Rayleigh-faded gains.

    Gain of each path is sqrt(pathloss) * h where pathloss = (lam/(4*pi*dist))**eta
    and h is standard circularly-symmetric complex Gaussian (two real normals
    with variance 1/2 each).  The same seed reproduces the same PathSet.
    """
    if num_paths < 1:
        raise ValueError("num_paths must be >= 1")
    rng = _as_rng(seed)
    aod_th = rng.uniform(*angle_ranges.aod_theta, size=num_paths)
    aod_ph = rng.uniform(*angle_ranges.aod_phi, size=num_paths)
    aoa_th = rng.uniform(*angle_ranges.aoa_theta, size=num_paths)
    aoa_ph = rng.uniform(*angle_ranges.aoa_phi, size=num_paths)
    scale = math.sqrt(mean_pathloss(wavelength, distance, exponent))
    re = rng.normal(scale=math.sqrt(0.5), size=num_paths)
    im = rng.normal(scale=math.sqrt(0.5), size=num_paths)
    gains = scale * (re + 1j * im)
    paths = tuple(
        Path(
            gain=complex(gains[l]),
            aod=(float(aod_th[l]), float(aod_ph[l])),
            aoa=(float(aoa_th[l]), float(aoa_ph[l])),
        )
        for l in range(num_paths)
    )
    return PathSet(paths=paths, pathloss_distance=distance, pathloss_exponent=exponent)


def tx_response_matrix(paths: PathSet, tx: ArrayGeometry) -> np.ndarray:
    """M x L matrix whose columns are the transmit responses of each path's AoD."""
    return np.column_stack([upa_response(tx, th, ph) for th, ph in paths.aods])


def rx_response_matrix(paths: PathSet, rx: ArrayGeometry) -> np.ndarray:
    """J x L matrix whose columns are the receive responses of each path's AoA."""
    return np.column_stack([upa_response(rx, th, ph) for th, ph in paths.aoas])


def assemble_channel(
    paths: PathSet, tx: ArrayGeometry, rx: ArrayGeometry
) -> ChannelRealization:
    """Build H = (1/sqrt(L)) * sum_l h_l * h_r(aoa_l) * h_t(aod_l)^H."""
    if tx.wavelength != rx.wavelength:
        raise ValueError("tx and rx geometries must share one wavelength")
    h_t = tx_response_matrix(paths, tx)
    h_r = rx_response_matrix(paths, rx)
    h = (h_r * paths.gains[None, :]) @ h_t.conj().T / math.sqrt(paths.num_paths)
    return ChannelRealization(matrix=h, source=paths, rx_geometry=rx, tx_geometry=tx)


def noise_power_mw(nm: NoiseModel) -> float:
    """Noise power in mW: bandwidth * PSD * noise figure, all in linear units."""
    total_dbm = nm.psd_dbm_hz + 10 * math.log10(nm.bandwidth_hz) + nm.noise_figure_db
    return 10 ** (total_dbm / 10)
