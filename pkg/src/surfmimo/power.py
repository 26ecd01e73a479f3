"""Total consumed power per MIMO architecture.

All internal math is in linear mW; dB/dBm conversions happen only at the
boundaries.  Hybrid architectures pay for gain-compensation amplifiers that
offset the insertion loss of their divider/combiner trees; surface and lens
architectures instead pay radiated-power overhead for the over-the-air hop,
which keeps their total independent of the element count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

SURFACE_ARCHITECTURES = ("irs", "its", "la")


def dbm_to_mw(x: float) -> float:
    return 10 ** (x / 10)


def mw_to_dbm(x: float) -> float:
    if x <= 0:
        raise ValueError("power must be positive to convert to dBm")
    return 10 * math.log10(x)


def db_to_linear(x: float) -> float:
    return 10 ** (x / 10)


@dataclass(frozen=True)
class PowerModelParams:
    """Circuit and loss constants (powers in mW, losses in dB, efficiencies as fractions)."""

    p_bb_mw: float = 200.0
    p_rfc_mw: float = 100.0
    p_sw_mw: float = 5.0
    p_amp_mw: float = 40.0
    p_tx_mw: float = 100.0  # 20 dBm
    g_amp_db: float = 10.0
    l_d_db: float = 3.6
    l_c_db: float = 3.6
    l_p_db: float = 2.0  # per-pass phase-shifter loss, 1/rho_p in dB
    rho_a_irs: float = 10 ** (-0.05)  # reflective aperture, 0.5 dB loss
    rho_a_its: float = 10 ** (-0.15)  # transmissive aperture, 1.5 dB loss
    rho_pa: float = 0.3

    def __post_init__(self):
        for name in ("p_bb_mw", "p_rfc_mw", "p_sw_mw", "p_amp_mw", "p_tx_mw"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("rho_a_irs", "rho_a_its", "rho_pa"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.g_amp_db <= 0:
            raise ValueError("amplifier gain must be positive")

    @property
    def rho_p(self) -> float:
        """Single-pass phase-shifter efficiency."""
        return 10 ** (-self.l_p_db / 10)


def surface_power_efficiency(architecture: str, p: PowerModelParams) -> float:
    """rho_srf: aperture times phase-shifter efficiency; the reflective surface
    passes through its shifters twice, the transmissive surface and lens once."""
    if architecture == "irs":
        return p.rho_p**2 * p.rho_a_irs
    if architecture in ("its", "la"):
        return p.rho_p * p.rho_a_its
    raise ValueError(f"not a surface architecture: {architecture!r}")


def power_fd(m: int, p: PowerModelParams) -> float:
    """Fully digital: one RF chain per antenna plus the PA."""
    return p.p_bb_mw + m * p.p_rfc_mw + p.p_tx_mw / p.rho_pa


def _gca_count(loss_db: float, p: PowerModelParams) -> int:
    return math.ceil(loss_db / p.g_amp_db)


def fc_network_loss_db(m: int, n: int, p: PowerModelParams) -> float:
    """Insertion loss of the fully-connected analog network per antenna path."""
    return (
        math.ceil(math.log2(m)) * p.l_d_db
        + math.ceil(math.log2(n)) * p.l_c_db
        + p.l_p_db
    )


def pc_network_loss_db(m: int, n: int, p: PowerModelParams) -> float:
    """Insertion loss of the partially-connected network (no combiners)."""
    return math.ceil(math.log2(m / n)) * p.l_d_db + p.l_p_db


def power_fc(m: int, n: int, p: PowerModelParams) -> float:
    """Fully-connected hybrid: N chains plus per-antenna gain-compensation amps."""
    gcas = _gca_count(fc_network_loss_db(m, n, p), p)
    return p.p_bb_mw + n * p.p_rfc_mw + gcas * m * p.p_amp_mw + p.p_tx_mw / p.rho_pa


def power_pc(m: int, n: int, p: PowerModelParams) -> float:
    """Partially-connected hybrid: shorter divider tree, no combiners."""
    gcas = _gca_count(pc_network_loss_db(m, n, p), p)
    return p.p_bb_mw + n * p.p_rfc_mw + gcas * m * p.p_amp_mw + p.p_tx_mw / p.rho_pa


def power_surface(
    architecture: str,
    n: int,
    p: PowerModelParams,
    rho_s: float,
    bnorm_sq: float | None = None,
    mode: str = "approx",
) -> float:
    """Total power of the reflective/transmissive surface or lens architectures.

    Exact mode charges the PAs for the actually radiated power
    P_tx * ||B||_F^2; approximate mode substitutes 1/(rho_s * rho_srf), valid
    when the transfer matrix is well conditioned.  The lens adds one switch per
    RF chain.
    """
    if architecture not in SURFACE_ARCHITECTURES:
        raise ValueError(f"not a surface architecture: {architecture!r}")
    if not 0 < rho_s <= 1:
        raise ValueError("spillover efficiency must lie in (0, 1]")
    if mode == "exact":
        if bnorm_sq is None:
            raise ValueError("exact mode needs the baseband norm ||B||_F^2")
        pa = p.p_tx_mw * bnorm_sq / p.rho_pa
    elif mode == "approx":
        rho_rts = rho_s * surface_power_efficiency(architecture, p)
        pa = p.p_tx_mw / (rho_rts * p.rho_pa)
    else:
        raise ValueError(f"unknown power mode {mode!r}")
    total = p.p_bb_mw + n * p.p_rfc_mw + pa
    if architecture == "la":
        total += n * p.p_sw_mw
    return total
