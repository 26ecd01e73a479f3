"""Monte-Carlo harness: seeded trials across sweep axes, per-trial records, aggregates.

Each trial draws one set of channel paths (seed derived from the base seed and
the trial index only, so trials are order-independent and sweep points share
common random numbers), assembles the channel, designs the precoder of every
requested architecture, and records rate, consumed power, and energy
efficiency.  Geometry is deterministic per sweep value and rebuilt outside the
trial loop.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel as ch
from . import geometry as geo
from . import power as pw
from . import precoding as pc

ARCHITECTURES = ("fd", "fc", "pc", "la", "irs-mi", "irs-omp", "its-mi", "its-omp")
SURFACE_TAGS = ("irs-mi", "irs-omp", "its-mi", "its-omp")
SWEEP_PARAMS = ("none", "m", "l", "k", "rr", "rd")


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully specified scenario plus its sweep axis."""

    architectures: tuple[str, ...] = ("fd", "fc", "pc", "la", "irs-omp", "its-omp")
    strategy: str = "SI"
    m: int = 256
    n: int = 4
    q: int = 4
    j: int = 16
    k: int = 64
    l: int = 8
    pathloss_distance_m: float = 100.0
    pathloss_exponent: float = 2.0
    wavelength_m: float = 0.01
    spacing_m: float = 0.005
    aod_theta_rad: tuple[float, float] = (-2 * math.pi / 3, 2 * math.pi / 3)
    aod_phi_rad: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    aoa_theta_rad: tuple[float, float] = (-2 * math.pi / 3, 2 * math.pi / 3)
    aoa_phi_rad: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    feed_exponent: float = 49.0
    ring_radius_m: float | None = None  # None: Table-style scaling rule
    feed_distance_m: float | None = None
    bandwidth_hz: float = 1e8
    psd_dbm_hz: float = -174.0
    noise_figure_db: float = 6.0
    power: pw.PowerModelParams = field(default_factory=pw.PowerModelParams)
    trials: int = 1000
    base_seed: int = 1
    sweep_param: str = "none"
    sweep_values: tuple[float, ...] = ()
    power_mode: str = "exact"
    spillover_source: str = "discrete"
    workers: int = 1

    def __post_init__(self):
        for a in self.architectures:
            if a not in ARCHITECTURES:
                raise ValueError(f"unknown architecture {a!r}")
        if self.strategy not in geo.STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.sweep_param not in SWEEP_PARAMS:
            raise ValueError(f"unknown sweep parameter {self.sweep_param!r}")
        if self.power_mode not in ("exact", "approx"):
            raise ValueError(f"unknown power mode {self.power_mode!r}")
        if self.spillover_source not in ("discrete", "closed_form"):
            raise ValueError(f"unknown spillover source {self.spillover_source!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        # L < N is permitted (path sweeps go below N); the selection loops then
        # reuse paths across sub-surfaces.
        if not self.q <= self.n <= self.m:
            raise ValueError(
                f"need Q <= N <= M; got Q={self.q} N={self.n} M={self.m}"
            )

    @property
    def noise_model(self) -> ch.NoiseModel:
        return ch.NoiseModel(self.bandwidth_hz, self.psd_dbm_hz, self.noise_figure_db)

    @property
    def gamma(self) -> float:
        """Transmit SNR P_tx / sigma^2, linear."""
        return self.power.p_tx_mw / ch.noise_power_mw(self.noise_model)

    @property
    def angle_ranges(self) -> ch.AngleRanges:
        return ch.AngleRanges(
            self.aod_theta_rad, self.aod_phi_rad, self.aoa_theta_rad, self.aoa_phi_rad
        )

    def with_sweep_value(self, value: float) -> "ExperimentConfig":
        """Config for one sweep point (identity when sweep_param is 'none')."""
        if self.sweep_param == "none":
            return self
        if self.sweep_param == "m":
            return replace(self, m=int(value))
        if self.sweep_param == "l":
            return replace(self, l=int(value))
        if self.sweep_param == "k":
            return replace(self, k=int(value))
        if self.sweep_param == "rr":
            return replace(self, ring_radius_m=float(value))
        if self.sweep_param == "rd":
            return replace(self, feed_distance_m=float(value))
        raise AssertionError(self.sweep_param)


@dataclass(frozen=True)
class TrialRecord:
    """One (architecture, sweep value, trial) outcome."""

    architecture: str
    strategy: str
    m: int
    n: int
    q: int
    j: int
    k: int
    l: int
    sweep_param: str
    sweep_value: float
    trial_index: int
    seed: int
    ok: bool
    rate_bpshz: float
    p_tot_mw: float
    energy_bits_per_joule: float
    bnorm_sq: float
    cond_t: float
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class SummaryRow:
    """Aggregate statistics for one (architecture, strategy, sweep value) cell."""

    architecture: str
    strategy: str
    m: int
    n: int
    q: int
    j: int
    k: int
    l: int
    sweep_param: str
    sweep_value: float
    trials_ok: int
    trials_failed: int
    mean_rate_bpshz: float
    stderr_rate: float
    mean_ptot_mw: float
    mean_ee_bits_per_joule: float
    mean_bnorm_sq: float
    mean_cond_t: float


def trial_rng(base_seed: int, trial_index: int) -> np.random.Generator:
    """Counter-style per-trial generator: independent of execution order."""
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(trial_index,)))


def trial_seed_id(base_seed: int, trial_index: int) -> int:
    return int(
        np.random.SeedSequence(base_seed, spawn_key=(trial_index,)).generate_state(1)[0]
    )


@dataclass(frozen=True)
class Scenario:
    """Deterministic per-sweep-point geometry shared by all trials."""

    cfg: ExperimentConfig
    tx: ch.ArrayGeometry
    rx: ch.ArrayGeometry
    partition: tuple[np.ndarray, ...]
    transfer: dict  # rho_srf keyed by architecture tag
    lens: geo.LensSetup | None
    rho_s: dict  # spillover per architecture tag
    cond: dict  # condition number per architecture tag


def _surface_transfer(cfg: ExperimentConfig, rho_srf: float) -> geo.TransferMatrix:
    r_d, r_r = cfg.feed_distance_m, cfg.ring_radius_m
    if r_d is None or r_r is None:
        rule_rd, rule_rr = geo.default_ring_geometry(
            cfg.strategy, cfg.m, cfg.n, cfg.spacing_m
        )
        r_d = rule_rd if r_d is None else r_d
        r_r = rule_rr if r_r is None else r_r
    surface = ch.ArrayGeometry(cfg.m, cfg.spacing_m, cfg.wavelength_m)
    ill = geo.IlluminationConfig(
        strategy=cfg.strategy,
        num_feeds=cfg.n,
        surface=surface,
        ring_radius=r_r,
        feed_distance=r_d,
        feed_exponent=cfg.feed_exponent,
        surface_efficiency=rho_srf,
    )
    return geo.make_transfer(ill)


def _closed_form_rho_s(cfg: ExperimentConfig, tm: geo.TransferMatrix) -> float:
    if cfg.strategy in ("PI", "SI", "UniformSI"):
        theta0 = geo.subsurface_extent(tm.config)
    else:
        theta0 = geo.angular_extent(cfg.m, cfg.spacing_m, tm.config.feed_distance)
    return geo.spillover_efficiency(cfg.feed_exponent, theta0)


def build_scenario(cfg: ExperimentConfig) -> Scenario:
    tx = ch.ArrayGeometry(cfg.m, cfg.spacing_m, cfg.wavelength_m)
    rx = ch.ArrayGeometry(cfg.j, cfg.spacing_m, cfg.wavelength_m)
    partition = tuple(geo.partition_surface(cfg.m, cfg.n))
    transfer: dict = {}
    rho_s: dict = {}
    cond: dict = {}
    lens = None
    for tag in cfg.architectures:
        if tag in SURFACE_TAGS:
            base = tag.split("-")[0]  # irs | its
            rho_srf = pw.surface_power_efficiency(base, cfg.power)
            tm = _surface_transfer(cfg, rho_srf)
            transfer[tag] = tm
            cond[tag] = geo.condition_number(tm)
            if cfg.spillover_source == "discrete":
                rho_s[tag] = float(np.mean(geo.discrete_spillover(tm)))
            else:
                rho_s[tag] = _closed_form_rho_s(cfg, tm)
        elif tag == "la" and lens is None:
            rho_srf = pw.surface_power_efficiency("la", cfg.power)
            lens = geo.build_lens(tx, cfg.k, cfg.feed_exponent, rho_srf)
            cond["la"] = geo.condition_number(lens.t)
            rho_s["la"] = float(
                np.mean(np.sum(np.abs(lens.t) ** 2, axis=0)) / rho_srf
            )
        elif tag == "pc":
            cond["pc"] = geo.condition_number(pc.connection_matrix(partition, cfg.m))
    return Scenario(
        cfg=cfg,
        tx=tx,
        rx=rx,
        partition=partition,
        transfer=transfer,
        lens=lens,
        rho_s=rho_s,
        cond=cond,
    )


def _design(tag: str, scn: Scenario, h: np.ndarray, h_tx: np.ndarray) -> pc.Precoder:
    cfg = scn.cfg
    gamma = cfg.gamma
    if tag == "fd":
        return pc.fd_optimal(h, gamma, cfg.q)
    if tag == "fc":
        return pc.fc_sparse_precoder(h, h_tx, gamma, cfg.n, cfg.q)
    if tag == "pc":
        return pc.pc_precoder(h, scn.partition, h_tx, gamma, cfg.q)
    if tag == "la":
        return pc.la_precoder(h, scn.lens, h_tx, gamma, cfg.n, cfg.q)
    tm = scn.transfer[tag]
    if tag.endswith("-mi"):
        return pc.mi_precoder(
            h, tm.matrix, tm.layout.partition, h_tx, gamma, cfg.q, architecture=tag
        )
    return pc.omp_precoder(
        h, tm.matrix, tm.layout.partition, h_tx, gamma, cfg.q, architecture=tag
    )


def _total_power(tag: str, scn: Scenario, bnorm_sq: float) -> float:
    cfg = scn.cfg
    if tag == "fd":
        return pw.power_fd(cfg.m, cfg.power)
    if tag == "fc":
        return pw.power_fc(cfg.m, cfg.n, cfg.power)
    if tag == "pc":
        return pw.power_pc(cfg.m, cfg.n, cfg.power)
    base = "la" if tag == "la" else tag.split("-")[0]
    return pw.power_surface(
        base,
        cfg.n,
        cfg.power,
        scn.rho_s[tag if tag != "la" else "la"],
        bnorm_sq=bnorm_sq,
        mode=cfg.power_mode,
    )


def run_trials(cfg: ExperimentConfig, trial_indices) -> list[TrialRecord]:
    """Run the given trial indices for one sweep point of `cfg` serially."""
    scn = build_scenario(cfg)
    gamma = cfg.gamma
    records: list[TrialRecord] = []
    for t in trial_indices:
        rng = trial_rng(cfg.base_seed, t)
        paths = ch.sample_paths(
            rng,
            cfg.l,
            cfg.angle_ranges,
            cfg.pathloss_distance_m,
            cfg.pathloss_exponent,
            cfg.wavelength_m,
        )
        real = ch.assemble_channel(paths, scn.tx, scn.rx)
        h_tx = ch.tx_response_matrix(paths, scn.tx)
        seed_id = trial_seed_id(cfg.base_seed, t)
        for tag in cfg.architectures:
            common = dict(
                architecture=tag,
                strategy=cfg.strategy if tag in SURFACE_TAGS else "",
                m=cfg.m,
                n=cfg.n,
                q=cfg.q,
                j=cfg.j,
                k=cfg.k,
                l=cfg.l,
                sweep_param=cfg.sweep_param,
                sweep_value=float("nan")
                if cfg.sweep_param == "none"
                else _sweep_value_of(cfg),
                trial_index=t,
                seed=seed_id,
            )
            try:
                prec = _design(tag, scn, real.matrix, h_tx)
                p_tot = _total_power(tag, scn, prec.bnorm_sq)
                ee = cfg.bandwidth_hz * prec.rate_bpshz / (p_tot * 1e-3)
                records.append(
                    TrialRecord(
                        ok=True,
                        rate_bpshz=prec.rate_bpshz,
                        p_tot_mw=p_tot,
                        energy_bits_per_joule=ee,
                        bnorm_sq=prec.bnorm_sq,
                        cond_t=scn.cond.get(tag, float("nan")),
                        flags=prec.flags,
                        **common,
                    )
                )
            except Exception as exc:  # failed trial: record and continue
                records.append(
                    TrialRecord(
                        ok=False,
                        rate_bpshz=float("nan"),
                        p_tot_mw=float("nan"),
                        energy_bits_per_joule=float("nan"),
                        bnorm_sq=float("nan"),
                        cond_t=scn.cond.get(tag, float("nan")),
                        flags=(f"error:{type(exc).__name__}:{exc}",),
                        **common,
                    )
                )
    return records


def _sweep_value_of(cfg: ExperimentConfig) -> float:
    attr = {"m": "m", "l": "l", "k": "k", "rr": "ring_radius_m", "rd": "feed_distance_m"}
    return float(getattr(cfg, attr[cfg.sweep_param]))


def _worker_chunk(args) -> list[TrialRecord]:
    cfg, indices = args
    return run_trials(cfg, indices)


def run_experiment(cfg: ExperimentConfig) -> list[TrialRecord]:
    """All sweep points x trials; deterministic output independent of worker count."""
    points = (
        [cfg]
        if cfg.sweep_param == "none"
        else [cfg.with_sweep_value(v) for v in cfg.sweep_values]
    )
    records: list[TrialRecord] = []
    if cfg.workers <= 1:
        for sub in points:
            records.extend(run_trials(sub, range(cfg.trials)))
    else:
        chunk = max(1, math.ceil(cfg.trials / cfg.workers))
        tasks = [
            (sub, list(range(start, min(start + chunk, cfg.trials))))
            for sub in points
            for start in range(0, cfg.trials, chunk)
        ]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for part in pool.map(_worker_chunk, tasks):
                records.extend(part)
    order = {tag: i for i, tag in enumerate(cfg.architectures)}
    records.sort(
        key=lambda r: (
            _nan_last(r.sweep_value),
            order[r.architecture],
            r.trial_index,
        )
    )
    return records


def _nan_last(x: float) -> float:
    return float("inf") if math.isnan(x) else x


def aggregate(records: list[TrialRecord]) -> list[SummaryRow]:
    """Mean and standard error per (architecture, strategy, sweep value) cell.

    Failed trials are excluded from the statistics and counted; a cell with no
    successful trial keeps NaN means rather than zeros.
    """
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        key = (r.sweep_param, _nan_last(r.sweep_value), r.architecture, r.strategy)
        groups.setdefault(key, []).append(r)

    rows: list[SummaryRow] = []
    for key in groups:
        cell = groups[key]
        ok = [r for r in cell if r.ok]
        first = cell[0]

        def mean(attr):
            if not ok:
                return float("nan")
            return float(np.mean([getattr(r, attr) for r in ok]))

        rates = np.array([r.rate_bpshz for r in ok]) if ok else np.array([])
        stderr = (
            float(np.std(rates, ddof=1) / math.sqrt(len(rates)))
            if len(rates) > 1
            else (0.0 if len(rates) == 1 else float("nan"))
        )
        rows.append(
            SummaryRow(
                architecture=first.architecture,
                strategy=first.strategy,
                m=first.m,
                n=first.n,
                q=first.q,
                j=first.j,
                k=first.k,
                l=first.l,
                sweep_param=first.sweep_param,
                sweep_value=first.sweep_value,
                trials_ok=len(ok),
                trials_failed=len(cell) - len(ok),
                mean_rate_bpshz=mean("rate_bpshz"),
                stderr_rate=stderr,
                mean_ptot_mw=mean("p_tot_mw"),
                mean_ee_bits_per_joule=mean("energy_bits_per_joule"),
                mean_bnorm_sq=mean("bnorm_sq"),
                mean_cond_t=mean("cond_t"),
            )
        )
    return rows


def run_geometry_sweep(cfg: ExperimentConfig, strategies=None) -> list[SummaryRow]:
    """Condition-number sweep over ring radius or feed distance (no channel trials)."""
    if cfg.sweep_param not in ("rr", "rd"):
        raise ValueError("geometry sweeps run over 'rr' or 'rd'")
    strategies = tuple(strategies or geo.STRATEGIES)
    rows: list[SummaryRow] = []
    for strat in strategies:
        for value in cfg.sweep_values:
            sub = replace(cfg.with_sweep_value(value), strategy=strat)
            tm = _surface_transfer(sub, 1.0)
            rows.append(
                SummaryRow(
                    architecture="surface",
                    strategy=strat,
                    m=sub.m,
                    n=sub.n,
                    q=sub.q,
                    j=sub.j,
                    k=sub.k,
                    l=sub.l,
                    sweep_param=sub.sweep_param,
                    sweep_value=float(value),
                    trials_ok=1,
                    trials_failed=0,
                    mean_rate_bpshz=float("nan"),
                    stderr_rate=float("nan"),
                    mean_ptot_mw=float("nan"),
                    mean_ee_bits_per_joule=float("nan"),
                    mean_bnorm_sq=float("nan"),
                    mean_cond_t=geo.condition_number(tm),
                )
            )
    return rows
