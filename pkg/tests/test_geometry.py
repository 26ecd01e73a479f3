import math

import numpy as np
import pytest
from scipy.integrate import quad

from surfmimo.channel import ArrayGeometry
from surfmimo.geometry import (
    ConfigurationError,
    IlluminationConfig,
    build_lens,
    build_transfer,
    build_transfer_uniform_si,
    condition_number,
    default_ring_geometry,
    discrete_spillover,
    dump_geometry_csv,
    element_positions,
    feed_gain,
    make_transfer,
    angular_extent,
    partition_surface,
    place_feeds,
    spillover_efficiency,
    subsurface_extent,
    taper_efficiency,
    _pairwise_geometry,
)

from conftest import SPACING, WAVELENGTH, geom


def si_config(m=256, n=4, rho_srf=1.0, strategy="SI"):
    r_d, r_r = default_ring_geometry(strategy, m, n, SPACING)
    return IlluminationConfig(
        strategy=strategy,
        num_feeds=n,
        surface=geom(m),
        ring_radius=r_r,
        feed_distance=r_d,
        surface_efficiency=rho_srf,
    )


class TestPartition:
    @pytest.mark.parametrize("m,n", [(256, 4), (64, 4), (100, 4), (256, 16), (16, 2)])
    def test_covers_disjointly_with_equal_sizes(self, m, n):
        blocks = partition_surface(m, n)
        assert len(blocks) == n
        allidx = np.sort(np.concatenate(blocks))
        assert np.array_equal(allidx, np.arange(m))
        assert all(len(b) == m // n for b in blocks)

    def test_grid_blocks_are_contiguous_squares(self):
        blocks = partition_surface(16, 4)
        pos = element_positions(geom(16))
        for b in blocks:
            assert np.ptp(pos[b, 1]) == pytest.approx(SPACING)
            assert np.ptp(pos[b, 2]) == pytest.approx(SPACING)

    def test_impossible_split_raises(self):
        with pytest.raises(ConfigurationError):
            partition_surface(64, 32)

    def test_feed_count_must_divide_elements(self):
        with pytest.raises(ConfigurationError):
            IlluminationConfig("SI", 3, geom(256), 0.03, 0.09)


class TestPlaceFeeds:
    def test_si_feeds_sit_over_their_subsquare_centroids(self):
        # S2 puts the ring exactly through the sub-square centroids.
        cfg = si_config()
        layout = place_feeds(cfg)
        for n, idx in enumerate(layout.partition):
            centroid = layout.element_positions[idx].mean(axis=0)
            assert np.allclose(layout.positions[n][1:], centroid[1:], atol=1e-12)
            assert math.isclose(layout.positions[n][0], cfg.feed_distance, rel_tol=1e-12)

    def test_single_feed_full_surface(self):
        cfg = IlluminationConfig("FI", 1, geom(64), 2 * SPACING, 0.1)
        layout = place_feeds(cfg)
        assert len(layout.partition) == 1 and layout.partition[0].size == 64
        direction = -layout.positions[0] / np.linalg.norm(layout.positions[0])
        assert np.allclose(layout.boresights[0], direction, atol=1e-12)

    def test_blockage_free_center_offset(self):
        cfg = si_config(strategy="BlockageFreePI", m=256, n=4)
        half = SPACING * 16 / 2
        assert np.allclose(cfg.center(), [cfg.feed_distance, half, half])

    def test_distances_positive_and_partition_valid(self):
        layout = place_feeds(si_config(m=64, n=4))
        assert np.all(layout.distances > 0)
        assert np.allclose(np.linalg.norm(layout.boresights, axis=1), 1.0)

    def test_far_field_margin_flag(self):
        assert si_config(m=256, n=4).in_far_field
        assert not si_config(m=64, n=4).in_far_field  # R_d = 4.5 wavelengths


class TestFeedGain:
    def test_table_peak_gain(self):
        assert math.isclose(feed_gain(49.0, 0.0), 100.0, rel_tol=1e-12)

    def test_zero_beyond_horizon(self):
        assert feed_gain(5.0, math.pi / 2) == 0.0
        assert feed_gain(5.0, 2.0) == 0.0

    def test_pattern_normalization_by_quadrature(self):
        # (1/4pi) * integral of G over the sphere must be 1
        for kappa in (2.0, 5.0, 49.0):
            val, _ = quad(
                lambda th: feed_gain(kappa, th) * math.sin(th) / 2, 0, math.pi / 2
            )
            assert math.isclose(val, 1.0, abs_tol=1e-6)


class TestTransferMatrix:
    def test_single_element_broadside_modulus(self):
        r = 0.25
        cfg = IlluminationConfig("FI", 1, geom(1), 0.0, r, feed_exponent=49.0)
        t = build_transfer(cfg)
        assert math.isclose(abs(t.matrix[0, 0]), 10 * WAVELENGTH / (4 * math.pi * r), rel_tol=1e-12)

    def test_si_zeroes_shielded_entries(self):
        t = make_transfer(si_config())
        for n, idx in enumerate(t.layout.partition):
            others = np.setdiff1d(np.arange(256), idx)
            assert np.all(t.matrix[others, n] == 0)
            assert np.all(np.abs(t.matrix[idx, n]) > 0)

    def test_surface_efficiency_scales_amplitude(self):
        t1 = make_transfer(si_config(rho_srf=1.0))
        t2 = make_transfer(si_config(rho_srf=0.25))
        assert np.allclose(np.abs(t2.matrix), 0.5 * np.abs(t1.matrix))

    def test_amplitude_decays_as_inverse_distance(self):
        t = build_transfer(si_config(strategy="PI"))
        gain = feed_gain(t.config.feed_exponent, t.layout.theta)
        recon = WAVELENGTH * np.sqrt(gain) / (4 * math.pi * t.layout.distances)
        assert np.allclose(np.abs(t.matrix), recon, atol=1e-15)

    def test_translation_invariance(self):
        layout = place_feeds(si_config(m=64))
        shift = np.array([0.13, -0.21, 0.07])
        r, th, ph = _pairwise_geometry(
            layout.positions, layout.boresights, layout.element_positions
        )
        r2, th2, ph2 = _pairwise_geometry(
            layout.positions + shift,
            layout.boresights,
            layout.element_positions + shift,
        )
        assert np.allclose(r, r2) and np.allclose(th, th2) and np.allclose(ph, ph2)

    def test_uniform_si_constant_modulus_and_known_level(self):
        cfg = si_config(strategy="UniformSI")
        t = build_transfer_uniform_si(cfg)
        mods = np.abs(t.matrix[t.matrix != 0])
        assert np.allclose(mods, mods[0])
        # c * 4*pi*r/lam = sqrt(2 / (1 - cos(theta0))) with tan(theta0) = 1/4
        mask = np.abs(t.matrix) > 0
        r_mean = float(np.sum(t.layout.distances * mask) / 256)
        scaled = mods[0] * 4 * math.pi * r_mean / WAVELENGTH
        assert math.isclose(scaled, 8.1844, rel_tol=1e-4)

    def test_uniform_si_requires_matching_strategy(self):
        with pytest.raises(ConfigurationError):
            build_transfer_uniform_si(si_config(strategy="SI"))
        with pytest.raises(ConfigurationError):
            build_transfer(si_config(strategy="UniformSI"))

    def test_gram_is_diagonal_for_shielded_strategies(self):
        for strategy in ("SI", "UniformSI"):
            t = make_transfer(si_config(strategy=strategy))
            gram = t.matrix.conj().T @ t.matrix
            off = gram - np.diag(np.diag(gram))
            assert np.allclose(off, 0.0, atol=1e-18)


class TestEfficiencies:
    def test_angular_extent_examples(self):
        r_d, _ = default_ring_geometry("FI", 256, 4, SPACING)
        assert math.isclose(angular_extent(256, SPACING, r_d), math.atan(0.25), rel_tol=1e-12)
        assert angular_extent(256, SPACING, 1e9) < 1e-8
        # R_d proportional to sqrt(M) keeps the extent fixed
        for m in (64, 256, 1024, 4096):
            r_d, _ = default_ring_geometry("FI", m, 4, SPACING)
            assert math.isclose(
                angular_extent(m, SPACING, r_d), math.atan(0.25), rel_tol=1e-12
            )

    def test_subsurface_extent_quarter_tangent(self):
        assert math.isclose(
            subsurface_extent(si_config()), math.atan(0.25), rel_tol=1e-12
        )

    def test_spillover_full_capture(self):
        assert spillover_efficiency(5.0, math.pi / 2) == 1.0

    def test_spillover_table_value(self):
        assert math.isclose(
            spillover_efficiency(49.0, math.atan(0.25)), 0.7803, abs_tol=5e-4
        )

    def test_spillover_monotone_in_kappa_and_extent(self):
        th = math.atan(0.25)
        assert spillover_efficiency(60.0, th) > spillover_efficiency(49.0, th)
        assert spillover_efficiency(49.0, 1.2 * th) > spillover_efficiency(49.0, th)

    def test_taper_bounded_on_grid(self):
        for kappa in (2.0, 3.0, 10.0, 49.0, 120.0):
            for theta0 in (0.05, 0.2, 0.6, 1.2, 1.5):
                val = taper_efficiency(kappa, theta0)
                assert 0 < val <= 1

    def test_taper_kappa2_limit_is_continuous(self):
        theta0 = math.pi / 4
        lim = taper_efficiency(2.0, theta0)
        for eps in (1e-4, -1e-4):
            assert math.isclose(lim, taper_efficiency(2.0 + abs(eps) if eps > 0 else 2.0, theta0), abs_tol=1e-5)
        assert math.isclose(lim, taper_efficiency(2.0 + 1e-4, theta0), abs_tol=1e-5)

    def test_taper_tends_to_one_for_small_extent(self):
        assert taper_efficiency(49.0, 1e-3) > 1 - 1e-4

    def test_taper_matches_defining_integrals(self):
        # Independent quadrature of the aperture integrals behind the closed form.
        def oracle(kappa, theta0):
            num, _ = quad(
                lambda th: math.sqrt(feed_gain(kappa, th))
                * math.sin(th)
                / math.cos(th) ** 2,
                0,
                theta0,
            )
            den, _ = quad(
                lambda th: feed_gain(kappa, th) * math.sin(th) / math.cos(th) ** 2,
                0,
                theta0,
            )
            area = 1 / math.cos(theta0) - 1
            return num**2 / (area * den)

        for kappa, theta0 in [(49.0, math.atan(0.25)), (6.0, 0.8), (3.0, 0.3)]:
            assert math.isclose(
                taper_efficiency(kappa, theta0), oracle(kappa, theta0), rel_tol=1e-7
            )


class TestConditionNumber:
    def test_uniform_si_is_exactly_one(self):
        t = make_transfer(si_config(strategy="UniformSI"))
        assert abs(condition_number(t) - 1.0) <= 1e-9

    def test_si_close_to_one_at_defaults(self):
        assert condition_number(make_transfer(si_config())) < 1.05

    def test_duplicate_feeds_give_infinity(self):
        col = np.exp(1j * np.linspace(0, 3, 16))
        assert condition_number(np.column_stack([col, col])) == math.inf

    def test_shielded_condition_equals_column_norm_ratio(self):
        t = make_transfer(si_config(m=64))
        norms = np.linalg.norm(t.matrix, axis=0)
        assert math.isclose(
            condition_number(t), norms.max() / norms.min(), rel_tol=1e-12
        )

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError):
            condition_number(np.zeros((4, 2)))


class TestDiscreteSpillover:
    def test_per_feed_fraction_below_one(self):
        rho = discrete_spillover(make_transfer(si_config()))
        assert rho.shape == (4,)
        assert np.all((rho > 0) & (rho < 1))

    def test_independent_of_surface_efficiency(self):
        a = discrete_spillover(make_transfer(si_config(rho_srf=1.0)))
        b = discrete_spillover(make_transfer(si_config(rho_srf=0.4)))
        assert np.allclose(a, b)


class TestLens:
    def test_focal_distance_and_shapes(self):
        lens = build_lens(geom(64), 16)
        assert lens.t.shape == (64, 16)
        assert lens.fixed_phase.shape == (64,)
        assert math.isclose(
            lens.focal_distance, 4 * WAVELENGTH * math.sqrt(64 / math.pi), rel_tol=1e-12
        )

    def test_fixed_phase_collimates_on_axis_feed(self):
        # The feed nearest the axis combines almost coherently at broadside.
        lens = build_lens(geom(256), 15)
        k_axis = int(np.argmin(np.abs(lens.positions[:, 1])))
        beam = lens.fixed_phase * lens.t[:, k_axis]
        coherent = np.abs(np.sum(beam)) / np.sum(np.abs(beam))
        assert coherent > 0.99

    def test_feed_sines_cover_range(self):
        lens = build_lens(geom(64), 8)
        sines = lens.positions[:, 1] / lens.focal_distance
        assert sines[0] < -0.8 and sines[-1] > 0.8
        assert np.all(np.diff(sines) > 0)


def test_geometry_dump_csv(tmp_path):
    t = make_transfer(si_config(m=16, n=4))
    out = tmp_path / "geom.csv"
    dump_geometry_csv(t, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "n,m,r_m,theta_rad,abs_t"
    assert len(lines) == 1 + 16 * 4
