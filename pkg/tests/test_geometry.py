import numpy as np
import pytest

from leoisac.geometry import (
    AnglePair,
    UpaSpec,
    angles_from_positions,
    aoa_unit_vector,
    bistatic_angle,
    invert_bistatic_ellipsoid,
    steering_derivatives,
    steering_vector,
)

from conftest import random_interior_angle


def element_phase_oracle(upa, ang, f_c=2e9):
    """Per-element phase delays built directly from the element delay model."""
    out = np.empty(upa.nx * upa.ny, dtype=complex)
    for nx in range(upa.nx):
        for ny in range(upa.ny):
            dtau = (
                nx * np.sin(ang.phi) * np.cos(ang.theta)
                + ny * np.sin(ang.phi) * np.sin(ang.theta)
            ) / (2.0 * f_c)
            out[nx * upa.ny + ny] = np.exp(-2j * np.pi * f_c * dtau)
    return out


class TestSteeringVector:
    def test_boresight_is_all_ones(self):
        a = steering_vector(UpaSpec(2, 2), AnglePair(0.0, 0.0))
        assert np.allclose(a, np.ones(4))

    def test_1x2_endfire(self):
        a = steering_vector(UpaSpec(1, 2), AnglePair(np.pi / 2, np.pi / 2))
        assert np.allclose(a, [1.0, -1.0])

    def test_matches_element_delay_oracle(self, rng):
        upa = UpaSpec(4, 4)
        for _ in range(20):
            ang = random_interior_angle(rng)
            a = steering_vector(upa, ang)
            assert np.allclose(a, element_phase_oracle(upa, ang), atol=1e-12)

    def test_unit_modulus_and_norm(self, rng):
        upa = UpaSpec(3, 5)
        for _ in range(10):
            a = steering_vector(upa, random_interior_angle(rng))
            assert np.allclose(np.abs(a), 1.0)
            assert np.isclose(np.linalg.norm(a) ** 2, upa.size)

    def test_kronecker_identity(self, rng):
        upa = UpaSpec(3, 4)
        ang = random_interior_angle(rng)
        u = np.sin(ang.phi) * np.cos(ang.theta)
        v = np.sin(ang.phi) * np.sin(ang.theta)
        ax = np.exp(-1j * np.pi * u * np.arange(3))
        ay = np.exp(-1j * np.pi * v * np.arange(4))
        assert np.array_equal(steering_vector(upa, ang), np.kron(ax, ay))


class TestSteeringDerivatives:
    def test_zero_phi_kills_theta_derivative(self):
        dbt, _ = steering_derivatives(UpaSpec(4, 4), AnglePair(0.3, 0.0))
        assert np.allclose(dbt, 0.0)

    def test_single_element_derivatives_vanish(self):
        dbt, dbf = steering_derivatives(UpaSpec(1, 1), AnglePair(0.4, 0.6))
        assert np.allclose(dbt, [0.0]) and np.allclose(dbf, [0.0])

    def test_matches_central_differences(self, rng):
        upa = UpaSpec(4, 4)
        h = 1e-6
        for _ in range(20):
            ang = random_interior_angle(rng)
            dbt, dbf = steering_derivatives(upa, ang)
            fd_t = (
                steering_vector(upa, AnglePair(ang.theta + h, ang.phi))
                - steering_vector(upa, AnglePair(ang.theta - h, ang.phi))
            ) / (2 * h)
            fd_f = (
                steering_vector(upa, AnglePair(ang.theta, ang.phi + h))
                - steering_vector(upa, AnglePair(ang.theta, ang.phi - h))
            ) / (2 * h)
            assert np.linalg.norm(dbt - fd_t) <= 1e-6 * max(np.linalg.norm(fd_t), 1.0)
            assert np.linalg.norm(dbf - fd_f) <= 1e-6 * np.linalg.norm(fd_f)


class TestAnglesFromPositions:
    def test_reference_geometry(self, table_scene_m):
        sat, tar, _ = table_scene_m
        ang = angles_from_positions(sat, tar, "satellite")
        # frozen: arccos(335/sqrt(114043)) and arctan(33/-27)+pi
        assert ang.phi == pytest.approx(0.126596967013474, abs=1e-12)
        assert ang.theta == pytest.approx(2.256525837701183, abs=1e-12)

    def test_nadir_target(self):
        ang = angles_from_positions(
            np.array([10.0, 5.0, 100.0]), np.array([10.0, 5.0, 0.0]), "satellite"
        )
        assert ang.phi == 0.0 and ang.theta == 0.0

    def test_azimuth_boundary_cases(self):
        sat = np.array([0.0, 0.0, 100.0])
        north = angles_from_positions(sat, np.array([0.0, 7.0, 0.0]), "satellite")
        south = angles_from_positions(sat, np.array([0.0, -7.0, 0.0]), "satellite")
        assert north.theta == pytest.approx(np.pi / 2)
        assert south.theta == pytest.approx(-np.pi / 2)
        west_up = angles_from_positions(sat, np.array([-7.0, 0.0, 0.0]), "satellite")
        assert west_up.theta == pytest.approx(np.pi)

    def test_receiver_frame_mirrors_satellite(self, rng):
        # same horizontal offset seen from below mirrors the off-nadir angle
        for _ in range(10):
            dx, dy = rng.uniform(-5, 5, 2)
            dz = rng.uniform(1, 10)
            up = angles_from_positions(
                np.zeros(3), np.array([dx, dy, dz]), "receiver"
            )
            down = angles_from_positions(
                np.array([0.0, 0.0, dz]), np.array([dx, dy, 0.0]), "satellite"
            )
            assert up.phi == pytest.approx(down.phi)
            assert up.theta == pytest.approx(down.theta)

    def test_degenerate_raises(self):
        p = np.array([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            angles_from_positions(p, p, "satellite")

    def test_steering_consistency_with_unit_vector(self, rng):
        # the receiver-frame angle pair regenerates the geometric direction
        for _ in range(10):
            tar = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(1, 10)])
            ang = angles_from_positions(np.zeros(3), tar, "receiver")
            assert np.allclose(aoa_unit_vector(ang), tar / np.linalg.norm(tar))


class TestBistaticAngle:
    def test_opposite_rays(self):
        beta = bistatic_angle(
            np.array([0.0, 0.0, 340e3]), np.array([0.0, 0.0, 5e3]), np.zeros(3)
        )
        assert beta == pytest.approx(np.pi)

    def test_orthogonal_rays(self):
        beta = bistatic_angle(
            np.array([0.0, 10.0, 0.0]), np.zeros(3), np.array([10.0, 0.0, 0.0])
        )
        assert beta == pytest.approx(np.pi / 2)

    def test_law_of_cosines_oracle(self, table_scene_m):
        sat, tar, rx = table_scene_m
        r_tx = np.linalg.norm(tar - sat)
        r_rx = np.linalg.norm(tar - rx)
        r_los = np.linalg.norm(sat - rx)
        expected = np.arccos((r_tx**2 + r_rx**2 - r_los**2) / (2 * r_tx * r_rx))
        assert bistatic_angle(sat, tar, rx) == pytest.approx(expected, rel=1e-12)

    def test_symmetric_in_endpoints(self, table_scene_m):
        sat, tar, rx = table_scene_m
        assert bistatic_angle(sat, tar, rx) == bistatic_angle(rx, tar, sat)

    def test_coincident_raises(self):
        with pytest.raises(ValueError):
            bistatic_angle(np.zeros(3), np.zeros(3), np.ones(3))


class TestEllipsoidInversion:
    def test_reference_round_trip(self, table_scene_m):
        sat, tar, rx = table_scene_m
        aoa = angles_from_positions(rx, tar, "receiver")
        brange = np.linalg.norm(tar) + np.linalg.norm(tar - sat)
        pos, r_rx = invert_bistatic_ellipsoid(sat, aoa_unit_vector(aoa), brange)
        assert np.linalg.norm(pos - tar) <= 1e-9 * np.linalg.norm(tar)
        assert r_rx + np.linalg.norm(pos - sat) == pytest.approx(brange, rel=1e-12)

    def test_inside_baseline_raises(self, table_scene_m):
        sat, _, _ = table_scene_m
        d = np.array([0.0, 0.0, 1.0])
        with pytest.raises(ValueError, match="inside-baseline"):
            invert_bistatic_ellipsoid(sat, d, np.linalg.norm(sat))

    def test_along_baseline_closed_form(self):
        # ray pointing straight at the satellite: r_rx = (range + r_los) / 2
        sat = np.array([0.0, 0.0, 300e3])
        d = np.array([0.0, 0.0, 1.0])
        r_los = 300e3
        brange = 420e3
        _, r_rx = invert_bistatic_ellipsoid(sat, d, brange)
        assert r_rx == pytest.approx((brange + r_los) / 2, rel=1e-12)

    def test_random_geometry_round_trip(self, rng):
        sat = np.array([30e3, -30e3, 340e3])
        failures = 0
        for _ in range(1000):
            tar = np.array(
                [rng.uniform(-50e3, 50e3), rng.uniform(-50e3, 50e3), rng.uniform(0.5e3, 40e3)]
            )
            aoa = angles_from_positions(np.zeros(3), tar, "receiver")
            brange = np.linalg.norm(tar) + np.linalg.norm(tar - sat)
            pos, _ = invert_bistatic_ellipsoid(sat, aoa_unit_vector(aoa), brange)
            if np.linalg.norm(pos - tar) > 1e-9 * np.linalg.norm(tar):
                failures += 1
            aod_true = angles_from_positions(sat, tar, "satellite")
            aod_back = angles_from_positions(sat, pos, "satellite")
            assert abs(aod_back.theta - aod_true.theta) <= 1e-9
            assert abs(aod_back.phi - aod_true.phi) <= 1e-9
        assert failures == 0

    def test_nonunit_direction_rejected(self):
        with pytest.raises(ValueError, match="unit"):
            invert_bistatic_ellipsoid(np.array([0.0, 0.0, 1e5]), np.array([0.0, 0.0, 2.0]), 3e5)
