import numpy as np
import pytest

from leoisac.channel import build_radar_link
from leoisac.geometry import UpaSpec, steering_vector
from leoisac.rates import TRANSMISSION_MODES
from leoisac.waveform import (
    delay_doppler_extend,
    doppler_phases,
    generate_streams,
    orthonormal_streams,
    receive_combine,
    synthesize_echo,
)

MODE = TRANSMISSION_MODES["rsma-isac-sic"]


def table_link():
    sat = np.array([30e3, -30e3, 340e3])
    tar = np.array([3e3, 3e3, 5e3])
    return build_radar_link(sat, tar, np.zeros(3), 6, 3, 2e9, 100.0)


class TestGenerateStreams:
    def test_row_powers_near_unity(self):
        frame = generate_streams(4, 4096, seed=1, mode=MODE)
        powers = np.mean(np.abs(frame.S) ** 2, axis=1)
        assert np.all((powers > 0.98) & (powers < 1.02))

    def test_gram_close_to_identity(self):
        frame = generate_streams(4, 4096, seed=2, mode=MODE)
        gram = frame.S @ frame.S.conj().T / 4096
        assert np.linalg.norm(gram - np.eye(6), "fro") <= 0.15

    def test_sdma_zeroes_common_row(self):
        frame = generate_streams(3, 256, seed=3, mode=TRANSMISSION_MODES["sdma-isac-sic"])
        assert np.all(frame.S[3] == 0.0)
        assert np.all(frame.S[4] != 0.0)

    def test_radar_row_unit_modulus_and_deterministic(self):
        f1 = generate_streams(2, 128, seed=5, mode=MODE)
        f2 = generate_streams(2, 128, seed=5, mode=MODE)
        assert np.array_equal(f1.S, f2.S)
        assert np.allclose(np.abs(f1.S[3]), 1.0)

    def test_short_frame_rejected(self):
        with pytest.raises(ValueError):
            generate_streams(4, 5, seed=1, mode=MODE)

    def test_orthonormal_variant_exact(self):
        frame = orthonormal_streams(4, 512, seed=7)
        gram = frame.S @ frame.S.conj().T
        assert np.allclose(gram, 512 * np.eye(6), atol=1e-9)


class TestSynthesizeEcho:
    def test_pure_shift_column_identity(self):
        link = table_link()
        tx, rx = UpaSpec(4, 4), UpaSpec(8, 8)
        X = generate_streams(2, 64, seed=1, mode=MODE)
        P = np.eye(16, 4, dtype=complex)
        Xm = P @ X.S
        tau = 7
        echo = synthesize_echo(Xm, link, tx, rx, tau, 0.0, 1e-7, 32, 0.0, seed=0)
        a = steering_vector(tx, link.aod)
        b = steering_vector(rx, link.aoa)
        expect = link.alpha * b * (np.conj(a) @ Xm[:, 0])
        assert np.allclose(echo.Y[:, tau], expect, rtol=1e-12)
        assert np.allclose(echo.Y[:, :tau], 0.0)

    def test_doppler_column_phase(self):
        link = table_link()
        tx, rx = UpaSpec(4, 4), UpaSpec(8, 8)
        Xm = (np.ones((16, 8)) + 0j)
        v, ts, tau = 11e3, 1e-7, 3
        echo = synthesize_echo(Xm, link, tx, rx, tau, v, ts, 16, 0.0, seed=0)
        base = synthesize_echo(Xm, link, tx, rx, tau, 0.0, ts, 16, 0.0, seed=0)
        # column l+tau carries phase exp(j 2 pi v l T_s), l = 1-based sample index
        for ell in (1, 5, 8):
            ratio = echo.Y[:, ell - 1 + tau] / base.Y[:, ell - 1 + tau]
            assert np.allclose(ratio, np.exp(2j * np.pi * v * ts * ell), rtol=1e-12)

    def test_energy_identity(self, rng):
        link = table_link()
        tx, rx = UpaSpec(4, 4), UpaSpec(8, 8)
        Xm = rng.standard_normal((16, 100)) + 1j * rng.standard_normal((16, 100))
        echo = synthesize_echo(Xm, link, tx, rx, 9, 13e3, 1e-7, 32, 0.0, seed=0)
        a = steering_vector(tx, link.aod)
        b = steering_vector(rx, link.aoa)
        expect = abs(link.alpha) ** 2 * np.linalg.norm(b) ** 2 * np.linalg.norm(np.conj(a) @ Xm) ** 2
        assert np.linalg.norm(echo.Y, "fro") ** 2 == pytest.approx(expect, rel=1e-12)

    def test_shift_composition(self, rng):
        X = rng.standard_normal((4, 32)) + 1j * rng.standard_normal((4, 32))
        once = delay_doppler_extend(X, 0.0, 1e-7, 5, 40)
        twice = delay_doppler_extend(once[:, : 32 + 20], 0.0, 1e-7, 6, 20)
        direct = delay_doppler_extend(X, 0.0, 1e-7, 11, 40)
        assert np.allclose(twice[:, : 32 + 20], direct[:, : 32 + 20])

    def test_doppler_preserves_column_norms(self, rng):
        X = rng.standard_normal((4, 32)) + 1j * rng.standard_normal((4, 32))
        shifted = delay_doppler_extend(X, 21e3, 1e-7, 1, 8)
        assert np.allclose(
            np.linalg.norm(shifted[:, 1:33], axis=0), np.linalg.norm(X, axis=0)
        )

    def test_delay_bounds_enforced(self, rng):
        X = rng.standard_normal((4, 16)) + 0j
        with pytest.raises(ValueError):
            delay_doppler_extend(X, 0.0, 1e-7, 0, 8)
        with pytest.raises(ValueError):
            delay_doppler_extend(X, 0.0, 1e-7, 9, 8)

    def test_seeded_determinism(self):
        link = table_link()
        tx, rx = UpaSpec(4, 4), UpaSpec(8, 8)
        Xm = np.ones((16, 8)) + 0j
        e1 = synthesize_echo(Xm, link, tx, rx, 2, 0.0, 1e-7, 8, 1e-15, seed=11)
        e2 = synthesize_echo(Xm, link, tx, rx, 2, 0.0, 1e-7, 8, 1e-15, seed=11)
        assert np.array_equal(e1.Y, e2.Y)


class TestReceiveCombine:
    def test_coherent_combining(self, rng):
        link = table_link()
        tx, rx = UpaSpec(4, 4), UpaSpec(8, 8)
        Xm = rng.standard_normal((16, 32)) + 1j * rng.standard_normal((16, 32))
        echo = synthesize_echo(Xm, link, tx, rx, 4, 0.0, 1e-7, 8, 0.0, seed=0)
        b = steering_vector(rx, link.aoa)
        a = steering_vector(tx, link.aod)
        combined = receive_combine(echo.Y, b)
        expect = link.alpha * np.linalg.norm(b) ** 2 * delay_doppler_extend(
            np.atleast_2d(np.conj(a) @ Xm), 0.0, 1e-7, 4, 8
        )[0]
        assert np.allclose(combined, expect, rtol=1e-12)

    def test_orthogonal_combiner_suppresses_signal(self, rng):
        link = table_link()
        tx, rx = UpaSpec(4, 4), UpaSpec(8, 8)
        Xm = rng.standard_normal((16, 32)) + 1j * rng.standard_normal((16, 32))
        echo = synthesize_echo(Xm, link, tx, rx, 4, 0.0, 1e-7, 8, 0.0, seed=0)
        b = steering_vector(rx, link.aoa)
        q = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        q -= (np.vdot(b, q) / np.vdot(b, b)) * b
        combined = receive_combine(echo.Y, q)
        assert np.linalg.norm(combined) <= 1e-10 * np.linalg.norm(echo.Y)

    def test_combining_gain_matches_array_size(self, rng):
        # matched combining should buy ~10 log10 N_rx of SNR over one element
        link = table_link()
        tx, rx = UpaSpec(4, 4), UpaSpec(8, 8)
        Xm = rng.standard_normal((16, 256)) + 1j * rng.standard_normal((16, 256))
        sigma2 = 1e-16
        snr_comb, snr_single = [], []
        b = steering_vector(rx, link.aoa)
        for seed in range(40):
            noisy = synthesize_echo(Xm, link, tx, rx, 4, 0.0, 1e-7, 8, sigma2, seed=seed)
            clean = synthesize_echo(Xm, link, tx, rx, 4, 0.0, 1e-7, 8, 0.0, seed=seed)
            comb_sig = receive_combine(clean.Y, b)
            comb_noise = receive_combine(noisy.Y - clean.Y, b)
            snr_comb.append(
                np.linalg.norm(comb_sig) ** 2 / np.linalg.norm(comb_noise) ** 2
            )
            snr_single.append(
                np.linalg.norm(clean.Y[0]) ** 2 / np.linalg.norm(noisy.Y[0] - clean.Y[0]) ** 2
            )
        gain_db = 10 * np.log10(np.mean(snr_comb) / np.mean(snr_single))
        assert abs(gain_db - 10 * np.log10(64)) < 1.5

    def test_zero_combiner_rejected(self):
        with pytest.raises(ValueError):
            receive_combine(np.ones((4, 8), dtype=complex), np.zeros(4, dtype=complex))
