import time

import numpy as np
import pytest

from leoisac.crb import (
    CrbContext,
    crb_pair,
    crb_trace_requirement,
    fim,
    numeric_fim_oracle,
)
from leoisac.geometry import UpaSpec, steering_derivatives, steering_vector
from leoisac.rates import PrecoderMatrix
from leoisac.waveform import doppler_phases, orthonormal_streams

from conftest import random_interior_angle


def random_scene(rng, K=3, n_tx=16, n_rx=(8, 8), L=512):
    tx = UpaSpec(4, 4)
    rx = UpaSpec(*n_rx)
    aod = random_interior_angle(rng)
    aoa = random_interior_angle(rng, phi_lo=0.2, phi_hi=1.3)
    a_tar = steering_vector(tx, aod)
    db_t, db_f = steering_derivatives(rx, aoa)
    ctx = CrbContext(
        alpha2=float(rng.uniform(1e-22, 1e-20)),
        sigma_r2=2.07e-14,
        num_samples=L,
        a_tar=a_tar,
        db_theta=db_t,
        db_phi=db_f,
    )
    P = rng.standard_normal((n_tx, K + 2)) + 1j * rng.standard_normal((n_tx, K + 2))
    return ctx, PrecoderMatrix(P, K), rx, aoa


class TestFim:
    def test_zero_precoder_gives_zero_information(self, rng):
        ctx, P, _, _ = random_scene(rng)
        zero = PrecoderMatrix(np.zeros_like(P.matrix), P.num_users)
        assert np.all(fim(ctx, zero) == 0.0)

    def test_power_scaling_is_linear(self, rng):
        ctx, P, _, _ = random_scene(rng)
        doubled = PrecoderMatrix(np.sqrt(2.0) * P.matrix, P.num_users)
        assert np.allclose(fim(ctx, doubled), 2.0 * fim(ctx, P), rtol=1e-12)

    def test_psd_and_symmetric(self, rng):
        for _ in range(5):
            ctx, P, _, _ = random_scene(rng)
            F = fim(ctx, P)
            assert F[0, 1] == F[1, 0]
            assert np.all(np.linalg.eigvalsh(F) >= -1e-9 * np.abs(F).max())

    def test_matches_numeric_oracle_on_random_scenes(self, rng):
        t0 = time.time()
        for _ in range(20):
            ctx, P, rx, aoa = random_scene(rng)
            S = orthonormal_streams(P.num_users, ctx.num_samples, seed=int(rng.integers(1 << 31)))
            X = P.matrix @ S.S
            F = fim(ctx, P)
            Fn = numeric_fim_oracle(rx, aoa, ctx.alpha2, ctx.sigma_r2, ctx.a_tar, X)
            assert np.max(np.abs(F - Fn)) <= 1e-5 * np.max(np.abs(F))
        assert time.time() - t0 < 60.0

    def test_oracle_symmetry(self, rng):
        ctx, P, rx, aoa = random_scene(rng)
        S = orthonormal_streams(P.num_users, ctx.num_samples, seed=9)
        Fn = numeric_fim_oracle(rx, aoa, ctx.alpha2, ctx.sigma_r2, ctx.a_tar, P.matrix @ S.S)
        assert Fn[0, 1] == pytest.approx(Fn[1, 0], rel=1e-12)

    def test_oracle_invariant_to_doppler(self, rng):
        # a unitary per-sample phase leaves the information matrix unchanged
        ctx, P, rx, aoa = random_scene(rng)
        S = orthonormal_streams(P.num_users, ctx.num_samples, seed=10)
        X = P.matrix @ S.S
        Xv = X * doppler_phases(X.shape[1], 17e3, 1e-7)
        F1 = numeric_fim_oracle(rx, aoa, ctx.alpha2, ctx.sigma_r2, ctx.a_tar, X)
        F2 = numeric_fim_oracle(rx, aoa, ctx.alpha2, ctx.sigma_r2, ctx.a_tar, Xv)
        assert np.allclose(F1, F2, rtol=1e-9)


class TestCrbPair:
    def test_equals_diagonal_of_inverse(self, rng):
        for _ in range(10):
            ctx, P, _, _ = random_scene(rng)
            crb_t, crb_f = crb_pair(ctx, P)
            inv = np.linalg.inv(fim(ctx, P))
            assert abs(crb_t - inv[0, 0]) <= 1e-10 * inv[0, 0]
            assert abs(crb_f - inv[1, 1]) <= 1e-10 * inv[1, 1]

    def test_doubling_frames_halves_bounds(self, rng):
        ctx, P, _, _ = random_scene(rng)
        ctx2 = CrbContext(
            alpha2=ctx.alpha2,
            sigma_r2=ctx.sigma_r2,
            num_samples=2 * ctx.num_samples,
            a_tar=ctx.a_tar,
            db_theta=ctx.db_theta,
            db_phi=ctx.db_phi,
        )
        c1 = crb_pair(ctx, P)
        c2 = crb_pair(ctx2, P)
        assert c2[0] == pytest.approx(c1[0] / 2, rel=1e-12)
        assert c2[1] == pytest.approx(c1[1] / 2, rel=1e-12)

    def test_more_target_gain_lowers_bounds(self, rng):
        ctx, P, _, _ = random_scene(rng)
        boosted = PrecoderMatrix(
            np.concatenate([P.matrix[:, :-1], 3.0 * ctx.a_tar[:, None]], axis=1), P.num_users
        )
        assert crb_pair(ctx, boosted)[0] < crb_pair(ctx, P)[0]
        assert crb_pair(ctx, boosted)[1] < crb_pair(ctx, P)[1]

    def test_unidentifiable_raises(self, rng):
        ctx, P, _, _ = random_scene(rng)
        # precoder orthogonal to the target response: no transmit gain
        zero = PrecoderMatrix(np.zeros_like(P.matrix), P.num_users)
        with pytest.raises(ValueError, match="unidentifiable"):
            crb_pair(ctx, zero)

    def test_threshold_requirement_equivalence(self, rng):
        # gain at exactly the required level puts both bounds at or below
        # their thresholds, with the binding one at equality
        ctx, P, _, _ = random_scene(rng)
        th = (2e-4, 3e-4)
        need = crb_trace_requirement(ctx, *th)
        gain = float(np.sum(np.abs(np.conj(P.matrix.T) @ ctx.a_tar) ** 2))
        scaled = PrecoderMatrix(P.matrix * np.sqrt(need / gain), P.num_users)
        crb_t, crb_f = crb_pair(ctx, scaled)
        assert crb_t <= th[0] * (1 + 1e-9) and crb_f <= th[1] * (1 + 1e-9)
        assert np.isclose(min(th[0] / crb_t, th[1] / crb_f), 1.0, rtol=1e-9)
