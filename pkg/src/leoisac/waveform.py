"""Symbol-frame generation and echo synthesis with delay and Doppler.

A frame stacks the K private streams, the common stream, and the radar
sequence as rows of an (K+2) x L matrix multiplied by the precoder.  The
echo applies per-sample Doppler phases, right-shifts the frame by an integer
number of samples inside a window of length L + tau_max, and adds white
receiver noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .channel import RadarLink
from .geometry import UpaSpec, steering_vector
from .rates import ModeConfig


@dataclass(frozen=True)
class SymbolFrame:
    """Stacked streams, rows ordered [s_1 .. s_K, s_common, s_radar]."""

    S: NDArray[np.complex128]
    seed: int

    @property
    def num_users(self) -> int:
        return self.S.shape[0] - 2

    @property
    def length(self) -> int:
        return self.S.shape[1]


@dataclass(frozen=True)
class EchoFrame:
    """Received radar frame plus the ground truth used by tests."""

    Y: NDArray[np.complex128]
    tau_tar: int
    doppler_hz: float
    tau_max: int

    @property
    def n_rx(self) -> int:
        return self.Y.shape[0]


def generate_streams(K: int, L: int, seed: int, mode: ModeConfig) -> SymbolFrame:
    """Draw one frame of transmit streams.

    Communication streams are i.i.d. unit-power circular Gaussian; the radar
    sequence is a deterministic unit-modulus pseudo-random phase sequence
    from the same seed.  Streams disabled by the mode are zero rows.
    """
    if L < K + 2:
        raise ValueError("frame length must be at least K+2")
    rng = np.random.default_rng(seed)
    S = (rng.standard_normal((K + 2, L)) + 1j * rng.standard_normal((K + 2, L))) / np.sqrt(2.0)
    S[K + 1] = np.exp(2j * np.pi * rng.random(L))
    if not mode.has_common:
        S[K] = 0.0
    if not mode.has_radar_stream:
        S[K + 1] = 0.0
    return SymbolFrame(S=S, seed=seed)


def orthonormal_streams(K: int, L: int, seed: int) -> SymbolFrame:
    """Frame with exactly orthogonal unit-power rows (S S^H = L I).

    Removes the finite-frame correlation noise; used when a result that only
    holds for asymptotically long frames must be checked at finite L.
    """
    if L < K + 2:
        raise ValueError("frame length must be at least K+2")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((L, K + 2)) + 1j * rng.standard_normal((L, K + 2))
    Q, _ = np.linalg.qr(G)
    return SymbolFrame(S=np.sqrt(L) * Q.T.conj(), seed=seed)


def doppler_phases(L: int, doppler_hz: float, t_s: float) -> NDArray[np.complex128]:
    """Diagonal of the Doppler matrix: exp(j 2 pi v l T_s) for l = 1..L."""
    return np.exp(2j * np.pi * doppler_hz * t_s * np.arange(1, L + 1))


def delay_doppler_extend(
    X: NDArray[np.complex128],
    doppler_hz: float,
    t_s: float,
    tau: int,
    tau_max: int,
) -> NDArray[np.complex128]:
    """Doppler-shift a frame, zero-pad to L + tau_max, and delay by tau samples."""
    n, L = X.shape
    if not 1 <= tau <= tau_max:
        raise ValueError(f"delay {tau} outside 1..{tau_max}")
    out = np.zeros((n, L + tau_max), dtype=complex)
    out[:, tau : tau + L] = X * doppler_phases(L, doppler_hz, t_s)
    return out


def synthesize_echo(
    X: NDArray[np.complex128],
    link: RadarLink,
    tx_upa: UpaSpec,
    rx_upa: UpaSpec,
    tau_tar: int,
    doppler_hz: float,
    t_s: float,
    tau_max: int,
    sigma_r2: float,
    seed: int,
) -> EchoFrame:
    """Received echo of a transmit frame off a single point target.

    Y = alpha * b(aoa) a(aod)^H Xtilde + Z with Xtilde the Doppler-shifted,
    delayed frame and Z i.i.d. circular Gaussian of variance sigma_r2.
    """
    if abs(doppler_hz) * t_s >= 0.5:
        raise ValueError("Doppler exceeds half the sampling rate")
    a = steering_vector(tx_upa, link.aod)
    b = steering_vector(rx_upa, link.aoa)
    xt = delay_doppler_extend(np.atleast_2d(np.conj(a) @ X), doppler_hz, t_s, tau_tar, tau_max)
    Y = link.alpha * np.outer(b, xt[0])
    if sigma_r2 > 0:
        rng = np.random.default_rng(seed)
        shape = Y.shape
        Y = Y + np.sqrt(sigma_r2 / 2.0) * (
            rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        )
    return EchoFrame(Y=Y, tau_tar=tau_tar, doppler_hz=doppler_hz, tau_max=tau_max)


def receive_combine(
    Y: NDArray[np.complex128], b_hat: NDArray[np.complex128]
) -> NDArray[np.complex128]:
    """Project the received frame on a receive direction: b_hat^H Y."""
    nb = np.linalg.norm(b_hat)
    if nb == 0:
        raise ValueError("combining vector must be nonzero")
    return np.conj(b_hat) @ Y
