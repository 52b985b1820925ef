"""Rate expressions for the 1-layer rate-splitting dual-functional downlink.

Rates are spectral efficiencies in bits/s/Hz; multiply by bandwidth only when
reporting.  The precoder carries K private columns, one common column, and
one radar-sequence column, in that order.  Disabled streams are zero columns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

RSMA = "rsma"
SDMA = "sdma"


@dataclass(frozen=True)
class ModeConfig:
    """One cell of the transmission-mode matrix.

    SDMA disables the common stream; ``radar_sequence`` controls the
    dedicated sensing column; ``sic_of_radar`` decides whether users cancel
    it before decoding; ``comm_only`` drops both the sensing column and the
    estimation-accuracy constraint.
    """

    multiple_access: str = RSMA
    radar_sequence: bool = True
    sic_of_radar: bool = True
    comm_only: bool = False

    def __post_init__(self) -> None:
        if self.multiple_access not in (RSMA, SDMA):
            raise ValueError(f"unknown multiple access scheme {self.multiple_access!r}")
        if self.comm_only and self.radar_sequence:
            raise ValueError("comm-only mode carries no radar sequence")

    @property
    def delta_sic(self) -> float:
        return 0.0 if self.sic_of_radar else 1.0

    @property
    def has_common(self) -> bool:
        return self.multiple_access == RSMA

    @property
    def has_radar_stream(self) -> bool:
        return self.radar_sequence and not self.comm_only


#: The eight mode cells, keyed by CLI-facing names.
TRANSMISSION_MODES: dict[str, ModeConfig] = {
    "rsma-isac-sic": ModeConfig(RSMA, radar_sequence=True, sic_of_radar=True),
    "rsma-isac-nosic": ModeConfig(RSMA, radar_sequence=True, sic_of_radar=False),
    "rsma-isac-noseq": ModeConfig(RSMA, radar_sequence=False, sic_of_radar=True),
    "rsma-comm": ModeConfig(RSMA, radar_sequence=False, sic_of_radar=True, comm_only=True),
    "sdma-isac-sic": ModeConfig(SDMA, radar_sequence=True, sic_of_radar=True),
    "sdma-isac-nosic": ModeConfig(SDMA, radar_sequence=True, sic_of_radar=False),
    "sdma-isac-noseq": ModeConfig(SDMA, radar_sequence=False, sic_of_radar=True),
    "sdma-comm": ModeConfig(SDMA, radar_sequence=False, sic_of_radar=True, comm_only=True),
}


@dataclass(frozen=True)
class PrecoderMatrix:
    """N_tx x (K+2) precoder, columns [p_1 .. p_K, p_common, p_radar]."""

    matrix: NDArray[np.complex128]
    num_users: int

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2 or self.matrix.shape[1] != self.num_users + 2:
            raise ValueError("precoder must have K+2 columns")

    @property
    def n_tx(self) -> int:
        return self.matrix.shape[0]

    @property
    def private(self) -> NDArray[np.complex128]:
        return self.matrix[:, : self.num_users]

    @property
    def common(self) -> NDArray[np.complex128]:
        return self.matrix[:, self.num_users]

    @property
    def radar(self) -> NDArray[np.complex128]:
        return self.matrix[:, self.num_users + 1]

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.matrix) ** 2))


@dataclass(frozen=True)
class CommonRateAlloc:
    """Per-user shares of the jointly decoded common rate."""

    shares: NDArray[np.float64]

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.shares) < -1e-12):
            raise ValueError("common rate shares must be nonnegative")

    @property
    def total(self) -> float:
        return float(np.sum(self.shares))


def _stream_powers(channels: NDArray[np.complex128], P: PrecoderMatrix) -> NDArray[np.float64]:
    """|h_k^H p_j|^2 for every user row and precoder column."""
    return np.abs(np.conj(channels) @ P.matrix) ** 2


def instantaneous_rates(
    channels: NDArray[np.complex128],
    P: PrecoderMatrix,
    delta_sic: float,
    sigma_c2: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Common and private rates for one fading realization.

    ``channels`` is (K, N_tx) with row k the user's channel vector h_k.  The
    common stream is decoded first against all private streams plus the
    (possibly cancelled) radar sequence; each private stream then sees the
    other private streams plus the radar residue.
    """
    K = P.num_users
    y = _stream_powers(channels, P)
    priv = y[:, :K]
    radar = delta_sic * y[:, K + 1]
    base = priv.sum(axis=1) + radar + sigma_c2
    r_common = np.log2(1.0 + y[:, K] / base)
    own = priv[np.arange(K), np.arange(K)]
    r_private = np.log2(1.0 + own / (base - own))
    return r_common, r_private


def ergodic_bounds(
    a_users: NDArray[np.complex128],
    rhos: NDArray[np.float64],
    P: PrecoderMatrix,
    delta_sic: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Upper bounds on the ergodic common/private rates.

    Built from the array responses a_k and the noise-to-average-channel-power
    ratios rho_k only, so they are independent of the fading draw.
    """
    y = _stream_powers(a_users, P)
    K = P.num_users
    priv = y[:, :K]
    radar = delta_sic * y[:, K + 1]
    base = priv.sum(axis=1) + radar + np.asarray(rhos, dtype=float)
    r_common = np.log2(1.0 + y[:, K] / base)
    own = priv[np.arange(K), np.arange(K)]
    r_private = np.log2(1.0 + own / (base - own))
    return r_common, r_private


def min_total_rate(
    bounds: tuple[NDArray[np.float64], NDArray[np.float64]],
    alloc: CommonRateAlloc,
) -> float:
    """Worst-user total rate min_k (private_k + share_k).

    The allocation must fit inside the common rate decodable by every user.
    """
    r_common, r_private = bounds
    if alloc.total > float(np.min(r_common)) + 1e-9:
        raise ValueError("common rate allocation exceeds the decodable common rate")
    return float(np.min(np.asarray(r_private) + np.asarray(alloc.shares)))


def beampatterns(
    P: PrecoderMatrix,
    upa,
    theta_grid: NDArray[np.float64],
    phi_grid: NDArray[np.float64],
) -> dict[str, NDArray[np.float64]]:
    """Normalized transmit beampatterns over a (theta, phi) grid.

    Returns fields of shape (len(theta_grid), len(phi_grid)) for the radar
    sequence, the common stream, and the summed private streams, each
    normalized by the squared Frobenius norm of the precoder.
    """
    from .geometry import AnglePair, steering_vector

    theta_grid = np.asarray(theta_grid, dtype=float)
    phi_grid = np.asarray(phi_grid, dtype=float)
    if theta_grid.size == 0 or phi_grid.size == 0:
        raise ValueError("beampattern grid must be non-empty")
    fro2 = P.total_power()
    K = P.num_users
    radar = np.zeros((theta_grid.size, phi_grid.size))
    common = np.zeros_like(radar)
    private = np.zeros_like(radar)
    for i, th in enumerate(theta_grid):
        for j, ph in enumerate(phi_grid):
            a = steering_vector(upa, AnglePair(float(th), float(ph)))
            g = np.abs(np.conj(P.matrix.T) @ a) ** 2
            radar[i, j] = g[K + 1] / fro2
            common[i, j] = g[K] / fro2
            private[i, j] = np.sum(g[:K]) / fro2
    return {"radar": radar, "common": common, "private": private}


def power_allocation_ratios(P: PrecoderMatrix) -> NDArray[np.float64]:
    """Fraction of total transmit power per column [p_1..p_K, p_c, p_R]."""
    col = np.sum(np.abs(P.matrix) ** 2, axis=0)
    return col / np.sum(col)
