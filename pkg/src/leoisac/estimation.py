"""Echo-side parameter estimation: subspace AOA search and the joint
delay-Doppler matched filter.

The matched filter exploits the bistatic geometry: a delay hypothesis fixes a
constant-range ellipsoid, its intersection with the estimated arrival ray
fixes the target position, and the position fixes the departure angles used
to build the reference signal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .channel import SPEED_OF_LIGHT
from .geometry import (
    AnglePair,
    UpaSpec,
    Vec3,
    angles_from_positions,
    aoa_unit_vector,
    invert_bistatic_ellipsoid,
    steering_vector,
)
from .waveform import EchoFrame, doppler_phases

#: Peak-to-median ratio below which a matched-filter surface is considered
#: to carry no target (typically caused by a wrong AOA estimate upstream).
DETECTION_THRESHOLD = 20.0


@dataclass(frozen=True)
class AngleGrid:
    """Uniform search grid over azimuth and off-boresight angle, radians."""

    theta_axis: NDArray[np.float64]
    phi_axis: NDArray[np.float64]

    def __post_init__(self) -> None:
        for axis in (self.theta_axis, self.phi_axis):
            if len(axis) == 0 or (len(axis) > 1 and np.any(np.diff(axis) <= 0)):
                raise ValueError("grid axes must be non-empty and strictly increasing")

    @classmethod
    def hemisphere(cls, step_deg: float = 0.5) -> "AngleGrid":
        step = np.deg2rad(step_deg)
        return cls(
            theta_axis=np.arange(-np.pi + step, np.pi + step / 2, step),
            phi_axis=np.arange(0.0, np.pi / 2 + step / 2, step),
        )

    @classmethod
    def window(
        cls, center: AnglePair, half_width_deg: float, step_deg: float
    ) -> "AngleGrid":
        hw = np.deg2rad(half_width_deg)
        step = np.deg2rad(step_deg)
        theta = np.arange(center.theta - hw, center.theta + hw + step / 2, step)
        phi = np.arange(center.phi - hw, center.phi + hw + step / 2, step)
        theta = theta[(theta > -np.pi) & (theta <= np.pi)]
        phi = phi[(phi >= 0.0) & (phi <= np.pi / 2)]
        return cls(theta_axis=theta, phi_axis=phi)


@dataclass(frozen=True)
class EstimationReport:
    """Joint estimation output plus the reconstructed target position."""

    aoa: AnglePair
    tau: int
    doppler_hz: float
    aod: AnglePair
    position: Vec3
    r_rx: float
    peak_to_median: float
    failed: bool


def sample_covariance(Y: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Time-averaged outer product Y Y^H / n_cols."""
    Y = np.atleast_2d(Y)
    if Y.shape[1] == 0:
        raise ValueError("empty frame")
    R = Y @ np.conj(Y.T) / Y.shape[1]
    return 0.5 * (R + np.conj(R.T))


def _manifold(upa: UpaSpec, theta_axis, phi_axis) -> NDArray[np.complex128]:
    """Steering vectors for a full grid, shape (n_theta, n_phi, n_elem)."""
    th = np.asarray(theta_axis)[:, None]
    ph = np.asarray(phi_axis)[None, :]
    u = np.sin(ph) * np.cos(th)
    v = np.sin(ph) * np.sin(th)
    gx = np.kron(np.arange(upa.nx), np.ones(upa.ny))
    gy = np.kron(np.ones(upa.nx), np.arange(upa.ny))
    phase = u[..., None] * gx + v[..., None] * gy
    return np.exp(-1j * np.pi * phase)


def music_spectrum(
    R: NDArray[np.complex128],
    rx_upa: UpaSpec,
    grid: AngleGrid,
    signal_dim: int = 1,
) -> tuple[NDArray[np.float64], AnglePair]:
    """Noise-subspace spectrum 1 / ||U_n^H b(theta, phi)||^2 and its argmax.

    The noise subspace collects the eigenvectors of the smallest
    n_rx - signal_dim eigenvalues of the sample covariance.
    """
    n = R.shape[0]
    if signal_dim < 1 or signal_dim >= n:
        raise ValueError("signal dimension must be in 1..n_rx-1")
    evals, evecs = np.linalg.eigh(R)
    noise = evecs[:, : n - signal_dim]
    # Chunk over azimuth rows so large receive arrays do not materialize the
    # whole manifold at once.
    denom = np.empty((grid.theta_axis.size, grid.phi_axis.size))
    block = max(1, int(4_000_000 // max(1, grid.phi_axis.size * n)))
    for start in range(0, grid.theta_axis.size, block):
        sl = slice(start, min(start + block, grid.theta_axis.size))
        B = _manifold(rx_upa, grid.theta_axis[sl], grid.phi_axis)
        proj = np.einsum("tpn,nk->tpk", B.conj(), noise)
        denom[sl] = np.sum(np.abs(proj) ** 2, axis=2)
    spectrum = 1.0 / np.maximum(denom, np.finfo(float).tiny)
    it, ip = np.unravel_index(np.argmax(spectrum), spectrum.shape)
    peak = AnglePair(float(grid.theta_axis[it]), float(grid.phi_axis[ip]))
    return spectrum, peak


def matched_filter_joint(
    X: NDArray[np.complex128],
    y_combined: NDArray[np.complex128],
    aoa_hat: AnglePair,
    sat: Vec3,
    tx_upa: UpaSpec,
    delay_bins: NDArray[np.int_],
    doppler_grid_hz: NDArray[np.float64],
    t_s: float,
    range_offset_m: float,
    tau_max: int,
    detection_threshold: float = DETECTION_THRESHOLD,
) -> tuple[NDArray[np.float64], EstimationReport]:
    """Joint delay-Doppler search with geometry-implied departure angles.

    For each delay bin the hypothesized bistatic range is
    range_offset_m + tau * c * t_s; inverting the ellipsoid along the
    arrival ray gives the candidate position and departure angles, so the
    reference signal a(aod)^H X can be correlated with the combined receive
    signal over every Doppler bin.  Bins with no admissible geometry score
    -inf.  Ties break toward the smallest (tau, doppler) pair.

    ``sat`` must be expressed relative to the receiver position.
    """
    delay_bins = np.asarray(delay_bins, dtype=int)
    doppler_grid_hz = np.asarray(doppler_grid_hz, dtype=float)
    if delay_bins.size == 0 or doppler_grid_hz.size == 0:
        raise ValueError("empty search grid")
    L = X.shape[1]
    direction = aoa_unit_vector(aoa_hat)
    scores = np.full((delay_bins.size, doppler_grid_hz.size), -np.inf)
    geo: dict[int, tuple[Vec3, float, AnglePair]] = {}
    for it, tau in enumerate(delay_bins):
        if not 1 <= tau <= tau_max or tau + L > y_combined.shape[0]:
            continue
        brange = range_offset_m + float(tau) * SPEED_OF_LIGHT * t_s
        try:
            pos, r_rx = invert_bistatic_ellipsoid(sat, direction, brange)
            aod = angles_from_positions(sat, pos, "satellite")
        except ValueError:
            continue
        geo[it] = (pos, r_rx, aod)
        ref_base = np.conj(steering_vector(tx_upa, aod)) @ X
        window = y_combined[tau : tau + L]
        for iv, v in enumerate(doppler_grid_hz):
            ref = ref_base * doppler_phases(L, float(v), t_s)
            scores[it, iv] = np.abs(window @ np.conj(ref))
    valid = np.isfinite(scores)
    if not np.any(valid):
        raise ValueError("no admissible geometry in the search grid")
    it, iv = np.unravel_index(np.argmax(scores), scores.shape)
    pos, r_rx, aod = geo[int(it)]
    peak = float(scores[it, iv])
    med = float(np.median(scores[valid]))
    ratio = peak / med if med > 0 else np.inf
    report = EstimationReport(
        aoa=aoa_hat,
        tau=int(delay_bins[it]),
        doppler_hz=float(doppler_grid_hz[iv]),
        aod=aod,
        position=pos,
        r_rx=r_rx,
        peak_to_median=ratio,
        failed=ratio < detection_threshold,
    )
    return scores, report


def estimate_aoa(
    frame: EchoFrame, rx_upa: UpaSpec, grid: AngleGrid, signal_dim: int = 1
) -> tuple[NDArray[np.float64], AnglePair]:
    """Covariance + subspace search in one call."""
    R = sample_covariance(frame.Y)
    return music_spectrum(R, rx_upa, grid, signal_dim)


def default_doppler_grid(L: int, t_s: float, lo_hz: float, hi_hz: float) -> NDArray[np.float64]:
    """Doppler bins at the natural frame resolution 1/(L*t_s), covering
    [lo_hz, hi_hz] and always containing zero."""
    step = 1.0 / (L * t_s)
    k_lo = int(np.floor(lo_hz / step))
    k_hi = int(np.ceil(hi_hz / step))
    return step * np.arange(k_lo, k_hi + 1)
