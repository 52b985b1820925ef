"""Fisher information and estimation-accuracy bounds for the echo AOA.

The unknown vector is the arrival pair (theta, phi) at the radar receiver.
With white receiver noise, the information matrix factors into the transmit
beamforming gain toward the target times Gram terms of the receive-manifold
derivatives.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .geometry import AnglePair, UpaSpec, steering_vector
from .rates import PrecoderMatrix


@dataclass(frozen=True)
class CrbContext:
    """Scene quantities the AOA information matrix depends on."""

    alpha2: float
    sigma_r2: float
    num_samples: int
    a_tar: NDArray[np.complex128]
    db_theta: NDArray[np.complex128]
    db_phi: NDArray[np.complex128]

    def __post_init__(self) -> None:
        if self.alpha2 <= 0 or self.sigma_r2 <= 0:
            raise ValueError("echo power and noise power must be positive")
        if self.num_samples < 1:
            raise ValueError("frame length must be at least 1")

    def gram_terms(self) -> tuple[float, float, float]:
        """(||db_theta||^2, ||db_phi||^2, Re(db_theta^H db_phi))."""
        nt = float(np.vdot(self.db_theta, self.db_theta).real)
        nf = float(np.vdot(self.db_phi, self.db_phi).real)
        cross = float(np.vdot(self.db_theta, self.db_phi).real)
        return nt, nf, cross


def beamforming_gain(ctx: CrbContext, P: PrecoderMatrix) -> float:
    """Transmit power focused on the target direction, ||P^H a_tar||^2."""
    return float(np.sum(np.abs(np.conj(P.matrix.T) @ ctx.a_tar) ** 2))


def fim(ctx: CrbContext, P: PrecoderMatrix) -> NDArray[np.float64]:
    """2x2 Fisher information matrix of the arrival pair.

    Every entry scales with 2 L |alpha|^2 / sigma^2 times the beamforming
    gain; the angular structure sits in the derivative Gram terms.
    """
    nt, nf, cross = ctx.gram_terms()
    scale = 2.0 * ctx.num_samples * ctx.alpha2 / ctx.sigma_r2 * beamforming_gain(ctx, P)
    return scale * np.array([[nt, cross], [cross, nf]])


def crb_pair(ctx: CrbContext, P: PrecoderMatrix) -> tuple[float, float]:
    """Closed-form diagonal of the inverse information matrix.

    Note the cross-pairing: the azimuth bound carries ||db_phi||^2 and vice
    versa, through Q = sigma^2 / (2 L |alpha|^2 (||db_t||^2 ||db_f||^2
    - Re(db_t^H db_f)^2)).
    """
    nt, nf, cross = ctx.gram_terms()
    det_term = nt * nf - cross * cross
    gain = beamforming_gain(ctx, P)
    if det_term <= 0 or gain <= 0:
        raise ValueError("unidentifiable: singular information matrix")
    q = ctx.sigma_r2 / (2.0 * ctx.num_samples * ctx.alpha2 * det_term)
    return q * nf / gain, q * nt / gain


def crb_trace_requirement(ctx: CrbContext, th_theta: float, th_phi: float) -> float:
    """Minimum beamforming gain toward the target implied by bound thresholds.

    Both bounds stay below their thresholds iff ||P^H a_tar||^2 >=
    max(Q ||db_phi||^2 / th_theta, Q ||db_theta||^2 / th_phi).
    """
    nt, nf, cross = ctx.gram_terms()
    det_term = nt * nf - cross * cross
    if det_term <= 0:
        raise ValueError("unidentifiable: singular information matrix")
    if th_theta <= 0 or th_phi <= 0:
        raise ValueError("thresholds must be positive")
    q = ctx.sigma_r2 / (2.0 * ctx.num_samples * ctx.alpha2 * det_term)
    return max(q * nf / th_theta, q * nt / th_phi)


def numeric_fim_oracle(
    rx_upa: UpaSpec,
    aoa: AnglePair,
    alpha2: float,
    sigma_r2: float,
    a_tar: NDArray[np.complex128],
    X: NDArray[np.complex128],
    step: float = 1e-5,
) -> NDArray[np.float64]:
    """Finite-difference information matrix, independent of the closed form.

    Builds the noiseless mean frame mu(theta, phi) = alpha * b(theta, phi)
    a_tar^H X explicitly, differentiates it by central differences, and
    accumulates 2 Re(dmu_i^H dmu_j) / sigma^2 on the full vectorized frames.
    Intended for verification; the supplied X should carry near-orthogonal
    streams so the closed form's large-frame step is exact.
    """

    def mean_frame(theta: float, phi: float) -> NDArray[np.complex128]:
        b = steering_vector(rx_upa, AnglePair(theta, phi))
        return np.outer(b, np.conj(a_tar) @ X)

    dmu = []
    for axis in range(2):
        hi = [aoa.theta, aoa.phi]
        lo = [aoa.theta, aoa.phi]
        hi[axis] += step
        lo[axis] -= step
        dmu.append((mean_frame(*hi) - mean_frame(*lo)) / (2.0 * step))
    F = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            inner = np.vdot(dmu[i].ravel(), dmu[j].ravel())
            F[i, j] = 2.0 * alpha2 / sigma_r2 * inner.real
    return F
