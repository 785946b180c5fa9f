"""Output statistics of a squeezed-coherent probe after a passive network.

Two independent routes to the same quantities live here.  The closed
forms express the homodyne mean, covariance, determinant, and cofactor
matrix directly in terms of channel probabilities and phases; the
phase-space pipeline assembles the full 2M-dimensional quadrature
transformation and extracts the measured block.  They must agree to
near machine precision, which is the main transcription check on the
closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import InvalidArgumentError
from .linalg import cholesky_factor
from .network import (
    ChannelDecomposition,
    ParametrizedNetwork,
    ZERO_PROBABILITY,
    channel_derivatives,
    default_step,
    first_row_decomposition,
    unitarity_defect,
    UNITARITY_TOLERANCE,
)

LOG_2PI = float(np.log(2 * np.pi))


@dataclass(frozen=True)
class ProbeSpec:
    """Resource split of a single-mode squeezed-coherent probe.

    ``total_photons`` is the mean photon number N; ``squeeze_fraction``
    (beta) sends N_S = beta N into squeezing and N_D = (1 - beta) N into
    displacement.  beta must be positive: a purely coherent probe cannot
    reach Heisenberg scaling and is rejected outright.
    """

    total_photons: float
    squeeze_fraction: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.total_photons) or self.total_photons < 0:
            raise InvalidArgumentError(f"total_photons must be >= 0, got {self.total_photons}")
        if not 0 < self.squeeze_fraction <= 1:
            raise InvalidArgumentError(
                f"probe beta > 0 required (and beta <= 1), got {self.squeeze_fraction}"
            )

    @property
    def n_squeezed(self) -> float:
        return self.squeeze_fraction * self.total_photons

    @property
    def n_displaced(self) -> float:
        return (1.0 - self.squeeze_fraction) * self.total_photons

    @property
    def squeezing(self) -> float:
        """Squeezing parameter r with sinh(r)^2 = N_S."""
        return float(np.arcsinh(np.sqrt(self.n_squeezed)))

    @property
    def displacement(self) -> float:
        """Displacement amplitude d with d^2 = N_D."""
        return float(np.sqrt(self.n_displaced))

    @classmethod
    def from_resources(cls, squeezing: float, displacement: float) -> "ProbeSpec":
        """Build from (r, d) instead of (N, beta)."""
        ns = float(np.sinh(squeezing) ** 2)
        nd = float(displacement) ** 2
        total = ns + nd
        if total == 0:
            return cls(total_photons=0.0, squeeze_fraction=1.0)
        if ns <= 0:
            raise InvalidArgumentError("squeezing must be nonzero (beta > 0 required)")
        return cls(total_photons=total, squeeze_fraction=ns / total)


@dataclass(frozen=True)
class GaussianModel:
    """Mean, covariance, determinant, cofactor, and their phi-derivatives."""

    mean: np.ndarray
    cov: np.ndarray
    det: float
    cofactor: np.ndarray
    d_mean: np.ndarray | None = None
    d_cov: np.ndarray | None = None
    d_det: float | None = None
    d_cofactor: np.ndarray | None = None

    @property
    def modes(self) -> int:
        return self.mean.size


def output_mean(probe: ProbeSpec, ch: ChannelDecomposition) -> np.ndarray:
    """Homodyne mean vector: mu_i = d sqrt(P_i) cos(gamma_i)."""
    return probe.displacement * np.sqrt(ch.probabilities) * np.cos(ch.relative_phases)


def output_covariance(probe: ProbeSpec, ch: ChannelDecomposition) -> np.ndarray:
    """Homodyne covariance: vacuum noise plus the rank-2 squeezing imprint."""
    g = ch.relative_phases
    a = np.sqrt(ch.probabilities)
    s = np.sinh(probe.squeezing)
    c = np.cosh(probe.squeezing)
    diff = g[:, None] - g[None, :]
    summ = g[:, None] + g[None, :]
    return 0.5 * np.eye(ch.modes) + np.outer(a, a) * (np.cos(diff) * s * s + np.cos(summ) * s * c)


def covariance_determinant(probe: ProbeSpec, ch: ChannelDecomposition) -> float:
    """Closed-form |Sigma| in O(M^2), no factorization.

    Requires normalized channel probabilities (unitarity guarantees it):
    normalization folds the vacuum and single-channel sums into the
    cancellation-free combination e^{-2r}/2^M + (sc/2^(M-2)) sum P cos^2,
    which stays accurate deep into the near-singular regime
    |Sigma| ~ 1/N_S where naive summation loses everything to rounding.
    """
    p = ch.probabilities
    g = ch.relative_phases
    m = ch.modes
    r = probe.squeezing
    s = np.sinh(r)
    c = np.cosh(r)
    single = np.sum(p * np.cos(g) ** 2)
    sin2 = np.sin(g[:, None] - g[None, :]) ** 2
    pairs = np.sum(np.triu(np.outer(p, p) * sin2, k=1))
    return float(np.exp(-2 * r) * 0.5**m + (s * c * single - s * s * pairs) / 2 ** (m - 2))


def _cofactor_pieces(probe: ProbeSpec, ch: ChannelDecomposition):
    """Shared geometry for the cofactor matrix and its derivative."""
    g = ch.relative_phases
    p = ch.probabilities
    a = np.sqrt(p)
    s = np.sinh(probe.squeezing)
    sin_diff = np.sin(g[:, None] - g[None, :])
    return g, p, a, s, sin_diff


def cofactor_matrix(probe: ProbeSpec, ch: ChannelDecomposition) -> np.ndarray:
    """Closed-form cofactor matrix C with Sigma C = |Sigma| I.

    Exploits the rank-2 structure of Sigma - I/2: off-diagonal entries
    need one weighted correlation sum per pair, diagonal entries one
    global pair sum, giving O(M^2) total after the matrix products.
    """
    g, p, a, s, sin_diff = _cofactor_pieces(probe, ch)
    m = ch.modes
    sigma = output_covariance(probe, ch)
    A = sigma - 0.5 * np.eye(m)
    # K[s,t] = sum_i P_i sin(g_s - g_i) sin(g_t - g_i); the i = s, t terms
    # vanish identically, so the full sum needs no exclusions.
    K = sin_diff @ (p[:, None] * sin_diff.T)
    cof = -A / 2 ** (m - 2) + (s * s) * np.outer(a, a) * K / 2 ** (m - 3)
    pair = (s * s) * np.outer(p, p) * sin_diff**2
    pair_total = pair.sum()
    diag = (
        1.0 / 2 ** (m - 1)
        + (np.trace(A) - np.diag(A)) / 2 ** (m - 2)
        - 0.5 * (pair_total - 2 * pair.sum(axis=1)) / 2 ** (m - 3)
    )
    np.fill_diagonal(cof, diag)
    return cof


def phase_space_oracle(probe: ProbeSpec, u: np.ndarray, theta) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance via the full 2M-dimensional quadrature pipeline.

    Builds the orthogonal-symplectic rotation of the network, applies the
    local-oscillator rotations, and extracts the measured block.  The
    probe amplitudes sit in the first row of ``u`` but the phase-space
    rotation consumes them as a first column, hence the transpose.
    """
    u = np.asarray(u, dtype=complex)
    defect = unitarity_defect(u)
    if defect > UNITARITY_TOLERANCE:
        raise InvalidArgumentError(f"u is not unitary: max |u†u - I| = {defect:.3e}")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    m = u.shape[0]
    v = u.T
    rot = np.block([[v.real, -v.imag], [v.imag, v.real]])
    ct, st = np.cos(theta), np.sin(theta)
    osc = np.block([[np.diag(ct), np.diag(st)], [-np.diag(st), np.diag(ct)]])
    squeeze = np.zeros(m)
    squeeze[0] = probe.squeezing
    gamma0 = 0.5 * np.diag(np.concatenate([np.exp(2 * squeeze), np.exp(-2 * squeeze)]))
    alpha0 = np.zeros(2 * m)
    alpha0[0] = probe.displacement
    mean = (osc @ (rot @ alpha0))[:m]
    gamma = rot @ gamma0 @ rot.T
    cov = (osc @ gamma @ osc.T)[:m, :m]
    return mean, cov


def log_pdf(x: np.ndarray, model: GaussianModel) -> np.ndarray | float:
    """Gaussian log-density of homodyne outcomes.

    Accepts a single outcome vector or a batch with outcomes in rows.
    The quadratic form uses a triangular solve and the log-determinant
    the Cholesky diagonal; the closed-form determinant is never used
    here because it underflows in log-space only far beyond any regime
    the closed form itself supports.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    if xb.shape[1] != model.modes:
        raise InvalidArgumentError(f"outcome length {xb.shape[1]} != modes {model.modes}")
    low = cholesky_factor(model.cov)
    resid = xb - model.mean[None, :]
    w = solve_triangular(low, resid.T, lower=True, check_finite=False)
    maha = np.sum(w * w, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diagonal(low)))
    out = -0.5 * (maha + logdet + model.modes * LOG_2PI)
    return float(out[0]) if single else out


def build_model(probe: ProbeSpec, ch: ChannelDecomposition) -> GaussianModel:
    """Model without derivative fields; enough for sampling and likelihoods."""
    sigma = output_covariance(probe, ch)
    return GaussianModel(
        mean=output_mean(probe, ch),
        cov=sigma,
        det=covariance_determinant(probe, ch),
        cofactor=cofactor_matrix(probe, ch),
    )


def _amplitude_derivative(ch: ChannelDecomposition) -> np.ndarray:
    """d/dphi of sqrt(P), zero where the channel is dark."""
    p = ch.probabilities
    safe = np.where(p < ZERO_PROBABILITY, 1.0, p)
    return np.where(p < ZERO_PROBABILITY, 0.0, ch.dp / (2.0 * np.sqrt(safe)))


def model_with_derivatives(
    net: ParametrizedNetwork,
    probe: ProbeSpec,
    theta,
    phi: float,
    step: float | None = None,
) -> GaussianModel:
    """Full model at ``phi``: values plus chain-rule phi-derivatives.

    The channel probabilities and phases are differentiated numerically
    (the network is a black box); everything downstream is differentiated
    analytically through the closed forms, so no cancellation-prone
    subtraction of near-singular determinants ever happens.
    """
    ch = channel_derivatives(net, phi, theta, step)
    ch.require_derivatives()
    p = ch.probabilities
    g = ch.relative_phases
    dgam = ch.dgamma
    a = np.sqrt(p)
    da = _amplitude_derivative(ch)
    r = probe.squeezing
    s, c = np.sinh(r), np.cosh(r)
    m = ch.modes

    mean = output_mean(probe, ch)
    sigma = output_covariance(probe, ch)
    det = covariance_determinant(probe, ch)
    cof = cofactor_matrix(probe, ch)

    d_mean = probe.displacement * (da * np.cos(g) - a * np.sin(g) * dgam)

    diff = g[:, None] - g[None, :]
    summ = g[:, None] + g[None, :]
    ddiff = dgam[:, None] - dgam[None, :]
    dsumm = dgam[:, None] + dgam[None, :]
    aa = np.outer(a, a)
    daa = np.outer(da, a) + np.outer(a, da)
    core = np.cos(diff) * s * s + np.cos(summ) * s * c
    dcore = -np.sin(diff) * ddiff * s * s - np.sin(summ) * dsumm * s * c
    d_cov = daa * core + aa * dcore

    # determinant derivative through the cancellation-free closed form
    dp = ch.dp
    d_single = np.sum(dp * np.cos(g) ** 2 - p * np.sin(2 * g) * dgam)
    sin_diff = np.sin(diff)
    pp = np.outer(p, p)
    dpp = np.outer(dp, p) + np.outer(p, dp)
    dpair_mat = dpp * sin_diff**2 + pp * np.sin(2 * diff) * ddiff
    d_pairs = np.sum(np.triu(dpair_mat, k=1))
    d_det = float((s * c * d_single - s * s * d_pairs) / 2 ** (m - 2))

    # cofactor derivative through the same rank-2 structure
    cos_diff = np.cos(diff)
    dsin_diff = cos_diff * ddiff
    K = sin_diff @ (p[:, None] * sin_diff.T)
    dK = (
        dsin_diff @ (p[:, None] * sin_diff.T)
        + sin_diff @ (p[:, None] * dsin_diff.T)
        + sin_diff @ (dp[:, None] * sin_diff.T)
    )
    d_cof = -d_cov / 2 ** (m - 2) + (s * s) * (daa * K + aa * dK) / 2 ** (m - 3)
    dpair_full = (s * s) * (dpp * sin_diff**2 + pp * 2.0 * sin_diff * dsin_diff)
    d_diag = (
        (np.trace(d_cov) - np.diag(d_cov)) / 2 ** (m - 2)
        - 0.5 * (dpair_full.sum() - 2 * dpair_full.sum(axis=1)) / 2 ** (m - 3)
    )
    np.fill_diagonal(d_cof, d_diag)

    return GaussianModel(
        mean=mean,
        cov=sigma,
        det=det,
        cofactor=cof,
        d_mean=d_mean,
        d_cov=d_cov,
        d_det=d_det,
        d_cofactor=d_cof,
    )


def model_at(net: ParametrizedNetwork, probe: ProbeSpec, theta, phi: float) -> GaussianModel:
    """Model at ``phi`` without derivatives (one network evaluation)."""
    return build_model(probe, first_row_decomposition(net.evaluate(phi), theta))
