"""Fisher information of the multi-channel homodyne measurement.

Exact three-term evaluation through closed forms, a sampling oracle that
estimates the same quantity from raw score statistics, the asymptotic
form valid under near-quadrature local-oscillator schedules, and the
large-squeezing expansion of the covariance determinant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError
from .gaussian import (
    GaussianModel,
    ProbeSpec,
    build_model,
    covariance_determinant,
    log_pdf,
    model_with_derivatives,
)
from .linalg import cholesky_factor, stream_rng
from .network import (
    ChannelDecomposition,
    ParametrizedNetwork,
    ZERO_PROBABILITY,
    channel_derivatives,
    default_step,
    first_row_decomposition,
)


def rho(x: float) -> float:
    """Squeezing-term prefactor (8x)^2 / (16x^2 + 1)^2; peaks at x = 1/4 with value 1."""
    x = np.asarray(x, dtype=float)
    out = (8.0 * x) ** 2 / (16.0 * x * x + 1.0) ** 2
    return float(out) if out.ndim == 0 else out


def zeta(x: float) -> float:
    """Displacement-term prefactor 1 / (16x^2 + 1); peaks at x = 0 with value 1."""
    x = np.asarray(x, dtype=float)
    out = 1.0 / (16.0 * x * x + 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FisherBreakdown:
    """The three additive contributions to the exact Fisher information."""

    displacement_term: float
    determinant_term: float
    trace_term: float

    @property
    def total(self) -> float:
        return self.displacement_term + self.determinant_term + self.trace_term


def fisher_information(
    net: ParametrizedNetwork,
    probe: ProbeSpec,
    theta,
    phi: float,
    step: float | None = None,
) -> FisherBreakdown:
    """Exact Fisher information of the homodyne outcome distribution.

    Evaluated as a quadratic form in the cofactor matrix plus the squared
    log-derivative of the determinant minus a trace coupling, all through
    closed forms, so it remains well-conditioned when the determinant is
    within a factor 1/N_S of singular.
    """
    model = model_with_derivatives(net, probe, theta, phi, step)
    if model.det <= 0:
        raise InvalidArgumentError(f"covariance determinant {model.det} is not positive")
    disp = float(model.d_mean @ model.cofactor @ model.d_mean) / model.det
    det_term = 0.5 * (model.d_det / model.det) ** 2
    trace = -0.5 * float(np.sum(model.d_cov * model.d_cofactor.T)) / model.det
    return FisherBreakdown(displacement_term=disp, determinant_term=det_term, trace_term=trace)


def sample_gaussian(model: GaussianModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` outcome vectors from the model via its Cholesky factor."""
    low = cholesky_factor(model.cov)
    z = rng.standard_normal((count, model.modes))
    return model.mean[None, :] + z @ low.T


def mc_fisher_oracle(
    net: ParametrizedNetwork,
    probe: ProbeSpec,
    theta,
    phi: float,
    samples: int,
    seed: int,
    step: float | None = None,
    stream: int = 0,
) -> tuple[float, float]:
    """Monte-Carlo estimate of the Fisher information and its standard error.

    Draws outcomes at ``phi`` and averages the squared score, with the
    score obtained by central differences of the log-density across
    ``phi +- step``.  Independent of every closed-form derivative above,
    which is the point.
    """
    if samples < 1000:
        raise InvalidArgumentError(f"samples must be >= 1000, got {samples}")
    if step is None:
        step = 10.0 * default_step(phi)
    rng = stream_rng(seed, stream)
    model = build_model(probe, first_row_decomposition(net.evaluate(phi), theta))
    x = sample_gaussian(model, samples, rng)
    model_plus = build_model(probe, first_row_decomposition(net.evaluate(phi + step), theta))
    model_minus = build_model(probe, first_row_decomposition(net.evaluate(phi - step), theta))
    score = (log_pdf(x, model_plus) - log_pdf(x, model_minus)) / (2.0 * step)
    sq = score * score
    estimate = float(np.mean(sq))
    std_error = float(np.std(sq, ddof=1) / np.sqrt(samples))
    return estimate, std_error


@dataclass(frozen=True)
class PhaseSchedule:
    """Local-oscillator offsets around the quadrature of minimal variance.

    Generates relative phases sign * pi/2 + k / N_S^alpha per channel.
    ``offsets`` and ``sign`` may be scalars (applied to every channel) or
    per-channel arrays.
    """

    offsets: np.ndarray | float = 0.0
    exponent: float = 1.0
    sign: np.ndarray | float = 1.0

    def __post_init__(self):
        if self.exponent <= 0:
            raise InvalidArgumentError(f"schedule exponent must be positive, got {self.exponent}")
        sign = np.asarray(self.sign, dtype=float)
        if not np.all(np.abs(sign) == 1.0):
            raise InvalidArgumentError("schedule sign entries must be +1 or -1")

    def targets(self, modes: int, n_squeezed: float) -> np.ndarray:
        """Per-channel relative phases for a given squeezed-photon budget."""
        k = np.broadcast_to(np.asarray(self.offsets, dtype=float), (modes,))
        sign = np.broadcast_to(np.asarray(self.sign, dtype=float), (modes,))
        return sign * np.pi / 2.0 + k / n_squeezed**self.exponent

    def channel_offsets(self, modes: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.offsets, dtype=float), (modes,)).copy()


def heisenberg_schedule(ch: ChannelDecomposition, n_squeezed: float, sched: PhaseSchedule) -> np.ndarray:
    """Oscillator phases that realize the schedule's relative phases.

    theta_i = gammabar_i - (sign_i pi/2 + k_i / N_S^alpha), so feeding the
    result back through the channel decomposition reproduces the targets
    exactly.
    """
    if n_squeezed <= 0:
        raise InvalidArgumentError(f"n_squeezed must be positive, got {n_squeezed}")
    return ch.network_phases - sched.targets(ch.modes, n_squeezed)


def fixed_gamma_phases(ch: ChannelDecomposition, gamma: float) -> np.ndarray:
    """Oscillator phases pinning every relative phase to a constant value."""
    return ch.network_phases - gamma


def asymptotic_fisher(
    ch: ChannelDecomposition, schedule: PhaseSchedule, n_squeezed: float, n_displaced: float
) -> float:
    """Large-N Fisher information under a unit-exponent schedule.

    8 (dgamma_avg)^2 (zeta(k_avg) N_D N_S + rho(k_avg) N_S^2) with the
    probability-weighted averages k_avg = sum P_i k_i and
    dgamma_avg = sum P_i dgamma_i.  Only exponent 1 admits this form.
    """
    if schedule.exponent != 1.0:
        raise InvalidArgumentError(
            f"asymptotic form requires schedule exponent 1, got {schedule.exponent}"
        )
    ch.require_derivatives()
    p = np.where(ch.probabilities < ZERO_PROBABILITY, 0.0, ch.probabilities)
    k_avg = float(np.sum(p * schedule.channel_offsets(ch.modes)))
    dgamma_avg = float(np.sum(p * ch.dgamma))
    return 8.0 * dgamma_avg**2 * (zeta(k_avg) * n_displaced * n_squeezed + rho(k_avg) * n_squeezed**2)


@dataclass(frozen=True)
class AsymptoticCoefficients:
    """Coefficients of N_S, 1, and 1/N_S in the covariance determinant."""

    d1: float
    d2: float
    d3: float

    def evaluate(self, n_squeezed: float) -> float:
        return self.d1 * n_squeezed + self.d2 + self.d3 / n_squeezed


def determinant_expansion(ch: ChannelDecomposition) -> AsymptoticCoefficients:
    """Expand |Sigma| in powers of the squeezed photon number at fixed phases.

    The leading coefficient is returned in its sum-of-two-squares form,
    which makes its nonnegativity and its zero set (all bright channels
    at pi/2 mod pi) manifest; the raw cos(2 gamma) form is computed too
    and both must agree to 1e-12, a standing transcription check.
    """
    p = ch.probabilities
    g = ch.relative_phases
    m = ch.modes
    cos2 = np.cos(2 * g)
    sin2_pairs = np.sin(g[:, None] - g[None, :]) ** 2
    pair_sum = float(np.sum(np.triu(np.outer(p, p) * sin2_pairs, k=1)))
    base = float(np.sum(p * cos2))
    d1_raw = (1.0 + base) / 2 ** (m - 1) - pair_sum / 2 ** (m - 2)
    u = float(np.sum(p * np.cos(g) ** 2))
    w = float(np.sum(p * np.sin(g) * np.cos(g)))
    d1 = (u * u + w * w) / 2 ** (m - 2)
    scale = max(abs(d1), abs(d1_raw), 1.0 / 2 ** (m - 2))
    if abs(d1 - d1_raw) > 1e-12 * scale:
        raise ArithmeticError(
            f"determinant expansion forms disagree: {d1} vs {d1_raw}"
        )
    d2 = (1.0 + base) / 2**m
    d3 = -base / 2 ** (m + 2)
    return AsymptoticCoefficients(d1=d1, d2=d2, d3=d3)


@dataclass(frozen=True)
class ScalingResult:
    """Per-photon-number Fisher data and the fitted log-log slope."""

    photon_numbers: np.ndarray
    fisher_totals: np.ndarray
    asymptotics: np.ndarray
    det_times_ns: np.ndarray
    slope: float
    intercept: float


def slope_experiment(
    net: ParametrizedNetwork,
    photon_numbers,
    beta: float,
    phi: float,
    schedule: PhaseSchedule | None = None,
    gamma_fixed: float | None = None,
    step: float | None = None,
) -> ScalingResult:
    """Fit the scaling exponent of the Fisher information with photon number.

    With a unit-exponent schedule the expected slope is 2 (Heisenberg);
    with fixed generic relative phases it is 1 (shot noise); other
    schedule exponents produce intermediate values.  Exactly one of
    ``schedule`` and ``gamma_fixed`` must be given.
    """
    photon_numbers = np.asarray(photon_numbers, dtype=float)
    if photon_numbers.size < 3:
        raise InvalidArgumentError("need at least 3 photon-number values for a slope fit")
    if (schedule is None) == (gamma_fixed is None):
        raise InvalidArgumentError("provide exactly one of schedule or gamma_fixed")
    ch_raw = channel_derivatives(net, phi, np.zeros(net.modes), step)
    totals = np.empty(photon_numbers.size)
    asympt = np.full(photon_numbers.size, np.nan)
    det_ns = np.empty(photon_numbers.size)
    for i, n in enumerate(photon_numbers):
        probe = ProbeSpec(total_photons=float(n), squeeze_fraction=beta)
        ns = probe.n_squeezed
        if schedule is not None:
            theta = heisenberg_schedule(ch_raw, ns, schedule)
        else:
            theta = fixed_gamma_phases(ch_raw, gamma_fixed)
        ch = channel_derivatives(net, phi, theta, step)
        totals[i] = fisher_information(net, probe, theta, phi, step).total
        det_ns[i] = ns * covariance_determinant(probe, ch)
        if schedule is not None and schedule.exponent == 1.0:
            asympt[i] = asymptotic_fisher(ch, schedule, ns, probe.n_displaced)
    slope, intercept = np.polyfit(np.log(photon_numbers), np.log(totals), 1)
    return ScalingResult(
        photon_numbers=photon_numbers,
        fisher_totals=totals,
        asymptotics=asympt,
        det_times_ns=det_ns,
        slope=float(slope),
        intercept=float(intercept),
    )
