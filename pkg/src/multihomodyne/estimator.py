"""Outcome generation, maximum-likelihood estimation, and variance experiments.

The estimator solves the stationarity condition of the log-likelihood:
a grid pass over the search window selects the highest-likelihood basin,
then bisection on the score pins the root.  The score itself is the
analytic derivative of the log-likelihood, assembled from the model's
chain-rule derivatives with Cholesky solves throughout.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .exceptions import (
    EstimationFailureError,
    ExperimentFailureError,
    InvalidArgumentError,
)
from .fisher import PhaseSchedule, fisher_information, heisenberg_schedule, sample_gaussian
from .gaussian import GaussianModel, ProbeSpec, log_pdf, model_at, model_with_derivatives
from .linalg import cholesky_factor, stream_rng
from .network import ParametrizedNetwork, channel_derivatives

SCORE_TOLERANCE = 1e-8
MAX_BISECTIONS = 60
FAILURE_BUDGET = 0.05


@dataclass(frozen=True)
class OutcomeBatch:
    """A block of homodyne outcome vectors with its RNG provenance."""

    nu: int
    outcomes: np.ndarray
    seed: int
    stream: int
    truth: float

    @property
    def modes(self) -> int:
        return self.outcomes.shape[1]


@dataclass(frozen=True)
class EstimationResult:
    estimate: float
    score_at_estimate: float
    iterations: int
    window: tuple[float, float]


def sample_outcomes(
    model: GaussianModel, nu: int, seed: int, stream: int = 0, truth: float = np.nan
) -> OutcomeBatch:
    """Draw ``nu`` outcome vectors; bitwise reproducible per (seed, stream)."""
    if nu < 1:
        raise InvalidArgumentError(f"nu must be >= 1, got {nu}")
    rng = stream_rng(seed, stream)
    x = sample_gaussian(model, nu, rng)
    return OutcomeBatch(nu=nu, outcomes=x, seed=seed, stream=stream, truth=truth)


def mle_score(
    phi: float,
    batch: OutcomeBatch,
    net: ParametrizedNetwork,
    probe: ProbeSpec,
    theta,
    step: float | None = None,
) -> float:
    """Derivative of the total log-likelihood of the batch at ``phi``.

    The covariance part contracts the inverse-covariance derivative with
    the gap between nu Sigma and the outcome scatter; the mean part
    weighs the outcome-sum residual.  Both use Cholesky solves, never an
    explicit inverse.
    """
    model = model_with_derivatives(net, probe, theta, phi, step)
    low = cholesky_factor(model.cov)
    v = batch.outcomes - model.mean[None, :]
    nu = batch.nu
    # B = Sigma^{-1} dSigma, Y rows are Sigma^{-1} v_j
    b = cho_solve((low, True), model.d_cov, check_finite=False)
    y = cho_solve((low, True), v.T, check_finite=False).T
    quad = float(np.einsum("ni,ij,nj->", y, model.d_cov, y))
    cov_part = -0.5 * (nu * float(np.trace(b)) - quad)
    mean_part = float(model.d_mean @ cho_solve((low, True), v.sum(axis=0), check_finite=False))
    return cov_part + mean_part


def mle_score_covariance_only(
    phi: float,
    batch: OutcomeBatch,
    net: ParametrizedNetwork,
    probe: ProbeSpec,
    theta,
    step: float | None = None,
) -> float:
    """Score for a zero-mean probe, written against the scatter estimator.

    Independent arrangement of the same stationarity condition:
    (nu/2) Tr[dSigma^{-1} (Sigma - scatter/nu)] with dSigma^{-1} formed
    explicitly.  Used to cross-check the general path when N_D = 0.
    """
    model = model_with_derivatives(net, probe, theta, phi, step)
    low = cholesky_factor(model.cov)
    eye = np.eye(model.modes)
    inv = cho_solve((low, True), eye, check_finite=False)
    d_inv = -inv @ model.d_cov @ inv
    scatter = batch.outcomes.T @ batch.outcomes / batch.nu
    return 0.5 * batch.nu * float(np.sum(d_inv * (model.cov - scatter)))


def _total_log_likelihood(
    phi: float,
    batch: OutcomeBatch,
    net: ParametrizedNetwork,
    probe: ProbeSpec,
    theta,
) -> float:
    return float(np.sum(log_pdf(batch.outcomes, model_at(net, probe, theta, phi))))


def mle_estimate(
    batch: OutcomeBatch,
    net: ParametrizedNetwork,
    probe: ProbeSpec,
    theta,
    window: tuple[float, float],
    grid: int = 64,
    step: float | None = None,
) -> EstimationResult:
    """Maximum-likelihood estimate of the network parameter.

    Scans the window on a grid to find the best likelihood cell, then
    bisects the score across the bracketing cells.  The window must
    contain the truth; phase-encoded likelihoods are periodic and only
    local optimality is guaranteed, so global identifiability is the
    caller's responsibility.
    """
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise InvalidArgumentError(f"window must satisfy lo < hi, got {window}")
    if grid < 32:
        raise InvalidArgumentError(f"grid must be >= 32, got {grid}")

    def loglike(p):
        return _total_log_likelihood(p, batch, net, probe, theta)

    def score(p):
        return mle_score(p, batch, net, probe, theta, step)

    xs = np.linspace(lo, hi, grid)
    lls = np.array([loglike(p) for p in xs])
    best = int(np.argmax(lls))
    interior = 0 < best < grid - 1
    b_lo = xs[max(best - 1, 0)]
    b_hi = xs[min(best + 1, grid - 1)]
    s_lo, s_hi = score(b_lo), score(b_hi)

    if not (s_lo > 0 > s_hi) and interior:
        # Narrow peak with tilted shoulders: re-grid inside the bracket once.
        sub = np.linspace(b_lo, b_hi, grid)
        sub_lls = np.array([loglike(p) for p in sub])
        sb = int(np.argmax(sub_lls))
        b_lo = sub[max(sb - 1, 0)]
        b_hi = sub[min(sb + 1, grid - 1)]
        s_lo, s_hi = score(b_lo), score(b_hi)

    if not (s_lo > 0 > s_hi):
        raise EstimationFailureError(
            f"score does not bracket a maximum in ({b_lo:.6g}, {b_hi:.6g}); "
            f"grid argmax at {xs[best]:.6g}",
            fallback=float(xs[best]),
        )

    tol = SCORE_TOLERANCE * max(abs(s_lo), abs(s_hi))
    a, b = b_lo, b_hi
    mid = 0.5 * (a + b)
    s_mid = score(mid)
    iters = 1
    while abs(s_mid) > tol and iters < MAX_BISECTIONS:
        if s_mid > 0:
            a = mid
        else:
            b = mid
        mid = 0.5 * (a + b)
        s_mid = score(mid)
        iters += 1
    return EstimationResult(
        estimate=float(mid),
        score_at_estimate=float(s_mid),
        iterations=iters,
        window=(lo, hi),
    )


@dataclass(frozen=True)
class CrbExperimentResult:
    """Spread of repeated estimations against the Cramer-Rao bound."""

    variance: float
    crb: float
    ratio: float
    estimates: np.ndarray
    score_residuals: np.ndarray
    failed: np.ndarray
    fisher_total: float

    @property
    def failures(self) -> int:
        return int(np.count_nonzero(self.failed))


def _run_trials(task, trials: int, workers: int):
    """Index-ordered trial execution; results independent of worker count."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(task, range(trials)))
    return [task(t) for t in range(trials)]


def crb_experiment(
    net: ParametrizedNetwork,
    probe: ProbeSpec,
    theta,
    phi_true: float,
    nu: int,
    trials: int,
    seed: int,
    window: tuple[float, float] | None = None,
    grid: int = 64,
    step: float | None = None,
    workers: int = 1,
    stream_base: int = 0,
) -> CrbExperimentResult:
    """Repeated sample-and-estimate rounds against the Cramer-Rao bound.

    Each trial draws a fresh batch on its own RNG stream and runs the
    estimator; the sample variance of the estimates is compared with
    1 / (nu F).  Failures are tolerated up to a 5% budget and reported,
    never silently dropped.
    """
    if trials < 100:
        raise InvalidArgumentError(f"trials must be >= 100, got {trials}")
    if window is None:
        window = (phi_true - 0.5, phi_true + 0.5)
    ftot = fisher_information(net, probe, theta, phi_true, step).total
    model_true = model_at(net, probe, theta, phi_true)

    def one_trial(t: int):
        batch = sample_outcomes(model_true, nu, seed, stream=stream_base + t, truth=phi_true)
        try:
            res = mle_estimate(batch, net, probe, theta, window, grid, step)
            return res.estimate, res.score_at_estimate, False
        except EstimationFailureError:
            return np.nan, np.nan, True

    rows = _run_trials(one_trial, trials, workers)
    estimates = np.array([r[0] for r in rows])
    residuals = np.array([r[1] for r in rows])
    failed = np.array([r[2] for r in rows])
    n_failed = int(np.count_nonzero(failed))
    if n_failed > FAILURE_BUDGET * trials:
        raise ExperimentFailureError(
            f"{n_failed}/{trials} estimations failed, exceeding the {FAILURE_BUDGET:.0%} budget"
        )
    ok = estimates[~failed]
    variance = float(np.var(ok, ddof=1))
    crb = 1.0 / (nu * ftot)
    return CrbExperimentResult(
        variance=variance,
        crb=crb,
        ratio=variance / crb,
        estimates=estimates,
        score_residuals=residuals,
        failed=failed,
        fisher_total=ftot,
    )


@dataclass(frozen=True)
class VarianceSweepResult:
    """Estimator variance against photon number, with the fitted decay slope."""

    photon_numbers: np.ndarray
    variances: np.ndarray
    crbs: np.ndarray
    ratios: np.ndarray
    failures: np.ndarray
    slope: float


def heisenberg_variance_sweep(
    net: ParametrizedNetwork,
    schedule: PhaseSchedule,
    phi_true: float,
    photon_numbers,
    nu: int,
    trials: int,
    seed: int,
    beta: float,
    grid: int = 64,
    step: float | None = None,
    workers: int = 1,
) -> VarianceSweepResult:
    """Estimator variance as the probe grows, oscillators rescheduled per point.

    The local-oscillator phases are recomputed from the schedule at every
    photon number (the offsets shrink as 1 / N_S^alpha), then a full CRB
    experiment runs at that size.  Heisenberg scaling shows up as a
    log-log slope of -2.
    """
    photon_numbers = np.asarray(photon_numbers, dtype=float)
    if photon_numbers.size < 2 or photon_numbers.max() < 100 * photon_numbers.min():
        raise InvalidArgumentError("photon numbers must span at least two decades")
    ch_raw = channel_derivatives(net, phi_true, np.zeros(net.modes), step)
    variances = np.empty(photon_numbers.size)
    crbs = np.empty(photon_numbers.size)
    ratios = np.empty(photon_numbers.size)
    failures = np.zeros(photon_numbers.size, dtype=int)
    for i, n in enumerate(photon_numbers):
        probe = ProbeSpec(total_photons=float(n), squeeze_fraction=beta)
        theta = heisenberg_schedule(ch_raw, probe.n_squeezed, schedule)
        res = crb_experiment(
            net,
            probe,
            theta,
            phi_true,
            nu,
            trials,
            seed,
            grid=grid,
            step=step,
            workers=workers,
            stream_base=i * trials,
        )
        variances[i] = res.variance
        crbs[i] = res.crb
        ratios[i] = res.ratio
        failures[i] = res.failures
    slope = float(np.polyfit(np.log(photon_numbers), np.log(variances), 1)[0])
    return VarianceSweepResult(
        photon_numbers=photon_numbers,
        variances=variances,
        crbs=crbs,
        ratios=ratios,
        failures=failures,
        slope=slope,
    )
