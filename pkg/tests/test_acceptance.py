"""Acceptance suite: one test per release criterion.

Each test prints a single PASS line with its headline number once its
assertions hold; tolerances are fixed here and nowhere else.  Run with
``pytest tests/test_acceptance.py -v -s`` to see the per-criterion lines.
"""

import time

import numpy as np
import pytest

from conftest import random_instance

from multihomodyne import (
    MachZehnderNetwork,
    PhaseSchedule,
    ProbeSpec,
    asymptotic_fisher,
    channel_derivatives,
    cofactor_by_minors,
    cofactor_matrix,
    covariance_determinant,
    crb_experiment,
    first_row_decomposition,
    fisher_information,
    heisenberg_schedule,
    heisenberg_variance_sweep,
    lu_determinant,
    mc_fisher_oracle,
    model_with_derivatives,
    output_covariance,
    output_mean,
    phase_space_oracle,
    random_generator_network,
    random_haar_unitary,
    rho,
    slope_experiment,
    zeta,
)

PHI = 0.3


def report(criterion, detail):
    print(f"PASS criterion {criterion}: {detail}")


def test_criterion_01_determinant_identity():
    rng = np.random.default_rng(101)
    start = time.time()
    worst = 0.0
    for _ in range(1000):
        _, _, probe, ch = random_instance(rng, max_modes=8)
        closed = covariance_determinant(probe, ch)
        ref = lu_determinant(output_covariance(probe, ch))
        worst = max(worst, abs(closed - ref) / abs(ref))
    elapsed = time.time() - start
    assert worst <= 1e-10
    assert elapsed < 10.0
    report(1, f"determinant closed form vs LU, 1000 instances, max rel err {worst:.2e}, {elapsed:.1f}s")


def test_criterion_02_cofactor_identity():
    rng = np.random.default_rng(102)
    start = time.time()
    worst = 0.0
    for _ in range(500):
        _, _, probe, ch = random_instance(rng, max_modes=10)
        closed = cofactor_matrix(probe, ch)
        ref = cofactor_by_minors(output_covariance(probe, ch))
        scale = max(np.abs(ref).max(), 1e-300)
        worst = max(worst, float(np.abs(closed - ref).max() / scale))
    elapsed = time.time() - start
    assert worst <= 1e-9
    assert elapsed < 30.0
    report(2, f"cofactor closed form vs minors, 500 instances, max rel err {worst:.2e}, {elapsed:.1f}s")


def test_criterion_03_dual_path_statistics():
    rng = np.random.default_rng(103)
    start = time.time()
    worst = 0.0
    for _ in range(500):
        u, theta, probe, ch = random_instance(rng, max_modes=8)
        mean_ps, cov_ps = phase_space_oracle(probe, u, theta)
        worst = max(
            worst,
            float(np.abs(mean_ps - output_mean(probe, ch)).max()),
            float(np.abs(cov_ps - output_covariance(probe, ch)).max()),
        )
    elapsed = time.time() - start
    assert worst <= 1e-12
    assert elapsed < 10.0
    report(3, f"closed form vs phase-space pipeline, 500 instances, max abs err {worst:.2e}, {elapsed:.1f}s")


def test_criterion_04_jacobi_derivative():
    rng = np.random.default_rng(104)
    worst_tr = 0.0
    worst_fd = 0.0
    for _ in range(200):
        m = int(rng.integers(1, 6))
        net = random_generator_network(m, seed=int(rng.integers(2**31)))
        theta = rng.uniform(-np.pi, np.pi, m)
        probe = ProbeSpec.from_resources(rng.uniform(0.1, 1.8), rng.uniform(0.0, 3.0))
        model = model_with_derivatives(net, probe, theta, PHI)
        trace_form = float(np.sum(model.cofactor * model.d_cov))
        scale = max(abs(model.d_det), abs(trace_form))
        if scale == 0.0:
            continue
        worst_tr = max(worst_tr, abs(model.d_det - trace_form) / scale)
        h = 1e-5
        chp = first_row_decomposition(net.evaluate(PHI + h), theta)
        chm = first_row_decomposition(net.evaluate(PHI - h), theta)
        fd = (covariance_determinant(probe, chp) - covariance_determinant(probe, chm)) / (2 * h)
        worst_fd = max(worst_fd, abs(model.d_det - fd) / max(abs(fd), abs(model.d_det)))
    assert worst_tr <= 1e-8
    assert worst_fd <= 1e-8
    report(4, f"Jacobi trace identity {worst_tr:.2e}, finite-difference check {worst_fd:.2e}, 200 instances")


def test_criterion_05_fisher_monte_carlo_cross_check():
    rng = np.random.default_rng(105)
    start = time.time()
    worst_z = 0.0
    for idx, m in enumerate([1, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 4, 4, 4, 4, 4, 4]):
        net = random_generator_network(m, seed=int(rng.integers(2**31)))
        theta = rng.uniform(-np.pi, np.pi, m)
        probe = ProbeSpec.from_resources(rng.uniform(0.2, 1.5), rng.uniform(0.0, 2.0))
        exact = fisher_information(net, probe, theta, PHI).total
        est, se = mc_fisher_oracle(net, probe, theta, PHI, samples=100_000, seed=1000 + idx)
        z = abs(est - exact) / se
        worst_z = max(worst_z, z)
        assert z <= 3.0, f"instance {idx} (M={m}): z = {z:.2f}"
    elapsed = time.time() - start
    assert elapsed < 300.0
    report(5, f"exact vs Monte-Carlo score variance, 20 instances, worst z {worst_z:.2f}, {elapsed:.1f}s")


def test_criterion_06_asymptotic_convergence():
    net = random_generator_network(3, seed=11)
    offsets = np.array([0.1, 0.2, 0.3])
    sched = PhaseSchedule(offsets, 1.0, 1.0)
    errors = []
    for n in (1e2, 1e3, 1e4):
        probe = ProbeSpec(n, 0.5)
        ch0 = channel_derivatives(net, PHI, np.zeros(3))
        theta = heisenberg_schedule(ch0, probe.n_squeezed, sched)
        ch = channel_derivatives(net, PHI, theta)
        exact = fisher_information(net, probe, theta, PHI).total
        asym = asymptotic_fisher(ch, sched, probe.n_squeezed, probe.n_displaced)
        errors.append(abs(asym - exact) / exact)
    assert errors[2] <= 0.05
    assert errors[0] > errors[1] > errors[2]

    ns = 1e6
    probe = ProbeSpec(ns, 1.0)
    ch0 = channel_derivatives(net, PHI, np.zeros(3))
    theta = heisenberg_schedule(ch0, ns, sched)
    ch = first_row_decomposition(net.evaluate(PHI), theta)
    k_avg = float(np.sum(ch.probabilities * offsets))
    limit = (k_avg**2 + 1.0 / 16.0) / 2.0
    det_ns = ns * covariance_determinant(probe, ch)
    assert det_ns == pytest.approx(limit, rel=0.01)
    report(
        6,
        f"asymptotic Fisher errors {errors[0]:.3f} > {errors[1]:.4f} > {errors[2]:.5f}, "
        f"N_S|Sigma| -> {det_ns:.6f} (limit {limit:.6f})",
    )


def test_criterion_07_heisenberg_slope():
    net = random_generator_network(3, seed=11)
    n_values = [1e2, 1e3, 1e4, 1e5]
    displacement = slope_experiment(net, n_values, 0.5, PHI, schedule=PhaseSchedule(0.0, 1.0, 1.0))
    assert displacement.slope == pytest.approx(2.0, abs=0.05)
    squeezing = slope_experiment(net, n_values, 1.0, PHI, schedule=PhaseSchedule(0.25, 1.0, 1.0))
    assert squeezing.slope == pytest.approx(2.0, abs=0.05)
    control = slope_experiment(net, n_values, 1.0, PHI, gamma_fixed=0.3)
    assert control.slope == pytest.approx(1.0, abs=0.1)
    report(
        7,
        f"slopes: displacement {displacement.slope:.3f}, squeezing {squeezing.slope:.3f}, "
        f"control {control.slope:.3f}",
    )


def test_criterion_08_paper_constants():
    assert rho(0.25) == 1.0
    assert zeta(0.0) == 1.0
    from multihomodyne import diagonal_phase_network

    net = diagonal_phase_network(1)
    probe = ProbeSpec.from_resources(1.0, 1.0)
    fb = fisher_information(net, probe, np.array([0.7]), PHI)
    assert fb.trace_term == 0.0
    report(8, "rho(1/4) = 1, zeta(0) = 1 exactly; single-channel trace term identically 0")


def test_criterion_09_crb_saturation():
    start = time.time()
    net = MachZehnderNetwork(2)
    probe = ProbeSpec(1000.0, 0.5)
    sched = PhaseSchedule(0.0, 1.0, 1.0)
    ch = channel_derivatives(net, PHI, np.zeros(2))
    theta = heisenberg_schedule(ch, probe.n_squeezed, sched)
    res = crb_experiment(net, probe, theta, PHI, nu=1000, trials=200, seed=42)
    assert 0.8 <= res.ratio <= 1.2
    sweep = heisenberg_variance_sweep(
        net, sched, PHI, [1e2, 1e3, 1e4], nu=1000, trials=200, seed=42, beta=0.5
    )
    elapsed = time.time() - start
    assert sweep.slope == pytest.approx(-2.0, abs=0.15)
    assert elapsed < 600.0
    report(
        9,
        f"variance/CRB ratio {res.ratio:.3f}, variance slope {sweep.slope:.3f}, {elapsed:.0f}s",
    )


def test_criterion_10_determinism(tmp_path):
    import json

    from multihomodyne.cli import main

    cfg = {
        "network": {"kind": "mach_zehnder_like", "modes": 2},
        "probe": {"N": 100.0, "beta": 0.5},
        "schedule": {"k": 0.0, "alpha": 1.0, "sign": 1},
        "phi_true": PHI,
        "nu": 200,
        "trials": 100,
        "seed": 5,
    }
    cfg_path = tmp_path / "mle.json"
    cfg_path.write_text(json.dumps(cfg))
    pairs = []
    for command, extra in (
        ("mle", {}),
        ("fisher", {"phi": [0.2, 0.4], "mc_samples": 2000}),
        ("scaling", {"probe": {"N_list": [1e2, 1e3, 1e4], "beta": 0.5}, "phi": 0.3}),
    ):
        doc = {**cfg, **extra}
        doc_path = tmp_path / f"{command}.json"
        doc_path.write_text(json.dumps(doc))
        out1 = tmp_path / f"{command}_1.csv"
        out2 = tmp_path / f"{command}_2.csv"
        assert main([command, "--config", str(doc_path), "--output", str(out1)]) == 0
        assert main([command, "--config", str(doc_path), "--output", str(out2)]) == 0
        pairs.append(out1.read_bytes() == out2.read_bytes())
    assert all(pairs)
    report(10, "mle, fisher, and scaling outputs byte-identical across reruns")
