"""Command-line driver: validate | fisher | scaling | mle.

Experiments are described by a JSON config, outputs are CSV (with a
'#'-prefixed metadata header echoing the config) or JSON.  Files are
written atomically and identical (config, seed) pairs produce identical
bytes.  HH_THREADS caps worker parallelism (0 = auto).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np
import jsonschema

from . import __version__
from .exceptions import (
    ConfigError,
    InvalidArgumentError,
    MultihomodyneError,
)
from .estimator import crb_experiment
from .fisher import (
    PhaseSchedule,
    asymptotic_fisher,
    fisher_information,
    fixed_gamma_phases,
    heisenberg_schedule,
    mc_fisher_oracle,
    slope_experiment,
)
from .gaussian import (
    ProbeSpec,
    cofactor_matrix,
    covariance_determinant,
    model_with_derivatives,
    output_covariance,
    output_mean,
    phase_space_oracle,
)
from .linalg import cofactor_by_minors, lu_determinant
from .network import channel_derivatives, first_row_decomposition, network_from_dict

_NUMBER_OR_LIST = {
    "oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}, "minItems": 1}]
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["network", "probe"],
    "properties": {
        "network": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "modes"],
            "properties": {
                "kind": {
                    "enum": [
                        "single_phase_in_mesh",
                        "mach_zehnder_like",
                        "interpolated_random",
                        "custom_table",
                    ]
                },
                "modes": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "phase_mode": {"type": "integer", "minimum": 0},
                "mesh": {"enum": ["haar", "identity"]},
                "samples": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["phi", "re", "im"],
                        "properties": {
                            "phi": {"type": "number"},
                            "re": {"type": "array"},
                            "im": {"type": "array"},
                        },
                    },
                },
            },
        },
        "probe": {
            "type": "object",
            "additionalProperties": False,
            "required": ["beta"],
            "properties": {
                "N": {"type": "number"},
                "N_list": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "beta": {"type": "number"},
            },
        },
        "schedule": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": _NUMBER_OR_LIST,
                "alpha": {"type": "number"},
                "sign": {
                    "oneOf": [
                        {"type": "integer"},
                        {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                    ]
                },
            },
        },
        "gamma_fixed": {"type": "number"},
        "theta": {"type": "array", "items": {"type": "number"}},
        "phi": _NUMBER_OR_LIST,
        "phi_true": {"type": "number"},
        "nu": {"type": "integer", "minimum": 1},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "mc_samples": {"type": "integer", "minimum": 1000},
        "grid": {"type": "integer", "minimum": 32},
        "window": {"type": "number", "exclusiveMinimum": 0},
        "output": {"type": "string"},
        "format": {"enum": ["csv", "json"]},
    },
}


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, path=err.json_path)
    return cfg


def _build_instance(cfg: dict, single_n: float | None = None):
    """Network, probe and schedule objects from a validated config."""
    try:
        net = network_from_dict(cfg["network"])
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc), path="$.network") from exc
    probe_cfg = cfg["probe"]
    n = single_n if single_n is not None else probe_cfg.get("N")
    if n is None:
        raise ConfigError("probe.N required for this command", path="$.probe.N")
    try:
        probe = ProbeSpec(total_photons=float(n), squeeze_fraction=float(probe_cfg["beta"]))
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc), path="$.probe.beta") from exc
    schedule = None
    if "schedule" in cfg:
        sc = cfg["schedule"]
        k = sc.get("k", 0.0)
        schedule = PhaseSchedule(
            offsets=np.asarray(k, dtype=float) if isinstance(k, list) else float(k),
            exponent=float(sc.get("alpha", 1.0)),
            sign=np.asarray(sc["sign"], dtype=float) if isinstance(sc.get("sign"), list) else float(sc.get("sign", 1)),
        )
    return net, probe, schedule


def _theta_for(cfg, net, probe, schedule, phi):
    """Oscillator phases: explicit override, else schedule, else zeros."""
    if "theta" in cfg:
        theta = np.asarray(cfg["theta"], dtype=float)
        if theta.size != net.modes:
            raise ConfigError(
                f"theta length {theta.size} != modes {net.modes}", path="$.theta"
            )
        return theta
    if schedule is not None or "gamma_fixed" in cfg:
        ch = first_row_decomposition(net.evaluate(phi), np.zeros(net.modes))
        if schedule is not None:
            return heisenberg_schedule(ch, probe.n_squeezed, schedule)
        return fixed_gamma_phases(ch, float(cfg["gamma_fixed"]))
    return np.zeros(net.modes)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".multihomodyne-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(cfg: dict, columns, rows, footer: dict, output: str | None, fmt: str) -> None:
    config_echo = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    if fmt == "csv":
        lines = [f"# multihomodyne {__version__}", f"# config {config_echo}"]
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        for key, value in footer.items():
            lines.append(f"# {key} = {_fmt(value)}")
        text = "\n".join(lines) + "\n"
    else:
        doc = {
            "meta": {"version": __version__, "config": cfg},
            "columns": list(columns),
            "rows": [[(bool(v) if isinstance(v, (bool, np.bool_)) else float(v)) for v in row] for row in rows],
            "summary": {k: float(v) for k, v in footer.items()},
        }
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if output:
        _write_atomic(output, text)
    else:
        sys.stdout.write(text)


def _workers() -> int:
    raw = os.environ.get("HH_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    if n == 0:
        return os.cpu_count() or 1
    return max(1, n)


def cmd_validate(cfg: dict) -> int:
    """Run the oracle-equivalence suite on the configured instance."""
    net, probe, schedule = _build_instance(cfg, single_n=cfg["probe"].get("N", 10.0))
    phi = cfg.get("phi", cfg.get("phi_true", 0.3))
    if isinstance(phi, list):
        phi = phi[0]
    theta = _theta_for(cfg, net, probe, schedule, phi)
    u = net.evaluate(phi)
    ch = first_row_decomposition(u, theta)

    checks = []
    cov = output_covariance(probe, ch)
    det_ref = lu_determinant(cov)
    det_err = abs(covariance_determinant(probe, ch) - det_ref) / max(abs(det_ref), 1e-300)
    checks.append(("determinant_identity", det_err, 1e-10))
    if net.modes <= 10:
        cof_ref = cofactor_by_minors(cov)
        scale = max(np.abs(cof_ref).max(), 1e-300)
        cof_err = float(np.abs(cofactor_matrix(probe, ch) - cof_ref).max() / scale)
        checks.append(("cofactor_identity", cof_err, 1e-9))
    mean_ps, cov_ps = phase_space_oracle(probe, u, theta)
    ps_err = float(
        max(np.abs(mean_ps - output_mean(probe, ch)).max(), np.abs(cov_ps - cov).max())
    )
    checks.append(("phase_space_path", ps_err, 1e-12))
    try:
        model = model_with_derivatives(net, probe, theta, phi)
        jacobi = float(np.sum(model.cofactor * model.d_cov))
        jac_err = abs(model.d_det - jacobi) / max(abs(model.d_det), abs(jacobi), 1e-300)
        checks.append(("jacobi_derivative", jac_err, 1e-8))
    except InvalidArgumentError:
        print("SKIP jacobi_derivative (network not differentiable at phi)")

    ok = True
    for name, err, tol in checks:
        status = "PASS" if err <= tol else "FAIL"
        ok = ok and err <= tol
        print(f"{status} {name} max_err={err:.3e} tol={tol:.0e}")
    return 0 if ok else 1


def cmd_fisher(cfg: dict, output: str | None, fmt: str) -> int:
    net, probe, schedule = _build_instance(cfg)
    phis = cfg.get("phi", 0.3)
    phis = [float(p) for p in (phis if isinstance(phis, list) else [phis])]
    seed = int(cfg.get("seed", 0))
    samples = int(cfg.get("mc_samples", 10000))
    columns = [
        "phi",
        "term1",
        "term2",
        "term3",
        "total",
        "asymptotic",
        "mc_estimate",
        "mc_stderr",
        "mc_within_3se",
    ]
    rows = []
    for i, phi in enumerate(phis):
        theta = _theta_for(cfg, net, probe, schedule, phi)
        fb = fisher_information(net, probe, theta, phi)
        if schedule is not None and schedule.exponent == 1.0:
            ch = channel_derivatives(net, phi, theta)
            asym = asymptotic_fisher(ch, schedule, probe.n_squeezed, probe.n_displaced)
        else:
            asym = np.nan
        est, se = mc_fisher_oracle(net, probe, theta, phi, samples, seed, stream=i)
        agree = abs(fb.total - est) <= 3 * se
        rows.append(
            (phi, fb.displacement_term, fb.determinant_term, fb.trace_term, fb.total, asym, est, se, agree)
        )
    _emit(cfg, columns, rows, {}, output, fmt)
    return 0


def cmd_scaling(cfg: dict, output: str | None, fmt: str) -> int:
    net, _, schedule = _build_instance(cfg, single_n=1.0)
    n_list = cfg["probe"].get("N_list")
    if not n_list:
        raise ConfigError("probe.N_list required for scaling", path="$.probe.N_list")
    beta = float(cfg["probe"]["beta"])
    phi = cfg.get("phi", 0.3)
    if isinstance(phi, list):
        phi = phi[0]
    gamma_fixed = cfg.get("gamma_fixed")
    if schedule is None and gamma_fixed is None:
        raise ConfigError("scaling needs schedule or gamma_fixed", path="$.schedule")
    result = slope_experiment(
        net, n_list, beta, float(phi), schedule=schedule, gamma_fixed=gamma_fixed
    )
    columns = ["N", "fisher_total", "asymptotic", "det_times_NS"]
    rows = list(
        zip(result.photon_numbers, result.fisher_totals, result.asymptotics, result.det_times_ns)
    )
    _emit(cfg, columns, rows, {"slope": result.slope}, output, fmt)
    return 0


def cmd_mle(cfg: dict, output: str | None, fmt: str) -> int:
    net, probe, schedule = _build_instance(cfg)
    phi_true = float(cfg.get("phi_true", 0.3))
    nu = int(cfg.get("nu", 1000))
    trials = int(cfg.get("trials", 200))
    seed = int(cfg.get("seed", 0))
    grid = int(cfg.get("grid", 64))
    width = float(cfg.get("window", 1.0))
    theta = _theta_for(cfg, net, probe, schedule, phi_true)
    result = crb_experiment(
        net,
        probe,
        theta,
        phi_true,
        nu,
        trials,
        seed,
        window=(phi_true - width / 2, phi_true + width / 2),
        grid=grid,
        workers=_workers(),
    )
    columns = ["trial", "phi_hat", "score_residual", "failed"]
    rows = [
        (t, result.estimates[t], result.score_residuals[t], bool(result.failed[t]))
        for t in range(trials)
    ]
    footer = {"variance": result.variance, "crb": result.crb, "ratio": result.ratio}
    _emit(cfg, columns, rows, footer, output, fmt)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="multihomodyne",
        description="Squeezed-probe multi-channel homodyne metrology experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", "fisher", "scaling", "mle"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--output", default=None)
        p.add_argument("--format", choices=("csv", "json"), default=None)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        fmt = args.format or cfg.get("format", "csv")
        output = args.output or cfg.get("output")
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "fisher":
            return cmd_fisher(cfg, output, fmt)
        if args.command == "scaling":
            return cmd_scaling(cfg, output, fmt)
        return cmd_mle(cfg, output, fmt)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MultihomodyneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
