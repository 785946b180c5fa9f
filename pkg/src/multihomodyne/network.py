"""Parameterized families of passive linear networks.

A network maps a real parameter ``phi`` to an M x M unitary matrix.  Only
the matrix's first row matters downstream: its moduli give the per-channel
exit probabilities and its arguments the acquired phases for a probe
injected into channel 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError
from .linalg import random_haar_unitary, stream_rng, wrap_angle

UNITARITY_TOLERANCE = 1e-12
# Below this probability a channel's phase is undefined; it is set to zero,
# which is observationally invisible because every formula weights the phase
# by sqrt(P) or P.
ZERO_PROBABILITY = 1e-14


def default_step(phi: float) -> float:
    """Default central-difference step, scaled to the working point."""
    return 1e-6 * (1.0 + abs(phi))


def unitarity_defect(u: np.ndarray) -> float:
    """Max-norm deviation of u†u from the identity."""
    u = np.asarray(u)
    return float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())


def _require_unitary(u: np.ndarray, name: str) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise InvalidArgumentError(f"{name} must be square, got shape {u.shape}")
    defect = unitarity_defect(u)
    if defect > UNITARITY_TOLERANCE:
        raise InvalidArgumentError(f"{name} is not unitary: max |u†u - I| = {defect:.3e}")
    return u


class ParametrizedNetwork:
    """Base class: a family phi -> U(phi) of unitaries."""

    kind = "abstract"

    def __init__(self, modes: int):
        if modes < 1:
            raise InvalidArgumentError(f"modes must be >= 1, got {modes}")
        self.modes = int(modes)

    def evaluate(self, phi: float) -> np.ndarray:
        raise NotImplementedError

    def _check_phi(self, phi: float) -> float:
        phi = float(phi)
        if not np.isfinite(phi):
            raise InvalidArgumentError(f"phi must be finite, got {phi}")
        return phi


class PhaseInMeshNetwork(ParametrizedNetwork):
    """U(phi) = V1 @ diag(..., e^{i phi}, ...) @ V2 with the phase on one mode."""

    kind = "single_phase_in_mesh"

    def __init__(self, v1: np.ndarray, v2: np.ndarray, phase_mode: int = 0):
        v1 = _require_unitary(v1, "v1")
        v2 = _require_unitary(v2, "v2")
        if v1.shape != v2.shape:
            raise InvalidArgumentError("v1 and v2 must have matching shapes")
        super().__init__(v1.shape[0])
        if not 0 <= phase_mode < self.modes:
            raise InvalidArgumentError(f"phase_mode {phase_mode} out of range for {self.modes} modes")
        self.v1 = v1
        self.v2 = v2
        self.phase_mode = int(phase_mode)

    def evaluate(self, phi: float) -> np.ndarray:
        phi = self._check_phi(phi)
        d = np.ones(self.modes, dtype=complex)
        d[self.phase_mode] = np.exp(1j * phi)
        return self.v1 @ (d[:, None] * self.v2)


def _balanced_beamsplitter(modes: int) -> np.ndarray:
    b = np.eye(modes, dtype=complex)
    b[0, 0] = b[1, 1] = 1 / np.sqrt(2)
    b[0, 1] = b[1, 0] = 1j / np.sqrt(2)
    return b


class MachZehnderNetwork(PhaseInMeshNetwork):
    """Balanced beamsplitter, phase on the first arm, balanced beamsplitter."""

    kind = "mach_zehnder_like"

    def __init__(self, modes: int = 2):
        if modes < 2:
            raise InvalidArgumentError("a Mach-Zehnder arrangement needs at least 2 modes")
        b = _balanced_beamsplitter(modes)
        super().__init__(b, b, phase_mode=0)


class GeneratorNetwork(ParametrizedNetwork):
    """U(phi) = V1 @ exp(i phi H) @ V2 for a fixed Hermitian generator H.

    The generator is eigendecomposed once; evaluation is two dense
    products plus a diagonal phase.
    """

    kind = "interpolated_random"

    def __init__(self, v1: np.ndarray, v2: np.ndarray, generator: np.ndarray):
        v1 = _require_unitary(v1, "v1")
        v2 = _require_unitary(v2, "v2")
        h = np.asarray(generator, dtype=complex)
        if h.shape != v1.shape or v1.shape != v2.shape:
            raise InvalidArgumentError("v1, v2 and generator must share one shape")
        if np.abs(h - h.conj().T).max() > 1e-12 * max(1.0, np.abs(h).max()):
            raise InvalidArgumentError("generator must be Hermitian")
        super().__init__(h.shape[0])
        self.v1 = v1
        self.v2 = v2
        self.generator = h
        evals, evecs = np.linalg.eigh(h)
        self._evals = evals
        self._pre = v1 @ evecs
        self._post = evecs.conj().T @ v2

    def evaluate(self, phi: float) -> np.ndarray:
        phi = self._check_phi(phi)
        return (self._pre * np.exp(1j * phi * self._evals)) @ self._post


class TableNetwork(ParametrizedNetwork):
    """Tabulated (phi, U) pairs with exact-match lookup.

    Interpolating between unitaries does not produce a unitary, so lookup
    is exact (within 1e-12 on phi) and anything else is out of domain.
    """

    kind = "custom_table"

    def __init__(self, phis, unitaries):
        unitaries = [_require_unitary(u, f"table entry {i}") for i, u in enumerate(unitaries)]
        if len(phis) != len(unitaries) or not unitaries:
            raise InvalidArgumentError("table needs matching, non-empty phi and unitary lists")
        modes = unitaries[0].shape[0]
        if any(u.shape[0] != modes for u in unitaries):
            raise InvalidArgumentError("all table unitaries must share one dimension")
        super().__init__(modes)
        self.phis = np.asarray(phis, dtype=float)
        self.unitaries = unitaries

    def evaluate(self, phi: float) -> np.ndarray:
        phi = self._check_phi(phi)
        hits = np.nonzero(np.abs(self.phis - phi) <= 1e-12)[0]
        if hits.size == 0:
            raise InvalidArgumentError(f"phi={phi} is not tabulated; interpolation is not supported")
        return self.unitaries[hits[0]]


def random_phase_network(modes: int, seed: int, phase_mode: int = 0) -> PhaseInMeshNetwork:
    """Phase-in-mesh network with Haar-random surrounding meshes."""
    return PhaseInMeshNetwork(
        random_haar_unitary(modes, seed, stream=0),
        random_haar_unitary(modes, seed, stream=1),
        phase_mode=phase_mode,
    )


def diagonal_phase_network(modes: int, phase_mode: int = 0) -> PhaseInMeshNetwork:
    """Identity meshes: U(phi) applies e^{i phi} to one mode.  Analytic ground truth."""
    eye = np.eye(modes, dtype=complex)
    return PhaseInMeshNetwork(eye, eye, phase_mode=phase_mode)


def random_generator_network(modes: int, seed: int) -> GeneratorNetwork:
    """Generator network with Haar meshes and a unit-norm random Hermitian generator."""
    rng = stream_rng(seed, stream=2)
    g = rng.standard_normal((modes, modes)) + 1j * rng.standard_normal((modes, modes))
    h = (g + g.conj().T) / 2
    h = h / max(np.linalg.norm(h, 2), 1e-30)
    return GeneratorNetwork(
        random_haar_unitary(modes, seed, stream=0),
        random_haar_unitary(modes, seed, stream=1),
        h,
    )


@dataclass(frozen=True)
class ChannelDecomposition:
    """First-row channel data of a unitary, relative to local-oscillator phases.

    ``probabilities[j]`` is |U_1j|^2, ``network_phases[j]`` is arg(U_1j) on
    (-pi, pi], ``relative_phases`` subtracts the oscillator phases, and the
    optional ``dp``/``dgamma`` hold d/dphi of probabilities and network
    phases.
    """

    probabilities: np.ndarray
    network_phases: np.ndarray
    oscillator_phases: np.ndarray
    relative_phases: np.ndarray
    dp: np.ndarray | None = None
    dgamma: np.ndarray | None = None

    @property
    def modes(self) -> int:
        return self.probabilities.size

    def require_derivatives(self) -> None:
        if self.dp is None or self.dgamma is None:
            raise InvalidArgumentError("channel decomposition lacks derivative fields")


def first_row_decomposition(u: np.ndarray, theta) -> ChannelDecomposition:
    """Channel probabilities and phases from the first row of ``u``."""
    u = np.asarray(u, dtype=complex)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size != u.shape[1]:
        raise InvalidArgumentError(f"theta length {theta.size} != mode count {u.shape[1]}")
    row = u[0]
    probs = np.abs(row) ** 2
    gbar = np.where(probs < ZERO_PROBABILITY, 0.0, np.angle(row))
    return ChannelDecomposition(
        probabilities=probs,
        network_phases=gbar,
        oscillator_phases=theta,
        relative_phases=gbar - theta,
    )


def channel_derivatives(
    net: ParametrizedNetwork, phi: float, theta, step: float | None = None
) -> ChannelDecomposition:
    """Channel decomposition at ``phi`` with central-difference derivatives.

    Phase derivatives are taken on the principal branch of the phase
    difference so branch cuts of arg never contaminate them; channels with
    negligible probability get zero phase derivative.
    """
    if step is None:
        step = default_step(phi)
    if step <= 0:
        raise InvalidArgumentError(f"step must be positive, got {step}")
    base = first_row_decomposition(net.evaluate(phi), theta)
    plus = first_row_decomposition(net.evaluate(phi + step), theta)
    minus = first_row_decomposition(net.evaluate(phi - step), theta)
    dp = (plus.probabilities - minus.probabilities) / (2 * step)
    dgamma = wrap_angle(plus.network_phases - minus.network_phases) / (2 * step)
    dark = np.minimum(
        base.probabilities, np.minimum(plus.probabilities, minus.probabilities)
    ) < ZERO_PROBABILITY
    dgamma = np.where(dark, 0.0, dgamma)
    return ChannelDecomposition(
        probabilities=base.probabilities,
        network_phases=base.network_phases,
        oscillator_phases=base.oscillator_phases,
        relative_phases=base.relative_phases,
        dp=dp,
        dgamma=dgamma,
    )


def network_from_dict(cfg: dict) -> ParametrizedNetwork:
    """Build a network from its JSON-style description."""
    if not isinstance(cfg, dict):
        raise InvalidArgumentError("network description must be an object")
    kind = cfg.get("kind")
    modes = cfg.get("modes")
    if kind == "single_phase_in_mesh":
        phase_mode = cfg.get("phase_mode", 0)
        if cfg.get("mesh", "haar") == "identity":
            return diagonal_phase_network(modes, phase_mode)
        return random_phase_network(modes, cfg.get("seed", 0), phase_mode)
    if kind == "mach_zehnder_like":
        return MachZehnderNetwork(modes)
    if kind == "interpolated_random":
        return random_generator_network(modes, cfg.get("seed", 0))
    if kind == "custom_table":
        samples = cfg.get("samples", [])
        phis = [s["phi"] for s in samples]
        mats = [np.asarray(s["re"], dtype=float) + 1j * np.asarray(s["im"], dtype=float) for s in samples]
        net = TableNetwork(phis, mats)
        if modes is not None and net.modes != modes:
            raise InvalidArgumentError(
                f"declared modes {modes} does not match table dimension {net.modes}"
            )
        return net
    raise InvalidArgumentError(f"unknown network kind {kind!r}")


def load_network(path: str) -> ParametrizedNetwork:
    """Load a network description from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))
