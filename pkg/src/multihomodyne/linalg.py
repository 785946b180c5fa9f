"""Dense matrix primitives, seeded RNG streams, and reference oracles.

The oracles here (LU determinant, minor-expansion cofactors, textbook
Cholesky) are deliberately independent of the closed-form expressions in
:mod:`multihomodyne.gaussian`; property tests compare the two routes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor

from .exceptions import InvalidArgumentError, SingularMatrixError

# Singular values below this fraction of the largest count as zero.
RANK_TOLERANCE = 1e-10


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent, reproducible generator for a (seed, stream) pair.

    Every randomized operation in the package derives its generator this
    way, so experiment outputs are a pure function of the seed regardless
    of execution order or worker count.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


def random_haar_unitary(dim: int, seed: int, stream: int = 0) -> np.ndarray:
    """Draw a Haar-distributed ``dim x dim`` unitary matrix.

    Uses QR of a complex Ginibre matrix with the R diagonal phases folded
    back into Q, which makes the distribution exactly Haar.
    """
    if dim < 1:
        raise InvalidArgumentError(f"dim must be >= 1, got {dim}")
    rng = stream_rng(seed, stream)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    absd = np.abs(d)
    phases = np.where(absd > 0, d, 1.0) / np.where(absd > 0, absd, 1.0)
    return q * phases


def _require_square(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgumentError(f"{name} must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return m


def lu_determinant(m: np.ndarray) -> float:
    """Determinant via pivoted LU factorization.

    Reference implementation used to validate closed-form determinants.
    Singular inputs are fine; the result is then exactly zero.
    """
    m = _require_square(m, "m")
    n = m.shape[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(m, check_finite=False)
    sign = -1.0 if np.count_nonzero(piv != np.arange(n)) % 2 else 1.0
    return float(sign * np.prod(np.diagonal(lu)))


def cofactor_by_minors(m: np.ndarray) -> np.ndarray:
    """Cofactor matrix by direct minor expansion, for matrices up to 10x10.

    Entry (s, t) is (-1)^(s+t) times the determinant of ``m`` with row s
    and column t removed.  O(n^5); intended as a test-scale oracle only.
    """
    m = _require_square(m, "m")
    n = m.shape[0]
    if n > 10:
        raise InvalidArgumentError(f"minor expansion is limited to n <= 10, got {n}")
    if n == 1:
        return np.ones((1, 1))
    cof = np.empty((n, n))
    rows = np.arange(n)
    for s in range(n):
        ridx = rows[rows != s]
        for t in range(n):
            minor = m[np.ix_(ridx, rows[rows != t])]
            cof[s, t] = (-1.0) ** (s + t) * lu_determinant(minor)
    return cof


def numerical_rank(m: np.ndarray, tol: float = RANK_TOLERANCE) -> int:
    """Rank from singular values, relative to the largest one."""
    sv = np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0]))


@dataclass(frozen=True)
class LowRankDecomposition:
    """A matrix ``diag(d) + W`` whose perturbation W has rank at most 2."""

    diag: np.ndarray
    perturbation: np.ndarray
    declared_rank: int = 2

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        w = _require_square(np.asarray(self.perturbation, dtype=float), "perturbation")
        if diag.ndim != 1 or diag.size != w.shape[0]:
            raise InvalidArgumentError(
                f"diag length {diag.shape} does not match perturbation {w.shape}"
            )
        if not 0 <= self.declared_rank <= 2:
            raise InvalidArgumentError(
                f"declared_rank must be in {{0, 1, 2}}, got {self.declared_rank}"
            )
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "perturbation", w)


def lowrank_determinant(z: LowRankDecomposition) -> float:
    """Determinant of ``diag(d) + W`` for rank(W) <= 2, in O(L^2).

    Expands the determinant over column replacements of the diagonal part:
    the full diagonal product, all single replacements (W_ii), and all
    2x2 principal minors of W.  Replacements of three or more columns
    vanish because no submatrix of W exceeds rank 2.  Undefined if the
    true rank of W exceeds ``declared_rank``.
    """
    d = z.diag
    w = z.perturbation
    n = d.size
    # prefix[i] = prod(d[:i]), suffix[i] = prod(d[i:]); zero-safe, no division
    prefix = np.concatenate(([1.0], np.cumprod(d)))
    suffix = np.concatenate((np.cumprod(d[::-1])[::-1], [1.0]))
    det = prefix[n]
    if z.declared_rank >= 1:
        det += float(np.sum(np.diagonal(w) * prefix[:n] * suffix[1:]))
    if z.declared_rank >= 2:
        for i in range(n):
            running = prefix[i]
            for j in range(i + 1, n):
                minor = w[i, i] * w[j, j] - w[i, j] * w[j, i]
                det += minor * running * suffix[j + 1]
                running *= d[j]
    return float(det)


def cholesky_factor(m: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T == m for symmetric positive-definite m.

    Raises :class:`SingularMatrixError` carrying the index of the first
    non-positive pivot, which callers use to report which mode broke
    positive-definiteness.
    """
    m = _require_square(m, "m")
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > 1e-12 * scale:
        raise InvalidArgumentError("matrix is not symmetric within 1e-12")
    n = m.shape[0]
    low = np.zeros_like(m)
    for j in range(n):
        pivot = m[j, j] - low[j, :j] @ low[j, :j]
        if pivot <= 0.0 or not np.isfinite(pivot):
            raise SingularMatrixError(
                f"non-positive pivot {pivot:.3e} at index {j}", pivot_index=j
            )
        low[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            low[j + 1 :, j] = (m[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / low[j, j]
    return low


def wrap_angle(x):
    """Map angles into the principal branch (-pi, pi]."""
    y = np.remainder(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    return np.where(y == -np.pi, np.pi, y)
