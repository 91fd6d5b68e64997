"""Dense linear-algebra and probability kernels used throughout the package.

All operations are pure functions of their inputs; matrices are plain
float64 numpy arrays.  ``Rng`` is an immutable seed handle, so the same
handle always reproduces the same stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DimensionMismatch, DomainError, IndefiniteMatrix, NotSymmetric

# Tolerances for symmetry / definiteness checks.
SYMMETRY_RTOL = 1e-12
PSD_CLIP_RTOL = 1e-8

kron = np.kron


def vec(a: np.ndarray) -> np.ndarray:
    """Stack the columns of ``a`` into a single vector."""
    return np.asarray(a, dtype=float).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`: reshape a vector into a rows-by-cols matrix."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size != rows * cols:
        raise DimensionMismatch(f"cannot reshape {v.size} entries to {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def check_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    return a


def check_symmetric(a: np.ndarray, rtol: float = SYMMETRY_RTOL, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a float array, raising :class:`NotSymmetric` if needed."""
    a = check_square(a, name)
    scale = max(float(np.abs(a).max(initial=0.0)), 1.0)
    if np.abs(a - a.T).max(initial=0.0) > rtol * scale:
        raise NotSymmetric(f"{name} is not symmetric to relative tolerance {rtol:g}")
    return a


def assert_psd(a: np.ndarray, name: str = "matrix", rtol: float = PSD_CLIP_RTOL) -> np.ndarray:
    """Check symmetry and positive semidefiniteness up to tolerance."""
    a = check_symmetric(a, name=name)
    if a.size == 0:
        return a
    w = np.linalg.eigvalsh(0.5 * (a + a.T))
    if w[0] < -rtol * max(float(w[-1]), 0.0):
        raise IndefiniteMatrix(f"{name} has eigenvalue {w[0]:.6e} below tolerance")
    return a


def assert_spd(a: np.ndarray, name: str = "matrix", rtol: float = 1e-12) -> np.ndarray:
    """Check symmetry and strict positive definiteness."""
    a = check_symmetric(a, name=name)
    w = np.linalg.eigvalsh(0.5 * (a + a.T))
    if a.size == 0 or w[0] <= rtol * max(float(w[-1]), 0.0):
        raise IndefiniteMatrix(f"{name} must be positive definite (min eig {w[0] if a.size else 'n/a'})")
    return a


def sym_sqrt(a: np.ndarray, rtol: float = PSD_CLIP_RTOL) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in ``[-rtol * lam_max, 0]`` are clamped to zero; anything
    more negative raises :class:`IndefiniteMatrix`.
    """
    a = check_symmetric(a)
    if a.size == 0:
        return a.copy()
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    lam_max = max(float(w[-1]), 0.0)
    if w[0] < -rtol * lam_max:
        raise IndefiniteMatrix(f"matrix has eigenvalue {w[0]:.6e}, not PSD")
    w = np.clip(w, 0.0, None)
    s = (v * np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def psd_sqrt_factor(cov: np.ndarray, rtol: float = PSD_CLIP_RTOL) -> np.ndarray:
    """A (not necessarily symmetric) factor L with L @ L.T = cov.

    Uses the eigendecomposition so that singular covariances are accepted.
    """
    cov = check_symmetric(cov, name="covariance")
    if cov.size == 0:
        return cov.copy()
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    lam_max = max(float(w[-1]), 0.0)
    if w[0] < -rtol * lam_max:
        raise IndefiniteMatrix(f"covariance has eigenvalue {w[0]:.6e}, not PSD")
    return v * np.sqrt(np.clip(w, 0.0, None))


def diag_repeat(block: np.ndarray, k: int) -> np.ndarray:
    """Block-diagonal matrix with ``k`` copies of ``block``."""
    block = np.asarray(block, dtype=float)
    if k < 0:
        raise DomainError("repetition count must be nonnegative")
    return np.kron(np.eye(k), block)


# ---------------------------------------------------------------------------
# Chi-squared distribution
# ---------------------------------------------------------------------------


def chi2_cdf(dof: int, x: float) -> float:
    """CDF of the chi-squared distribution with ``dof`` degrees of freedom."""
    _check_dof(dof)
    if x <= 0.0:
        return 0.0
    return float(special.gammainc(dof / 2.0, x / 2.0))


def chi2_pdf(dof: int, x: float) -> float:
    """Density of the chi-squared distribution."""
    _check_dof(dof)
    if x < 0.0:
        return 0.0
    half = dof / 2.0
    if x == 0.0:
        if dof == 1:
            return math.inf
        if dof == 2:
            return 0.5
        return 0.0
    log_pdf = (half - 1.0) * math.log(x) - x / 2.0 - special.gammaln(half) - half * math.log(2.0)
    return float(math.exp(log_pdf))


def chi2_quantile(dof: int, prob: float) -> float:
    """Quantile of the chi-squared distribution.

    Inverts the regularized lower incomplete gamma function with a
    safeguarded Newton iteration started from the Wilson-Hilferty
    approximation.  The returned value q satisfies |CDF(q) - prob| <= 1e-12
    (well inside the 1e-10 contract).
    """
    _check_dof(dof)
    if not (0.0 <= prob < 1.0):
        raise DomainError(f"probability must lie in [0, 1), got {prob}")
    if prob == 0.0:
        return 0.0

    d = float(dof)
    z = float(special.ndtri(prob))
    x = d * (1.0 - 2.0 / (9.0 * d) + z * math.sqrt(2.0 / (9.0 * d))) ** 3
    if not math.isfinite(x) or x <= 0.0:
        x = d * 1e-3

    # Bracket the root: lo has CDF < prob, hi has CDF >= prob.
    lo, hi = 0.0, max(x, 1.0)
    for _ in range(400):
        if chi2_cdf(dof, hi) >= prob:
            break
        lo, hi = hi, hi * 2.0
    x = min(max(x, lo + 0.25 * (hi - lo)), hi)

    for _ in range(200):
        f = chi2_cdf(dof, x) - prob
        if f >= 0.0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        if abs(f) <= 1e-13 or (hi - lo) <= 1e-15 * max(hi, 1.0):
            break
        dfdx = chi2_pdf(dof, x)
        if dfdx > 0.0 and math.isfinite(dfdx):
            step = f / dfdx
            x_new = x - step
        else:
            x_new = math.nan
        if not (lo < x_new < hi) or not math.isfinite(x_new):
            x_new = 0.5 * (lo + hi)
        x = x_new
    return float(x)


def _check_dof(dof: int) -> None:
    if int(dof) != dof or dof < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {dof}")


# ---------------------------------------------------------------------------
# Maximum of an affine norm over a ball
# ---------------------------------------------------------------------------


def max_norm_affine_over_ball(a: np.ndarray, m: np.ndarray, r: float) -> float:
    """Exact maximum of ``||a + M z||`` over the ball ``||z|| <= r``.

    The squared objective is a convex quadratic, so the maximum lies on the
    sphere.  With the eigenstructure of M^T M (via SVD of M) the stationarity
    condition ``(lam I - M^T M) z = M^T a`` with ``lam >= lam_max`` reduces to
    a one-dimensional secular equation in the shifted multiplier, solved by
    a safeguarded Newton iteration; the rank-deficient ("hard") case adds a
    component along the top eigenspace.
    """
    a = np.asarray(a, dtype=float).ravel()
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"M must be a matrix, got shape {m.shape}")
    if m.shape[0] != a.size:
        raise DimensionMismatch(f"incompatible shapes: a has {a.size} rows, M has {m.shape[0]}")
    if r < 0.0:
        raise DomainError("radius must be nonnegative")
    if r == 0.0 or m.size == 0 or not np.any(m):
        return float(np.linalg.norm(a))
    # Absorb the radius into the map: max over the unit ball of ||a + (rM) y||.
    m = r * m
    if not np.any(m):
        return float(np.linalg.norm(a))

    _, sig, vt = np.linalg.svd(m, full_matrices=False)
    d = sig**2
    beta = vt @ (m.T @ a)
    d_max = float(d[0])
    gap = d_max - d  # >= 0, zero on the top eigenspace
    top = gap <= 1e-12 * max(d_max, 1.0)
    beta_top_sq = float(np.sum(beta[top] ** 2))
    beta_rest = beta[~top]
    gap_rest = gap[~top]

    def norm_sq(t: float) -> float:
        s = beta_top_sq / t**2 if beta_top_sq > 0.0 else 0.0
        if beta_rest.size:
            s += float(np.sum((beta_rest / (t + gap_rest)) ** 2))
        return s

    r = 1.0
    r_sq = 1.0
    b_norm = float(np.linalg.norm(beta))
    t_hi = b_norm

    hard = b_norm == 0.0
    t_lo = 0.0
    if not hard:
        t = t_hi
        found = False
        for _ in range(4000):
            t *= 0.5
            if norm_sq(t) >= r_sq:
                t_lo = t
                found = True
                break
            if t < 1e-300:
                break
        if not found:
            hard = True

    if hard:
        # No multiplier makes ||z|| = r from the regular branch: the solution
        # sits at the top eigenvalue with an extra top-eigenspace component.
        coords = np.zeros_like(beta)
        if beta_rest.size:
            coords[~top] = beta_rest / gap_rest
        interior_sq = float(np.sum(coords**2))
        tau = math.sqrt(max(r_sq - interior_sq, 0.0))
        top_index = int(np.argmax(top))
        coords[top_index] += tau
    else:
        t = max(t_lo, min(t_hi, math.sqrt(beta_top_sq) / r if beta_top_sq > 0 else t_lo))
        if not (t_lo <= t <= t_hi):
            t = 0.5 * (t_lo + t_hi)
        for _ in range(200):
            n_sq = norm_sq(t)
            n = math.sqrt(n_sq)
            if n >= r:
                t_lo = max(t_lo, t)
            else:
                t_hi = min(t_hi, t)
            if abs(n - r) <= 1e-13 * r or (t_hi - t_lo) <= 1e-15 * max(t_hi, 1e-300):
                break
            # Newton step on h(t) = 1/r - 1/n(t).
            h = 1.0 / r - 1.0 / n
            dn_sq = -2.0 * beta_top_sq / t**3 if beta_top_sq > 0.0 else 0.0
            if beta_rest.size:
                dn_sq += -2.0 * float(np.sum(beta_rest**2 / (t + gap_rest) ** 3))
            dh = -dn_sq / (2.0 * n_sq * n)
            t_new = t - h / dh if dh != 0.0 else math.nan
            if not (t_lo < t_new < t_hi) or not math.isfinite(t_new):
                t_new = 0.5 * (t_lo + t_hi)
            t = t_new
        coords = beta.copy()
        coords[top] = beta[top] / t
        coords[~top] = beta_rest / (t + gap_rest)

    z = vt.T @ coords
    value = float(np.linalg.norm(a + m @ z))
    return max(value, float(np.linalg.norm(a)))


# ---------------------------------------------------------------------------
# Random streams and Gaussian sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rng:
    """Immutable handle for a reproducible random stream.

    The same ``(master_seed, stream_index)`` pair always reproduces the same
    sample sequence; distinct stream indices give statistically independent
    streams.  Being a value, an ``Rng`` can be shared freely; concurrent use
    requires distinct stream indices.
    """

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        """A fresh numpy generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_index,))
        return np.random.default_rng(seq)

    def stream(self, index: int) -> "Rng":
        """The sibling stream with the given index under the same master seed."""
        return Rng(self.master_seed, index)


def generator_of(rng: "Rng | np.random.Generator") -> np.random.Generator:
    """Accept either an Rng value or an already-instantiated generator."""
    if isinstance(rng, Rng):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected Rng or numpy Generator, got {type(rng)!r}")


def sample_gaussian(
    mean: np.ndarray,
    cov: np.ndarray,
    rng: "Rng | np.random.Generator",
    size: int | None = None,
) -> np.ndarray:
    """Draw from N(mean, cov); cov may be singular (eigendecomposition root)."""
    mean = np.asarray(mean, dtype=float).ravel()
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (mean.size, mean.size):
        raise DimensionMismatch(f"mean has {mean.size} entries but cov has shape {cov.shape}")
    gen = generator_of(rng)
    factor = psd_sqrt_factor(cov)
    shape = (factor.shape[1],) if size is None else (size, factor.shape[1])
    z = gen.standard_normal(shape)
    return mean + z @ factor.T
