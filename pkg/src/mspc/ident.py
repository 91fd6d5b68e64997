"""Identification of multi-step predictors and state-space models.

The k-step prediction of the state is linear in the stacked parameter
``theta_k = vec([G0_k, Gu_k])``; with noisy state measurements the stacked
regression residuals are correlated across overlapping windows, with a
band covariance assembled here from the known disturbance structure.
Weighting the least-squares fit with the inverse of that covariance gives
the maximum-likelihood estimate together with a parameter covariance and
chi-squared confidence ellipsoids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    DomainError,
    InsufficientData,
    SingularInformation,
)
from .linalg import chi2_quantile, check_symmetric, diag_repeat, unvec, vec
from .system import MultiStepModel, Trajectory

STRUCTURE_FULL = "full"
STRUCTURE_FIR = "fir"

# Eigenvalue cutoffs (relative to the largest eigenvalue).
_RESIDUAL_COV_RTOL = 1e-9     # subspace projection of singular residual covariances
_INFORMATION_RTOL = 1e-10     # excitation check on the information matrix


@dataclass(frozen=True)
class RegressionProblem:
    """Stacked k-step regression: targets ~= regressor @ theta_k."""

    k: int
    structure: str
    regressor: np.ndarray  # (n * (T-k+1), dof)
    targets: np.ndarray    # (n * (T-k+1),)
    n: int
    m: int

    @property
    def dof(self) -> int:
        return self.regressor.shape[1]

    @property
    def rows(self) -> int:
        return self.regressor.shape[0]


@dataclass(frozen=True)
class ResidualCovariance:
    """Dense band covariance of the stacked k-step regression residuals."""

    k: int
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ParameterEstimate:
    """Estimated theta_k with its covariance."""

    k: int
    structure: str
    theta: np.ndarray
    cov: np.ndarray
    n: int
    m: int
    projected_rank: "int | None" = None   # set when the residual covariance was singular

    @property
    def dof(self) -> int:
        return self.theta.size

    def g0_hat(self) -> np.ndarray:
        """Estimated initial-state map (zero for FIR structure)."""
        if self.structure == STRUCTURE_FIR:
            return np.zeros((self.n, self.n))
        return unvec(self.theta, self.n, self.n + self.k * self.m)[:, : self.n]

    def gu_hat(self) -> np.ndarray:
        """Estimated input map, shape (n, k*m)."""
        if self.structure == STRUCTURE_FIR:
            return unvec(self.theta, self.n, self.k * self.m)
        return unvec(self.theta, self.n, self.n + self.k * self.m)[:, self.n:]


@dataclass(frozen=True)
class ConfidenceEllipsoid:
    """Ellipsoidal confidence region {theta : (theta-center)' S (theta-center) <= level}."""

    center: np.ndarray
    shape: np.ndarray   # inverse parameter covariance
    level: float
    delta: float

    @property
    def dof(self) -> int:
        return self.center.size

    @property
    def radius(self) -> float:
        """Radius in the whitened coordinates z = cov^{-1/2} (theta - center)."""
        return float(np.sqrt(self.level))

    def contains_error(self, theta_err: np.ndarray) -> bool:
        e = np.asarray(theta_err, dtype=float).ravel()
        if e.size != self.center.size:
            raise DimensionMismatch("parameter error has wrong length")
        return float(e @ self.shape @ e) <= self.level

    def membership(self, theta: np.ndarray) -> bool:
        return self.contains_error(np.asarray(theta, dtype=float).ravel() - self.center)


def true_theta(g0: np.ndarray, gu: np.ndarray, structure: str = STRUCTURE_FULL) -> np.ndarray:
    """Stack prediction matrices into the parameter vector used for regression."""
    if structure == STRUCTURE_FIR:
        return vec(gu)
    return vec(np.hstack([g0, gu]))


def build_regression(data: Trajectory, k: int, structure: str = STRUCTURE_FULL) -> RegressionProblem:
    """Assemble the stacked k-step regression from one trajectory.

    Row j regresses the measurement at time j+k on [xm_j, u_j, ..., u_{j+k-1}];
    the FIR structure drops the initial-state block.
    """
    if k < 1:
        raise DomainError("prediction step k must be >= 1")
    if structure not in (STRUCTURE_FULL, STRUCTURE_FIR):
        raise DomainError(f"unknown structure {structure!r}")
    n, m, t_len = data.n, data.m, data.T
    if t_len < k:
        raise InsufficientData(f"trajectory length {t_len} < prediction step {k}")
    windows = t_len - k + 1
    z = np.zeros((windows, (0 if structure == STRUCTURE_FIR else n) + k * m))
    col = 0
    if structure == STRUCTURE_FULL:
        z[:, :n] = data.measurements[:windows]
        col = n
    for i in range(k):
        z[:, col + i * m: col + (i + 1) * m] = data.inputs[i: i + windows]
    regressor = np.kron(z, np.eye(n))
    targets = data.measurements[k: t_len + 1].ravel()
    if regressor.shape[0] < regressor.shape[1]:
        raise InsufficientData(
            f"{regressor.shape[0]} regression rows for {regressor.shape[1]} unknowns"
        )
    return RegressionProblem(
        k=k, structure=structure, regressor=regressor, targets=targets, n=n, m=m
    )


def residual_covariance(
    gw_k: np.ndarray,
    g0_k: np.ndarray,
    sigma_w: np.ndarray,
    sigma_eps: np.ndarray,
    k: int,
    t_len: int,
) -> ResidualCovariance:
    """Band covariance of the stacked k-step residuals over a length-T record.

    The residual of window j is Gw_k w_[j,j+k-1] - G0_k eps_j + eps_{j+k};
    windows at lag i share k-i disturbances (1 <= i <= k-1), and windows at
    lag k share one measurement noise term.  Blocks beyond lag k vanish.
    """
    gw_k = np.asarray(gw_k, dtype=float)
    g0_k = np.asarray(g0_k, dtype=float)
    sigma_w = check_symmetric(np.asarray(sigma_w, dtype=float), name="sigma_w")
    sigma_eps = check_symmetric(np.asarray(sigma_eps, dtype=float), name="sigma_eps")
    n = g0_k.shape[0]
    q = sigma_w.shape[0]
    if gw_k.shape != (n, k * q):
        raise DimensionMismatch(f"Gw must be {n}x{k * q}, got {gw_k.shape}")
    if g0_k.shape != (n, n) or sigma_eps.shape != (n, n):
        raise DimensionMismatch("G0 and sigma_eps must be n x n")
    if t_len < k:
        raise DimensionMismatch(f"record length {t_len} < prediction step {k}")

    windows = t_len - k + 1
    lag_blocks = [gw_k @ diag_repeat(sigma_w, k) @ gw_k.T + g0_k @ sigma_eps @ g0_k.T + sigma_eps]
    for i in range(1, k):
        shift = np.zeros((k * q, k * q))
        shift[i * q:, : (k - i) * q] = diag_repeat(sigma_w, k - i)
        lag_blocks.append(gw_k @ shift @ gw_k.T)
    lag_blocks.append(-sigma_eps @ g0_k.T)

    matrix = np.zeros((windows * n, windows * n))
    for i, block in enumerate(lag_blocks):
        if i >= windows:
            break
        for j in range(windows - i):
            r0, c0 = j * n, (j + i) * n
            matrix[r0: r0 + n, c0: c0 + n] = block
            if i > 0:
                matrix[c0: c0 + n, r0: r0 + n] = block.T
    return ResidualCovariance(k=k, matrix=matrix)


def _whiten(reg: RegressionProblem, cov: ResidualCovariance):
    """Return the whitened regressor/targets and the retained rank.

    Tries a Cholesky factorization first; if the covariance is singular the
    problem is projected onto the span of its significant eigenvectors.
    """
    s = cov.matrix
    if s.shape != (reg.rows, reg.rows):
        raise DimensionMismatch(
            f"residual covariance is {s.shape}, regression has {reg.rows} rows"
        )
    try:
        chol = scipy.linalg.cholesky(s, lower=True)
        # A tiny pivot means the factorization "succeeded" on a numerically
        # singular matrix; treat that the same as an outright failure.
        if float(np.min(np.diag(chol))) ** 2 > _RESIDUAL_COV_RTOL * float(np.max(np.diag(s))):
            phi_w = scipy.linalg.solve_triangular(chol, reg.regressor, lower=True)
            y_w = scipy.linalg.solve_triangular(chol, reg.targets, lower=True)
            return phi_w, y_w, None
    except scipy.linalg.LinAlgError:
        pass
    w, u = np.linalg.eigh(0.5 * (s + s.T))
    keep = w > _RESIDUAL_COV_RTOL * max(float(w[-1]), 0.0)
    if not np.any(keep):
        raise SingularInformation("residual covariance is numerically zero")
    scale = 1.0 / np.sqrt(w[keep])
    basis = u[:, keep] * scale
    phi_w = basis.T @ reg.regressor
    y_w = basis.T @ reg.targets
    return phi_w, y_w, int(np.count_nonzero(keep))


def mle_estimate(reg: RegressionProblem, cov: ResidualCovariance) -> ParameterEstimate:
    """Weighted least squares with the residual band covariance as weight.

    Solves the normal equations of the whitened problem via Cholesky of the
    information matrix; raises :class:`SingularInformation` when the data is
    not exciting enough.
    """
    phi_w, y_w, rank = _whiten(reg, cov)
    info = phi_w.T @ phi_w
    info = 0.5 * (info + info.T)
    eigvals = np.linalg.eigvalsh(info)
    if eigvals[0] <= _INFORMATION_RTOL * max(float(eigvals[-1]), 0.0):
        raise SingularInformation(
            f"information matrix nearly singular (min eig {eigvals[0]:.3e})"
        )
    chol = scipy.linalg.cho_factor(info)
    theta = scipy.linalg.cho_solve(chol, phi_w.T @ y_w)
    cov_theta = scipy.linalg.cho_solve(chol, np.eye(info.shape[0]))
    return ParameterEstimate(
        k=reg.k,
        structure=reg.structure,
        theta=theta,
        cov=0.5 * (cov_theta + cov_theta.T),
        n=reg.n,
        m=reg.m,
        projected_rank=rank,
    )


def confidence_set(est: ParameterEstimate, delta: float) -> ConfidenceEllipsoid:
    """Chi-squared confidence ellipsoid at level delta around the estimate."""
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    cov = 0.5 * (est.cov + est.cov.T)
    eigvals = np.linalg.eigvalsh(cov)
    if eigvals[0] <= 0.0:
        raise SingularInformation("parameter covariance must be positive definite")
    shape = np.linalg.inv(cov)
    level = chi2_quantile(est.dof, delta)
    return ConfidenceEllipsoid(
        center=est.theta.copy(), shape=0.5 * (shape + shape.T), level=level, delta=delta
    )


def state_space_ls(data: Trajectory, sigma_w: np.ndarray, e_mat: np.ndarray) -> ParameterEstimate:
    """One-step weighted least squares assuming noise-free measurements.

    With per-step residual covariance S = E sigma_w E' the weighting drops
    out of the point estimate, which reduces to ordinary least squares row
    by row, while the parameter covariance is (sum_j z_j z_j')^{-1} kron S.
    """
    e_mat = np.asarray(e_mat, dtype=float)
    sigma_w = check_symmetric(np.asarray(sigma_w, dtype=float), name="sigma_w")
    n, m, t_len = data.n, data.m, data.T
    if e_mat.shape[0] != n or sigma_w.shape[0] != e_mat.shape[1]:
        raise DimensionMismatch("E and sigma_w dimensions are inconsistent")
    s_w = e_mat @ sigma_w @ e_mat.T
    eigvals = np.linalg.eigvalsh(0.5 * (s_w + s_w.T))
    if eigvals[0] <= 1e-12 * max(float(eigvals[-1]), 0.0):
        raise SingularInformation("per-step residual covariance E sigma_w E' is singular")
    z = np.hstack([data.measurements[:t_len], data.inputs])   # (T, n+m)
    gram = z.T @ z
    geig = np.linalg.eigvalsh(gram)
    if geig[0] <= _INFORMATION_RTOL * max(float(geig[-1]), 0.0):
        raise SingularInformation("regressors are not exciting enough")
    cross = data.measurements[1: t_len + 1].T @ z             # (n, n+m)
    gram_inv = np.linalg.inv(gram)
    theta_mat = cross @ gram_inv                              # [A_hat, B_hat]
    cov_theta = np.kron(gram_inv, s_w)
    return ParameterEstimate(
        k=1,
        structure=STRUCTURE_FULL,
        theta=vec(theta_mat),
        cov=0.5 * (cov_theta + cov_theta.T),
        n=n,
        m=m,
    )


def naive_ls(reg: RegressionProblem) -> ParameterEstimate:
    """Ordinary least squares ignoring residual correlation.

    The reported covariance is the classical (Phi' Phi)^{-1} scaled by the
    pooled residual variance; it carries no coverage guarantee and is
    intended as a diagnostic baseline only.
    """
    phi, y = reg.regressor, reg.targets
    info = phi.T @ phi
    eigvals = np.linalg.eigvalsh(0.5 * (info + info.T))
    if eigvals[0] <= _INFORMATION_RTOL * max(float(eigvals[-1]), 0.0):
        raise SingularInformation("regressor is rank deficient")
    chol = scipy.linalg.cho_factor(0.5 * (info + info.T))
    theta = scipy.linalg.cho_solve(chol, phi.T @ y)
    resid = y - phi @ theta
    dof_resid = max(reg.rows - reg.dof, 1)
    noise_var = float(resid @ resid) / dof_resid
    cov_theta = noise_var * scipy.linalg.cho_solve(chol, np.eye(info.shape[0]))
    return ParameterEstimate(
        k=reg.k,
        structure=reg.structure,
        theta=theta,
        cov=0.5 * (cov_theta + cov_theta.T),
        n=reg.n,
        m=reg.m,
    )


def estimate_predictor(
    data: Trajectory,
    k: int,
    gw_k: np.ndarray,
    sigma_w: np.ndarray,
    sigma_eps: np.ndarray,
    structure: str = STRUCTURE_FULL,
    covariance: str = "oracle",
    g0_true: "np.ndarray | None" = None,
) -> ParameterEstimate:
    """Identify the k-step predictor with oracle or plug-in residual weighting.

    The disturbance map Gw_k together with sigma_w/sigma_eps is treated as
    known.  In "oracle" mode the residual covariance uses the supplied true
    G0_k (exact weighting); in "plugin" mode a preliminary unweighted fit
    supplies G0_k and one weighted refinement pass follows.
    """
    reg = build_regression(data, k, structure)
    if structure == STRUCTURE_FIR:
        g0_for_cov = np.zeros((data.n, data.n))
    elif covariance == "oracle":
        if g0_true is None:
            raise DomainError("oracle covariance mode needs the true G0_k")
        g0_for_cov = np.asarray(g0_true, dtype=float)
    elif covariance == "plugin":
        g0_for_cov = naive_ls(reg).g0_hat()
    else:
        raise DomainError(f"unknown covariance mode {covariance!r}")
    cov = residual_covariance(gw_k, g0_for_cov, sigma_w, sigma_eps, k, data.T)
    return mle_estimate(reg, cov)


def model_from_estimates(
    estimates: "list[ParameterEstimate]",
    gw: "list[np.ndarray]",
    sigma_w: np.ndarray,
) -> MultiStepModel:
    """Assemble a multi-step model from per-step estimates and known Gw."""
    horizon = len(estimates)
    if len(gw) != horizon:
        raise DimensionMismatch("need one Gw per estimated step")
    g0 = [est.g0_hat() for est in estimates]
    gu = [est.gu_hat() for est in estimates]
    return MultiStepModel(
        horizon=horizon,
        g0=g0,
        gu=gu,
        gw=[np.asarray(g, dtype=float) for g in gw],
        sigma_w=np.asarray(sigma_w, dtype=float),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def estimate_to_json(est: ParameterEstimate, delta: "float | None" = None) -> dict:
    doc = {
        "k": est.k,
        "structure": est.structure,
        "theta_hat": est.theta.tolist(),
        "cov": est.cov.tolist(),
        "dof": est.dof,
        "n": est.n,
        "m": est.m,
    }
    if est.projected_rank is not None:
        doc["projected_rank"] = est.projected_rank
    if delta is not None:
        doc["delta"] = delta
    return doc


def estimate_from_json(doc: dict) -> ParameterEstimate:
    return ParameterEstimate(
        k=int(doc["k"]),
        structure=doc["structure"],
        theta=np.asarray(doc["theta_hat"], dtype=float),
        cov=np.asarray(doc["cov"], dtype=float),
        n=int(doc["n"]),
        m=int(doc["m"]),
        projected_rank=doc.get("projected_rank"),
    )


def save_estimates(estimates: "list[ParameterEstimate]", path: "str | Path",
                   delta: "float | None" = None) -> None:
    docs = [estimate_to_json(est, delta) for est in estimates]
    Path(path).write_text(json.dumps(docs, indent=2) + "\n")


def load_estimates(path: "str | Path") -> "list[ParameterEstimate]":
    docs = json.loads(Path(path).read_text())
    return [estimate_from_json(doc) for doc in docs]
