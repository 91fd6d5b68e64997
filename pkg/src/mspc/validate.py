"""Monte Carlo validation of the control and identification pipeline.

Chance-constraint certification counts violations per constraint row and
horizon step under two sampling modes: noise only (fixed true system) and
noise plus parameters (per-step predictor matrices redrawn from the
estimated Gaussian each sample).  Exact Clopper-Pearson upper bounds turn
the counts into one-sided certificates.  Sampling is organized in
fixed-size batches with per-batch derived streams, so reports are
byte-identical for a given master seed regardless of how many worker
threads evaluate the batches.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import DimensionMismatch, SingularInformation
from .ident import (
    ParameterEstimate,
    STRUCTURE_FIR,
    STRUCTURE_FULL,
    estimate_predictor,
    state_space_ls,
    true_theta,
)
from .linalg import Rng, chi2_quantile, psd_sqrt_factor
from .ocp import (
    OcpSpec,
    build_nominal_qp_multistep,
    build_nominal_qp_statespace,
    build_robust_socp_multistep,
    build_tightening_table,
)
from .solver import SolverOptions, solve
from .system import GaussianBelief, LinearSystem, build_multistep, simulate

_BATCH = 4096
_THREADS_ENV = "MSPC_THREADS"


def thread_count() -> int:
    """Worker threads for batch evaluation, from the environment (default 1)."""
    try:
        return max(1, int(os.environ.get(_THREADS_ENV, "1")))
    except ValueError:
        return 1


def clopper_pearson_upper(violations: int, samples: int, confidence: float = 0.99) -> float:
    """Exact one-sided upper confidence bound for a binomial proportion."""
    if samples < 1:
        raise DimensionMismatch("need at least one sample")
    if violations >= samples:
        return 1.0
    return float(stats.beta.ppf(confidence, violations + 1, samples - violations))


def clopper_pearson_interval(hits: int, samples: int, confidence: float = 0.99):
    """Exact two-sided confidence interval for a binomial proportion."""
    alpha = 1.0 - confidence
    low = 0.0 if hits == 0 else float(stats.beta.ppf(alpha / 2.0, hits, samples - hits + 1))
    high = 1.0 if hits == samples else float(
        stats.beta.ppf(1.0 - alpha / 2.0, hits + 1, samples - hits)
    )
    return low, high


@dataclass(frozen=True)
class ViolationEntry:
    j: int
    k: int
    samples: int
    violations: int
    rate: float
    upper99: float


@dataclass(frozen=True)
class ViolationReport:
    mode: str                     # "noise_only" | "noise_and_parameters"
    n_samples: int
    entries: "list[ViolationEntry]"

    @property
    def worst_upper99(self) -> float:
        return max((e.upper99 for e in self.entries), default=0.0)

    def certifies(self, budget: float, margin: float = 0.0) -> bool:
        """True when every per-row upper bound stays within budget + margin."""
        return all(e.upper99 <= budget + margin for e in self.entries)


@dataclass(frozen=True)
class SampledParameterTruth:
    """Sampling model: per-step predictors drawn from the estimated Gaussians."""

    estimates: "list[ParameterEstimate]"
    gw: "list[np.ndarray]"
    sigma_w: np.ndarray


def _batch_generator(rng: Rng, batch: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=rng.master_seed, spawn_key=(rng.stream_index, batch))
    return np.random.default_rng(seq)


def _batch_sizes(n_samples: int) -> "list[int]":
    sizes = [_BATCH] * (n_samples // _BATCH)
    if n_samples % _BATCH:
        sizes.append(n_samples % _BATCH)
    return sizes


def estimate_violation(
    truth: "LinearSystem | SampledParameterTruth",
    u: np.ndarray,
    spec: OcpSpec,
    n_samples: int,
    rng: Rng,
    threads: "int | None" = None,
) -> ViolationReport:
    """Empirical per-(row, step) violation rates of H_j' x_k <= 1.

    ``truth`` selects the sampling mode: a :class:`LinearSystem` propagates
    noise through the fixed system; a :class:`SampledParameterTruth` draws
    the k-step predictor parameters per sample on top of the x0/w noise.
    """
    if n_samples < 1000:
        raise DimensionMismatch("certification needs at least 1000 samples")
    u = np.asarray(u, dtype=float).ravel()
    n_u, m = spec.horizon, spec.m
    if u.size < n_u * m:
        raise DimensionMismatch(f"input sequence must cover {n_u} steps of {m} inputs")
    u = u[: n_u * m]
    mode = "noise_only" if isinstance(truth, LinearSystem) else "noise_and_parameters"
    if mode == "noise_and_parameters":
        if len(truth.estimates) < n_u or len(truth.gw) < n_u:
            raise DimensionMismatch("need one estimate and Gw per horizon step")

    sizes = _batch_sizes(n_samples)
    workers = thread_count() if threads is None else max(1, threads)

    x0_factor = psd_sqrt_factor(spec.init.cov)
    if mode == "noise_only":
        w_factor = psd_sqrt_factor(truth.sigma_w)
        count_batch = _make_noise_only_counter(truth, u, spec, x0_factor, w_factor)
    else:
        w_factor = psd_sqrt_factor(truth.sigma_w)
        count_batch = _make_parameter_counter(truth, u, spec, x0_factor, w_factor)

    def run(batch_index: int) -> np.ndarray:
        gen = _batch_generator(rng, batch_index)
        return count_batch(gen, sizes[batch_index])

    if workers == 1:
        counts = sum(run(b) for b in range(len(sizes)))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = sum(pool.map(run, range(len(sizes))))

    entries = []
    for k in range(0, n_u + 1):
        for j in range(spec.n_rows):
            c = int(counts[k, j])
            entries.append(
                ViolationEntry(
                    j=j,
                    k=k,
                    samples=n_samples,
                    violations=c,
                    rate=c / n_samples,
                    upper99=clopper_pearson_upper(c, n_samples),
                )
            )
    return ViolationReport(mode=mode, n_samples=n_samples, entries=entries)


def _make_noise_only_counter(sys: LinearSystem, u: np.ndarray, spec: OcpSpec,
                             x0_factor: np.ndarray, w_factor: np.ndarray):
    n_u = spec.horizon
    h_x = spec.h_x

    def count(gen: np.random.Generator, size: int) -> np.ndarray:
        counts = np.zeros((n_u + 1, spec.n_rows), dtype=np.int64)
        x = spec.init.mean + gen.standard_normal((size, x0_factor.shape[1])) @ x0_factor.T
        w = gen.standard_normal((size, n_u, w_factor.shape[1]))
        counts[0] = np.count_nonzero(x @ h_x.T > 1.0, axis=0)
        for k in range(1, n_u + 1):
            uk = u[(k - 1) * spec.m: k * spec.m]
            x = x @ sys.A.T + sys.B @ uk + (w[:, k - 1] @ w_factor.T) @ sys.E.T
            counts[k] = np.count_nonzero(x @ h_x.T > 1.0, axis=0)
        return counts

    return count


def _make_parameter_counter(truth: SampledParameterTruth, u: np.ndarray, spec: OcpSpec,
                            x0_factor: np.ndarray, w_factor: np.ndarray):
    n_u, n, m = spec.horizon, spec.n, spec.m
    h_x = spec.h_x
    q = truth.sigma_w.shape[0]
    theta_factors = [psd_sqrt_factor(est.cov) for est in truth.estimates[:n_u]]

    def count(gen: np.random.Generator, size: int) -> np.ndarray:
        counts = np.zeros((n_u + 1, spec.n_rows), dtype=np.int64)
        x0 = spec.init.mean + gen.standard_normal((size, x0_factor.shape[1])) @ x0_factor.T
        w = gen.standard_normal((size, n_u * q)) @ np.kron(np.eye(n_u), w_factor).T
        counts[0] = np.count_nonzero(x0 @ h_x.T > 1.0, axis=0)
        for k in range(1, n_u + 1):
            est = truth.estimates[k - 1]
            theta = est.theta + gen.standard_normal((size, est.dof)) @ theta_factors[k - 1].T
            gw_k = truth.gw[k - 1]
            uk = u[: k * m]
            # theta stores vec([G0, Gu]) column-major; view as (cols, n) blocks.
            cols = est.dof // n
            theta_blocks = theta.reshape(size, cols, n)
            h_theta = theta_blocks @ h_x.T        # (size, cols, n_rows)
            if est.structure == STRUCTURE_FIR:
                zfix = np.broadcast_to(uk, (size, cols))
                mean_part = np.einsum("scj,sc->sj", h_theta, zfix)
            else:
                mean_part = np.einsum("scj,sc->sj", h_theta[:, :n, :], x0)
                mean_part += h_theta[:, n:, :].transpose(0, 2, 1) @ uk
            dist_part = (w[:, : k * q] @ gw_k.T) @ h_x.T
            counts[k] = np.count_nonzero(mean_part + dist_part > 1.0, axis=0)
        return counts

    return count


# ---------------------------------------------------------------------------
# Equivalence of the two nominal parametrizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EquivalenceReport:
    input_diff: float
    value_rel_diff: float
    status_statespace: str
    status_multistep: str
    passed: bool


def equivalence_check(
    sys: LinearSystem,
    spec: OcpSpec,
    opts: "SolverOptions | None" = None,
    tol: float = 1e-6,
) -> EquivalenceReport:
    """Solve the two nominal programs built from the same system and compare."""
    prog_ss = build_nominal_qp_statespace(sys, spec)
    prog_ms = build_nominal_qp_multistep(build_multistep(sys, spec.horizon), spec)
    sol_ss = solve(prog_ss, opts)
    sol_ms = solve(prog_ms, opts)
    if sol_ss.primal is None or sol_ms.primal is None:
        return EquivalenceReport(
            input_diff=math.inf,
            value_rel_diff=math.inf,
            status_statespace=sol_ss.status,
            status_multistep=sol_ms.status,
            passed=False,
        )
    diff = float(np.abs(sol_ss.primal - sol_ms.primal).max())
    denom = max(1.0, abs(sol_ss.objective))
    value_rel = abs(sol_ss.objective - sol_ms.objective) / denom
    passed = sol_ss.status == "Optimal" and sol_ms.status == "Optimal" and diff <= tol
    return EquivalenceReport(
        input_diff=diff,
        value_rel_diff=value_rel,
        status_statespace=sol_ss.status,
        status_multistep=sol_ms.status,
        passed=passed,
    )


# ---------------------------------------------------------------------------
# Identification coverage
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageConfig:
    system: LinearSystem
    init: GaussianBelief
    T: int
    k: int
    deltas: tuple
    n_runs: int
    input_std: float = 1.0
    method: str = "multistep"        # "multistep" (full path) or "statespace"
    structure: str = STRUCTURE_FULL
    master_seed: int = 0


@dataclass(frozen=True)
class CoverageResult:
    config: CoverageConfig
    runs: int
    skipped: int
    hits: dict            # delta -> hit count
    coverage: dict        # delta -> empirical coverage
    interval99: dict      # delta -> exact binomial 99% CI on the coverage


def coverage_experiment(config: CoverageConfig) -> CoverageResult:
    """Empirical frequency of the true parameters falling in the ellipsoids.

    Uses oracle weighting (true G0 in the residual covariance) so the
    quadratic membership statistic follows its nominal chi-squared law up to
    finite-sample effects.
    """
    sys = config.system
    model = build_multistep(sys, config.k)
    g0_k, gu_k, gw_k = model.step(config.k)
    if config.method == "statespace":
        theta_true = true_theta(sys.A, sys.B, STRUCTURE_FULL)
        dof = theta_true.size
    else:
        theta_true = true_theta(g0_k, gu_k, config.structure)
        dof = theta_true.size
    levels = {d: chi2_quantile(dof, d) for d in config.deltas}
    hits = {d: 0 for d in config.deltas}
    skipped = 0
    done = 0
    for run in range(config.n_runs):
        gen = Rng(config.master_seed, run).generator()
        u = config.input_std * gen.standard_normal((config.T, sys.m))
        traj = simulate(sys, config.init, u, gen)
        try:
            if config.method == "statespace":
                est = state_space_ls(traj, sys.sigma_w, sys.E)
            else:
                est = estimate_predictor(
                    traj,
                    config.k,
                    gw_k,
                    sys.sigma_w,
                    sys.sigma_eps,
                    structure=config.structure,
                    covariance="oracle",
                    g0_true=g0_k,
                )
        except SingularInformation:
            skipped += 1
            continue
        err = est.theta - theta_true
        stat = float(err @ np.linalg.solve(est.cov, err))
        for d in config.deltas:
            if stat <= levels[d]:
                hits[d] += 1
        done += 1
    coverage = {d: (hits[d] / done if done else math.nan) for d in config.deltas}
    interval = {d: clopper_pearson_interval(hits[d], done) for d in config.deltas}
    return CoverageResult(
        config=config,
        runs=done,
        skipped=skipped,
        hits=hits,
        coverage=coverage,
        interval99=interval,
    )


# ---------------------------------------------------------------------------
# Conservatism of the robust program
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConservatismReport:
    status: str
    cost: "float | None"
    rows: "list[dict]"
    budget: float

    def dominance_holds(self) -> bool:
        return all(r["h_upper"] >= r["h_exact"] - 1e-9 for r in self.rows)


def conservatism_report(
    sys_true: LinearSystem,
    estimates: "list[ParameterEstimate]",
    spec: OcpSpec,
    delta: float,
    rng: Rng,
    n_samples: int = 100_000,
    solver_opts: "SolverOptions | None" = None,
    use_upper: bool = False,
) -> ConservatismReport:
    """Quantify slack between the robust back-offs and realized violations."""
    model = build_multistep(sys_true, spec.horizon)
    gw = [model.step(k)[2] for k in range(1, spec.horizon + 1)]
    table = build_tightening_table(spec, estimates, gw, sys_true.sigma_w, delta)
    prog = build_robust_socp_multistep(
        estimates, spec, delta, gw, sys_true.sigma_w, table=table, use_upper=use_upper
    )
    sol = solve(prog, solver_opts)
    budget = 1.0 - spec.p
    if sol.status != "Optimal" or sol.primal is None:
        return ConservatismReport(status=sol.status, cost=None, rows=[], budget=budget)
    u = sol.primal
    truth = SampledParameterTruth(estimates=estimates, gw=gw, sigma_w=sys_true.sigma_w)
    vio = estimate_violation(truth, u, spec, n_samples, rng)
    vio_map = {(e.j, e.k): e for e in vio.entries}
    x0 = spec.init.mean
    rows = []
    for k in range(1, spec.horizon + 1):
        est = estimates[k - 1]
        g0_hat, gu_hat = est.g0_hat(), est.gu_hat()
        uk = u[: k * spec.m]
        s_half = table.sigma_theta_half[k]
        for j in range(spec.n_rows):
            h = spec.h_x[j]
            mean_val = float(h @ (g0_hat @ x0 + gu_hat @ uk))
            if est.structure == STRUCTURE_FIR:
                zvec = uk
            else:
                zvec = np.concatenate([x0, uk])
            param_term = table.radius[k] * float(
                np.linalg.norm(s_half @ np.kron(zvec, h))
            )
            entry = vio_map[(j, k)]
            rows.append(
                {
                    "j": j,
                    "k": k,
                    "h_exact": table.h_exact[(j, k)],
                    "h_upper": table.h_upper[(j, k)],
                    "nominal_backoff": table.c_ptilde * table.h_exact[(j, k)],
                    "parametric_term": param_term,
                    "mean_value": mean_val,
                    "slack": 1.0 - table.c_ptilde * table.h_exact[(j, k)] - param_term - mean_val,
                    "mc_rate": entry.rate,
                    "mc_upper99": entry.upper99,
                    "budget": budget,
                }
            )
    return ConservatismReport(status=sol.status, cost=sol.objective, rows=rows, budget=budget)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def violation_report_to_json(report: ViolationReport) -> dict:
    return {
        "mode": report.mode,
        "n_samples": report.n_samples,
        "worst_upper99": report.worst_upper99,
        "entries": [
            {
                "j": e.j,
                "k": e.k,
                "samples": e.samples,
                "violations": e.violations,
                "rate": e.rate,
                "upper99": e.upper99,
            }
            for e in report.entries
        ],
    }


def save_violation_csv(report: ViolationReport, path: "str | Path") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "k", "samples", "violations", "rate", "upper99"])
        for e in report.entries:
            writer.writerow([e.j, e.k, e.samples, e.violations, repr(e.rate), repr(e.upper99)])


def equivalence_report_to_json(report: EquivalenceReport) -> dict:
    return {
        "input_diff": report.input_diff,
        "value_rel_diff": report.value_rel_diff,
        "status_statespace": report.status_statespace,
        "status_multistep": report.status_multistep,
        "passed": report.passed,
    }
