"""Config-driven command line for end-to-end experiments.

Subcommands: simulate, identify, solve, validate, pipeline, compare.  A
single JSON config describes the system (inline matrices or a seeded
random draw), the identification experiment, the control problem, and the
validation budget.  Reports are emitted as JSON/CSV; everything a report
contains is a deterministic function of (config, master seed), so repeated
runs are byte-identical.  Wall-clock timings go to a separate file to keep
the reports reproducible.  The MSPC_THREADS environment variable sets the
number of worker threads used for validation batches.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys as _sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import ident, ocp, solver, system, validate
from .errors import DeltaTooSmall, DomainError, MspcError
from .linalg import Rng
from .system import GaussianBelief, LinearSystem

_STREAM_PROBING = 0
_STREAM_SCENARIOS = 1


@dataclass(frozen=True)
class IdentSettings:
    T: int
    delta: float
    structure: str = ident.STRUCTURE_FULL
    covariance: str = "oracle"
    input_std: float = 1.0
    x0_mean: "np.ndarray | None" = None
    sigma_x0: "np.ndarray | None" = None
    force_zero_cov: bool = False
    k_max: "int | None" = None


@dataclass(frozen=True)
class ValidationSettings:
    n_samples: int = 100_000
    master_seed: int = 0
    margin: float = 0.01


@dataclass(frozen=True)
class CompareSettings:
    n_scenarios: int = 64
    t_sweep: tuple = (100, 200, 400)
    sweep_seeds: int = 3
    p_sweep: tuple = (0.6, 0.75, 0.9)
    sweep_samples: int = 20_000


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    system_block: dict
    ident_settings: IdentSettings
    ocp_spec: ocp.OcpSpec
    validation: ValidationSettings
    compare: CompareSettings
    master_seed: int
    output_dir: str


def _matrix(doc, key, default=None):
    if key not in doc:
        return default
    return np.asarray(doc[key], dtype=float)


def parse_config(doc: dict, seed_override: "int | None" = None,
                 samples_override: "int | None" = None) -> ExperimentConfig:
    """Validate the raw config document; rejects delta <= p immediately."""
    ocp_doc = doc["ocp"]
    n = len(ocp_doc["Q"])
    m = len(ocp_doc["R"])
    if "input_polytope" in ocp_doc:
        u_set = ocp.InputPolytope(
            h_mat=np.asarray(ocp_doc["input_polytope"]["H"], dtype=float),
            h_vec=np.asarray(ocp_doc["input_polytope"]["h"], dtype=float),
        )
    elif "u_min" in ocp_doc or "u_max" in ocp_doc:
        u_set = ocp.InputBox(
            lo=np.asarray(ocp_doc.get("u_min", [-np.inf] * m), dtype=float),
            hi=np.asarray(ocp_doc.get("u_max", [np.inf] * m), dtype=float),
        )
    else:
        u_set = None
    spec = ocp.OcpSpec(
        horizon=int(ocp_doc["horizon"]),
        Q=_matrix(ocp_doc, "Q"),
        R=_matrix(ocp_doc, "R"),
        h_x=_matrix(ocp_doc, "h_x", np.zeros((0, n))),
        u_set=u_set,
        p=float(ocp_doc["p"]),
        init=GaussianBelief(
            mean=_matrix(ocp_doc, "x0_mean", np.zeros(n)),
            cov=_matrix(ocp_doc, "sigma_x0", np.zeros((n, n))),
        ),
    )
    ident_doc = doc["identification"]
    ident_settings = IdentSettings(
        T=int(ident_doc["T"]),
        delta=float(ident_doc["delta"]),
        structure=ident_doc.get("structure", ident.STRUCTURE_FULL),
        covariance=ident_doc.get("covariance", "oracle"),
        input_std=float(ident_doc.get("input_std", 1.0)),
        x0_mean=_matrix(ident_doc, "x0_mean"),
        sigma_x0=_matrix(ident_doc, "sigma_x0"),
        force_zero_cov=bool(ident_doc.get("force_zero_cov", False)),
        k_max=ident_doc.get("k_max"),
    )
    if ident_settings.delta <= spec.p:
        raise DeltaTooSmall(
            f"identification delta {ident_settings.delta} must exceed p = {spec.p}"
        )
    if ident_settings.delta > 1.0:
        raise DomainError("delta cannot exceed 1")
    if ident_settings.delta == 1.0 and not ident_settings.force_zero_cov:
        raise DomainError("delta = 1 requires force_zero_cov")
    val_doc = doc.get("validation", {})
    validation = ValidationSettings(
        n_samples=int(samples_override or val_doc.get("n_samples", 100_000)),
        master_seed=int(val_doc.get("master_seed", 0)),
        margin=float(val_doc.get("margin", 0.01)),
    )
    cmp_doc = doc.get("compare", {})
    compare = CompareSettings(
        n_scenarios=int(cmp_doc.get("n_scenarios", 64)),
        t_sweep=tuple(cmp_doc.get("T_sweep", (100, 200, 400))),
        sweep_seeds=int(cmp_doc.get("sweep_seeds", 3)),
        p_sweep=tuple(cmp_doc.get("p_sweep", (0.6, 0.75, 0.9))),
        sweep_samples=int(cmp_doc.get("sweep_samples", 20_000)),
    )
    return ExperimentConfig(
        raw=doc,
        system_block=doc["system"],
        ident_settings=ident_settings,
        ocp_spec=spec,
        validation=validation,
        compare=compare,
        master_seed=int(seed_override if seed_override is not None else doc.get("master_seed", 0)),
        output_dir=doc.get("output_dir", "out"),
    )


def load_config(path: "str | Path", seed_override=None, samples_override=None) -> ExperimentConfig:
    return parse_config(
        json.loads(Path(path).read_text()),
        seed_override=seed_override,
        samples_override=samples_override,
    )


def make_system(cfg: ExperimentConfig) -> LinearSystem:
    block = cfg.system_block
    if "inline" in block:
        return system.system_from_json(block["inline"])
    if "random" in block:
        rnd = block["random"]
        return system.random_system(
            n=int(rnd["n"]),
            m=int(rnd["m"]),
            q=int(rnd["q"]),
            spectral_radius_max=float(rnd.get("spectral_radius", 0.9)),
            rng=Rng(int(rnd.get("seed", 0))),
            sigma_w=float(rnd.get("sigma_w", 0.1)),
            sigma_eps=float(rnd.get("sigma_eps", 0.0)),
        )
    raise DomainError("system block must contain 'inline' or 'random'")


def _ident_init(cfg: ExperimentConfig, n: int) -> GaussianBelief:
    mean = cfg.ident_settings.x0_mean
    cov = cfg.ident_settings.sigma_x0
    return GaussianBelief(
        mean=np.zeros(n) if mean is None else mean,
        cov=np.zeros((n, n)) if cov is None else cov,
    )


def _probe_and_simulate(cfg: ExperimentConfig, sys_true: LinearSystem) -> system.Trajectory:
    gen = Rng(cfg.master_seed, _STREAM_PROBING).generator()
    u = cfg.ident_settings.input_std * gen.standard_normal((cfg.ident_settings.T, sys_true.m))
    return system.simulate(sys_true, _ident_init(cfg, sys_true.n), u, gen)


def _identify_all(cfg: ExperimentConfig, sys_true: LinearSystem,
                  traj: system.Trajectory):
    """Per-step estimates for k = 1..k_max plus the known disturbance maps."""
    k_max = cfg.ident_settings.k_max or cfg.ocp_spec.horizon
    model_true = system.build_multistep(sys_true, k_max)
    estimates, gw = [], []
    for k in range(1, k_max + 1):
        g0_k, _, gw_k = model_true.step(k)
        est = ident.estimate_predictor(
            traj,
            k,
            gw_k,
            sys_true.sigma_w,
            sys_true.sigma_eps,
            structure=cfg.ident_settings.structure,
            covariance=cfg.ident_settings.covariance,
            g0_true=g0_k,
        )
        if cfg.ident_settings.force_zero_cov:
            est = replace(est, cov=np.zeros_like(est.cov))
        estimates.append(est)
        gw.append(gw_k)
    return estimates, gw


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig, out_dir: Path) -> dict:
    sys_true = make_system(cfg)
    traj = _probe_and_simulate(cfg, sys_true)
    out_dir.mkdir(parents=True, exist_ok=True)
    system.save_system(sys_true, out_dir / "system.json")
    system.save_trajectory(traj, out_dir / "trajectory.csv")
    return {"trajectory": str(out_dir / "trajectory.csv"), "T": traj.T}


def cmd_identify(cfg: ExperimentConfig, out_dir: Path) -> dict:
    sys_true = make_system(cfg)
    traj = _probe_and_simulate(cfg, sys_true)
    estimates, _ = _identify_all(cfg, sys_true, traj)
    out_dir.mkdir(parents=True, exist_ok=True)
    ident.save_estimates(estimates, out_dir / "estimates.json", delta=cfg.ident_settings.delta)
    return {
        "estimates": str(out_dir / "estimates.json"),
        "k_max": len(estimates),
        "dof": [est.dof for est in estimates],
    }


def cmd_solve(cfg: ExperimentConfig, out_dir: Path, program_path=None) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    if program_path is not None:
        prog = ocp.load_program(program_path)
        sol = solver.solve(prog)
        solver.save_solution(sol, out_dir / "solution.json")
        return {"status": sol.status, "objective": sol.objective}
    sys_true = make_system(cfg)
    spec = cfg.ocp_spec
    prog_ss = ocp.build_nominal_qp_statespace(sys_true, spec)
    prog_ms = ocp.build_nominal_qp_multistep(
        system.build_multistep(sys_true, spec.horizon), spec
    )
    sol_ss = solver.solve(prog_ss)
    sol_ms = solver.solve(prog_ms)
    ocp.save_program(prog_ss, out_dir / "program_statespace.json")
    ocp.save_program(prog_ms, out_dir / "program_multistep.json")
    solver.save_solution(sol_ss, out_dir / "solution_statespace.json")
    solver.save_solution(sol_ms, out_dir / "solution_multistep.json")
    return {
        "statespace": {"status": sol_ss.status, "objective": sol_ss.objective},
        "multistep": {"status": sol_ms.status, "objective": sol_ms.objective},
    }


def cmd_validate(cfg: ExperimentConfig, out_dir: Path, solution_path=None) -> tuple[dict, bool]:
    """Certify a stored input sequence; falls back to solving the nominal QP."""
    sys_true = make_system(cfg)
    spec = cfg.ocp_spec
    out_dir.mkdir(parents=True, exist_ok=True)
    if solution_path is None and (out_dir / "solution_robust.json").exists():
        solution_path = out_dir / "solution_robust.json"
    if solution_path is not None:
        sol = solver.load_solution(solution_path)
    else:
        sol = solver.solve(ocp.build_nominal_qp_statespace(sys_true, spec))
    if sol.primal is None:
        return {"error": f"no primal point to validate (status {sol.status})"}, False
    u = np.asarray(sol.primal)[: spec.horizon * spec.m]
    rng = Rng(cfg.validation.master_seed, 0)
    report = validate.estimate_violation(sys_true, u, spec, cfg.validation.n_samples, rng)
    validate.save_violation_csv(report, out_dir / "violations_true.csv")
    budget = 1.0 - spec.p
    ok = report.certifies(budget, cfg.validation.margin)
    doc = {
        "mode": report.mode,
        "budget": budget,
        "margin": cfg.validation.margin,
        "worst_upper99": report.worst_upper99,
        "certified": ok,
        "report": validate.violation_report_to_json(report),
    }
    (out_dir / "validation.json").write_text(json.dumps(doc, indent=2) + "\n")
    return doc, ok


def cmd_pipeline(cfg: ExperimentConfig, out_dir: Path) -> tuple[dict, bool]:
    """simulate -> identify -> tighten -> solve -> reference -> certify."""
    out_dir.mkdir(parents=True, exist_ok=True)
    report: dict = {"config": cfg.raw, "master_seed": cfg.master_seed, "stages": {}}
    timings: dict = {}
    spec = cfg.ocp_spec
    passed = True

    def run_stage(name, fn):
        nonlocal passed
        start = time.perf_counter()
        try:
            result = fn()
            report["stages"][name] = {"ok": True}
            return result
        except MspcError as exc:
            report["stages"][name] = {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
            passed = False
            return None
        finally:
            timings[name] = time.perf_counter() - start

    sys_true = run_stage("system", lambda: make_system(cfg))
    if sys_true is not None:
        system.save_system(sys_true, out_dir / "system.json")
        report["system"] = system.system_to_json(sys_true)

    traj = None
    if sys_true is not None:
        traj = run_stage("simulate", lambda: _probe_and_simulate(cfg, sys_true))
        if traj is not None:
            system.save_trajectory(traj, out_dir / "trajectory.csv")

    estimates = gw = None
    if traj is not None:
        out = run_stage("identify", lambda: _identify_all(cfg, sys_true, traj))
        if out is not None:
            estimates, gw = out
            ident.save_estimates(estimates, out_dir / "estimates.json",
                                 delta=cfg.ident_settings.delta)
            report["estimates"] = [
                ident.estimate_to_json(est, cfg.ident_settings.delta) for est in estimates
            ]

    table = None
    if estimates is not None:
        table = run_stage(
            "tightening",
            lambda: ocp.build_tightening_table(
                spec, estimates, gw, sys_true.sigma_w, cfg.ident_settings.delta
            ),
        )
        if table is not None:
            ocp.save_tightening_csv(table, out_dir / "tightening.csv")
            report["tightening"] = {
                "delta": table.delta,
                "p_tilde": table.p_tilde,
                "c_ptilde": table.c_ptilde,
                "rows": [
                    {"j": j, "k": k, "h_exact": table.h_exact[(j, k)],
                     "h_upper": table.h_upper[(j, k)], "radius": table.radius[k]}
                    for (j, k) in sorted(table.h_exact)
                ],
            }

    sol_robust = None
    if table is not None:
        def _solve_robust():
            prog = ocp.build_robust_socp_multistep(
                estimates, spec, cfg.ident_settings.delta, gw, sys_true.sigma_w, table=table
            )
            ocp.save_program(prog, out_dir / "program_robust.json")
            sol = solver.solve(prog)
            solver.save_solution(sol, out_dir / "solution_robust.json")
            return sol

        sol_robust = run_stage("solve_robust", _solve_robust)
        if sol_robust is not None:
            report["robust_solution"] = solver.solution_to_json(sol_robust)
            if sol_robust.status != "Optimal":
                passed = False

    if sys_true is not None:
        def _reference():
            eq = validate.equivalence_check(sys_true, spec)
            est_model = ident.model_from_estimates(estimates, gw, sys_true.sigma_w)
            sol_est = solver.solve(ocp.build_nominal_qp_multistep(est_model, spec))
            return eq, sol_est

        ref = run_stage("reference", _reference) if estimates is not None else None
        if ref is not None:
            eq, sol_est = ref
            report["equivalence_true_system"] = validate.equivalence_report_to_json(eq)
            report["nominal_on_estimated_model"] = solver.solution_to_json(sol_est)

    certification = None
    if sol_robust is not None and sol_robust.primal is not None:
        def _certify():
            u = sol_robust.primal[: spec.horizon * spec.m]
            rng = Rng(cfg.validation.master_seed, 0)
            truth = validate.SampledParameterTruth(
                estimates=estimates, gw=gw, sigma_w=sys_true.sigma_w
            )
            rep_par = validate.estimate_violation(
                truth, u, spec, cfg.validation.n_samples, rng
            )
            rep_true = validate.estimate_violation(
                sys_true, u, spec, cfg.validation.n_samples,
                Rng(cfg.validation.master_seed, 1),
            )
            return rep_par, rep_true

        certification = run_stage("validate", _certify)
        if certification is not None:
            rep_par, rep_true = certification
            validate.save_violation_csv(rep_par, out_dir / "violations_parametric.csv")
            validate.save_violation_csv(rep_true, out_dir / "violations_true.csv")
            budget = 1.0 - spec.p
            certified = rep_par.certifies(budget, cfg.validation.margin)
            report["certification"] = {
                "budget": budget,
                "margin": cfg.validation.margin,
                "worst_upper99_parametric": rep_par.worst_upper99,
                "worst_upper99_true_system": rep_true.worst_upper99,
                "certified": certified,
                "parametric": validate.violation_report_to_json(rep_par),
                "true_system": validate.violation_report_to_json(rep_true),
            }
            if not certified:
                passed = False
    elif sol_robust is None:
        passed = False

    report["passed"] = passed
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    (out_dir / "timings.json").write_text(json.dumps(timings, indent=2) + "\n")
    return report, passed


def cmd_compare(cfg: ExperimentConfig, out_dir: Path) -> tuple[dict, bool]:
    """Cross-parametrization and robustness comparisons plus sweep CSVs."""
    out_dir.mkdir(parents=True, exist_ok=True)
    sys_true = make_system(cfg)
    spec = cfg.ocp_spec
    doc: dict = {"config": cfg.raw}
    ok = True

    eq = validate.equivalence_check(sys_true, spec)
    doc["equivalence"] = validate.equivalence_report_to_json(eq)
    ok = ok and eq.passed

    traj = _probe_and_simulate(cfg, sys_true)
    estimates, gw = _identify_all(cfg, sys_true, traj)
    cons = validate.conservatism_report(
        sys_true, estimates, spec, cfg.ident_settings.delta,
        Rng(cfg.validation.master_seed, 2), n_samples=cfg.compare.sweep_samples,
    )
    doc["conservatism"] = {
        "status": cons.status,
        "cost": cons.cost,
        "budget": cons.budget,
        "rows": cons.rows,
    }
    with open(out_dir / "tightening_vs_k.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "k", "h_exact", "h_upper", "parametric_term", "mc_upper99"])
        for row in cons.rows:
            writer.writerow([row["j"], row["k"], repr(row["h_exact"]), repr(row["h_upper"]),
                             repr(row["parametric_term"]), repr(row["mc_upper99"])])

    scen = ocp.formulate_minmax_statespace(
        estimates[0], spec, cfg.ident_settings.delta, cfg.compare.n_scenarios,
        Rng(cfg.master_seed, _STREAM_SCENARIOS), sys_true.E, sys_true.sigma_w,
    )
    sol_scen = solver.solve(scen)
    doc["scenario_baseline"] = {
        "n_scenarios": cfg.compare.n_scenarios,
        "status": sol_scen.status,
        "objective": sol_scen.objective,
        "robust_cost": cons.cost,
    }

    # Data-length sweep: parametric tightening terms per amount of data.
    sweep_rows = []
    for t_len in cfg.compare.t_sweep:
        for seed in range(cfg.compare.sweep_seeds):
            sub = replace(
                cfg,
                ident_settings=replace(cfg.ident_settings, T=int(t_len)),
                master_seed=cfg.master_seed + 1000 * (seed + 1),
            )
            traj_s = _probe_and_simulate(sub, sys_true)
            est_s, gw_s = _identify_all(sub, sys_true, traj_s)
            table_s = ocp.build_tightening_table(
                spec, est_s, gw_s, sys_true.sigma_w, cfg.ident_settings.delta
            )
            prog_s = ocp.build_robust_socp_multistep(
                est_s, spec, cfg.ident_settings.delta, gw_s, sys_true.sigma_w, table=table_s
            )
            sol_s = solver.solve(prog_s)
            param_terms = [
                table_s.radius[k] * float(np.linalg.norm(table_s.sigma_theta_half[k]))
                for k in range(1, spec.horizon + 1)
            ]
            sweep_rows.append({
                "T": int(t_len),
                "seed": seed,
                "status": sol_s.status,
                "cost": sol_s.objective,
                "mean_param_scale": float(np.mean(param_terms)),
            })
    doc["cost_vs_T"] = sweep_rows
    with open(out_dir / "cost_vs_T.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["T", "seed", "status", "cost", "mean_param_scale"])
        for row in sweep_rows:
            writer.writerow([row["T"], row["seed"], row["status"],
                             repr(row["cost"]) if row["cost"] is not None else "",
                             repr(row["mean_param_scale"])])

    # Chance-level sweep: realized violation versus the budget.
    p_rows = []
    for p_val in cfg.compare.p_sweep:
        if not p_val < cfg.ident_settings.delta:
            continue
        spec_p = ocp.OcpSpec(
            horizon=spec.horizon, Q=spec.Q, R=spec.R, h_x=spec.h_x,
            u_set=spec.u_set, p=float(p_val), init=spec.init,
        )
        try:
            prog_p = ocp.build_robust_socp_multistep(
                estimates, spec_p, cfg.ident_settings.delta, gw, sys_true.sigma_w
            )
            sol_p = solver.solve(prog_p)
        except MspcError as exc:
            p_rows.append({"p": p_val, "status": f"{type(exc).__name__}", "worst_upper99": None})
            continue
        if sol_p.status != "Optimal":
            p_rows.append({"p": p_val, "status": sol_p.status, "worst_upper99": None})
            continue
        truth = validate.SampledParameterTruth(estimates=estimates, gw=gw, sigma_w=sys_true.sigma_w)
        rep = validate.estimate_violation(
            truth, sol_p.primal[: spec.horizon * spec.m], spec_p,
            cfg.compare.sweep_samples, Rng(cfg.validation.master_seed, 3),
        )
        p_rows.append({
            "p": p_val,
            "status": "Optimal",
            "worst_upper99": rep.worst_upper99,
            "budget": 1.0 - p_val,
        })
    doc["violation_vs_p"] = p_rows
    with open(out_dir / "violation_vs_p.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "status", "worst_upper99", "budget"])
        for row in p_rows:
            writer.writerow([row["p"], row["status"],
                             "" if row.get("worst_upper99") is None else repr(row["worst_upper99"]),
                             "" if row.get("budget") is None else repr(row["budget"])])

    doc["passed"] = ok
    (out_dir / "compare.json").write_text(json.dumps(doc, indent=2) + "\n")
    return doc, ok


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mspc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "identify", "solve", "validate", "pipeline", "compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--samples", type=int, default=None,
                       help="override the validation sample count")
        if name == "solve":
            p.add_argument("--program", default=None, help="solve a stored program JSON")
        if name == "validate":
            p.add_argument("--solution", default=None, help="solution JSON to certify")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, seed_override=args.seed, samples_override=args.samples)
    except MspcError as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else Path(cfg.output_dir)

    if args.command == "simulate":
        result = cmd_simulate(cfg, out_dir)
        print(json.dumps(result, indent=2))
        return 0
    if args.command == "identify":
        result = cmd_identify(cfg, out_dir)
        print(json.dumps(result, indent=2))
        return 0
    if args.command == "solve":
        result = cmd_solve(cfg, out_dir, program_path=args.program)
        print(json.dumps(result, indent=2))
        return 0
    if args.command == "validate":
        result, ok = cmd_validate(cfg, out_dir, solution_path=args.solution)
        print(json.dumps({k: v for k, v in result.items() if k != "report"}, indent=2))
        return 0 if ok else 1
    if args.command == "pipeline":
        report, ok = cmd_pipeline(cfg, out_dir)
        summary = {
            "stages": report["stages"],
            "passed": report["passed"],
        }
        if "certification" in report:
            summary["worst_upper99"] = report["certification"]["worst_upper99_parametric"]
            summary["certified"] = report["certification"]["certified"]
        print(json.dumps(summary, indent=2))
        return 0 if ok else 1
    if args.command == "compare":
        doc, ok = cmd_compare(cfg, out_dir)
        print(json.dumps({"equivalence": doc["equivalence"], "passed": doc["passed"]}, indent=2))
        return 0 if ok else 1
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
