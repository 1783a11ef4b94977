"""Command-line front end: study orchestration and report emission.

``occlp solve|simulate|sweep|convergence|certify|oracle --config FILE``

Every command reads one configuration file, runs the relevant part of the
study, writes a report bundle (JSON and/or a CSV directory) and exits 0 iff
every invariant asserted during the study passed; failures are enumerated on
standard error.  Reports embed the fully resolved configuration and are
byte-identical across reruns of the same configuration, seed and build.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .basis import basis_for_region
from .config import (ConfigError, StudyConfig, build_policy, build_system,
                     default_config_text, parse_config)
from .grid import DiscreteMeasure, build_grid
from .metrics import make_test_function_set, rho_hat
from .oracle import frozen_value, level_set_ordering, rotation_level_value
from .programs import (build_discounted_lp, build_ergodic_lp, build_nonergodic_lp,
                       build_perturbed_lp, certificate_offgrid_report,
                       certificate_slacks, export_lp_text, extract_dual_certificate,
                       membership_residual, solve, verify_weak_duality)
from .simulate import (Trajectory, abel_value, cesaro_value,
                       empirical_occupational_measure, integrate,
                       periodic_value_search, rotation_delta_family)

log = logging.getLogger("occlp")

_ALL_SECTIONS = ("solve", "simulate", "sweep", "convergence", "certify", "oracle")


@dataclass
class ReportBundle:
    """Everything one study produced, as JSON-serialisable plain data."""

    config: dict
    values: dict = field(default_factory=dict)  # name -> float
    tables: dict = field(default_factory=dict)  # name -> {"columns": [...], "rows": [[...]]}
    duals: list = field(default_factory=list)  # rows (program, kind, basis index, marginal)
    certificates: dict = field(default_factory=dict)  # name -> {mu, psi/eta coefficients, ...}
    measures: dict = field(default_factory=dict)  # name -> {"atom_index": [...], "weight": [...]}
    invariants: list = field(default_factory=list)  # {"name", "passed", "detail"}
    warnings: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def record(self, name: str, passed: bool, detail: str = ""):
        self.invariants.append({"name": name, "passed": bool(passed), "detail": detail})
        if not passed:
            log.error("invariant failed: %s (%s)", name, detail)

    def all_passed(self) -> bool:
        return all(entry["passed"] for entry in self.invariants)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "config": self.config,
            "values": self.values,
            "tables": self.tables,
            "duals": self.duals,
            "certificates": self.certificates,
            "measures": self.measures,
            "invariants": self.invariants,
            "warnings": self.warnings,
            "environment": self.environment,
        }


def _environment_stamp() -> dict:
    return {
        "occlp": __version__,
        "python": ".".join(str(v) for v in sys.version_info[:3]),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _measure_payload(measure: DiscreteMeasure, keep: int = 20000) -> dict:
    """Sparse representation of a measure (atoms carrying weight only)."""
    idx = np.flatnonzero(measure.weights > 0)
    if idx.shape[0] > keep:
        order = np.argsort(measure.weights[idx])[::-1][:keep]
        idx = np.sort(idx[order])
    return {"atom_index": [int(i) for i in idx],
            "weight": [float(measure.weights[i]) for i in idx],
            "total_mass": measure.total_mass}


def _pool_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# study sections


def _solve_section(bundle, spec, grid, basis, cfg: StudyConfig, jobs: int):
    prog = cfg.program
    y0 = np.asarray(prog.y0, dtype=float)
    builders = []
    if "ergodic" in prog.variants:
        builders.append(("ergodic", lambda: build_ergodic_lp(grid, basis, spec)))
    if "nonergodic" in prog.variants:
        builders.append(("nonergodic",
                         lambda: build_nonergodic_lp(grid, basis, spec, y0,
                                                     xi_mass_cap=prog.xi_mass_cap)))
    if "discounted" in prog.variants:
        for rate in prog.discount_rates:
            builders.append((f"discounted[rate={rate:g}]",
                             lambda rate=rate: build_discounted_lp(grid, basis, spec, y0, rate)))
    if "perturbed" in prog.variants:
        for eps in prog.epsilons:
            builders.append((f"perturbed[eps={eps:g}]",
                             lambda eps=eps: build_perturbed_lp(grid, basis, spec, y0, eps,
                                                                xi_mass_cap=prog.xi_mass_cap)))

    instances = [(name, make()) for name, make in builders]
    solutions = _pool_map(lambda pair: solve(pair[1]), instances, jobs)

    results = {}
    for (name, instance), solution in zip(instances, solutions):
        results[name] = (instance, solution)
        bundle.values[f"{name}.status"] = solution.status
        if solution.status != "optimal":
            bundle.record(f"{name}.solved", False, solution.message)
            continue
        bundle.record(f"{name}.solved", True)
        bundle.values[f"{name}.value"] = solution.value
        gap = abs(solution.value - solution.dual_objective)
        bundle.record(f"{name}.duality_gap", gap <= 1e-6 * max(1.0, abs(solution.value)),
                      f"gap {gap:.3e}")
        for i, meta in enumerate(instance.row_meta):
            bundle.duals.append([name, meta.kind,
                                 -1 if meta.basis_index is None else meta.basis_index,
                                 float(solution.row_duals[i])])
        variant = instance.provenance["variant"]
        if variant in ("nonergodic", "perturbed", "ergodic"):
            cert = extract_dual_certificate(solution, instance, basis)
            bundle.certificates[name] = {
                "mu": cert.mu,
                "psi_coeffs": [float(v) for v in cert.psi_coeffs],
                "eta_coeffs": [float(v) for v in cert.eta_coeffs],
                "y0": None if cert.y0 is None else [float(v) for v in cert.y0],
                "epsilon": cert.epsilon,
                "f_bound": cert.f_bound,
            }
            bundle.values[f"{name}.mu"] = cert.mu
            bundle.record(f"{name}.weak_duality",
                          verify_weak_duality(solution.value, cert.mu),
                          f"value {solution.value:.9f} vs mu {cert.mu:.9f}")
            bundle.record(f"{name}.mu_matches_value",
                          abs(solution.value - cert.mu) <= 1e-6,
                          f"|value - mu| = {abs(solution.value - cert.mu):.3e}")
            f1, f2 = certificate_slacks(cert, grid, basis, spec)
            bundle.values[f"{name}.certificate_min_slack_lower_bound"] = float(np.min(f1))
            bundle.values[f"{name}.certificate_min_slack_monotonicity"] = float(np.min(f2))
            bundle.record(f"{name}.certificate_feasible",
                          min(np.min(f1), np.min(f2)) >= -1e-6,
                          f"min slacks {np.min(f1):.3e}, {np.min(f2):.3e}")
        if solution.gamma is not None:
            bundle.measures[f"{name}.gamma"] = _measure_payload(solution.gamma)
        if solution.xi is not None:
            bundle.measures[f"{name}.xi"] = _measure_payload(solution.xi)
            bundle.values[f"{name}.xi_mass"] = solution.xi.total_mass
            if solution.cap_binding:
                bundle.warnings.append(
                    f"{name}: xi mass cap binding (coupled feasible set may be "
                    f"far from closed at this discretisation)")

    if "ergodic" in prog.variants and "nonergodic" in prog.variants:
        erg = results["ergodic"][1]
        non = results["nonergodic"][1]
        if erg.status == "optimal" and non.status == "optimal":
            bundle.record("ergodic_below_nonergodic",
                          erg.value <= non.value + 1e-7,
                          f"{erg.value:.9f} <= {non.value:.9f} + 1e-7")

    if "perturbed" in prog.variants and len(prog.epsilons) >= 2:
        eps_sorted = sorted(prog.epsilons)
        rows, ok_monotone = [], True
        values_by_eps = {}
        for eps in prog.epsilons:
            sol = results[f"perturbed[eps={eps:g}]"][1]
            if sol.status == "optimal":
                values_by_eps[eps] = sol.value
        prev = None
        for eps in eps_sorted:
            if eps not in values_by_eps:
                continue
            value = values_by_eps[eps]
            monotone = prev is None or value >= prev - 1e-7
            ok_monotone &= monotone
            rows.append([eps, value, monotone])
            prev = value
        bundle.tables["epsilon_sweep"] = {
            "columns": ["epsilon", "value", "monotone_nondecreasing_in_epsilon"],
            "rows": rows}
        bundle.record("perturbed_monotone_in_epsilon", ok_monotone)
        if 0.0 in values_by_eps:
            base = values_by_eps[0.0]
            bundle.record("perturbed_dominates_unperturbed",
                          all(v >= base - 1e-7 for v in values_by_eps.values()))
            if 0.001 in values_by_eps:
                bundle.record("perturbed_small_eps_convergence",
                              abs(values_by_eps[0.001] - base) <= 1e-2,
                              f"|value(0.001) - value(0)| = "
                              f"{abs(values_by_eps[0.001] - base):.3e}")
    return results


def _simulate_section(bundle, spec, grid, basis, cfg: StudyConfig, solve_results):
    sim = cfg.simulate
    if not sim.policy:
        return
    y0 = np.asarray(cfg.program.y0, dtype=float)
    policy = build_policy(sim.policy, spec, y0)

    # one trajectory per horizon, reused for average values, empirical
    # measures, residual decay and the weak-* distance trend
    horizons = sorted(sim.horizons)
    trajectories = {h: integrate(spec, y0, policy, h, sim.dt) for h in horizons}
    empirical = {h: empirical_occupational_measure(trajectories[h], grid)
                 for h in horizons}

    horizon_rows = []
    for horizon in horizons:
        value = cesaro_value(trajectories[horizon], spec)
        horizon_rows.append([horizon, value])
        bundle.values[f"cesaro[T={horizon:g}]"] = value
    bundle.tables["cesaro_by_horizon"] = {"columns": ["horizon", "cesaro_value"],
                                          "rows": horizon_rows}

    for rate in sim.abel_rates:
        result = abel_value(spec, y0, policy, rate, horizon=sim.abel_horizon,
                            dt=sim.abel_dt, tail_tolerance=1e-2)
        bundle.values[f"abel[rate={rate:g}]"] = result.value
        bundle.values[f"abel_tail_bound[rate={rate:g}]"] = result.tail_bound
        name = f"discounted[rate={rate:g}]"
        if name in solve_results and solve_results[name][1].status == "optimal":
            lp_value = solve_results[name][1].value
            bundle.record(f"discounted_lp_below_abel[rate={rate:g}]",
                          lp_value <= result.value + 0.05,
                          f"LP {lp_value:.4f} <= abel {result.value:.4f} + 0.05")

    decay_rows = []
    for horizon in horizons:
        res = membership_residual(empirical[horizon], grid, basis, y0)
        decay_rows.append([horizon, res.w_residual, res.omega_residual])
    bundle.tables["residual_decay"] = {
        "columns": ["horizon", "w_residual", "omega_residual"], "rows": decay_rows}
    floor = min(row[1] for row in decay_rows)
    ok = all(b[1] <= a[1] + 2.0 * floor + 1e-12
             for a, b in zip(decay_rows, decay_rows[1:]))
    bundle.record("w_residual_nonincreasing", ok,
                  "across horizon doublings, within twice the floor")

    # weak-* distance of empirical measures to the coupled optimum, per horizon
    non = solve_results.get("nonergodic")
    if non is not None and non[1].status == "optimal":
        tf = make_test_function_set(basis, spec.region)
        rows = [[h, rho_hat(empirical[h], non[1].gamma, tf)] for h in horizons]
        bundle.tables["empirical_to_optimal_distance"] = {
            "columns": ["horizon", "rho_hat"], "rows": rows}

    if sim.periodic_deltas:
        candidates = rotation_delta_family(spec, y0, sim.periodic_deltas)
        search = periodic_value_search(spec, y0, candidates, dt=sim.periodic_dt)
        bundle.tables["periodic_family"] = {
            "columns": ["label", "period", "closure_error", "value"],
            "rows": [[r.label, r.period, r.closure_error, r.value] for r in search.rows]}
        bundle.values["periodic.best_value"] = search.best_value
        bundle.record("periodic_loops_close",
                      all(r.closed for r in search.rows),
                      "every candidate returns to y0 within tolerance")

    # simulated long-run averages can never beat the certified lower bound
    mu = bundle.values.get("nonergodic.mu")
    if mu is not None and horizon_rows:
        final = horizon_rows[-1][1]
        bundle.record("cesaro_above_dual_bound", final >= mu - 0.05,
                      f"cesaro {final:.4f} >= mu {mu:.4f} - 0.05")


def _sweep_section(bundle, spec, grid, basis, cfg: StudyConfig, solve_results, jobs: int):
    prog = cfg.program
    y0 = np.asarray(prog.y0, dtype=float)
    if prog.discount_rates:
        rows = []
        for rate in sorted(prog.discount_rates):
            name = f"discounted[rate={rate:g}]"
            if name in solve_results and solve_results[name][1].status == "optimal":
                rows.append([rate, solve_results[name][1].value])
            else:
                instance = build_discounted_lp(grid, basis, spec, y0, rate)
                solution = solve(instance)
                if solution.status == "optimal":
                    rows.append([rate, solution.value])
        if rows:
            bundle.tables["discount_sweep"] = {"columns": ["rate", "lp_value"], "rows": rows}


def _convergence_section(bundle, spec, grid, basis, cfg: StudyConfig):
    """Refinement study: value stability under angular doubling and degree bump."""
    y0 = np.asarray(cfg.program.y0, dtype=float)
    base = solve(build_nonergodic_lp(grid, basis, spec, y0,
                                     xi_mass_cap=cfg.program.xi_mass_cap))
    if base.status != "optimal":
        bundle.record("convergence.base_solved", False, base.message)
        return
    rows = [["base", cfg.basis.degree, str(tuple(cfg.grid.state_resolution)), base.value]]
    state_res = list(cfg.grid.state_resolution)
    refined_res = state_res[:-1] + [state_res[-1] * 2]
    fine_grid = build_grid(spec, tuple(refined_res), cfg.grid.control_resolution)
    fine_basis = basis_for_region(spec.region, cfg.basis.degree + 2)
    fine = solve(build_nonergodic_lp(fine_grid, fine_basis, spec, y0,
                                     xi_mass_cap=cfg.program.xi_mass_cap))
    if fine.status != "optimal":
        bundle.record("convergence.refined_solved", False, fine.message)
        return
    rows.append(["refined", cfg.basis.degree + 2, str(tuple(refined_res)), fine.value])
    bundle.tables["refinement"] = {
        "columns": ["level", "degree", "state_resolution", "value"], "rows": rows}
    delta = abs(fine.value - base.value)
    bundle.values["refinement.delta"] = delta
    bundle.record("refinement_stable", delta <= 0.02, f"|delta| = {delta:.4f}")

    degree_rows = []
    for degree in range(2, cfg.basis.degree + 1):
        b = basis_for_region(spec.region, degree)
        sol = solve(build_nonergodic_lp(grid, b, spec, y0,
                                        xi_mass_cap=cfg.program.xi_mass_cap))
        if sol.status == "optimal":
            degree_rows.append([degree, sol.value])
    bundle.tables["degree_sweep"] = {"columns": ["degree", "value"], "rows": degree_rows}


def _certify_section(bundle, spec, grid, basis, cfg: StudyConfig, solve_results):
    y0 = np.asarray(cfg.program.y0, dtype=float)
    pair = solve_results.get("nonergodic")
    if pair is None:
        instance = build_nonergodic_lp(grid, basis, spec, y0,
                                       xi_mass_cap=cfg.program.xi_mass_cap)
        solution = solve(instance)
    else:
        instance, solution = pair
    if solution.status != "optimal":
        bundle.record("certify.solved", False, solution.message)
        return
    cert = extract_dual_certificate(solution, instance, basis)
    report = certificate_offgrid_report(cert, grid, basis, spec)
    bundle.values["certify.offgrid_min_slack_lower_bound"] = report["min_lower_bound_slack"]
    bundle.values["certify.offgrid_min_slack_monotonicity"] = report["min_monotonicity_slack"]
    bundle.values["certify.offgrid_sample_count"] = report["sample_count"]
    res = membership_residual(solution.gamma, grid, basis, y0)
    bundle.values["certify.gamma_w_residual"] = res.w_residual
    bundle.values["certify.gamma_omega_residual"] = res.omega_residual
    bundle.record("certify.optimal_gamma_feasible",
                  max(res.w_residual, res.omega_residual) <= 1e-7,
                  f"residuals {res.w_residual:.2e}, {res.omega_residual:.2e}")


def _oracle_section(bundle, spec, cfg: StudyConfig):
    y0 = np.asarray(cfg.program.y0, dtype=float)
    if spec.region.kind == "annulus":
        z0 = float((y0[0] - spec.region.center[0]) ** 2
                   + (y0[1] - spec.region.center[1]) ** 2)
        level = rotation_level_value(spec, z0)
        bundle.values["oracle.level_value"] = level.value
        bundle.values["oracle.level"] = z0
        levels = np.linspace(spec.region.inner ** 2, spec.region.outer ** 2, 21)
        table = level_set_ordering(spec, levels)
        bundle.tables["oracle_levels"] = {"columns": ["level", "value"],
                                          "rows": [[z, v] for z, v in table.rows]}
        bundle.values["oracle.min_over_levels"] = table.min_value
    elif spec.bound_f == 0.0:
        result = frozen_value(spec, y0)
        bundle.values["oracle.frozen_value"] = result.value
        bundle.values["oracle.frozen_attained_by"] = result.attained_by


def run_study(config: StudyConfig, sections=_ALL_SECTIONS, jobs: int = 1) -> ReportBundle:
    """Run the configured study and return a report bundle.

    Deterministic given configuration + seed + build: no wall-clock data is
    recorded and all numeric paths are seed-free or seeded.
    """
    spec = build_system(config.system)
    grid = build_grid(spec, tuple(config.grid.state_resolution),
                      config.grid.control_resolution)
    basis = basis_for_region(spec.region, config.basis.degree)
    bundle = ReportBundle(config=config.resolved_dict(),
                          environment=_environment_stamp())
    bundle.values["grid.atom_count"] = grid.atom_count
    bundle.values["basis.count"] = basis.count

    solve_results = {}
    if "solve" in sections or "sweep" in sections or "certify" in sections \
            or "simulate" in sections:
        solve_results = _solve_section(bundle, spec, grid, basis, config, jobs)
    if "simulate" in sections:
        _simulate_section(bundle, spec, grid, basis, config, solve_results)
    if "sweep" in sections:
        _sweep_section(bundle, spec, grid, basis, config, solve_results, jobs)
    if "convergence" in sections:
        _convergence_section(bundle, spec, grid, basis, config)
    if "certify" in sections:
        _certify_section(bundle, spec, grid, basis, config, solve_results)
    if "oracle" in sections:
        _oracle_section(bundle, spec, config)
    return bundle


# ---------------------------------------------------------------------------
# emission


def _write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(v) for v in row) + "\n")


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(bundle: ReportBundle, out_dir: str, formats=("json",)) -> list[str]:
    """Write the bundle; returns the list of files written.

    ``json`` produces ``report.json``.  ``csv-dir`` produces ``values.csv``,
    ``duals.csv``, ``measures/*.csv`` and ``sweeps/*.csv`` (sweeps directory
    only when the study produced sweep tables).
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if "json" in formats:
        path = os.path.join(out_dir, "report.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(bundle.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    if "csv-dir" in formats:
        path = os.path.join(out_dir, "values.csv")
        _write_csv(path, ["name", "value"],
                   [[k, v] for k, v in bundle.values.items()])
        written.append(path)
        path = os.path.join(out_dir, "duals.csv")
        _write_csv(path, ["program", "row_kind", "basis_index", "marginal"], bundle.duals)
        written.append(path)
        if bundle.measures:
            measures_dir = os.path.join(out_dir, "measures")
            os.makedirs(measures_dir, exist_ok=True)
            for name, payload in bundle.measures.items():
                path = os.path.join(measures_dir, f"{name}.csv")
                _write_csv(path, ["atom_index", "weight"],
                           list(zip(payload["atom_index"], payload["weight"])))
                written.append(path)
        if bundle.tables:
            sweeps_dir = os.path.join(out_dir, "sweeps")
            os.makedirs(sweeps_dir, exist_ok=True)
            for name, table in bundle.tables.items():
                path = os.path.join(sweeps_dir, f"{name}.csv")
                _write_csv(path, table["columns"], table["rows"])
                written.append(path)
    return written


def export_trajectory_csv(traj: Trajectory, path: str):
    """Trajectory interchange: t, state components, control components, inY."""
    m, p = traj.states.shape[1], traj.controls.shape[1]
    columns = (["t"] + [f"y{i+1}" for i in range(m)]
               + [f"u{i+1}" for i in range(p)] + ["inY"])
    rows = []
    for i, t in enumerate(traj.times):
        u = traj.controls[min(i, len(traj.controls) - 1)]
        rows.append([float(t)] + [float(v) for v in traj.states[i]]
                    + [float(v) for v in u] + [int(traj.in_region[i])])
    _write_csv(path, columns, rows)


def export_measure_csv(measure: DiscreteMeasure, path: str):
    """Measure interchange: atom index, state components, control components, weight."""
    grid = measure.grid
    m, p = grid.state_points.shape[1], grid.control_points.shape[1]
    columns = (["atom_index"] + [f"y{i+1}" for i in range(m)]
               + [f"u{i+1}" for i in range(p)] + ["weight"])
    rows = []
    for a in np.flatnonzero(measure.weights > 0):
        y, u = grid.atom(int(a))
        rows.append([int(a)] + [float(v) for v in y] + [float(v) for v in u]
                    + [float(measure.weights[a])])
    _write_csv(path, columns, rows)


# ---------------------------------------------------------------------------
# entry point


def _build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="occlp",
        description="Long-run average optimal control via occupation-measure LPs")
    parser.add_argument("command", choices=_ALL_SECTIONS,
                        help="which part of the study to run")
    parser.add_argument("--config", required=False, help="study configuration file")
    parser.add_argument("--out", default=None, help="output directory (default from config)")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker pool size for independent solves")
    parser.add_argument("--print-defaults", action="store_true",
                        help="print the default configuration and exit")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("OCCLP_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_arg_parser()
    args = parser.parse_args(argv)
    if args.print_defaults:
        sys.stdout.write(default_config_text())
        return 0
    if not args.config:
        parser.error("--config is required (or use --print-defaults)")
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = parse_config(fh.read())
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 2
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    bundle = run_study(config, sections=(args.command,), jobs=args.jobs)
    out_dir = args.out or config.output.dir
    written = emit_report(bundle, out_dir, config.output.formats)
    for path in written:
        log.info("wrote %s", path)
    for warning in bundle.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if not bundle.all_passed():
        for entry in bundle.invariants:
            if not entry["passed"]:
                print(f"FAILED: {entry['name']}: {entry['detail']}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
