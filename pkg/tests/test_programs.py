import numpy as np
import pytest

from occlp import oracle, system
from occlp.basis import basis_for_region, phi_matrix
from occlp.grid import DiscreteMeasure, build_grid
from occlp.programs import (DEFAULT_XI_MASS_CAP, LpInstance, ProgramError, RowMeta,
                            build_discounted_lp, build_ergodic_lp,
                            build_nonergodic_lp, build_perturbed_lp,
                            certificate_is_valid, certificate_offgrid_report,
                            certificate_slacks, export_lp_text,
                            extract_dual_certificate, membership_residual,
                            parse_lp_text, snap_to_state_grid, solve,
                            verify_weak_duality)


@pytest.fixture(scope="module")
def frozen_setup():
    spec = system.make_frozen(lower=(0.0, 0.0), upper=(1.0, 1.0), cost_id="y1 + u1^2")
    g = build_grid(spec, 2, 9)
    b = basis_for_region(spec.region, 4)
    return spec, g, b


@pytest.fixture(scope="module")
def rotation_setup():
    spec = system.make_rotation()
    g = build_grid(spec, (5, 64), 9)
    b = basis_for_region(spec.region, 4)
    return spec, g, b


@pytest.fixture(scope="module")
def rotation_solved(rotation_setup):
    spec, g, b = rotation_setup
    instance = build_nonergodic_lp(g, b, spec, (1.0, 0.0))
    return instance, solve(instance)


def brute_force_atom_minimum(grid, spec):
    costs = [system.eval_cost(spec, *grid.atom(a)) for a in range(grid.atom_count)]
    return min(costs)


# ---------------------------------------------------------------------------
# solve contract


def test_ergodic_frozen_equals_exhaustive_scan(frozen_setup):
    spec, g, b = frozen_setup
    solution = solve(build_ergodic_lp(g, b, spec))
    assert solution.status == "optimal"
    assert solution.value == pytest.approx(brute_force_atom_minimum(g, spec), abs=1e-9)
    # zero dynamics leave only the simplex: optimum sits on the cheapest atom
    best = int(np.argmax(solution.gamma.weights))
    y, u = g.atom(best)
    assert system.eval_cost(spec, y, u) == pytest.approx(solution.value, abs=1e-9)


def test_ergodic_constant_cost(frozen_setup):
    _spec, g, b = frozen_setup
    const = system.make_frozen(lower=(0.0, 0.0), upper=(1.0, 1.0), cost_id="3")
    solution = solve(build_ergodic_lp(g, b, const))
    assert solution.value == pytest.approx(3.0, abs=1e-9)


def test_infeasible_instance_surfaces_as_status(frozen_setup):
    _spec, g, b = frozen_setup
    n = g.atom_count
    meta = (RowMeta("flow", 0), RowMeta("normalization", None))
    instance = LpInstance(grid=g, basis=b, objective_gamma=np.ones(n), objective_xi=None,
                          eq_gamma=np.vstack([np.ones((1, n)), np.ones((1, n))]),
                          eq_xi=None, eq_rhs=np.array([2.0, 1.0]),
                          row_meta=meta, xi_mass_cap=None)
    assert solve(instance).status == "infeasible"


def test_instance_validation(frozen_setup):
    _spec, g, b = frozen_setup
    n = g.atom_count
    with pytest.raises(ProgramError):
        LpInstance(grid=g, basis=b, objective_gamma=np.ones(n), objective_xi=None,
                   eq_gamma=np.ones((1, n)), eq_xi=None, eq_rhs=np.array([1.0]),
                   row_meta=(RowMeta("flow", 0),), xi_mass_cap=None)  # no normalization
    with pytest.raises(ProgramError):
        LpInstance(grid=g, basis=b, objective_gamma=np.ones(n), objective_xi=None,
                   eq_gamma=np.ones((1, n)), eq_xi=None, eq_rhs=np.array([1.0]),
                   row_meta=(RowMeta("bogus", None),), xi_mass_cap=None)


def test_solver_duality_gap_contract(rotation_solved):
    _instance, solution = rotation_solved
    assert solution.status == "optimal"
    assert abs(solution.value - solution.dual_objective) <= 1e-8 * max(1.0, abs(solution.value))
    assert solution.primal_residual <= 1e-7
    assert solution.complementarity_residual <= 1e-6


# ---------------------------------------------------------------------------
# the coupled program


def test_nonergodic_frozen_matches_frozen_oracle(frozen_setup):
    spec, g, b = frozen_setup
    y0 = (0.25, 0.25)  # a grid state
    solution = solve(build_nonergodic_lp(g, b, spec, y0))
    assert solution.status == "optimal"
    reference = oracle.frozen_value(spec, y0)
    assert solution.value == pytest.approx(reference.value, abs=1e-8)
    # the optimal measure reproduces the start point's moments up to degree d
    phis = phi_matrix(b, g.atom_states)
    moments = phis @ solution.gamma.weights
    target = phi_matrix(b, np.array([y0]))[:, 0]
    assert np.max(np.abs(moments - target)) <= 1e-7


def test_nonergodic_snaps_off_grid_start(frozen_setup):
    spec, g, b = frozen_setup
    idx, snapped = snap_to_state_grid(g, (0.26, 0.27))
    assert np.allclose(snapped, (0.25, 0.25))
    solution = solve(build_nonergodic_lp(g, b, spec, (0.26, 0.27)))
    assert solution.status == "optimal"
    assert solution.value == pytest.approx(oracle.frozen_value(spec, snapped).value, abs=1e-8)


def test_nonergodic_rotation_start_circle_pins_value(rotation_setup, rotation_solved):
    spec, g, b = rotation_setup
    _instance, solution = rotation_solved
    assert solution.status == "optimal"
    reference = oracle.rotation_level_value(spec, 1.0)
    assert reference.value == pytest.approx(-1.0, abs=1e-9)
    assert solution.value == pytest.approx(reference.value, abs=0.05)
    # the ergodic program ignores the start circle and digs to the outer rim
    erg = solve(build_ergodic_lp(g, b, spec))
    assert erg.value == pytest.approx(-1.5, abs=1e-8)
    assert erg.value <= solution.value + 1e-7


def test_nonergodic_constant_cost(rotation_setup):
    _spec, g, b = rotation_setup
    const = system.make_rotation(cost_id="3")
    solution = solve(build_nonergodic_lp(g, b, const, (1.0, 0.0)))
    assert solution.value == pytest.approx(3.0, abs=1e-8)


def test_support_concentrates_on_start_circle(rotation_setup, rotation_solved):
    _spec, g, _b = rotation_setup
    _instance, solution = rotation_solved
    radii = np.linalg.norm(g.atom_states, axis=1)
    on_circle = np.abs(radii - 1.0) <= 1e-9
    assert solution.gamma.weights[on_circle].sum() >= 0.999


def test_ergodic_system_value_is_start_independent():
    # contrast system: every start point can reach the optimal equilibrium, so
    # the coupled value collapses to the start-free one, with the transport
    # mass growing with the distance to cover
    spec = system.make_scalar_drift(cost_id="y1^2")
    g = build_grid(spec, 9, 9)
    b = basis_for_region(spec.region, 4)
    ergodic = solve(build_ergodic_lp(g, b, spec)).value
    assert ergodic == pytest.approx(0.0, abs=1e-8)
    masses = []
    for y0 in (g.state_points[4, 0], g.state_points[7, 0]):
        solution = solve(build_nonergodic_lp(g, b, spec, (y0,)))
        assert solution.status == "optimal"
        assert solution.value == pytest.approx(ergodic, abs=1e-7)
        masses.append(solution.xi.total_mass)
    assert masses[0] == pytest.approx(0.0, abs=1e-9)  # starting at the optimum
    assert masses[1] > 0.1  # starting away from it needs transport


# ---------------------------------------------------------------------------
# discounted program


def test_discounted_frozen_equals_nonergodic(frozen_setup):
    spec, g, b = frozen_setup
    y0 = (0.25, 0.25)
    base = solve(build_nonergodic_lp(g, b, spec, y0)).value
    for rate in (0.01, 0.5, 10.0):
        solution = solve(build_discounted_lp(g, b, spec, y0, rate))
        assert solution.status == "optimal"
        assert solution.value == pytest.approx(base, abs=1e-7)


def test_discounted_large_rate_concentrates_at_start():
    spec = system.make_scalar_drift(cost_id="y1^2")
    g = build_grid(spec, 9, 9)
    b = basis_for_region(spec.region, 4)
    y0 = (g.state_points[6, 0],)  # a grid state away from the cost minimum
    start_cost = min(system.eval_cost(spec, y0, (u,)) for u in g.control_points[:, 0])
    gaps = []
    for rate in (1.0, 10.0, 100.0):
        solution = solve(build_discounted_lp(g, b, spec, y0, rate))
        assert solution.status == "optimal"
        gaps.append(abs(solution.value - start_cost))
    assert gaps[0] >= gaps[1] >= gaps[2] - 1e-12
    assert gaps[-1] <= 0.05


def test_discounted_constant_cost(rotation_setup):
    _spec, g, b = rotation_setup
    const = system.make_rotation(cost_id="3")
    solution = solve(build_discounted_lp(g, b, const, (1.0, 0.0), 0.1))
    assert solution.value == pytest.approx(3.0, abs=1e-8)


def test_discounted_rejects_nonpositive_rate(rotation_setup):
    spec, g, b = rotation_setup
    with pytest.raises(ProgramError):
        build_discounted_lp(g, b, spec, (1.0, 0.0), 0.0)


# ---------------------------------------------------------------------------
# perturbed program


def test_perturbed_zero_epsilon_is_identical(rotation_setup):
    spec, g, b = rotation_setup
    base = build_nonergodic_lp(g, b, spec, (1.0, 0.0))
    pert = build_perturbed_lp(g, b, spec, (1.0, 0.0), 0.0)
    assert np.array_equal(base.objective_gamma, pert.objective_gamma)
    assert np.array_equal(base.objective_xi, pert.objective_xi)
    assert np.array_equal(base.eq_gamma, pert.eq_gamma)
    assert np.array_equal(base.eq_xi, pert.eq_xi)
    assert np.array_equal(base.eq_rhs, pert.eq_rhs)
    assert base.row_meta == pert.row_meta


def test_perturbed_sweep_monotone_and_convergent(rotation_setup):
    spec, g, b = rotation_setup
    values = {}
    for eps in (0.1, 0.01, 0.001, 0.0):
        solution = solve(build_perturbed_lp(g, b, spec, (1.0, 0.0), eps))
        assert solution.status == "optimal"
        values[eps] = solution.value
    assert values[0.0] <= values[0.001] + 1e-7
    assert values[0.001] <= values[0.01] + 1e-7
    assert values[0.01] <= values[0.1] + 1e-7
    assert all(v >= values[0.0] - 1e-7 for v in values.values())
    assert abs(values[0.001] - values[0.0]) <= 1e-2


def test_perturbed_constant_cost_shift(frozen_setup):
    _spec, g, b = frozen_setup
    const = system.make_frozen(lower=(0.0, 0.0), upper=(1.0, 1.0), cost_id="3")
    solution = solve(build_perturbed_lp(g, b, const, (0.25, 0.25), 0.01))
    assert solution.xi.total_mass <= 1e-9  # no transport needed from a grid start
    assert solution.value == pytest.approx(3.0 + 2 * 0.01, abs=1e-8)


def test_perturbed_rejects_negative_epsilon(rotation_setup):
    spec, g, b = rotation_setup
    with pytest.raises(ProgramError):
        build_perturbed_lp(g, b, spec, (1.0, 0.0), -0.1)


# ---------------------------------------------------------------------------
# certificates


def test_certificate_constant_cost(frozen_setup):
    _spec, g, b = frozen_setup
    const = system.make_frozen(lower=(0.0, 0.0), upper=(1.0, 1.0), cost_id="3")
    instance = build_nonergodic_lp(g, b, const, (0.25, 0.25))
    solution = solve(instance)
    cert = extract_dual_certificate(solution, instance, b)
    assert cert.mu == pytest.approx(3.0, abs=1e-8)
    assert certificate_is_valid(cert, g, b, const)


def test_certificate_rotation(rotation_setup, rotation_solved):
    spec, g, b = rotation_setup
    instance, solution = rotation_solved
    cert = extract_dual_certificate(solution, instance, b)
    assert cert.mu == pytest.approx(solution.value, abs=1e-6)
    f1, f2 = certificate_slacks(cert, g, b, spec)
    assert np.min(f1) >= -1e-6
    assert np.min(f2) >= -1e-6
    assert verify_weak_duality(solution.value, cert.mu)
    report = certificate_offgrid_report(cert, g, b, spec, density_factor=4)
    assert report["sample_count"] > g.atom_count
    assert report["min_lower_bound_slack"] <= 1e-6  # tight somewhere near the optimum


def test_certificate_frozen_equals_scan(frozen_setup):
    spec, g, b = frozen_setup
    instance = build_nonergodic_lp(g, b, spec, (0.25, 0.25))
    solution = solve(instance)
    cert = extract_dual_certificate(solution, instance, b)
    assert cert.mu == pytest.approx(oracle.frozen_value(spec, (0.25, 0.25)).value, abs=1e-7)


def test_certificate_perturbed_families_use_epsilon_slack(rotation_setup):
    spec, g, b = rotation_setup
    instance = build_perturbed_lp(g, b, spec, (1.0, 0.0), 0.01)
    solution = solve(instance)
    cert = extract_dual_certificate(solution, instance, b)
    assert cert.epsilon == 0.01
    assert cert.f_bound == spec.bound_f
    assert certificate_is_valid(cert, g, b, spec)
    assert cert.mu == pytest.approx(solution.value, abs=1e-6)


def test_certificate_requires_optimal(frozen_setup):
    spec, g, b = frozen_setup
    n = g.atom_count
    meta = (RowMeta("flow", 0), RowMeta("normalization", None))
    bad = LpInstance(grid=g, basis=b, objective_gamma=np.ones(n), objective_xi=None,
                     eq_gamma=np.vstack([np.ones((1, n)), np.ones((1, n))]),
                     eq_xi=None, eq_rhs=np.array([2.0, 1.0]),
                     row_meta=meta, xi_mass_cap=None)
    solution = solve(bad)
    with pytest.raises(ProgramError):
        extract_dual_certificate(solution, bad, b)


def test_certificate_not_defined_for_discounted(frozen_setup):
    spec, g, b = frozen_setup
    instance = build_discounted_lp(g, b, spec, (0.25, 0.25), 1.0)
    solution = solve(instance)
    with pytest.raises(ProgramError):
        extract_dual_certificate(solution, instance, b)


def test_weak_duality_helper():
    assert verify_weak_duality(1.0, 1.0)
    assert verify_weak_duality(1.0, 0.5)
    assert not verify_weak_duality(0.5, 1.0)


# ---------------------------------------------------------------------------
# membership residuals


def test_membership_of_lp_optimum(rotation_setup, rotation_solved):
    spec, g, b = rotation_setup
    _instance, solution = rotation_solved
    res = membership_residual(solution.gamma, g, b, (1.0, 0.0))
    assert res.w_residual <= 1e-7
    assert res.omega_residual <= 1e-7


def test_membership_flags_flow_violations():
    spec = system.make_scalar_drift(cost_id="y1^2")
    g = build_grid(spec, 9, 5)
    b = basis_for_region(spec.region, 4)
    uniform = DiscreteMeasure(g, np.full(g.atom_count, 1.0 / g.atom_count))
    res = membership_residual(uniform, g, b, (0.0,))
    assert res.w_residual > 0.1


def test_membership_requires_probability(rotation_setup):
    spec, g, b = rotation_setup
    with pytest.raises(ProgramError):
        membership_residual(DiscreteMeasure(g, np.zeros(g.atom_count)), g, b, (1.0, 0.0))


def test_omega_residual_shrinks_under_grid_refinement():
    # empirical measure of a whole loop: coarser angular binning leaves a
    # larger best-fit coupling residual
    import math

    from occlp.simulate import ConstantPolicy, empirical_occupational_measure, integrate

    spec = system.make_rotation()
    residuals = []
    for n_theta in (8, 16, 32):
        g = build_grid(spec, (5, n_theta), 3)
        b = basis_for_region(spec.region, 4)
        traj = integrate(spec, (1.0, 0.0), ConstantPolicy(1.0), 2 * math.pi, 1e-3)
        emp = empirical_occupational_measure(traj, g)
        residuals.append(membership_residual(emp, g, b, (1.0, 0.0)).omega_residual)
    assert residuals[0] >= residuals[1] >= residuals[2] - 1e-12
    assert residuals[-1] <= 0.05


# ---------------------------------------------------------------------------
# mass cap and text export


def test_xi_mass_is_canonical_minimum(rotation_solved):
    _instance, solution = rotation_solved
    # the steering transport from (1,0) to the antipode occupies about a half
    # loop of unit-speed time; far below the cap, and certainly not at it
    assert 0.0 < solution.xi.total_mass < 10.0
    assert not solution.cap_binding


def test_tiny_cap_binds_and_is_flagged(rotation_setup):
    spec, g, b = rotation_setup
    instance = build_nonergodic_lp(g, b, spec, (1.0, 0.0), xi_mass_cap=1.0)
    solution = solve(instance)
    if solution.status == "optimal":
        assert solution.cap_binding
    else:
        assert solution.status == "infeasible"


def test_lp_text_round_trip(rotation_setup):
    spec, g, b = rotation_setup
    instance = build_nonergodic_lp(g, b, spec, (1.0, 0.0))
    text = export_lp_text(instance)
    parsed = parse_lp_text(text)
    assert parsed["n_gamma"] == instance.n_gamma
    assert parsed["n_xi"] == instance.n_xi
    assert parsed["cap"] == DEFAULT_XI_MASS_CAP
    full_obj = np.concatenate([instance.objective_gamma, instance.objective_xi])
    assert np.array_equal(parsed["objective"], full_obj)
    full_rows = np.hstack([instance.eq_gamma, instance.eq_xi])
    assert np.array_equal(parsed["rows"], full_rows)
    assert np.array_equal(parsed["rhs"], instance.eq_rhs)
    assert parsed["meta"] == [(m.kind, m.basis_index) for m in instance.row_meta]
