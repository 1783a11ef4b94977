"""Trajectory integration and simulation-side values.

Fixed-step fourth-order Runge-Kutta with the control held at its value from
the left endpoint of each step; no adaptivity, so runs are reproducible
bit-for-bit.  On top of the integrator:

* finite-horizon average values (per-step trapezoidal quadrature),
* discounted values with a certified truncation-tail interval,
* empirical (and discounted-empirical) measures on a grid, by nearest-atom
  binning, which keeps them exactly nonnegative and exactly massed,
* a periodic-policy family search giving certified upper bounds plus a trend
  table, and
* a horizon sweep of the membership residuals of empirical measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import BasisSpec
from .grid import DiscreteMeasure, Grid, nearest_atom_index
from .programs import MembershipResidual, membership_residual
from .system import SystemSpec, cost_batch, dynamics_fn


class SimulationError(RuntimeError):
    pass


class StateConstraintError(SimulationError):
    pass


class InsufficientHorizonError(SimulationError):
    pass


# ---------------------------------------------------------------------------
# policies


class Policy:
    """Maps (time, state) to a control vector inside the control region."""

    def control(self, t: float, y: tuple) -> tuple:
        raise NotImplementedError


class ConstantPolicy(Policy):
    def __init__(self, u):
        self.u = tuple(np.atleast_1d(np.asarray(u, dtype=float)).tolist())

    def control(self, t, y):
        return self.u


class SchedulePolicy(Policy):
    """Piecewise-constant open-loop schedule; optionally periodic.

    ``times`` are the left endpoints of the pieces (first must be 0) and
    ``values`` the controls held on them.  With ``period`` set, the schedule
    wraps around modulo the period.
    """

    def __init__(self, times, values, period: float | None = None):
        self.times = [float(t) for t in times]
        self.values = [tuple(np.atleast_1d(np.asarray(v, dtype=float)).tolist())
                       for v in values]
        if len(self.times) != len(self.values) or not self.times or self.times[0] != 0.0:
            raise SimulationError("schedule needs matching times/values starting at t=0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise SimulationError("schedule times must be strictly increasing")
        self.period = period

    def control(self, t, y):
        if self.period is not None:
            t = t % self.period
        # linear scan; schedules are short
        u = self.values[0]
        for start, value in zip(self.times, self.values):
            if t >= start:
                u = value
            else:
                break
        return u


class FeedbackPolicy(Policy):
    """Stationary feedback from an arbitrary state-to-control callable."""

    def __init__(self, fn):
        self.fn = fn

    def control(self, t, y):
        return tuple(np.atleast_1d(np.asarray(self.fn(y), dtype=float)).tolist())


def feedback_table_policy(grid: Grid, table: np.ndarray) -> FeedbackPolicy:
    """Feedback defined cellwise on a grid's state points (nearest-cell lookup)."""
    table = np.atleast_2d(np.asarray(table, dtype=float))
    if table.shape[0] != grid.state_points.shape[0]:
        raise SimulationError("feedback table must give one control per state point")
    pts = grid.state_points

    def lookup(y):
        d2 = ((pts - np.asarray(y)) ** 2).sum(axis=1)
        return table[int(np.argmin(d2))]

    return FeedbackPolicy(lookup)


class SteerThenHoldPolicy(Policy):
    """Follow one policy up to a switch time, another afterwards."""

    def __init__(self, steer: Policy, switch_time: float, hold: Policy):
        self.steer = steer
        self.switch_time = float(switch_time)
        self.hold = hold

    def control(self, t, y):
        return self.steer.control(t, y) if t < self.switch_time else self.hold.control(t, y)


# ---------------------------------------------------------------------------
# integration


@dataclass
class Trajectory:
    spec: SystemSpec
    dt: float
    times: np.ndarray  # (n+1,)
    states: np.ndarray  # (n+1, m)
    controls: np.ndarray  # (n, p), left-endpoint control of each step
    in_region: np.ndarray  # (n+1,) bool

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def fully_in_region(self) -> bool:
        return bool(np.all(self.in_region))

    def final_state(self) -> np.ndarray:
        return self.states[-1].copy()


def rk4_step(f, y: tuple, u: tuple, dt: float) -> tuple:
    """One classical Runge-Kutta step on plain float tuples."""
    k1 = f(y, u)
    k2 = f(tuple(yi + 0.5 * dt * ki for yi, ki in zip(y, k1)), u)
    k3 = f(tuple(yi + 0.5 * dt * ki for yi, ki in zip(y, k2)), u)
    k4 = f(tuple(yi + dt * ki for yi, ki in zip(y, k3)), u)
    return tuple(yi + dt * (a + 2.0 * b + 2.0 * c + d) / 6.0
                 for yi, a, b, c, d in zip(y, k1, k2, k3, k4))


def integrate(spec: SystemSpec, y0, policy: Policy, horizon: float,
              dt: float = 1e-3) -> Trajectory:
    """Integrate from y0 for ceil(horizon / dt) fixed steps."""
    if horizon <= 0 or dt <= 0:
        raise SimulationError("horizon and dt must be positive")
    y0 = np.asarray(y0, dtype=float)
    if not spec.region.contains(y0):
        raise StateConstraintError(f"y0 {y0.tolist()} outside the state region")
    n_steps = math.ceil(horizon / dt)
    # dt is a target step size; the actual step divides the horizon exactly so
    # that the final time is the requested one (loop-closure checks need this)
    dt = horizon / n_steps
    m, p = spec.dim_state, spec.dim_control
    f = dynamics_fn(spec)
    states = np.empty((n_steps + 1, m))
    controls = np.empty((n_steps, p))
    y = tuple(y0.tolist())
    states[0] = y
    for i in range(n_steps):
        t = i * dt
        u = policy.control(t, y)
        if len(u) != p:
            raise SimulationError(f"policy produced control of length {len(u)}, expected {p}")
        if not spec.control.contains(np.asarray(u)):
            raise SimulationError(f"policy control {u} escapes the control region at t={t}")
        controls[i] = u
        y = rk4_step(f, y, u, dt)
        if not all(math.isfinite(v) for v in y):
            raise SimulationError(f"non-finite state at t={t + dt}: {y}")
        states[i + 1] = y
    times = dt * np.arange(n_steps + 1)
    tol = spec.region.tolerance
    if spec.region.kind == "annulus":
        r = np.hypot(states[:, 0] - spec.region.center[0], states[:, 1] - spec.region.center[1])
        dist = np.maximum(spec.region.inner - r, r - spec.region.outer)
    else:
        lo, hi = spec.region.bounding_box()
        dist = np.max(np.maximum(lo - states, states - hi), axis=1)
    return Trajectory(spec=spec, dt=dt, times=times, states=states,
                      controls=controls, in_region=dist <= tol)


# ---------------------------------------------------------------------------
# values


def _step_costs(traj: Trajectory) -> np.ndarray:
    """Trapezoidal per-step cost integrals (control frozen within each step)."""
    k = cost_batch(traj.spec)
    left = k(traj.states[:-1], traj.controls)
    right = k(traj.states[1:], traj.controls)
    return 0.5 * (left + right) * traj.dt


def cesaro_value(traj: Trajectory, spec: SystemSpec) -> float:
    """Average cost over the trajectory's horizon."""
    if not traj.fully_in_region:
        bad = int(np.argmin(traj.in_region))
        raise StateConstraintError(
            f"trajectory leaves the region at t={traj.times[bad]:.6g}")
    return float(np.sum(_step_costs(traj)) / traj.horizon)


@dataclass(frozen=True)
class AbelValue:
    value: float
    tail_bound: float
    horizon: float


def abel_value(spec: SystemSpec, y0, policy: Policy, rate: float,
               horizon: float, dt: float = 1e-3,
               tail_tolerance: float = 1e-3) -> AbelValue:
    """Discounted value rate * integral of exp(-rate t) k, truncated at the horizon.

    The truncation error is certified: |tail| <= exp(-rate*horizon) * bound_k.
    Raises when the requested horizon cannot meet the tail tolerance.
    """
    if rate <= 0:
        raise SimulationError("discount rate must be positive")
    tail = math.exp(-rate * horizon) * spec.bound_k
    if tail > tail_tolerance:
        raise InsufficientHorizonError(
            f"horizon {horizon} leaves tail bound {tail:.3e} > {tail_tolerance:.3e}")
    traj = integrate(spec, y0, policy, horizon, dt)
    if not traj.fully_in_region:
        raise StateConstraintError("trajectory leaves the region")
    k = cost_batch(traj.spec)
    left = k(traj.states[:-1], traj.controls) * np.exp(-rate * traj.times[:-1])
    right = k(traj.states[1:], traj.controls) * np.exp(-rate * traj.times[1:])
    value = rate * float(np.sum(0.5 * (left + right) * traj.dt))
    return AbelValue(value=value, tail_bound=tail, horizon=traj.horizon)


# ---------------------------------------------------------------------------
# empirical measures


def empirical_occupational_measure(traj: Trajectory, grid: Grid) -> DiscreteMeasure:
    """Bin each step's (state, control) to its nearest atom with mass dt / T."""
    if not traj.fully_in_region:
        raise StateConstraintError("trajectory leaves the region")
    idx = nearest_atom_index(grid, traj.states[:-1], traj.controls)
    weights = np.zeros(grid.atom_count)
    np.add.at(weights, idx, traj.dt / traj.horizon)
    return DiscreteMeasure(grid, weights)


@dataclass(frozen=True)
class DiscountedEmpirical:
    measure: DiscreteMeasure
    tail_mass: float  # mass of the truncated tail, exp(-rate * horizon)


def empirical_discounted_measure(traj: Trajectory, rate: float, grid: Grid,
                                 tail_tolerance: float = 1e-2) -> DiscountedEmpirical:
    """Exponentially weighted binning; each step carries its exact weight
    integral exp(-rate t_i) - exp(-rate t_{i+1}), so the truncated total mass
    is exactly 1 - exp(-rate * horizon)."""
    if rate <= 0:
        raise SimulationError("discount rate must be positive")
    tail = math.exp(-rate * traj.horizon)
    if tail > tail_tolerance:
        raise InsufficientHorizonError(
            f"horizon {traj.horizon} leaves tail mass {tail:.3e} > {tail_tolerance:.3e}")
    if not traj.fully_in_region:
        raise StateConstraintError("trajectory leaves the region")
    idx = nearest_atom_index(grid, traj.states[:-1], traj.controls)
    decay = np.exp(-rate * traj.times)
    step_mass = decay[:-1] - decay[1:]
    weights = np.zeros(grid.atom_count)
    np.add.at(weights, idx, step_mass)
    return DiscountedEmpirical(DiscreteMeasure(grid, weights), tail_mass=tail)


# ---------------------------------------------------------------------------
# periodic search


@dataclass(frozen=True)
class PeriodicCandidate:
    label: str
    policy: Policy
    period: float


@dataclass(frozen=True)
class PeriodicSearchRow:
    label: str
    period: float
    closure_error: float
    value: float
    closed: bool


@dataclass(frozen=True)
class PeriodicSearchResult:
    best_value: float
    best_label: str
    rows: tuple[PeriodicSearchRow, ...]


def periodic_value_search(spec: SystemSpec, y0, candidates,
                          dt: float = 1e-2,
                          closure_tolerance: float = 1e-3) -> PeriodicSearchResult:
    """Average cost over one verified period for each candidate loop.

    A candidate counts only if its trajectory returns to y0 within the closure
    tolerance.  The minimum over closed candidates is a certified upper bound
    on the best periodic value; the full row table exposes the trend across
    the family parameter.
    """
    y0 = np.asarray(y0, dtype=float)
    rows = []
    best_value, best_label = math.inf, ""
    for cand in candidates:
        traj = integrate(spec, y0, cand.policy, cand.period, dt)
        closure = float(np.linalg.norm(traj.final_state() - y0))
        closed = closure <= closure_tolerance
        value = cesaro_value(traj, spec)
        rows.append(PeriodicSearchRow(cand.label, cand.period, closure, value, closed))
        if closed and value < best_value:
            best_value, best_label = value, cand.label
    if not math.isfinite(best_value):
        raise SimulationError("no candidate closes its loop within tolerance")
    return PeriodicSearchResult(best_value=best_value, best_label=best_label,
                                rows=tuple(rows))


def rotation_delta_family(spec: SystemSpec, y0, deltas,
                          quadrature_points: int = 200_001) -> list[PeriodicCandidate]:
    """Angle-feedback loops for the planar rotation system.

    The control law u(theta) = (delta + (1 - delta)(1 + cos theta) / 2)^2 keeps
    every loop inside [0, 1], slows down near theta = pi as delta shrinks (so
    loop time concentrates where the first state coordinate is most negative),
    and stays positive, so every candidate closes.  The loop period is computed
    by quadrature of the reciprocal angular speed.
    """
    y0 = np.asarray(y0, dtype=float)
    cx, cy = spec.region.center if spec.region.kind == "annulus" else (0.0, 0.0)

    def make_speed(delta):
        def speed(theta):
            return (delta + (1.0 - delta) * (1.0 + np.cos(theta)) / 2.0) ** 2
        return speed

    candidates = []
    thetas = np.linspace(0.0, 2.0 * np.pi, quadrature_points)
    for delta in deltas:
        if not 0.0 < delta <= 1.0:
            raise SimulationError("delta must lie in (0, 1]")
        speed = make_speed(delta)
        period = float(np.trapezoid(1.0 / speed(thetas), thetas))

        def feedback(y, _speed=speed):
            theta = math.atan2(y[1] - cy, y[0] - cx)
            return (_speed(theta),)

        candidates.append(PeriodicCandidate(label=f"delta={delta}",
                                            policy=FeedbackPolicy(feedback),
                                            period=period))
    return candidates


def constant_policy_family(spec: SystemSpec, us, period: float = 1.0):
    """Constant policies as trivial periodic candidates (for frozen dynamics)."""
    return [PeriodicCandidate(label=f"u={np.atleast_1d(u)[0]}",
                              policy=ConstantPolicy(u), period=period)
            for u in us]


# ---------------------------------------------------------------------------
# residual decay study


@dataclass(frozen=True)
class ResidualDecayRow:
    horizon: float
    w_residual: float
    omega_residual: float


def residual_decay_study(spec: SystemSpec, y0, policy: Policy, horizons,
                         grid: Grid, basis: BasisSpec,
                         dt: float = 1e-3) -> list[ResidualDecayRow]:
    """Membership residuals of empirical measures across increasing horizons.

    The flow residual of an empirical measure decays like the boundary term
    (phi(y(T)) - phi(y0)) / T plus a binning floor, so across horizon doublings
    it should be non-increasing up to that floor.
    """
    horizons = sorted(float(t) for t in horizons)
    rows = []
    for horizon in horizons:
        traj = integrate(spec, y0, policy, horizon, dt)
        measure = empirical_occupational_measure(traj, grid)
        res: MembershipResidual = membership_residual(measure, grid, basis, y0)
        rows.append(ResidualDecayRow(horizon=horizon, w_residual=res.w_residual,
                                     omega_residual=res.omega_residual))
    return rows
