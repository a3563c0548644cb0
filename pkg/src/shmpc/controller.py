"""Shrinking-horizon closed loop: per-step program assembly, solve, apply, observe.

At step t the decisions are exactly u(t..N-1); everything earlier is folded
into the observed state.  The constraint formula is decomposed into linear
chance surrogates at risk delta_t, the objective is the expectation bound of
the negated robustness of the objective formula plus an input cost, and the
program is solved by MILP (bounded noise) or by constrained descent on the
moment bound (Gaussian noise).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import stl
from .canonical import FormContext, MaxMinForm, max_min_form, min_max_form
from .chance import (AT_LEAST, InfeasibleDecompositionError, RiskBudget, allocate_risk,
                     decompose, linearize_bounded, linearize_gaussian)
from .disturbance import DisturbanceModel, sample_disturbance
from .encode import (DecisionMap, ProgramBuilder, encode_l1_cost,
                     encode_linear_constraint, encode_min_of_maxmin)
from .expectation import (bounded_expectation_bound, gaussian_minmax_bound)
from .milp import INFEASIBLE, ITER_LIMIT, OPTIMAL, solve_lp, solve_milp
from .system import LinearSystem, Trajectory
from .stl import StlFormula

HOLD_PREVIOUS = "hold_previous"
TERMINATE = "terminate"

CD_STRATEGY = "coordinate-descent"
CP_STRATEGY = "cutting-plane"


@dataclass
class ControlSpec:
    """What the controller must achieve and how it accounts for risk."""

    phi: StlFormula                  # chance-constrained specification
    psi: StlFormula                  # robustness objective specification
    delta: float
    N: int
    jin_form: str = "l1"             # 'l1' or 'quadratic'
    jin_weights: np.ndarray | None = None
    risk_policy: str = "uniform"
    risk_weights: np.ndarray | None = None
    p_order: int = 4
    p_orders: tuple = (2, 4, 8)
    gaussian_strategy: str = CD_STRATEGY
    nu: float = 0.5
    atom_budget: int = 100_000

    def validate(self, sys: LinearSystem) -> None:
        need = max(stl.horizon(self.phi), stl.horizon(self.psi))
        if self.N < need:
            raise ValueError("N=%d is below the formula horizon %d" % (self.N, need))
        if self.N > sys.horizon_max:
            raise ValueError("N=%d exceeds the system horizon %d"
                             % (self.N, sys.horizon_max))
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.jin_form not in ("l1", "quadratic"):
            raise ValueError("unknown input-cost form %r" % self.jin_form)
        if self.gaussian_strategy not in (CD_STRATEGY, CP_STRATEGY):
            raise ValueError("unknown gaussian strategy %r" % self.gaussian_strategy)

    def weights(self, m: int) -> np.ndarray:
        if self.jin_weights is None:
            return np.ones(m)
        w = np.asarray(self.jin_weights, dtype=float)
        if w.shape != (m,):
            raise ValueError("jin_weights must have %d entries" % m)
        return w

    def budget(self) -> RiskBudget:
        return allocate_risk(self.delta, self.N, self.risk_policy, self.risk_weights)


@dataclass
class StepRecord:
    t: int
    status: str
    delta_t: float
    u_star: np.ndarray | None
    objective_bound: float = math.nan
    jin_value: float = math.nan
    n_constraints: int = 0
    wall_time: float = 0.0


@dataclass
class StepResult:
    status: str
    u_plan: np.ndarray | None      # (N - t, m)
    objective_bound: float = math.nan
    jin_value: float = math.nan
    n_constraints: int = 0
    audit: object = None
    node_count: int = 0
    wall_time: float = 0.0


@dataclass
class RunResult:
    trajectory: Trajectory
    steps: list
    rho_phi: float
    rho_psi: float
    satisfied: bool
    input_cost: float
    energy_proxy: float
    feasible_all: bool

    def to_rows(self) -> list:
        """Flat per-step rows (t, x..., u..., w..., status) for CSV export."""
        x = self.trajectory.states
        u = self.trajectory.inputs
        w = self.trajectory.disturbances
        status = {r.t: r.status for r in self.steps}
        rows = []
        for t in range(x.shape[0]):
            row = [t] + list(x[t])
            if t < u.shape[0]:
                row += list(u[t]) + list(w[t]) + [status.get(t, "")]
            else:
                row += [""] * (u.shape[1] + w.shape[1]) + [""]
            rows.append(row)
        return rows


def _input_cost(spec: ControlSpec, m: int, inputs: np.ndarray) -> float:
    w = spec.weights(m)
    if spec.jin_form == "quadratic":
        return float(np.sum(w * inputs ** 2))
    return float(np.sum(w * np.abs(inputs)))


def energy_proxy(inputs: np.ndarray) -> float:
    """Fan-energy surrogate: sum of cubed input magnitudes."""
    return float(np.sum(np.abs(inputs) ** 3))


# --- linear chance surrogate assembly ------------------------------------------


def _assemble_constraints(spec: ControlSpec, ctx: FormContext, delta_t: float,
                          model: DisturbanceModel):
    leaves, tree = decompose(spec.phi, 0, 1.0 - delta_t, AT_LEAST, ctx)
    cons = []
    for leaf in leaves:
        if model.kind == "gaussian":
            cons.append(linearize_gaussian(leaf, model))
        else:
            cons.append(linearize_bounded(leaf, spec.nu, model))
    return cons, tree


# --- Gaussian objective optimization -------------------------------------------


class _GroupData:
    """Vectorized atom statistics for one min-max group of the moment bound."""

    def __init__(self, stats, dec_keys):
        pos = {key: i for i, key in enumerate(dec_keys)}
        self.P = np.zeros((len(stats), len(dec_keys)))
        self.c0 = np.zeros(len(stats))
        self.sig = np.zeros(len(stats))
        for r, st in enumerate(stats):
            self.c0[r] = st.mean.constant
            self.sig[r] = st.sigma
            for key, coef in st.mean.input_coeffs:
                self.P[r, pos[key]] = coef

    def moment_sum(self, mu: np.ndarray, p: int) -> np.ndarray:
        """sum_j E[Z_j^p] for mu of shape (n_atoms,) or (n_atoms, n_cand)."""
        total = np.zeros(mu.shape[1:]) if mu.ndim > 1 else 0.0
        sig = self.sig if mu.ndim == 1 else self.sig[:, None]
        from .expectation import _moment_coeffs
        for l, c in enumerate(_moment_coeffs(p)):
            term = c * mu ** (p - 2 * l) * sig ** (2 * l)
            total = total + term.sum(axis=0)
        return total

    def bound(self, u: np.ndarray, p: int):
        mu = self.c0 + self.P @ u
        return self.moment_sum(mu, p) ** (1.0 / p)

    def bound_grad(self, u: np.ndarray, p: int) -> tuple:
        from .expectation import _moment_coeffs
        mu = self.c0 + self.P @ u
        s = 0.0
        ds = np.zeros_like(mu)
        for l, c in enumerate(_moment_coeffs(p)):
            k = p - 2 * l
            s += float(np.sum(c * mu ** k * self.sig ** (2 * l)))
            if k > 0:
                ds += c * k * mu ** (k - 1) * self.sig ** (2 * l)
        val = s ** (1.0 / p)
        if s <= 0.0:
            return val, np.zeros(self.P.shape[1])
        grad = (val / (p * s)) * (ds @ self.P)
        return val, grad


class _ConstraintSet:
    def __init__(self, constraints, dec_keys):
        pos = {key: i for i, key in enumerate(dec_keys)}
        self.G = np.zeros((len(constraints), len(dec_keys)))
        self.h = np.zeros(len(constraints))
        self.ge = np.zeros(len(constraints), dtype=bool)
        for r, con in enumerate(constraints):
            for key, coef in con.expr.input_coeffs:
                self.G[r, pos[key]] = coef
            self.h[r] = con.rhs - con.expr.constant
            self.ge[r] = con.sense == ">="

    def coordinate_interval(self, u: np.ndarray, d: int, lo: float, hi: float) -> tuple:
        """Feasible range for u[d] with the other coordinates held fixed."""
        if self.G.shape[0]:
            others = self.G @ u - self.G[:, d] * u[d]
            for r in range(self.G.shape[0]):
                a = self.G[r, d]
                if a == 0.0:
                    continue
                bound = (self.h[r] - others[r]) / a
                tight_lo = (a > 0) == self.ge[r]
                if tight_lo:
                    lo = max(lo, bound)
                else:
                    hi = min(hi, bound)
        return lo, hi


def _golden_section(f, lo: float, hi: float, iters: int = 48) -> tuple:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = c if fc <= fd else d
    return x, min(fc, fd)


def _coordinate_descent(group: _GroupData, p: int, cons: _ConstraintSet,
                        box_lo, box_hi, jin_w, jin_quadratic: bool,
                        u0: np.ndarray, max_sweeps: int = 40,
                        tol: float = 1e-10) -> tuple:
    u = u0.copy()

    def jin_coord(d, vals):
        return jin_w[d] * (vals ** 2 if jin_quadratic else np.abs(vals))

    def total(uv):
        jin = float(np.sum(jin_w * (uv ** 2 if jin_quadratic else np.abs(uv))))
        return float(group.bound(uv, p)) + jin

    best = total(u)
    for _ in range(max_sweeps):
        improved = 0.0
        for d in range(u.shape[0]):
            lo, hi = cons.coordinate_interval(u, d, box_lo[d], box_hi[d])
            if hi - lo < 1e-14:
                continue
            cand = np.linspace(lo, hi, 33)
            mu_base = group.c0 + group.P @ u - group.P[:, d] * u[d]
            mu = mu_base[:, None] + group.P[:, d:d + 1] * cand[None, :]
            vals = group.moment_sum(mu, p) ** (1.0 / p) + jin_coord(d, cand)
            k = int(np.argmin(vals))
            step = (hi - lo) / 32.0

            def f1(x):
                mu1 = mu_base + group.P[:, d] * x
                return float(group.moment_sum(mu1, p) ** (1.0 / p)) + float(jin_coord(d, x))

            g_lo = max(lo, cand[k] - step)
            g_hi = min(hi, cand[k] + step)
            x_star, f_star = _golden_section(f1, g_lo, g_hi)
            if f1(u[d]) - f_star > 0.0:
                u[d] = x_star
        new = total(u)
        improved = best - new
        best = min(best, new)
        if improved <= tol * (1.0 + abs(best)):
            break
    return u, best


def _cutting_planes(group: _GroupData, p: int, constraints, dmap: DecisionMap,
                    dec_keys, comp_weights: np.ndarray, quadratic: bool,
                    jin_eval, u0: np.ndarray, max_cuts: int = 60,
                    tol: float = 1e-8) -> tuple:
    """Kelley's method: grow supporting hyperplanes of the convex bound under
    the linear constraints, solving an LP per cut.  The l1 input cost lives in
    the LP exactly; a quadratic cost is folded into the cut function."""
    jin_w = np.array([comp_weights[j] for (_k, j) in dec_keys])

    def f_and_grad(uv: np.ndarray) -> tuple:
        val, grad = group.bound_grad(uv, p)
        if quadratic:
            val += float(np.sum(jin_w * uv ** 2))
            grad = grad + 2.0 * jin_w * uv
        return val, grad

    cuts = []
    u = u0.copy()
    best_u, best_val = None, math.inf

    def record(uv: np.ndarray):
        nonlocal best_u, best_val
        total = group.bound(uv, p) + jin_eval(uv)
        if total < best_val:
            best_val = float(total)
            best_u = uv.copy()
        return total

    record(u)
    for _ in range(max_cuts):
        val, grad = f_and_grad(u)
        cuts.append((val - float(grad @ u), grad))
        builder = ProgramBuilder()
        dm = DecisionMap(index={}, box={})
        for key in dec_keys:
            lo, hi = dmap.box[key]
            dm.index[key] = builder.add_var("u_%d_%d" % key, lo, hi)
            dm.box[key] = (lo, hi)
        epi = builder.add_var("epi", -1e15, 1e15)
        builder.add_objective({epi: 1.0})
        for c0, g in cuts:
            coeffs = {epi: 1.0}
            for i, key in enumerate(dec_keys):
                if g[i] != 0.0:
                    coeffs[dm.index[key]] = -g[i]
            builder.add_row(coeffs, ">=", c0)
        for con in constraints:
            encode_linear_constraint(builder, con.expr, con.sense, con.rhs, dm)
        if not quadratic:
            encode_l1_cost(builder, dm, comp_weights)
        sol = solve_lp(builder.build().lp)
        if sol.status != OPTIMAL:
            break
        u = np.array([sol.x[dm.index[key]] for key in dec_keys])
        lower = sol.objective
        record(u)
        if best_val - lower <= tol * (1.0 + abs(best_val)):
            break
    return best_u, best_val


class _JinEval:
    def __init__(self, weights_per_key: np.ndarray, quadratic: bool):
        self.weights = weights_per_key
        self.quadratic = quadratic

    def __call__(self, u: np.ndarray) -> float:
        if self.quadratic:
            return float(np.sum(self.weights * u ** 2))
        return float(np.sum(self.weights * np.abs(u)))


# --- the per-step optimization --------------------------------------------------


def step_optimize(spec: ControlSpec, sys: LinearSystem, model: DisturbanceModel,
                  t: int, x_hist: np.ndarray, signals: dict | None = None,
                  delta_t: float | None = None) -> StepResult:
    """Solve the horizon-t program; returns the planned inputs u(t..N-1)."""
    t0 = time.perf_counter()
    budget = spec.budget()
    if delta_t is None:
        delta_t = budget.per_step[t]
    ctx = FormContext(sys=sys, t=t, x_hist=x_hist, N=spec.N, signals=signals,
                      atom_budget=spec.atom_budget)
    try:
        constraints, tree = _assemble_constraints(spec, ctx, delta_t, model)
    except InfeasibleDecompositionError as exc:
        res = StepResult(status=INFEASIBLE, u_plan=None)
        res.audit = exc
        return res

    m = sys.m
    dec_keys = sorted((k, j) for k in range(t, spec.N) for j in range(m))
    weights = spec.weights(m)

    if model.kind == "bounded":
        res = _solve_bounded(spec, sys, model, t, ctx, constraints, dec_keys, weights)
    else:
        res = _solve_gaussian(spec, sys, model, t, ctx, constraints, dec_keys, weights)
    res.audit = tree
    res.n_constraints = len(constraints)
    res.wall_time = time.perf_counter() - t0
    return res


def _decision_structure_check(form: MaxMinForm | None, constraints, t: int) -> None:
    """Shrinking-horizon discipline: nothing may reference inputs before t."""
    def check_atom(a):
        for (k, _j), _c in a.input_coeffs:
            if k < t:
                raise AssertionError("encoded atom references past input at k=%d" % k)
    for con in constraints:
        check_atom(con.expr)
    if form is not None:
        for g in form.groups:
            for a in g:
                check_atom(a)


def _solve_bounded(spec, sys, model, t, ctx, constraints, dec_keys, weights) -> StepResult:
    j_form = min_max_form(spec.psi, 0, ctx).negate()
    bound_form = bounded_expectation_bound(j_form, model)
    _decision_structure_check(bound_form, constraints, t)

    builder = ProgramBuilder()
    dmap = DecisionMap.for_horizon(builder, t, spec.N, sys.m, sys.input_box)
    constant_objective = (len(bound_form.groups) == 1
                          and len(bound_form.groups[0]) == 1
                          and bound_form.groups[0][0].is_constant)
    if not constant_objective:
        epi = encode_min_of_maxmin(builder, bound_form, dmap)
        builder.add_objective({epi: 1.0})
    for con in constraints:
        encode_linear_constraint(builder, con.expr, con.sense, con.rhs, dmap)
    if spec.jin_form != "l1":
        raise ValueError("the MILP path supports only the l1 input cost")
    encode_l1_cost(builder, dmap, weights)

    problem = builder.build()
    sol = solve_milp(problem) if problem.binary else solve_lp(problem.lp)
    if sol.status != OPTIMAL:
        return StepResult(status=sol.status, u_plan=None,
                          node_count=getattr(sol, "node_count", 0))
    u_plan = np.zeros((spec.N - t, sys.m))
    for (k, j), idx in dmap.index.items():
        u_plan[k - t, j] = sol.x[idx]
    u_vec = np.array([sol.x[dmap.index[key]] for key in dec_keys])
    jin_w = np.array([weights[j] for (_k, j) in dec_keys])
    jin_val = float(np.sum(jin_w * np.abs(u_vec)))
    bound_val = (bound_form.groups[0][0].constant if constant_objective
                 else sol.objective - jin_val)
    return StepResult(status=OPTIMAL, u_plan=u_plan, objective_bound=bound_val,
                      jin_value=jin_val,
                      node_count=getattr(sol, "node_count", 0))


def _solve_gaussian(spec, sys, model, t, ctx, constraints, dec_keys, weights) -> StepResult:
    psi_maxmin = max_min_form(spec.psi, 0, ctx)
    j_minmax = psi_maxmin.negate()
    # discard sentinel-only groups folded from fully discharged subformulas
    finite_groups = tuple(g for g in j_minmax.groups
                          if not (len(g) == 1 and g[0].is_constant
                                  and abs(g[0].constant) >= 1e17))
    _decision_structure_check(None, constraints, t)

    # feasibility (and initial point) via the input-cost LP
    builder = ProgramBuilder()
    dmap = DecisionMap.for_horizon(builder, t, spec.N, sys.m, sys.input_box)
    for con in constraints:
        encode_linear_constraint(builder, con.expr, con.sense, con.rhs, dmap)
    encode_l1_cost(builder, dmap, weights)
    lp_sol = solve_lp(builder.build().lp)
    if lp_sol.status != OPTIMAL:
        return StepResult(status=lp_sol.status, u_plan=None)
    u0 = np.array([lp_sol.x[dmap.index[key]] for key in dec_keys])

    jin_w = np.array([weights[j] for (_k, j) in dec_keys])
    jin_eval = _JinEval(jin_w, spec.jin_form == "quadratic")

    if not finite_groups:
        best_u, best_total = u0, jin_eval(u0)
        best_bound = 0.0
    else:
        from .canonical import MinMaxForm
        bound = gaussian_minmax_bound(MinMaxForm(finite_groups), model,
                                      p_orders=spec.p_orders)
        box_lo = np.array([dmap.box[key][0] for key in dec_keys])
        box_hi = np.array([dmap.box[key][1] for key in dec_keys])
        cons = _ConstraintSet(constraints, dec_keys)
        best_u, best_total, best_bound = None, math.inf, math.nan
        for gi in range(len(bound.groups)):
            gdata = _GroupData(bound.groups[gi], dec_keys)
            if spec.gaussian_strategy == CP_STRATEGY:
                u_g, val_g = _cutting_planes(gdata, spec.p_order, constraints, dmap,
                                             dec_keys, weights,
                                             spec.jin_form == "quadratic",
                                             jin_eval, u0)
            else:
                u_g, val_g = _coordinate_descent(gdata, spec.p_order, cons,
                                                 box_lo, box_hi, jin_w,
                                                 spec.jin_form == "quadratic", u0)
            if u_g is not None and val_g < best_total:
                best_total = val_g
                best_u = u_g
                # report the tightest configured order at the chosen inputs
                best_bound = min(gdata.bound(u_g, q) for q in spec.p_orders)
        if best_u is None:
            return StepResult(status=INFEASIBLE, u_plan=None)

    u_plan = np.zeros((spec.N - t, sys.m))
    for i, (k, j) in enumerate(dec_keys):
        u_plan[k - t, j] = best_u[i]
    return StepResult(status=OPTIMAL, u_plan=u_plan, objective_bound=float(best_bound),
                      jin_value=jin_eval(best_u))


# --- closed loop, open loop, Monte Carlo ----------------------------------------


def run_closed_loop(spec: ControlSpec, sys: LinearSystem, model: DisturbanceModel,
                    rng: np.random.Generator, signals: dict | None = None,
                    x0=None, fallback: str = HOLD_PREVIOUS) -> RunResult:
    """Algorithm: solve, apply the first input, observe, shrink, repeat."""
    if fallback not in (HOLD_PREVIOUS, TERMINATE):
        raise ValueError("unknown fallback %r" % fallback)
    spec.validate(sys)
    N = spec.N
    x = np.zeros((N + 1, sys.n))
    x[0] = np.asarray(x0, dtype=float)
    u = np.zeros((N, sys.m))
    w = np.zeros((N, sys.s))
    records = []
    feasible_all = True
    budget = spec.budget()
    terminated = False
    for t in range(N):
        if terminated:
            records.append(StepRecord(t=t, status="terminated",
                                      delta_t=budget.per_step[t], u_star=u[t].copy()))
        else:
            res = step_optimize(spec, sys, model, t, x[:t + 1], signals=signals)
            if res.status == OPTIMAL:
                u[t] = res.u_plan[0]
            else:
                feasible_all = False
                if fallback == TERMINATE:
                    terminated = True
                    u[t] = 0.0
                else:
                    u[t] = u[t - 1] if t > 0 else 0.0
            records.append(StepRecord(t=t, status=res.status,
                                      delta_t=budget.per_step[t],
                                      u_star=u[t].copy(),
                                      objective_bound=res.objective_bound,
                                      jin_value=res.jin_value,
                                      n_constraints=res.n_constraints,
                                      wall_time=res.wall_time))
        w[t] = sample_disturbance(model, t, rng)
        x[t + 1] = sys.A(t) @ x[t] + sys.B(t) @ u[t] + w[t]
    traj = Trajectory(states=x, inputs=u, disturbances=w)
    rho_phi = stl.robustness(x, 0, spec.phi, signals)
    rho_psi = stl.robustness(x, 0, spec.psi, signals)
    return RunResult(trajectory=traj, steps=records, rho_phi=rho_phi, rho_psi=rho_psi,
                     satisfied=bool(rho_phi > 0.0),
                     input_cost=_input_cost(spec, sys.m, u),
                     energy_proxy=energy_proxy(u), feasible_all=feasible_all)


def open_loop_optimize(spec: ControlSpec, sys: LinearSystem, model: DisturbanceModel,
                       signals: dict | None = None, x0=None) -> np.ndarray:
    """Single solve at t=0 with the whole risk budget; returns u(0..N-1)."""
    spec.validate(sys)
    res = step_optimize(spec, sys, model, 0,
                        np.atleast_2d(np.asarray(x0, dtype=float)),
                        signals=signals, delta_t=spec.delta)
    if res.status == INFEASIBLE:
        raise InfeasibleDecompositionError("open-loop problem is infeasible")
    if res.status != OPTIMAL:
        raise RuntimeError("open-loop solve ended with status %s" % res.status)
    return res.u_plan


def replay_open_loop(spec: ControlSpec, sys: LinearSystem, model: DisturbanceModel,
                     inputs: np.ndarray, rng: np.random.Generator,
                     signals: dict | None = None, x0=None) -> RunResult:
    """Evolve the system under fixed inputs and fresh sampled noise."""
    N = spec.N
    x = np.zeros((N + 1, sys.n))
    x[0] = np.asarray(x0, dtype=float)
    w = np.zeros((N, sys.s))
    for t in range(N):
        w[t] = sample_disturbance(model, t, rng)
        x[t + 1] = sys.A(t) @ x[t] + sys.B(t) @ inputs[t] + w[t]
    traj = Trajectory(states=x, inputs=inputs, disturbances=w)
    rho_phi = stl.robustness(x, 0, spec.phi, signals)
    rho_psi = stl.robustness(x, 0, spec.psi, signals)
    return RunResult(trajectory=traj, steps=[], rho_phi=rho_phi, rho_psi=rho_psi,
                     satisfied=bool(rho_phi > 0.0),
                     input_cost=_input_cost(spec, sys.m, inputs),
                     energy_proxy=energy_proxy(inputs), feasible_all=True)


def run_stream(seed: int, run_index: int) -> np.random.Generator:
    """The documented seed-splitting rule: one independent stream per run."""
    return np.random.default_rng([seed, run_index])


@dataclass
class VerificationSummary:
    n_runs: int
    satisfaction_rate: float
    feasibility_rate: float
    energy_mean: float
    energy_std: float
    input_cost_mean: float
    beta: float
    confidence_floor: float | None
    runs: list = field(default_factory=list)

    @property
    def confidence_line(self) -> str:
        if self.confidence_floor is None:
            return "not all runs feasible; no feasibility confidence floor"
        return "feasible with probability >= %.2f at confidence %.2f" % (
            self.confidence_floor, 1.0 - self.beta)


def feasibility_floor(n_s: int, beta: float) -> float:
    """(beta/2)^(1/n_s): the probability floor when every sampled solve is feasible."""
    if n_s < 1:
        raise ValueError("need at least one run")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    return (beta / 2.0) ** (1.0 / n_s)


def monte_carlo_verify(spec: ControlSpec, sys: LinearSystem, model: DisturbanceModel,
                       n_s: int, seed: int, signals: dict | None = None, x0=None,
                       beta: float = 0.05, fallback: str = HOLD_PREVIOUS,
                       mode: str = "shmpc") -> VerificationSummary:
    """n_s independent seeded runs with satisfaction/feasibility statistics."""
    if n_s < 1:
        raise ValueError("need at least one run")
    open_inputs = None
    if mode == "openloop":
        open_inputs = open_loop_optimize(spec, sys, model, signals=signals, x0=x0)
    runs = []
    for i in range(n_s):
        rng = run_stream(seed, i)
        if mode == "openloop":
            rr = replay_open_loop(spec, sys, model, open_inputs, rng,
                                  signals=signals, x0=x0)
        else:
            rr = run_closed_loop(spec, sys, model, rng, signals=signals, x0=x0,
                                 fallback=fallback)
        runs.append(rr)
    sat = float(np.mean([1.0 if r.satisfied else 0.0 for r in runs]))
    feas = float(np.mean([1.0 if r.feasible_all else 0.0 for r in runs]))
    energies = np.array([r.energy_proxy for r in runs])
    costs = np.array([r.input_cost for r in runs])
    floor = feasibility_floor(n_s, beta) if feas == 1.0 else None
    return VerificationSummary(
        n_runs=n_s, satisfaction_rate=sat, feasibility_rate=feas,
        energy_mean=float(energies.mean()), energy_std=float(energies.std()),
        input_cost_mean=float(costs.mean()), beta=beta, confidence_floor=floor,
        runs=runs)
