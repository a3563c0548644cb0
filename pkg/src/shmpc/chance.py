"""Chance-constraint decomposition and linearization.

``decompose`` reduces Pr[formula] >= / <= theta to the same constraint shape
over atomic predicates, following the inductive cases for negation,
conjunction, and until.  Every split is recorded in an audit tree.  The
atomic constraints then become linear inequalities over the inputs: a
Chernoff-Hoeffding margin for bounded-support noise, or an exact normal
quantile for Gaussian noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import stl
from .canonical import AffineExpr, FormContext, atom_of_predicate
from .disturbance import DisturbanceModel, UnsupportedModelError
from .expectation import atom_moment_interval, gaussian_atom_stats
from .stl import StlFormula

AT_LEAST = "at_least"
AT_MOST = "at_most"


class InfeasibleDecompositionError(ValueError):
    """A split produced a certainly-violated subgoal or left (0, 1)."""

    def __init__(self, message: str, node=None):
        super().__init__(message)
        self.node = node


@dataclass(frozen=True)
class ChanceAtom:
    """Pr[atom > 0] bounded from one side: direction AT_LEAST / AT_MOST theta."""

    atom: AffineExpr
    direction: str
    threshold: float
    time: int
    label: str = ""

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise InfeasibleDecompositionError(
                "threshold %r for %r left (0, 1)" % (self.threshold, self.label))


@dataclass(frozen=True)
class LinearConstraint:
    """expr(u) sense rhs, with expr affine over the undetermined inputs."""

    expr: AffineExpr
    sense: str  # ">=" or "<="
    rhs: float

    def satisfied(self, u, tol: float = 1e-9) -> bool:
        v = self.expr.evaluate(np.atleast_2d(np.asarray(u, dtype=float)), None)
        return v >= self.rhs - tol if self.sense == ">=" else v <= self.rhs + tol


@dataclass
class DecompNode:
    """One step of the decomposition, for auditing the risk bookkeeping."""

    rule: str
    direction: str
    threshold: float
    time: int
    detail: str = ""
    children: list = field(default_factory=list)
    leaf: ChanceAtom | None = None

    def to_json(self) -> dict:
        out = {
            "rule": self.rule,
            "direction": self.direction,
            "threshold": self.threshold,
            "time": self.time,
        }
        if self.detail:
            out["detail"] = self.detail
        if self.leaf is not None:
            out["leaf"] = {"direction": self.leaf.direction,
                           "threshold": self.leaf.threshold,
                           "time": self.leaf.time,
                           "label": self.leaf.label,
                           "constant": self.leaf.atom.constant}
        if self.children:
            out["children"] = [c.to_json() for c in self.children]
        return out

    def verify(self) -> None:
        """Check the node-local split inequalities that make the tree sound."""
        th = self.threshold
        kids = self.children
        if self.rule in ("leaf", "discharged"):
            return
        if self.rule == "negation":
            assert len(kids) == 1
            assert abs(kids[0].threshold - (1.0 - th)) < 1e-12
            assert kids[0].direction != self.direction
        elif self.rule == "conjunction_at_least":
            # each conjunct at-least theta_i with sum of (1 - theta_i) <= 1 - theta
            slack = sum(1.0 - c.threshold for c in kids)
            assert all(c.direction == AT_LEAST for c in kids)
            assert slack <= (1.0 - th) + 1e-9
        elif self.rule == "conjunction_at_most":
            # disjoint events covering the complement, each at-least (1-theta)/2
            assert len(kids) == 2
            assert all(c.direction == AT_LEAST for c in kids)
            assert sum(c.threshold for c in kids) >= (1.0 - th) - 1e-9
        elif self.rule == "until":
            share = sum(c.threshold for c in kids)
            if self.direction == AT_LEAST:
                assert share >= th - 1e-9
            else:
                assert share <= th + 1e-9
        elif self.rule == "rewrite":
            assert len(kids) == 1
            assert abs(kids[0].threshold - th) < 1e-12
        else:
            raise AssertionError("unknown audit rule %r" % self.rule)
        for c in kids:
            c.verify()

    def dump(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class RiskBudget:
    """Total risk split across the horizon; the per-step sum equals delta."""

    delta: float
    per_step: tuple

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if any(d <= 0.0 for d in self.per_step):
            raise ValueError("every per-step risk must be positive")
        if abs(sum(self.per_step) - self.delta) > 1e-12:
            raise ValueError("per-step risks sum to %r, expected delta=%r"
                             % (sum(self.per_step), self.delta))


def allocate_risk(delta: float, n_steps: int, policy: str = "uniform",
                  weights=None) -> RiskBudget:
    """Uniform delta/N split, or proportional to positive weights."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if n_steps < 1:
        raise ValueError("need at least one step")
    if policy == "uniform":
        return RiskBudget(delta, tuple(delta / n_steps for _ in range(n_steps)))
    if policy == "weights":
        w = np.asarray(weights, dtype=float)
        if w.shape != (n_steps,) or np.any(w <= 0.0):
            raise ValueError("weights must be %d positive numbers" % n_steps)
        total = float(w.sum())
        parts = [delta * float(wi) / total for wi in w[:-1]]
        parts.append(delta - sum(parts))
        return RiskBudget(delta, tuple(parts))
    raise ValueError("unknown risk policy %r" % policy)


# --- decomposition -----------------------------------------------------------
#
# Parts carry their own absolute time index so that window operators can be
# unrolled into plain conjunctions without rebuilding formula nodes.


@dataclass(frozen=True)
class _Part:
    node: StlFormula | None = None
    tau: int = 0
    conj: tuple = ()        # conjunction of parts, when node is None
    negated: bool = False

    def label(self) -> str:
        if self.node is not None:
            core = "%s@%d" % (self.node.kind, self.tau)
        else:
            core = "and(%s)" % ",".join(p.label() for p in self.conj)
        return "!" + core if self.negated else core


def _mk_part(node: StlFormula, tau: int) -> _Part:
    return _Part(node=node, tau=tau)


def _negate_part(p: _Part) -> _Part:
    return _Part(node=p.node, tau=p.tau, conj=p.conj, negated=not p.negated)


def _trivial_value(p: _Part, ctx: FormContext):
    """True/False when the part is decided by observations and gates; else None."""
    if p.negated:
        v = _trivial_value(_negate_part(p), ctx)
        return None if v is None else (not v)
    if p.node is None:
        vals = [_trivial_value(q, ctx) for q in p.conj]
        if any(v is False for v in vals):
            return False
        if all(v is True for v in vals):
            return True
        return None
    phi, tau = p.node, p.tau
    k = phi.kind
    if k == stl.TRUE:
        return True
    if k == stl.PRED:
        atom = atom_of_predicate(phi.pred, tau, ctx)
        if atom.is_constant:
            return atom.constant > 0.0
        return None
    if k == stl.NOT:
        v = _trivial_value(_mk_part(phi.children[0], tau), ctx)
        return None if v is None else (not v)
    if k == stl.AND:
        return _trivial_value(_Part(conj=tuple(_mk_part(c, tau) for c in phi.children)), ctx)
    if k == stl.OR:
        vals = [_trivial_value(_mk_part(c, tau), ctx) for c in phi.children]
        if any(v is True for v in vals):
            return True
        if all(v is False for v in vals):
            return False
        return None
    if k == stl.ALWAYS:
        return _trivial_value(_Part(conj=tuple(
            _mk_part(phi.children[0], tau + i) for i in range(phi.a, phi.b + 1))), ctx)
    if k == stl.EVENTUALLY:
        vals = [_trivial_value(_mk_part(phi.children[0], tau + i), ctx)
                for i in range(phi.a, phi.b + 1)]
        if any(v is True for v in vals):
            return True
        if all(v is False for v in vals):
            return False
        return None
    if k == stl.UNTIL:
        return None
    raise ValueError("unknown node kind %r" % k)


def _check_threshold(theta: float, label: str, node=None) -> float:
    if not 0.0 < theta < 1.0:
        raise InfeasibleDecompositionError(
            "derived threshold %r at %s left (0, 1)" % (theta, label), node)
    return theta


def _until_events(lhs: StlFormula, rhs: StlFormula, a: int, b: int, tau: int) -> list:
    """Disjoint events: rhs first holds at step tau+j, lhs holding on the way."""
    events = []
    for j in range(a, b + 1):
        parts = [_mk_part(lhs, tau + i) for i in range(a)]
        for i in range(a, j):
            parts.append(_mk_part(lhs, tau + i))
            parts.append(_negate_part(_mk_part(rhs, tau + i)))
        parts.append(_mk_part(rhs, tau + j))
        events.append(_Part(conj=tuple(parts)))
    return events


class _Decomposer:
    def __init__(self, ctx: FormContext):
        self.ctx = ctx
        self.leaves: list = []

    def run(self, part: _Part, direction: str, theta: float) -> DecompNode:
        v = _trivial_value(part, self.ctx)
        if v is not None:
            return self._resolved(part, direction, theta, v)
        if part.negated:
            flipped = AT_MOST if direction == AT_LEAST else AT_LEAST
            node = DecompNode("negation", direction, theta, part.tau, detail=part.label())
            node.children.append(self.run(_negate_part(part), flipped,
                                          _check_threshold(1.0 - theta, part.label())))
            return node
        if part.node is None:
            return self._conjunction(list(part.conj), direction, theta, part.label())
        phi, tau = part.node, part.tau
        k = phi.kind
        if k == stl.PRED:
            return self._leaf(phi, tau, direction, theta)
        if k == stl.NOT:
            return self.run(_negate_part(_mk_part(phi.children[0], tau)), direction, theta)
        if k == stl.AND:
            parts = [_mk_part(c, tau) for c in phi.children]
            return self._conjunction(parts, direction, theta, part.label())
        if k == stl.OR:
            # derived: phi | psi == !(!phi & !psi)
            inner = _Part(conj=tuple(_negate_part(_mk_part(c, tau)) for c in phi.children),
                          negated=True)
            node = DecompNode("rewrite", direction, theta, tau, detail="or -> !(&!)")
            node.children.append(self.run(inner, direction, theta))
            return node
        if k == stl.ALWAYS:
            parts = [_mk_part(phi.children[0], tau + i) for i in range(phi.a, phi.b + 1)]
            return self._conjunction(parts, direction, theta, part.label())
        if k == stl.EVENTUALLY:
            events = _until_events(stl.true_(), phi.children[0], phi.a, phi.b, tau)
            return self._until(events, direction, theta, tau, part.label())
        if k == stl.UNTIL:
            events = _until_events(phi.children[0], phi.children[1], phi.a, phi.b, tau)
            return self._until(events, direction, theta, tau, part.label())
        raise ValueError("cannot decompose node kind %r" % k)

    def _resolved(self, part: _Part, direction: str, theta: float, value: bool) -> DecompNode:
        ok = value if direction == AT_LEAST else not value
        if not ok:
            raise InfeasibleDecompositionError(
                "subgoal %s is certainly %s but must hold with %s %g"
                % (part.label(), "true" if value else "false",
                   "probability at least" if direction == AT_LEAST else "probability at most",
                   theta))
        return DecompNode("discharged", direction, theta, part.tau,
                          detail="%s is certainly %s" % (part.label(), value))

    def _leaf(self, phi: StlFormula, tau: int, direction: str, theta: float) -> DecompNode:
        atom = atom_of_predicate(phi.pred, tau, self.ctx)
        leaf = ChanceAtom(atom=atom, direction=direction, threshold=theta, time=tau,
                          label=phi.pred.name or ("pred@%d" % tau))
        self.leaves.append(leaf)
        node = DecompNode("leaf", direction, theta, tau, detail=leaf.label)
        node.leaf = leaf
        return node

    def _conjunction(self, parts: list, direction: str, theta: float,
                     label: str) -> DecompNode:
        live = []
        for p in parts:
            v = _trivial_value(p, self.ctx)
            if v is True:
                continue
            if v is False:
                if direction == AT_LEAST:
                    raise InfeasibleDecompositionError(
                        "conjunct %s of %s is certainly false" % (p.label(), label))
                return DecompNode("discharged", direction, theta, p.tau,
                                  detail="%s certainly false, conjunction improbable"
                                         % p.label())
            live.append(p)
        if not live:
            if direction == AT_MOST:
                raise InfeasibleDecompositionError(
                    "conjunction %s is certainly true but must stay improbable" % label)
            return DecompNode("discharged", direction, theta, 0,
                              detail="%s certainly true" % label)
        if len(live) == 1:
            return self.run(live[0], direction, theta)
        if direction == AT_LEAST:
            n = len(live)
            node = DecompNode("conjunction_at_least", direction, theta, live[0].tau,
                              detail="%s over %d conjuncts" % (label, n))
            child_theta = _check_threshold(1.0 - (1.0 - theta) / n, label)
            for p in live:
                node.children.append(self.run(p, AT_LEAST, child_theta))
            return node
        # at-most on a conjunction: split the complement into the two disjoint
        # events (not head) and (head and not rest), each required at-least (1-theta)/2
        head, rest = live[0], live[1:]
        node = DecompNode("conjunction_at_most", direction, theta, head.tau,
                          detail="%s head split" % label)
        share = _check_threshold((1.0 - theta) / 2.0, label)
        node.children.append(self.run(_negate_part(head), AT_LEAST, share))
        rest_part = rest[0] if len(rest) == 1 else _Part(conj=tuple(rest))
        pair = _Part(conj=(head, _negate_part(rest_part)))
        node.children.append(self.run(pair, AT_LEAST, share))
        return node

    def _until(self, events: list, direction: str, theta: float, tau: int,
               label: str) -> DecompNode:
        q = len(events)
        share = _check_threshold(theta / q, label)
        node = DecompNode("until", direction, theta, tau,
                          detail="%s into %d disjoint events" % (label, q))
        for ev in events:
            node.children.append(self.run(ev, direction, share))
        return node


def decompose(phi: StlFormula, t_eval: int, theta: float, direction: str,
              ctx: FormContext):
    """Reduce Pr[(run, t_eval) |= phi] {>=,<=} theta to atomic chance constraints.

    Returns (leaves, audit_tree).  Raises InfeasibleDecompositionError when an
    observed prefix or a gate makes some subgoal certainly violated.
    """
    if direction not in (AT_LEAST, AT_MOST):
        raise ValueError("direction must be %r or %r" % (AT_LEAST, AT_MOST))
    _check_threshold(theta, "root")
    if t_eval + stl.horizon(phi) > ctx.N:
        raise ValueError("formula horizon %d at t=%d exceeds N=%d"
                         % (stl.horizon(phi), t_eval, ctx.N))
    dec = _Decomposer(ctx)
    tree = dec.run(_mk_part(phi, t_eval), direction, theta)
    return dec.leaves, tree


# --- linearization: bounded support -------------------------------------------


def linearize_bounded(leaf: ChanceAtom, nu: float, model: DisturbanceModel) -> LinearConstraint:
    """Chernoff-Hoeffding linear surrogate for the atomic chance constraint.

    AT_LEAST theta emits  (lower moment endpoint)(u) >= sqrt(-nu log(1-theta) S)
    with S the sum of squared support widths of the atom's noise terms;
    AT_MOST theta emits the mirrored right-tail constraint.
    """
    if model.kind != "bounded":
        raise UnsupportedModelError("Chernoff linearization needs the bounded model")
    if nu <= 0.0:
        raise ValueError("nu must be positive")
    s_sum = 0.0
    for (k, j), c in leaf.atom.dist_coeffs:
        width = c * model.support(k)[j].width
        s_sum += width * width
    moment_iv = atom_moment_interval(leaf.atom, model)
    if leaf.direction == AT_LEAST:
        delta_eff = 1.0 - leaf.threshold
        rhs = math.sqrt(max(0.0, -nu * math.log(delta_eff) * s_sum))
        expr = leaf.atom.drop_disturbance(leaf.atom.constant + moment_iv.lo)
        return LinearConstraint(expr=expr, sense=">=", rhs=rhs)
    rhs = math.sqrt(max(0.0, -nu * math.log(leaf.threshold) * s_sum))
    expr = leaf.atom.drop_disturbance(leaf.atom.constant + moment_iv.hi)
    return LinearConstraint(expr=expr, sense="<=", rhs=-rhs)


# --- linearization: Gaussian ---------------------------------------------------


def _probit_seed(p: float) -> float:
    """Rational approximation of the standard normal quantile (Acklam's scheme,
    relative error below 1.2e-9 before refinement)."""
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p > 1.0 - p_low:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def normal_quantile(delta: float) -> float:
    """Standard normal quantile, rational seed plus one Newton step on the CDF."""
    if not 0.0 < delta < 1.0:
        raise ValueError("quantile argument must lie strictly in (0, 1)")
    x = _probit_seed(delta)
    cdf = 0.5 * math.erfc(-x / math.sqrt(2.0))
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if pdf > 0.0:
        x -= (cdf - delta) / pdf
    return x


def linearize_gaussian(leaf: ChanceAtom, model: DisturbanceModel) -> LinearConstraint:
    """Exact quantile reformulation for one Gaussian atomic chance constraint."""
    stats = gaussian_atom_stats(leaf.atom, model)
    if stats.sigma < 0:
        raise ValueError("negative standard deviation")
    delta_eff = 1.0 - leaf.threshold
    if leaf.direction == AT_LEAST:
        # Pr[alpha > 0] >= theta  <=>  mu + sigma * q(1 - theta) >= 0
        shift = stats.sigma * normal_quantile(delta_eff) if stats.sigma > 0 else 0.0
        return LinearConstraint(expr=stats.mean.shift(shift), sense=">=", rhs=0.0)
    # Pr[alpha > 0] <= theta  <=>  mu + sigma * q(1 - theta) <= 0
    shift = stats.sigma * normal_quantile(delta_eff) if stats.sigma > 0 else 0.0
    return LinearConstraint(expr=stats.mean.shift(shift), sense="<=", rhs=0.0)
