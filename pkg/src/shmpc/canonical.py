"""Compile STL robustness over a stochastic run into two-level canonical forms.

Given the step index t, the observed prefix x(0..t), and the dynamics, the
robustness of a formula evaluated at time 0 over the length-N run becomes a
max-over-groups of min-over-atoms (or the dual min-max) where every atom is
affine in the undetermined inputs u(t..N-1) and future disturbances
w(t..N-1).  Predicates at observed times fold to constants; discharged gated
predicates fold to the sentinel and are eliminated on the fly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json

import numpy as np

from . import stl
from .stl import SENTINEL, StlFormula, is_neg_sentinel, is_pos_sentinel
from .system import HorizonError, LinearSystem, transition_matrix


class FormSizeError(RuntimeError):
    """Canonical-form construction exceeded the configured atom budget."""

    def __init__(self, kind: str, groups: int, atoms: int, budget: int):
        super().__init__(
            "%s form grew to %d groups / %d atoms (budget %d); "
            "simplify the formula or raise the budget" % (kind, groups, atoms, budget))
        self.groups = groups
        self.atoms = atoms
        self.budget = budget


@dataclass(frozen=True)
class AffineExpr:
    """c + sum p[(k,j)] u_j(k) + sum q[(k,j)] w_j(k), exact affine arithmetic.

    Keys are (time, component); only times at or after the current step
    appear (earlier terms are observed and folded into the constant).
    """

    constant: float
    input_coeffs: tuple = ()   # sorted tuple of ((k, j), coeff)
    dist_coeffs: tuple = ()

    @staticmethod
    def make(constant: float, input_coeffs: dict | None = None,
             dist_coeffs: dict | None = None) -> "AffineExpr":
        def pack(d):
            if not d:
                return ()
            return tuple(sorted((k, float(v)) for k, v in d.items() if v != 0.0))
        return AffineExpr(float(constant), pack(input_coeffs), pack(dist_coeffs))

    def negate(self) -> "AffineExpr":
        return AffineExpr(-self.constant,
                          tuple((k, -v) for k, v in self.input_coeffs),
                          tuple((k, -v) for k, v in self.dist_coeffs))

    def shift(self, offset: float) -> "AffineExpr":
        return AffineExpr(self.constant + float(offset), self.input_coeffs, self.dist_coeffs)

    def drop_disturbance(self, new_constant: float) -> "AffineExpr":
        return AffineExpr(float(new_constant), self.input_coeffs, ())

    @property
    def is_constant(self) -> bool:
        return not self.input_coeffs and not self.dist_coeffs

    def evaluate(self, u: np.ndarray | None, w: np.ndarray | None) -> float:
        v = self.constant
        for (k, j), c in self.input_coeffs:
            if u is None or k >= u.shape[0]:
                raise ValueError("assignment missing input u_%d(%d)" % (j, k))
            v += c * u[k, j]
        for (k, j), c in self.dist_coeffs:
            if w is None or k >= w.shape[0]:
                raise ValueError("assignment missing disturbance w_%d(%d)" % (j, k))
            v += c * w[k, j]
        return v

    def to_json(self) -> dict:
        return {
            "constant": self.constant,
            "input": {"%d,%d" % k: v for k, v in self.input_coeffs},
            "disturbance": {"%d,%d" % k: v for k, v in self.dist_coeffs},
        }


def _is_pos_sentinel_atom(a: AffineExpr) -> bool:
    return a.is_constant and is_pos_sentinel(a.constant)


def _is_neg_sentinel_atom(a: AffineExpr) -> bool:
    return a.is_constant and is_neg_sentinel(a.constant)


_POS_ATOM = AffineExpr(SENTINEL)
_NEG_ATOM = AffineExpr(-SENTINEL)


@dataclass(frozen=True)
class MaxMinForm:
    """max over groups of min over each group's atoms."""

    groups: tuple  # tuple of tuples of AffineExpr

    def __post_init__(self):
        if not self.groups or any(not g for g in self.groups):
            raise ValueError("canonical form needs at least one atom per group")

    @property
    def total_atoms(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def group_sizes(self) -> tuple:
        return tuple(len(g) for g in self.groups)

    def evaluate(self, u, w) -> float:
        u = None if u is None else np.atleast_2d(np.asarray(u, dtype=float))
        w = None if w is None else np.atleast_2d(np.asarray(w, dtype=float))
        return max(min(a.evaluate(u, w) for a in g) for g in self.groups)

    def negate(self) -> "MinMaxForm":
        return MinMaxForm(tuple(tuple(a.negate() for a in g) for g in self.groups))

    def to_json(self) -> dict:
        return {"kind": "max-min",
                "groups": [[a.to_json() for a in g] for g in self.groups]}


@dataclass(frozen=True)
class MinMaxForm:
    """min over groups of max over each group's atoms."""

    groups: tuple

    def __post_init__(self):
        if not self.groups or any(not g for g in self.groups):
            raise ValueError("canonical form needs at least one atom per group")

    @property
    def total_atoms(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def group_sizes(self) -> tuple:
        return tuple(len(g) for g in self.groups)

    def evaluate(self, u, w) -> float:
        u = None if u is None else np.atleast_2d(np.asarray(u, dtype=float))
        w = None if w is None else np.atleast_2d(np.asarray(w, dtype=float))
        return min(max(a.evaluate(u, w) for a in g) for g in self.groups)

    def negate(self) -> "MaxMinForm":
        return MaxMinForm(tuple(tuple(a.negate() for a in g) for g in self.groups))

    def to_json(self) -> dict:
        return {"kind": "min-max",
                "groups": [[a.to_json() for a in g] for g in self.groups]}


def evaluate_form(form, u, w) -> float:
    return form.evaluate(u, w)


def dump_form_json(form) -> str:
    return json.dumps(form.to_json(), indent=2, sort_keys=True)


@dataclass
class FormContext:
    """Everything atom construction needs at controller step t.

    x_hist holds the observed states x(0..t); signals resolve predicate gates.
    """

    sys: LinearSystem
    t: int
    x_hist: np.ndarray
    N: int
    signals: dict | None = None
    atom_budget: int = 100_000
    _phi_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.x_hist = np.atleast_2d(np.asarray(self.x_hist, dtype=float))
        if self.x_hist.shape[0] < self.t + 1:
            raise ValueError("x_hist must cover x(0..%d), got %d states"
                             % (self.t, self.x_hist.shape[0]))
        if self.N > self.sys.horizon_max:
            raise HorizonError("N=%d exceeds the system horizon %d"
                               % (self.N, self.sys.horizon_max))

    def phi(self, tau: int, t: int) -> np.ndarray:
        key = (tau, t)
        if key not in self._phi_cache:
            self._phi_cache[key] = transition_matrix(self.sys, tau, t)
        return self._phi_cache[key]


def atom_of_predicate(predicate: stl.Predicate, tau: int, ctx: FormContext) -> AffineExpr:
    """Affine atom for alpha(X(tau)) seen from step t with x(0..t) observed."""
    if tau > ctx.N:
        raise HorizonError("predicate at tau=%d exceeds the horizon N=%d" % (tau, ctx.N))
    if predicate.gate is not None and not predicate.gate_active(tau, ctx.signals):
        return _POS_ATOM
    c = np.zeros(ctx.sys.n)
    c[:len(predicate.coeffs)] = predicate.coeffs
    if tau <= ctx.t:
        return AffineExpr(float(c @ ctx.x_hist[tau] + predicate.const))
    t = ctx.t
    const = float(c @ (ctx.phi(tau, t) @ ctx.x_hist[t]) + predicate.const)
    input_coeffs: dict = {}
    dist_coeffs: dict = {}
    for k in range(t, tau):
        row = c @ ctx.phi(tau, k + 1)
        bk = row @ ctx.sys.B(k)
        for j in range(ctx.sys.m):
            if bk[j] != 0.0:
                input_coeffs[(k, j)] = float(bk[j])
        for j in range(ctx.sys.s):
            if row[j] != 0.0:
                dist_coeffs[(k, j)] = float(row[j])
    return AffineExpr.make(const, input_coeffs, dist_coeffs)


# --- group/form folding ------------------------------------------------------
#
# Sentinel atoms are constants at +/-1e18 standing for discharged (true) or
# impossible (false) predicates.  They are removed whenever another atom can
# determine the min/max, which keeps big-M certification finite.


def _atom_key(a: AffineExpr):
    return (a.constant, a.input_coeffs, a.dist_coeffs)


def _fold_min_group(atoms) -> tuple:
    if any(_is_neg_sentinel_atom(a) for a in atoms):
        return (_NEG_ATOM,)
    # min is idempotent: drop duplicates, and sort for a canonical order
    kept = tuple(sorted(dict.fromkeys(
        a for a in atoms if not _is_pos_sentinel_atom(a)), key=_atom_key))
    return kept if kept else (_POS_ATOM,)


def _fold_max_group(atoms) -> tuple:
    if any(_is_pos_sentinel_atom(a) for a in atoms):
        return (_POS_ATOM,)
    kept = tuple(sorted(dict.fromkeys(
        a for a in atoms if not _is_neg_sentinel_atom(a)), key=_atom_key))
    return kept if kept else (_NEG_ATOM,)


def _fold_maxmin_groups(groups) -> tuple:
    if any(len(g) == 1 and _is_pos_sentinel_atom(g[0]) for g in groups):
        return ((_POS_ATOM,),)
    kept = tuple(dict.fromkeys(
        g for g in groups if not (len(g) == 1 and _is_neg_sentinel_atom(g[0]))))
    return kept if kept else ((_NEG_ATOM,),)


def _fold_minmax_groups(groups) -> tuple:
    if any(len(g) == 1 and _is_neg_sentinel_atom(g[0]) for g in groups):
        return ((_NEG_ATOM,),)
    kept = tuple(dict.fromkeys(
        g for g in groups if not (len(g) == 1 and _is_pos_sentinel_atom(g[0]))))
    return kept if kept else ((_POS_ATOM,),)


def _check_budget(kind: str, groups, budget: int):
    atoms = sum(len(g) for g in groups)
    if atoms > budget:
        raise FormSizeError(kind, len(groups), atoms, budget)


def _cross_min(parts, budget: int) -> tuple:
    """Conjunction under max-min: distribute min over max group-by-group."""
    groups = ((),)
    for form_groups in parts:
        groups = tuple(ga + gb for ga in groups for gb in form_groups)
        _check_budget("max-min", groups, budget)
    return _fold_maxmin_groups(tuple(_fold_min_group(g) for g in groups))


def _cross_max(parts, budget: int) -> tuple:
    """Disjunction under min-max: distribute max over min group-by-group."""
    groups = ((),)
    for form_groups in parts:
        groups = tuple(ga + gb for ga in groups for gb in form_groups)
        _check_budget("min-max", groups, budget)
    return _fold_minmax_groups(tuple(_fold_max_group(g) for g in groups))


def _concat_groups(parts) -> tuple:
    out = ()
    for form_groups in parts:
        out = out + tuple(form_groups)
    return out


def _maxmin_groups(phi: StlFormula, tau: int, ctx: FormContext) -> tuple:
    key = ("maxmin", id(phi), tau)
    cached = ctx._phi_cache.get(key)
    if cached is not None:
        return cached[1]
    k = phi.kind
    if k == stl.TRUE:
        out = ((_POS_ATOM,),)
    elif k == stl.PRED:
        out = ((atom_of_predicate(phi.pred, tau, ctx),),)
    elif k == stl.NOT:
        inner = _minmax_groups(phi.children[0], tau, ctx)
        out = _fold_maxmin_groups(tuple(
            _fold_min_group(tuple(a.negate() for a in g)) for g in inner))
    elif k == stl.AND:
        out = _cross_min([_maxmin_groups(c, tau, ctx) for c in phi.children],
                         ctx.atom_budget)
    elif k == stl.OR:
        out = _fold_maxmin_groups(_concat_groups(
            [_maxmin_groups(c, tau, ctx) for c in phi.children]))
    elif k == stl.ALWAYS:
        out = _cross_min([_maxmin_groups(phi.children[0], tau + i, ctx)
                          for i in range(phi.a, phi.b + 1)], ctx.atom_budget)
    elif k == stl.EVENTUALLY:
        out = _fold_maxmin_groups(_concat_groups(
            [_maxmin_groups(phi.children[0], tau + i, ctx)
             for i in range(phi.a, phi.b + 1)]))
    elif k == stl.UNTIL:
        lhs, rhs = phi.children
        branches = []
        for i in range(phi.a, phi.b + 1):
            parts = [_maxmin_groups(rhs, tau + i, ctx)]
            parts += [_maxmin_groups(lhs, tau + j, ctx) for j in range(i)]
            branches.append(_cross_min(parts, ctx.atom_budget))
        out = _fold_maxmin_groups(_concat_groups(branches))
        _check_budget("max-min", out, ctx.atom_budget)
    else:
        raise ValueError("unknown node kind %r" % k)
    ctx._phi_cache[key] = (phi, out)  # keep phi alive so id() keys stay unique
    return out


def _minmax_groups(phi: StlFormula, tau: int, ctx: FormContext) -> tuple:
    key = ("minmax", id(phi), tau)
    cached = ctx._phi_cache.get(key)
    if cached is not None:
        return cached[1]
    k = phi.kind
    if k == stl.TRUE:
        out = ((_POS_ATOM,),)
    elif k == stl.PRED:
        out = ((atom_of_predicate(phi.pred, tau, ctx),),)
    elif k == stl.NOT:
        inner = _maxmin_groups(phi.children[0], tau, ctx)
        out = _fold_minmax_groups(tuple(
            _fold_max_group(tuple(a.negate() for a in g)) for g in inner))
    elif k == stl.AND:
        out = _fold_minmax_groups(_concat_groups(
            [_minmax_groups(c, tau, ctx) for c in phi.children]))
    elif k == stl.OR:
        out = _cross_max([_minmax_groups(c, tau, ctx) for c in phi.children],
                         ctx.atom_budget)
    elif k == stl.ALWAYS:
        out = _fold_minmax_groups(_concat_groups(
            [_minmax_groups(phi.children[0], tau + i, ctx)
             for i in range(phi.a, phi.b + 1)]))
    elif k == stl.EVENTUALLY:
        out = _cross_max([_minmax_groups(phi.children[0], tau + i, ctx)
                          for i in range(phi.a, phi.b + 1)], ctx.atom_budget)
    elif k == stl.UNTIL:
        lhs, rhs = phi.children
        branches = []
        for i in range(phi.a, phi.b + 1):
            parts = [_minmax_groups(rhs, tau + i, ctx)]
            parts += [_minmax_groups(lhs, tau + j, ctx) for j in range(i)]
            branches.append(_fold_minmax_groups(_concat_groups(parts)))
        out = _cross_max(branches, ctx.atom_budget)
    else:
        raise ValueError("unknown node kind %r" % k)
    ctx._phi_cache[key] = (phi, out)
    return out


def max_min_form(phi: StlFormula, t_eval: int, ctx: FormContext) -> MaxMinForm:
    """Max-min canonical form of the robustness of phi at evaluation time t_eval."""
    if t_eval + stl.horizon(phi) > ctx.N:
        raise HorizonError("formula horizon %d at t=%d exceeds N=%d"
                           % (stl.horizon(phi), t_eval, ctx.N))
    return MaxMinForm(_maxmin_groups(phi, t_eval, ctx))


def min_max_form(phi: StlFormula, t_eval: int, ctx: FormContext) -> MinMaxForm:
    if t_eval + stl.horizon(phi) > ctx.N:
        raise HorizonError("formula horizon %d at t=%d exceeds N=%d"
                           % (stl.horizon(phi), t_eval, ctx.N))
    return MinMaxForm(_minmax_groups(phi, t_eval, ctx))


def _dominates(a: AffineExpr, b: AffineExpr, keep_smaller: bool) -> bool:
    """True if a renders b redundant: identical coefficients, and a's constant
    on the winning side of the group's min (keep_smaller) or max."""
    if a.input_coeffs != b.input_coeffs or a.dist_coeffs != b.dist_coeffs:
        return False
    return a.constant <= b.constant if keep_smaller else a.constant >= b.constant


def _prune_group(group: tuple, keep_smaller: bool) -> tuple:
    kept: list = []
    for atom in group:
        if any(_dominates(other, atom, keep_smaller) for other in kept):
            continue
        kept = [other for other in kept if not _dominates(atom, other, keep_smaller)]
        kept.append(atom)
    return tuple(kept)


def prune_form(form, budget: int = 0):
    """Drop dominated atoms; returns the input unchanged if already within budget."""
    if form.total_atoms <= budget:
        return form
    keep_smaller = isinstance(form, MaxMinForm)
    groups = tuple(_prune_group(g, keep_smaller) for g in form.groups)
    return type(form)(groups)
