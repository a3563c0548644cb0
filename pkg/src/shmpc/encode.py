"""Big-M encodings of canonical-form objectives over box-bounded inputs.

Two directions are needed: maximizing a max-min (binary selector on the
outer max, a free variable per inner min), and minimizing a max-min (binary
selector inside each min group).  All big-M constants are certified from the
atom ranges over the input box, with a 5% safety factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .canonical import AffineExpr, MaxMinForm
from .milp import INF, LpProblem, MilpProblem

_M_SAFETY = 1.05
_M_PAD = 1e-6


class BigMError(ValueError):
    """An atom's range over the decision box could not be certified finite."""


@dataclass
class ProgramBuilder:
    """Incremental LP/MILP assembly with named variables."""

    obj: dict = field(default_factory=dict)
    obj_offset: float = 0.0
    rows: list = field(default_factory=list)
    bounds: list = field(default_factory=list)
    names: list = field(default_factory=list)
    binary: list = field(default_factory=list)
    big_m: dict = field(default_factory=dict)

    def add_var(self, name: str, lo: float = 0.0, hi: float = INF) -> int:
        self.bounds.append((lo, hi))
        self.names.append(name)
        return len(self.bounds) - 1

    def add_binary(self, name: str) -> int:
        j = self.add_var(name, 0.0, 1.0)
        self.binary.append(j)
        return j

    def add_row(self, coeffs: dict, sense: str, rhs: float):
        self.rows.append((dict(coeffs), sense, float(rhs)))

    def add_objective(self, coeffs: dict, offset: float = 0.0):
        for j, c in coeffs.items():
            self.obj[j] = self.obj.get(j, 0.0) + c
        self.obj_offset += offset

    def build(self) -> MilpProblem:
        n = len(self.bounds)
        c = np.zeros(n)
        for j, v in self.obj.items():
            c[j] = v
        rows = []
        for coeffs, sense, rhs in self.rows:
            a = np.zeros(n)
            for j, v in coeffs.items():
                a[j] += v
            rows.append((a, sense, rhs))
        return MilpProblem(LpProblem(c, rows, list(self.bounds)),
                           binary=sorted(self.binary), big_m=dict(self.big_m))


@dataclass
class DecisionMap:
    """Maps (time, input component) decision coordinates to LP variables."""

    index: dict            # (k, j) -> var index
    box: dict              # (k, j) -> (lo, hi)

    @classmethod
    def for_horizon(cls, builder: ProgramBuilder, t: int, N: int, m: int,
                    input_box: np.ndarray) -> "DecisionMap":
        index = {}
        box = {}
        for k in range(t, N):
            for j in range(m):
                lo, hi = float(input_box[j, 0]), float(input_box[j, 1])
                index[(k, j)] = builder.add_var("u_%d_%d" % (k, j), lo, hi)
                box[(k, j)] = (lo, hi)
        return cls(index=index, box=box)

    def vector(self, x: np.ndarray, t: int, N: int, m: int) -> np.ndarray:
        u = np.zeros((N, m))
        for (k, j), idx in self.index.items():
            u[k, j] = x[idx]
        return u


def atom_range(atom: AffineExpr, dmap: DecisionMap) -> tuple:
    """Certified [lo, hi] of the atom over the input box (no disturbance terms)."""
    if atom.dist_coeffs:
        raise BigMError("atom still references disturbances; bound the noise first")
    lo = hi = atom.constant
    for key, c in atom.input_coeffs:
        if key not in dmap.box:
            raise BigMError("atom references undeclared decision %r" % (key,))
        blo, bhi = dmap.box[key]
        if not (np.isfinite(blo) and np.isfinite(bhi)):
            raise BigMError("decision %r has an unbounded box; cannot certify big-M"
                            % (key,))
        lo += min(c * blo, c * bhi)
        hi += max(c * blo, c * bhi)
    return lo, hi


def _atom_row(atom: AffineExpr, dmap: DecisionMap, extra: dict) -> tuple:
    """Row coefficients for (extra-vars expression) vs atom(u); returns (coeffs, const)."""
    coeffs = dict(extra)
    for key, c in atom.input_coeffs:
        j = dmap.index[key]
        coeffs[j] = coeffs.get(j, 0.0) - c
    return coeffs, atom.constant


def encode_objective(builder: ProgramBuilder, form: MaxMinForm, dmap: DecisionMap,
                     tag: str = "rob") -> int:
    """Encode maximize(max over groups of min over atoms); returns the variable
    carrying the form's value.  The caller should minimize its negative."""
    ranges = [[atom_range(a, dmap) for a in g] for g in form.groups]
    group_lo = [min(r[0] for r in rg) for rg in ranges]
    group_hi = [min(r[1] for r in rg) for rg in ranges]
    L = len(form.groups)
    if L == 1 and len(form.groups[0]) == 1:
        atom = form.groups[0][0]
        z = builder.add_var("%s_val" % tag, group_lo[0], group_hi[0])
        coeffs, const = _atom_row(atom, dmap, {z: 1.0})
        builder.add_row(coeffs, "=", const)
        return z
    z_vars = []
    for i, g in enumerate(form.groups):
        z = builder.add_var("%s_min%d" % (tag, i), group_lo[i], group_hi[i])
        z_vars.append(z)
        for a in g:
            coeffs, const = _atom_row(a, dmap, {z: 1.0})
            builder.add_row(coeffs, "<=", const)
    if L == 1:
        return z_vars[0]
    r = builder.add_var("%s_val" % tag, min(group_lo), max(group_hi))
    r_hi = max(group_hi)
    picks = []
    for i, z in enumerate(z_vars):
        m_i = (r_hi - group_lo[i]) * _M_SAFETY + _M_PAD
        y = builder.add_binary("%s_pick%d" % (tag, i))
        picks.append(y)
        builder.big_m[("%s_pick%d" % (tag, i))] = m_i
        # r <= z_i + M_i (1 - y_i)
        builder.add_row({r: 1.0, z: -1.0, y: m_i}, "<=", m_i)
    builder.add_row({y: 1.0 for y in picks}, "=", 1.0)
    return r


def encode_min_of_maxmin(builder: ProgramBuilder, form: MaxMinForm, dmap: DecisionMap,
                         tag: str = "obj") -> int:
    """Encode minimize(max over groups of min over atoms); returns the epigraph
    variable t with t >= min of every group."""
    ranges = [[atom_range(a, dmap) for a in g] for g in form.groups]
    group_lo = [min(r[0] for r in rg) for rg in ranges]
    group_hi = [min(r[1] for r in rg) for rg in ranges]
    t_lo = max(group_lo)
    t_hi = max(group_hi)
    t = builder.add_var("%s_epi" % tag, t_lo, t_hi)
    for i, g in enumerate(form.groups):
        if len(g) == 1:
            coeffs, const = _atom_row(g[0], dmap, {t: 1.0})
            builder.add_row(coeffs, ">=", const)
            continue
        sel = []
        for jdx, a in enumerate(g):
            s = builder.add_binary("%s_sel%d_%d" % (tag, i, jdx))
            sel.append(s)
            a_hi = ranges[i][jdx][1]
            m_ij = (a_hi - group_lo[i]) * _M_SAFETY + _M_PAD
            builder.big_m[("%s_sel%d_%d" % (tag, i, jdx))] = m_ij
            # t >= atom_ij - M_ij (1 - s_ij)
            coeffs, const = _atom_row(a, dmap, {t: 1.0, s: -m_ij})
            builder.add_row(coeffs, ">=", const - m_ij)
        builder.add_row({s: 1.0 for s in sel}, "=", 1.0)
    return t


def encode_linear_constraint(builder: ProgramBuilder, expr: AffineExpr, sense: str,
                             rhs: float, dmap: DecisionMap):
    """Add expr(u) sense rhs as a row over the decision variables."""
    if expr.dist_coeffs:
        raise BigMError("linear constraints must not reference disturbances")
    coeffs = {}
    for key, c in expr.input_coeffs:
        j = dmap.index[key]
        coeffs[j] = coeffs.get(j, 0.0) + c
    builder.add_row(coeffs, sense, rhs - expr.constant)


def encode_l1_cost(builder: ProgramBuilder, dmap: DecisionMap, weights: np.ndarray):
    """Add sum of weighted input magnitudes to the objective."""
    for (k, j), idx in sorted(dmap.index.items()):
        w = float(weights[j])
        if w == 0.0:
            continue
        lo, hi = dmap.box[(k, j)]
        if lo >= 0.0:
            builder.add_objective({idx: w})
        elif hi <= 0.0:
            builder.add_objective({idx: -w})
        else:
            aux = builder.add_var("abs_u_%d_%d" % (k, j), 0.0, INF)
            builder.add_row({aux: 1.0, idx: -1.0}, ">=", 0.0)
            builder.add_row({aux: 1.0, idx: 1.0}, ">=", 0.0)
            builder.add_objective({aux: w})
