"""Dense two-phase primal simplex and best-first branch and bound.

Small, deterministic, and certified rather than fast: problems here have at
most a few hundred variables.  Optimal LP solutions carry a dual certificate
(weak-duality gap), and the branch and bound uses fixed tie-breaking (lowest
variable index, down-branch first) so repeated solves are identical.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

INF = float("inf")

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-10
RCOST_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITER_LIMIT = "iter_limit"


@dataclass
class LpProblem:
    """Minimize c.x subject to rows (a, sense, rhs) and variable bounds."""

    c: np.ndarray
    rows: list = field(default_factory=list)     # (np.ndarray, '<='|'>='|'=', float)
    bounds: list = field(default_factory=list)   # (lo, hi), possibly infinite

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if np.any(np.isnan(self.c)):
            raise ValueError("objective contains NaN")
        n = self.c.shape[0]
        if not self.bounds:
            self.bounds = [(0.0, INF)] * n
        if len(self.bounds) != n:
            raise ValueError("need one bound pair per variable")
        norm_rows = []
        for a, sense, rhs in self.rows:
            a = np.asarray(a, dtype=float)
            if a.shape != (n,):
                raise ValueError("row has %s coefficients, expected %d" % (a.shape, n))
            if np.any(np.isnan(a)) or math.isnan(rhs):
                raise ValueError("constraint contains NaN")
            if sense not in ("<=", ">=", "="):
                raise ValueError("unknown sense %r" % sense)
            norm_rows.append((a, sense, float(rhs)))
        self.rows = norm_rows

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def copy(self) -> "LpProblem":
        return LpProblem(self.c.copy(), [(a.copy(), s, r) for a, s, r in self.rows],
                         list(self.bounds))


@dataclass
class MilpProblem:
    lp: LpProblem
    binary: list = field(default_factory=list)
    big_m: dict = field(default_factory=dict)

    def __post_init__(self):
        for j in self.binary:
            if not 0 <= j < self.lp.n:
                raise ValueError("binary index %d out of range" % j)
        for key, m in self.big_m.items():
            if not math.isfinite(m):
                raise ValueError("big-M for %r is not finite" % (key,))


@dataclass
class MilpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = math.nan
    node_count: int = 0
    pivots: int = 0
    solve_time: float = 0.0
    dual_objective: float = math.nan
    dual_gap: float = math.nan
    dual_infeasibility: float = math.nan

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


# --- standard-form conversion --------------------------------------------------


class _StandardForm:
    """min c.x', A x' = b, x' >= 0, remembering how to undo the substitutions."""

    def __init__(self, p: LpProblem, bound_override: dict | None = None):
        n = p.n
        bounds = list(p.bounds)
        if bound_override:
            for j, (lo, hi) in bound_override.items():
                bounds[j] = (lo, hi)
        # per original var: (kind, data). kind 'shift': x = lo + x'; 'flip':
        # x = hi - x'; 'free': x = x+ - x-.
        self.var_map = []
        cols = []      # column index (or pair) in standard space
        k = 0
        for j in range(n):
            lo, hi = bounds[j]
            if lo > hi + 1e-12:
                self.trivially_infeasible = True
            if lo > -INF:
                self.var_map.append(("shift", lo))
                cols.append((k,))
                k += 1
            elif hi < INF:
                self.var_map.append(("flip", hi))
                cols.append((k,))
                k += 1
            else:
                self.var_map.append(("free", 0.0))
                cols.append((k, k + 1))
                k += 2
        self.trivially_infeasible = getattr(self, "trivially_infeasible", False)
        self.n_struct = k
        self.cols = cols
        self.bounds = bounds

        rows = [(a, s, r) for a, s, r in p.rows]
        # double-bounded shifted vars need an explicit x' <= hi - lo row
        for j in range(n):
            lo, hi = bounds[j]
            if lo > -INF and hi < INF:
                a = np.zeros(n)
                a[j] = 1.0
                rows.append((a, "<=", hi))
        self.obj_offset = 0.0
        std_rows = []
        for a, sense, rhs in rows:
            coef = np.zeros(k)
            shift = 0.0
            for j in range(n):
                aj = a[j]
                if aj == 0.0:
                    continue
                kind, val = self.var_map[j]
                if kind == "shift":
                    coef[cols[j][0]] += aj
                    shift += aj * val
                elif kind == "flip":
                    coef[cols[j][0]] -= aj
                    shift += aj * val
                else:
                    coef[cols[j][0]] += aj
                    coef[cols[j][1]] -= aj
            std_rows.append((coef, sense, rhs - shift))
        c_std = np.zeros(k)
        for j in range(n):
            cj = p.c[j]
            if cj == 0.0:
                continue
            kind, val = self.var_map[j]
            if kind == "shift":
                c_std[cols[j][0]] += cj
                self.obj_offset += cj * val
            elif kind == "flip":
                c_std[cols[j][0]] -= cj
                self.obj_offset += cj * val
            else:
                c_std[cols[j][0]] += cj
                c_std[cols[j][1]] -= cj
        self.c_std = c_std
        # equality form with slacks; keep b >= 0
        m = len(std_rows)
        self.slack_of_row = [None] * m
        n_slack = sum(1 for _, s, _ in std_rows if s != "=")
        A = np.zeros((m, k + n_slack))
        b = np.zeros(m)
        si = 0
        for i, (coef, sense, rhs) in enumerate(std_rows):
            A[i, :k] = coef
            b[i] = rhs
            if sense == "<=":
                A[i, k + si] = 1.0
                self.slack_of_row[i] = k + si
                si += 1
            elif sense == ">=":
                A[i, k + si] = -1.0
                self.slack_of_row[i] = k + si
                si += 1
        for i in range(m):
            if b[i] < 0.0:
                A[i] *= -1.0
                b[i] = -b[i]
        self.A = A
        self.b = b
        self.c_full = np.concatenate([c_std, np.zeros(n_slack)])
        self.n_total = k + n_slack

    def recover(self, x_std: np.ndarray) -> np.ndarray:
        out = np.zeros(len(self.var_map))
        for j, (kind, val) in enumerate(self.var_map):
            cs = self.cols[j]
            if kind == "shift":
                out[j] = val + x_std[cs[0]]
            elif kind == "flip":
                out[j] = val - x_std[cs[0]]
            else:
                out[j] = x_std[cs[0]] - x_std[cs[1]]
        return out


class _Tableau:
    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list):
        m, n = A.shape
        self.T = np.zeros((m, n + 1))
        self.T[:, :n] = A
        self.T[:, n] = b
        self.basis = list(basis)
        self.m, self.n = m, n

    def price(self, c: np.ndarray) -> np.ndarray:
        """Reduced costs for the current basis."""
        cb = c[self.basis]
        return c - cb @ self.T[:, :self.n]

    def objective(self, c: np.ndarray) -> float:
        return float(c[self.basis] @ self.T[:, self.n])

    def pivot(self, row: int, col: int):
        self.T[row] /= self.T[row, col]
        for i in range(self.m):
            if i != row and self.T[i, col] != 0.0:
                self.T[i] -= self.T[i, col] * self.T[row]
        self.basis[row] = col

    def solution(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[self.basis] = self.T[:, self.n]
        return x


def _simplex(tab: _Tableau, c: np.ndarray, max_pivots: int, allowed: np.ndarray):
    """Run primal simplex; returns (status, pivots). ``allowed`` masks columns
    that may enter (artificials are barred in phase 2)."""
    pivots = 0
    stall = 0
    bland = False
    last_obj = tab.objective(c)
    while pivots < max_pivots:
        red = tab.price(c)
        red[~allowed] = 0.0
        if bland:
            neg = np.nonzero(red < -RCOST_TOL)[0]
            if neg.size == 0:
                return OPTIMAL, pivots
            col = int(neg[0])
        else:
            col = int(np.argmin(red))
            if red[col] >= -RCOST_TOL:
                return OPTIMAL, pivots
        colv = tab.T[:, col]
        rhs = tab.T[:, tab.n]
        ratios = np.full(tab.m, INF)
        mask = colv > PIVOT_TOL
        ratios[mask] = rhs[mask] / colv[mask]
        row = -1
        best = INF
        best_var = None
        for i in range(tab.m):
            if ratios[i] < best - 1e-12 or (
                    ratios[i] < best + 1e-12 and row >= 0
                    and tab.basis[i] < best_var):
                best = ratios[i]
                row = i
                best_var = tab.basis[i]
        if row < 0 or not math.isfinite(best):
            return UNBOUNDED, pivots
        tab.pivot(row, col)
        pivots += 1
        obj = tab.objective(c)
        if obj < last_obj - 1e-12:
            stall = 0
        else:
            stall += 1
            if stall > 200:
                bland = True
        last_obj = obj
    return ITER_LIMIT, pivots


def solve_lp(p: LpProblem, max_pivots: int = 100_000,
             bound_override: dict | None = None) -> MilpSolution:
    """Two-phase primal simplex with a Bland anti-cycling fallback."""
    t0 = time.perf_counter()
    sf = _StandardForm(p, bound_override)
    if sf.trivially_infeasible:
        return MilpSolution(status=INFEASIBLE, solve_time=time.perf_counter() - t0)
    m = sf.A.shape[0]
    if m == 0:
        # bounded-below unconstrained: every variable sits at its favourable bound
        x = np.zeros(sf.n_total)
        if np.any(sf.c_full < -RCOST_TOL):
            return MilpSolution(status=UNBOUNDED, solve_time=time.perf_counter() - t0)
        sol = sf.recover(x)
        obj = float(p.c @ sol)
        return MilpSolution(status=OPTIMAL, x=sol, objective=obj,
                            dual_objective=obj, dual_gap=0.0, dual_infeasibility=0.0,
                            solve_time=time.perf_counter() - t0)

    # phase 1: artificials where a slack cannot seed the basis
    need_art = []
    basis = [None] * m
    for i in range(m):
        s = sf.slack_of_row[i]
        if s is not None and sf.A[i, s] > 0.5:
            basis[i] = s
        else:
            need_art.append(i)
    n0 = sf.n_total
    A = sf.A
    if need_art:
        ext = np.zeros((m, len(need_art)))
        for idx, i in enumerate(need_art):
            ext[i, idx] = 1.0
            basis[i] = n0 + idx
        A = np.hstack([sf.A, ext])
    tab = _Tableau(A, sf.b, basis)
    total_pivots = 0
    art_cols = set(range(n0, A.shape[1]))
    if need_art:
        c1 = np.zeros(A.shape[1])
        c1[n0:] = 1.0
        allowed = np.ones(A.shape[1], dtype=bool)
        status, piv = _simplex(tab, c1, max_pivots, allowed)
        total_pivots += piv
        if status == ITER_LIMIT:
            return MilpSolution(status=ITER_LIMIT, pivots=total_pivots,
                                solve_time=time.perf_counter() - t0)
        if tab.objective(c1) > FEAS_TOL:
            return MilpSolution(status=INFEASIBLE, pivots=total_pivots,
                                solve_time=time.perf_counter() - t0)
        # drive leftover artificials out of the basis, or drop their rows
        drop_rows = []
        for i in range(tab.m):
            if tab.basis[i] in art_cols:
                piv_col = -1
                for jcol in range(n0):
                    if abs(tab.T[i, jcol]) > PIVOT_TOL:
                        piv_col = jcol
                        break
                if piv_col >= 0:
                    tab.pivot(i, piv_col)
                    total_pivots += 1
                else:
                    drop_rows.append(i)
        if drop_rows:
            keep = [i for i in range(tab.m) if i not in drop_rows]
            tab.T = tab.T[keep]
            tab.basis = [tab.basis[i] for i in keep]
            tab.m = len(keep)

    c2 = np.concatenate([sf.c_full, np.zeros(A.shape[1] - n0)])
    allowed = np.ones(A.shape[1], dtype=bool)
    for jcol in art_cols:
        allowed[jcol] = False
    status, piv = _simplex(tab, c2, max_pivots - total_pivots, allowed)
    total_pivots += piv
    if status != OPTIMAL:
        return MilpSolution(status=status, pivots=total_pivots,
                            solve_time=time.perf_counter() - t0)
    x_std = tab.solution()[:n0]
    x = sf.recover(x_std)
    obj = float(p.c @ x)

    # dual certificate from the final basis (equality-form duals)
    basis_cols = [bcol for bcol in tab.basis]
    B = A[:, basis_cols] if tab.m == A.shape[0] else None
    dual_obj = math.nan
    gap = math.nan
    dual_infeas = math.nan
    try:
        rows_alive = tab.m
        A_alive = A if rows_alive == sf.A.shape[0] else None
        if A_alive is not None and B is not None:
            cb = c2[basis_cols]
            y = np.linalg.solve(B.T, cb)
            dual_obj = float(y @ sf.b) + sf.obj_offset
            gap = abs((float(sf.c_full @ x_std) + sf.obj_offset) - dual_obj)
            slack_red = sf.c_full - (y @ sf.A)
            dual_infeas = float(max(0.0, -slack_red.min())) if slack_red.size else 0.0
    except np.linalg.LinAlgError:
        pass
    return MilpSolution(status=OPTIMAL, x=x, objective=obj, pivots=total_pivots,
                        dual_objective=dual_obj, dual_gap=gap,
                        dual_infeasibility=dual_infeas,
                        solve_time=time.perf_counter() - t0)


def check_feasible(p: LpProblem, x: np.ndarray, tol: float = FEAS_TOL) -> float:
    """Largest constraint/bound violation of x."""
    worst = 0.0
    for a, sense, rhs in p.rows:
        v = float(a @ x)
        if sense == "<=":
            worst = max(worst, v - rhs)
        elif sense == ">=":
            worst = max(worst, rhs - v)
        else:
            worst = max(worst, abs(v - rhs))
    for j, (lo, hi) in enumerate(p.bounds):
        if lo > -INF:
            worst = max(worst, lo - x[j])
        if hi < INF:
            worst = max(worst, x[j] - hi)
    return worst


def solve_milp(p: MilpProblem, max_nodes: int = 100_000,
               max_pivots: int = 100_000) -> MilpSolution:
    """Best-first branch and bound over the binary variables."""
    t0 = time.perf_counter()
    lp = p.lp
    base_override = {}
    for j in p.binary:
        lo, hi = lp.bounds[j]
        base_override[j] = (max(lo, 0.0), min(hi, 1.0))

    best_x = None
    best_obj = INF
    nodes = 0
    pivots = 0
    counter = 0
    heap = [(-INF, 0, {})]
    limit_hit = False
    root_unbounded = False
    while heap:
        bound, _, fixings = heapq.heappop(heap)
        if bound >= best_obj - OPT_TOL:
            break
        if nodes >= max_nodes:
            limit_hit = True
            break
        override = dict(base_override)
        for j, v in fixings.items():
            override[j] = (float(v), float(v))
        sol = solve_lp(lp, max_pivots=max_pivots, bound_override=override)
        nodes += 1
        pivots += sol.pivots
        if sol.status == UNBOUNDED:
            if not fixings:
                root_unbounded = True
                break
            continue
        if sol.status == ITER_LIMIT:
            limit_hit = True
            continue
        if sol.status != OPTIMAL:
            continue
        if sol.objective >= best_obj - OPT_TOL:
            continue
        frac = -1
        for j in p.binary:
            v = sol.x[j]
            if min(abs(v), abs(v - 1.0)) > FEAS_TOL:
                frac = j
                break
        if frac < 0:
            x = sol.x.copy()
            for j in p.binary:
                x[j] = round(x[j])
            best_obj = sol.objective
            best_x = x
            continue
        counter += 1
        heapq.heappush(heap, (sol.objective, counter, {**fixings, frac: 0}))
        counter += 1
        heapq.heappush(heap, (sol.objective, counter, {**fixings, frac: 1}))

    elapsed = time.perf_counter() - t0
    if root_unbounded:
        return MilpSolution(status=UNBOUNDED, node_count=nodes, pivots=pivots,
                            solve_time=elapsed)
    if best_x is not None:
        status = ITER_LIMIT if limit_hit else OPTIMAL
        return MilpSolution(status=status, x=best_x, objective=best_obj,
                            node_count=nodes, pivots=pivots, solve_time=elapsed)
    return MilpSolution(status=ITER_LIMIT if limit_hit else INFEASIBLE,
                        node_count=nodes, pivots=pivots, solve_time=elapsed)


# --- plain-text dump/load -------------------------------------------------------


def dump_problem(p: LpProblem | MilpProblem) -> str:
    """Write the problem in a small LP-like text format (lossless floats)."""
    lp = p.lp if isinstance(p, MilpProblem) else p
    binary = sorted(p.binary) if isinstance(p, MilpProblem) else []

    def term_str(coeffs):
        parts = []
        for j, cj in enumerate(coeffs):
            if cj != 0.0:
                parts.append("%r x%d" % (float(cj), j))
        return " + ".join(parts) if parts else "0"

    lines = ["minimize", "obj: %s" % term_str(lp.c), "subject to"]
    for i, (a, sense, rhs) in enumerate(lp.rows):
        lines.append("r%d: %s %s %r" % (i, term_str(a), sense, float(rhs)))
    lines.append("bounds")
    for j, (lo, hi) in enumerate(lp.bounds):
        lo, hi = float(lo), float(hi)
        if lo == -INF and hi == INF:
            lines.append("x%d free" % j)
        elif hi == INF:
            lines.append("x%d >= %r" % (j, lo))
        elif lo == -INF:
            lines.append("x%d <= %r" % (j, hi))
        else:
            lines.append("%r <= x%d <= %r" % (lo, j, hi))
    if binary:
        lines.append("binary")
        lines.append(" ".join("x%d" % j for j in binary))
    lines.append("end")
    return "\n".join(lines) + "\n"


def _parse_terms(text: str, n: int) -> np.ndarray:
    coeffs = np.zeros(n)
    text = text.strip()
    if text == "0":
        return coeffs
    for part in text.split(" + "):
        part = part.strip()
        if not part:
            continue
        cstr, var = part.split()
        j = int(var.lstrip("x"))
        coeffs[j] += float(cstr)
    return coeffs


def load_problem(text: str):
    """Inverse of dump_problem; returns LpProblem or MilpProblem."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    it = iter(lines)
    if next(it) != "minimize":
        raise ValueError("expected 'minimize' header")
    obj_line = next(it)
    body = obj_line.split(":", 1)[1]
    rows_raw = []
    bounds_raw = []
    binary: list = []
    section = None
    if next(it) != "subject to":
        raise ValueError("expected 'subject to'")
    section = "rows"
    for ln in it:
        if ln == "bounds":
            section = "bounds"
            continue
        if ln == "binary":
            section = "binary"
            continue
        if ln == "end":
            break
        if section == "rows":
            rows_raw.append(ln.split(":", 1)[1])
        elif section == "bounds":
            bounds_raw.append(ln)
        else:
            binary.extend(int(tok.lstrip("x")) for tok in ln.split())
    n = 0
    for raw in [body] + rows_raw + bounds_raw:
        for tok in raw.replace("<=", " ").replace(">=", " ").replace("=", " ").split():
            if tok.startswith("x") and tok[1:].isdigit():
                n = max(n, int(tok[1:]) + 1)
    c = _parse_terms(body, n)
    rows = []
    for raw in rows_raw:
        for sense in ("<=", ">=", "="):
            if sense in raw:
                left, rhs = raw.rsplit(sense, 1)
                rows.append((_parse_terms(left, n), sense, float(rhs)))
                break
    bounds = [(0.0, INF)] * n
    for raw in bounds_raw:
        toks = raw.split()
        if toks[-1] == "free":
            bounds[int(toks[0].lstrip("x"))] = (-INF, INF)
        elif toks[1] == ">=":
            bounds[int(toks[0].lstrip("x"))] = (float(toks[2]), INF)
        elif toks[1] == "<=" and toks[0].startswith("x"):
            bounds[int(toks[0].lstrip("x"))] = (-INF, float(toks[2]))
        else:
            bounds[int(toks[2].lstrip("x"))] = (float(toks[0]), float(toks[4]))
    lp = LpProblem(c, rows, bounds)
    if binary:
        return MilpProblem(lp, binary)
    return lp
