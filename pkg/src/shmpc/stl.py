"""Signal temporal logic: syntax tree, text parser, horizon, and semantics.

Formulas are built from affine state predicates and bounded temporal
operators.  A predicate may be gated by a named external Boolean signal
(e.g. occupancy); while the gate is inactive the predicate is discharged,
which shows up as a large positive sentinel in the quantitative semantics.
The sentinel (1e18) stands in for +infinity so that values stay finite for
the optimization encodings; it only ever flows through min/max and negation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SENTINEL = 1e18
_SENTINEL_CUT = 1e17  # values beyond this are treated as discharged/violated-forever


def is_pos_sentinel(v: float) -> bool:
    return v >= _SENTINEL_CUT


def is_neg_sentinel(v: float) -> bool:
    return v <= -_SENTINEL_CUT


class StlSyntaxError(ValueError):
    """Parse failure, carrying 1-based line and column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__("%s (line %d, column %d)" % (message, line, col))
        self.line = line
        self.col = col


class RunTooShortError(ValueError):
    def __init__(self, needed: int, got: int):
        super().__init__("run of length %d is too short: evaluation needs x(0..%d)"
                         % (got, needed - 1))
        self.needed = needed


class GateError(KeyError):
    """A gated predicate could not resolve its signal at the needed time."""


@dataclass(frozen=True)
class Predicate:
    """Affine predicate coeffs . x + const >= 0, optionally gated by a signal.

    With a gate, the predicate reads "gate active at t  ->  alpha(x(t)) >= 0";
    ``gate_polarity`` False flips the gate (active when the signal is <= 0).
    """

    coeffs: tuple
    const: float
    name: str = ""
    gate: str | None = None
    gate_polarity: bool = True

    def __post_init__(self):
        if not all(np.isfinite(c) for c in self.coeffs) or not np.isfinite(self.const):
            raise ValueError("predicate coefficients must be finite")

    def alpha(self, x) -> float:
        v = float(self.const)
        x = np.asarray(x, dtype=float)
        for i, c in enumerate(self.coeffs):
            if c != 0.0:
                v += c * x[i]
        return v

    def gate_active(self, t: int, signals: dict | None) -> bool:
        if self.gate is None:
            return True
        if signals is None or self.gate not in signals:
            raise GateError("gated predicate needs signal %r" % self.gate)
        sig = signals[self.gate]
        if t >= len(sig):
            raise GateError("signal %r has no value at t=%d" % (self.gate, t))
        return (float(sig[t]) > 0.0) == self.gate_polarity


# Node kinds
TRUE, PRED, NOT, AND, OR, UNTIL, EVENTUALLY, ALWAYS = (
    "true", "pred", "not", "and", "or", "until", "eventually", "always")

_TEMPORAL = (UNTIL, EVENTUALLY, ALWAYS)


@dataclass(frozen=True)
class StlFormula:
    kind: str
    children: tuple = ()
    pred: Predicate | None = None
    a: int = 0
    b: int = 0

    def __post_init__(self):
        if self.kind in _TEMPORAL:
            if not (isinstance(self.a, int) and isinstance(self.b, int)):
                raise ValueError("temporal bounds must be integers")
            if self.a < 0 or self.a > self.b:
                raise ValueError("temporal bounds need 0 <= a <= b, got [%s, %s]"
                                 % (self.a, self.b))

    def __str__(self) -> str:
        return format_formula(self)


def true_() -> StlFormula:
    return StlFormula(TRUE)


def pred(coeffs, const: float, name: str = "", gate: str | None = None,
         gate_polarity: bool = True) -> StlFormula:
    p = Predicate(tuple(float(c) for c in np.atleast_1d(coeffs)), float(const),
                  name=name, gate=gate,
                  gate_polarity=gate_polarity if gate is not None else True)
    return StlFormula(PRED, pred=p)


def not_(phi: StlFormula) -> StlFormula:
    return StlFormula(NOT, (phi,))


def and_(phi: StlFormula, psi: StlFormula) -> StlFormula:
    return StlFormula(AND, (phi, psi))


def or_(phi: StlFormula, psi: StlFormula) -> StlFormula:
    return StlFormula(OR, (phi, psi))


def until(phi: StlFormula, psi: StlFormula, a: int, b: int) -> StlFormula:
    return StlFormula(UNTIL, (phi, psi), a=a, b=b)


def eventually(phi: StlFormula, a: int, b: int) -> StlFormula:
    return StlFormula(EVENTUALLY, (phi,), a=a, b=b)


def always(phi: StlFormula, a: int, b: int) -> StlFormula:
    return StlFormula(ALWAYS, (phi,), a=a, b=b)


def horizon(phi: StlFormula) -> int:
    """Length bound: how much signal prefix past t the formula can inspect."""
    if phi.kind in (TRUE, PRED):
        return 0
    if phi.kind == NOT:
        return horizon(phi.children[0])
    if phi.kind in (AND, OR):
        return max(horizon(c) for c in phi.children)
    if phi.kind == UNTIL:
        return phi.b + max(horizon(c) for c in phi.children)
    # F/G derive from Until against TRUE (horizon 0)
    return phi.b + horizon(phi.children[0])


def _check_length(run_len: int, t: int, phi: StlFormula) -> None:
    needed = t + horizon(phi) + 1
    if run_len < needed:
        raise RunTooShortError(needed, run_len)


def satisfies(states, t: int, phi: StlFormula, signals: dict | None = None) -> bool:
    """Boolean satisfaction of phi by the state sequence at time t."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    _check_length(states.shape[0], t, phi)
    return _sat(states, t, phi, signals)


def _sat(x, t, phi, signals) -> bool:
    k = phi.kind
    if k == TRUE:
        return True
    if k == PRED:
        if not phi.pred.gate_active(t, signals):
            return True
        return phi.pred.alpha(x[t]) >= 0.0
    if k == NOT:
        return not _sat(x, t, phi.children[0], signals)
    if k == AND:
        return all(_sat(x, t, c, signals) for c in phi.children)
    if k == OR:
        return any(_sat(x, t, c, signals) for c in phi.children)
    if k == EVENTUALLY:
        return any(_sat(x, t + i, phi.children[0], signals)
                   for i in range(phi.a, phi.b + 1))
    if k == ALWAYS:
        return all(_sat(x, t + i, phi.children[0], signals)
                   for i in range(phi.a, phi.b + 1))
    if k == UNTIL:
        lhs, rhs = phi.children
        for i in range(phi.a, phi.b + 1):
            if _sat(x, t + i, rhs, signals) and \
                    all(_sat(x, t + j, lhs, signals) for j in range(i)):
                return True
        return False
    raise ValueError("unknown node kind %r" % k)


def robustness(states, t: int, phi: StlFormula, signals: dict | None = None) -> float:
    """Quantitative satisfaction degree; positive implies Boolean satisfaction."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    _check_length(states.shape[0], t, phi)
    return _rho(states, t, phi, signals)


def _rho(x, t, phi, signals) -> float:
    k = phi.kind
    if k == TRUE:
        return SENTINEL
    if k == PRED:
        if not phi.pred.gate_active(t, signals):
            return SENTINEL
        return phi.pred.alpha(x[t])
    if k == NOT:
        return -_rho(x, t, phi.children[0], signals)
    if k == AND:
        return min(_rho(x, t, c, signals) for c in phi.children)
    if k == OR:
        return max(_rho(x, t, c, signals) for c in phi.children)
    if k == EVENTUALLY:
        return max(_rho(x, t + i, phi.children[0], signals)
                   for i in range(phi.a, phi.b + 1))
    if k == ALWAYS:
        return min(_rho(x, t + i, phi.children[0], signals)
                   for i in range(phi.a, phi.b + 1))
    if k == UNTIL:
        lhs, rhs = phi.children
        best = -SENTINEL
        for i in range(phi.a, phi.b + 1):
            v = _rho(x, t + i, rhs, signals)
            for j in range(i):
                v = min(v, _rho(x, t + j, lhs, signals))
            best = max(best, v)
        return best
    raise ValueError("unknown node kind %r" % k)


# ---------------------------------------------------------------------------
# Concrete syntax
#
#   formula    := or_expr ( 'U[a,b]' or_expr )?
#   or_expr    := and_expr ( '|' and_expr )*
#   and_expr   := unary ( '&' unary )*
#   unary      := '!' unary | 'F[a,b]' unary | 'G[a,b]' unary
#               | 'gate(' ['!'] NAME ')' '->' '(' formula ')'
#               | 'true' | predicate | '(' formula ')'
#   predicate  := affine ('>=' | '<=') number
#   affine     := term (('+' | '-') term)*
#   term       := [number '*'] 'x' INT | number
#
# Bounds a, b are nonnegative integers with a <= b.  Whitespace is free.
# ---------------------------------------------------------------------------


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _line_col(self, pos: int):
        line = self.text.count("\n", 0, pos) + 1
        last_nl = self.text.rfind("\n", 0, pos)
        return line, pos - last_nl if last_nl >= 0 else pos + 1

    def error(self, message: str, pos: int | None = None):
        line, col = self._line_col(self.pos if pos is None else pos)
        raise StlSyntaxError(message, line, col)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, k: int = 1) -> str:
        self.skip_ws()
        return self.text[self.pos:self.pos + k]

    def eat(self, token: str):
        self.skip_ws()
        if not self.text.startswith(token, self.pos):
            self.error("expected %r" % token)
        self.pos += len(token)

    def try_eat(self, token: str) -> bool:
        self.skip_ws()
        if self.text.startswith(token, self.pos):
            self.pos += len(token)
            return True
        return False

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def read_number(self) -> float:
        self.skip_ws()
        start = self.pos
        i = self.pos
        if i < len(self.text) and self.text[i] in "+-":
            i += 1
        seen = False
        while i < len(self.text) and (self.text[i].isdigit() or self.text[i] == "."):
            i += 1
            seen = True
        if i < len(self.text) and self.text[i] in "eE":
            j = i + 1
            if j < len(self.text) and self.text[j] in "+-":
                j += 1
            if j < len(self.text) and self.text[j].isdigit():
                i = j
                while i < len(self.text) and self.text[i].isdigit():
                    i += 1
        if not seen:
            self.error("expected a number")
        self.pos = i
        try:
            return float(self.text[start:i])
        except ValueError:
            self.error("bad number %r" % self.text[start:i], pos=start)

    def read_int(self) -> int:
        self.skip_ws()
        start = self.pos
        v = self.read_number()
        if v != int(v):
            self.error("expected an integer time bound, got %r" % v, pos=start)
        return int(v)

    def read_name(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum()
                                             or self.text[self.pos] == "_"):
            self.pos += 1
        if self.pos == start:
            self.error("expected a name")
        return self.text[start:self.pos]


class _Parser:
    def __init__(self, text: str, n_states: int | None):
        self.tk = _Tokenizer(text)
        self.n_states = n_states
        self.max_var = 0

    def parse(self) -> StlFormula:
        phi = self._formula()
        if not self.tk.at_end():
            self.tk.error("unexpected trailing input")
        return phi

    def _bounds(self):
        self.tk.eat("[")
        start = self.tk.pos
        a = self.tk.read_int()
        self.tk.eat(",")
        b = self.tk.read_int()
        self.tk.eat("]")
        if a < 0 or a > b:
            self.tk.error("bounds need 0 <= a <= b, got [%d, %d]" % (a, b), pos=start)
        return a, b

    def _formula(self) -> StlFormula:
        left = self._or()
        if self.tk.try_eat("U"):
            a, b = self._bounds()
            right = self._or()
            return until(left, right, a, b)
        return left

    def _or(self) -> StlFormula:
        node = self._and()
        while self.tk.try_eat("|"):
            node = or_(node, self._and())
        return node

    def _and(self) -> StlFormula:
        node = self._unary()
        while self.tk.peek() == "&":
            self.tk.eat("&")
            node = and_(node, self._unary())
        return node

    def _unary(self) -> StlFormula:
        if self.tk.try_eat("!"):
            return not_(self._unary())
        if self.tk.peek(2) in ("F[", "G["):
            op = self.tk.peek()
            self.tk.eat(op)
            a, b = self._bounds()
            child = self._unary()
            return eventually(child, a, b) if op == "F" else always(child, a, b)
        if self.tk.peek(5) == "gate(":
            self.tk.eat("gate(")
            polarity = not self.tk.try_eat("!")
            name = self.tk.read_name()
            self.tk.eat(")")
            self.tk.eat("->")
            self.tk.eat("(")
            inner = self._formula()
            self.tk.eat(")")
            return _attach_gate(inner, name, polarity, self.tk)
        if self.tk.peek(4) == "true" and not self.tk.peek(5)[4:5].isalnum():
            self.tk.eat("true")
            return true_()
        if self.tk.try_eat("("):
            inner = self._formula()
            self.tk.eat(")")
            return inner
        return self._predicate()

    def _predicate(self) -> StlFormula:
        text = self.tk.text
        coeffs: dict = {}
        const = 0.0
        start = self.tk.pos
        sign = 1.0
        expect_term = True
        while True:
            self.tk.skip_ws()
            if expect_term:
                c = 1.0
                ch = self.tk.peek()
                if ch and (ch.isdigit() or ch in "+-."):
                    c = self.tk.read_number()
                    if self.tk.try_eat("*"):
                        idx = self._state_var()
                        coeffs[idx] = coeffs.get(idx, 0.0) + sign * c
                    elif self.tk.peek() == "x":
                        idx = self._state_var()
                        coeffs[idx] = coeffs.get(idx, 0.0) + sign * c
                    else:
                        const += sign * c
                elif ch == "x":
                    idx = self._state_var()
                    coeffs[idx] = coeffs.get(idx, 0.0) + sign * c
                else:
                    self.tk.error("expected a predicate term")
                expect_term = False
            elif self.tk.try_eat("+"):
                sign, expect_term = 1.0, True
            elif self.tk.try_eat("-"):
                sign, expect_term = -1.0, True
            elif self.tk.peek(2) in (">=", "<="):
                op = self.tk.peek(2)
                self.tk.eat(op)
                rhs = self.tk.read_number()
                n = self.n_states if self.n_states is not None else self.max_var
                vec = np.zeros(max(n, 1))
                for idx, c in coeffs.items():
                    vec[idx] = c
                const -= rhs
                if op == "<=":
                    vec, const = -vec, -const
                name = " ".join(text[start:self.tk.pos].split())
                return pred(vec, const, name=name)
            else:
                self.tk.error("expected '>=', '<=', '+', or '-' in predicate")

    def _state_var(self) -> int:
        self.tk.eat("x")
        start = self.tk.pos
        idx = self.tk.read_int()
        if idx < 1:
            self.tk.error("state variables are x1, x2, ...", pos=start)
        if self.n_states is not None and idx > self.n_states:
            self.tk.error("x%d exceeds the state dimension %d" % (idx, self.n_states),
                          pos=start)
        self.max_var = max(self.max_var, idx)
        return idx - 1


def _attach_gate(phi: StlFormula, name: str, polarity: bool, tk: _Tokenizer) -> StlFormula:
    """Distribute a gate over every predicate inside the gated subformula."""
    if phi.kind == PRED:
        p = phi.pred
        if p.gate is not None:
            tk.error("predicate %r is already gated" % p.name)
        return StlFormula(PRED, pred=Predicate(p.coeffs, p.const, name=p.name,
                                               gate=name, gate_polarity=polarity))
    if phi.kind == TRUE:
        return phi
    return StlFormula(phi.kind, tuple(_attach_gate(c, name, polarity, tk)
                                      for c in phi.children),
                      a=phi.a, b=phi.b)


def parse(text: str, n_states: int | None = None) -> StlFormula:
    """Parse the concrete syntax; n_states (if given) bounds the x-indices."""
    return _Parser(text, n_states).parse()


def format_formula(phi: StlFormula) -> str:
    """Pretty-print so that parse(format_formula(phi)) round-trips structurally."""
    k = phi.kind
    if k == TRUE:
        return "true"
    if k == PRED:
        p = phi.pred
        terms = []
        for i, c in enumerate(p.coeffs):
            if c == 0.0:
                continue
            terms.append("%r*x%d" % (c, i + 1))
        body = " + ".join(terms) if terms else "0"
        core = "%s >= %r" % (body, -p.const)
        if p.gate is not None:
            mark = "" if p.gate_polarity else "!"
            return "gate(%s%s) -> (%s)" % (mark, p.gate, core)
        return "(%s)" % core
    if k == NOT:
        return "!(%s)" % format_formula(phi.children[0])
    if k == AND:
        return "(%s & %s)" % tuple(format_formula(c) for c in phi.children)
    if k == OR:
        return "(%s | %s)" % tuple(format_formula(c) for c in phi.children)
    if k == UNTIL:
        return "((%s) U[%d,%d] (%s))" % (format_formula(phi.children[0]), phi.a, phi.b,
                                         format_formula(phi.children[1]))
    op = "F" if k == EVENTUALLY else "G"
    return "%s[%d,%d] (%s)" % (op, phi.a, phi.b, format_formula(phi.children[0]))


def structurally_equal(a: StlFormula, b: StlFormula) -> bool:
    if a.kind != b.kind or a.a != b.a or a.b != b.b:
        return False
    if a.kind == PRED:
        pa, pb = a.pred, b.pred
        return (np.allclose(pa.coeffs, pb.coeffs) and np.isclose(pa.const, pb.const)
                and pa.gate == pb.gate and pa.gate_polarity == pb.gate_polarity)
    return len(a.children) == len(b.children) and all(
        structurally_equal(x, y) for x, y in zip(a.children, b.children))
