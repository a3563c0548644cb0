import numpy as np
import pytest

from shmpc import stl
from shmpc.stl import (RunTooShortError, SENTINEL, StlSyntaxError, format_formula,
                       horizon, parse, robustness, satisfies, structurally_equal)


def random_formula(rng, n_states=2, depth=3, max_bound=4, allow_gate=False):
    kind = rng.integers(0, 8 if depth > 0 else 2)
    if depth == 0 or kind < 2:
        coeffs = rng.uniform(-1, 1, n_states)
        const = rng.uniform(-1, 1)
        gate = None
        if allow_gate and rng.random() < 0.3:
            gate = "sig"
        return stl.pred(coeffs, const, gate=gate,
                        gate_polarity=bool(rng.random() < 0.8))
    if kind == 2:
        return stl.not_(random_formula(rng, n_states, depth - 1, max_bound, allow_gate))
    if kind == 3:
        return stl.and_(random_formula(rng, n_states, depth - 1, max_bound, allow_gate),
                        random_formula(rng, n_states, depth - 1, max_bound, allow_gate))
    if kind == 4:
        return stl.or_(random_formula(rng, n_states, depth - 1, max_bound, allow_gate),
                       random_formula(rng, n_states, depth - 1, max_bound, allow_gate))
    a = int(rng.integers(0, max_bound))
    b = int(rng.integers(a, max_bound + 1))
    if kind == 5:
        return stl.eventually(random_formula(rng, n_states, depth - 1, max_bound,
                                             allow_gate), a, b)
    if kind == 6:
        return stl.always(random_formula(rng, n_states, depth - 1, max_bound,
                                         allow_gate), a, b)
    return stl.until(random_formula(rng, n_states, depth - 1, max_bound, allow_gate),
                     random_formula(rng, n_states, depth - 1, max_bound, allow_gate),
                     a, b)


class TestParser:
    def test_nested_temporal(self):
        phi = parse("G[0,4] F[3,6] (x1 >= 0)")
        assert phi.kind == stl.ALWAYS and (phi.a, phi.b) == (0, 4)
        inner = phi.children[0]
        assert inner.kind == stl.EVENTUALLY and (inner.a, inner.b) == (3, 6)
        assert inner.children[0].kind == stl.PRED

    def test_until(self):
        phi = parse("(x1 >= 1) U[2,5] (x2 >= 0)")
        assert phi.kind == stl.UNTIL and (phi.a, phi.b) == (2, 5)

    def test_reversed_bounds_rejected(self):
        with pytest.raises(StlSyntaxError):
            parse("G[4,0] (x1 >= 0)")

    def test_non_integer_bounds_rejected(self):
        with pytest.raises(StlSyntaxError):
            parse("G[0,2.5] (x1 >= 0)")

    def test_syntax_error_carries_position(self):
        with pytest.raises(StlSyntaxError) as err:
            parse("G[0,2] (x1 >>= 0)")
        assert err.value.line == 1 and err.value.col > 1

    def test_affine_combination(self):
        phi = parse("2*x1 - x2 >= 0.5")
        assert np.allclose(phi.pred.coeffs, [2.0, -1.0])
        assert phi.pred.const == pytest.approx(-0.5)

    def test_leq_flips(self):
        phi = parse("x1 <= 3")
        # alpha(x) = 3 - x1
        assert np.allclose(phi.pred.coeffs, [-1.0])
        assert phi.pred.const == pytest.approx(3.0)

    def test_gate_distributes(self):
        phi = parse("gate(occ) -> (G[0,2] (x1 >= 70))")
        assert phi.kind == stl.ALWAYS
        assert phi.children[0].pred.gate == "occ"

    def test_gate_negative_polarity(self):
        phi = parse("gate(!occ) -> (x1 >= 0)")
        assert phi.pred.gate == "occ" and phi.pred.gate_polarity is False

    def test_boolean_operators(self):
        phi = parse("!(x1 >= 0) & (x2 >= 1) | true")
        assert phi.kind == stl.OR

    def test_state_dimension_bound(self):
        with pytest.raises(StlSyntaxError):
            parse("x3 >= 0", n_states=2)

    def test_round_trip_random(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            phi = random_formula(rng, allow_gate=True)
            again = parse(format_formula(phi))
            assert structurally_equal(phi, again)


class TestHorizon:
    def test_paper_nesting(self):
        assert horizon(parse("G[0,4] F[3,6] (x1 >= 0)")) == 10

    def test_predicate_is_zero(self):
        assert horizon(parse("x1 >= 0")) == 0
        assert horizon(parse("true")) == 0

    def test_conjunction_takes_max(self):
        assert horizon(parse("(F[0,3] (x1 >= 0)) & (G[0,5] (x2 >= 0))")) == 5

    def test_until_adds_upper_bound(self):
        assert horizon(parse("(x1 >= 0) U[2,5] (F[0,3] (x2 >= 0))")) == 8

    def test_prefix_sufficiency_randomized(self):
        # changing the run strictly after t + horizon never flips satisfaction
        rng = np.random.default_rng(1)
        for _ in range(50):
            phi = random_formula(rng)
            h = horizon(phi)
            T = h + int(rng.integers(2, 6))
            x = rng.uniform(-1, 1, (T + 1, 2))
            base = satisfies(x, 0, phi)
            mutated = x.copy()
            mutated[h + 1:] = rng.uniform(-1, 1, (T - h, 2))
            assert satisfies(mutated, 0, phi) == base


class TestBooleanSemantics:
    def test_true_always_holds(self):
        x = np.zeros((1, 1))
        assert satisfies(x, 0, stl.true_())

    def test_always_finds_violation(self):
        x = np.array([[1.0], [-1.0], [2.0]])
        assert not satisfies(x, 0, parse("G[0,2] (x1 >= 0)"))

    def test_eventually(self):
        x = np.array([[-2.0], [5.0]])
        assert satisfies(x, 0, parse("F[0,1] (x1 >= 0)"))

    def test_run_too_short(self):
        x = np.zeros((3, 1))
        with pytest.raises(RunTooShortError) as err:
            satisfies(x, 0, parse("G[0,4] (x1 >= 0)"))
        assert err.value.needed == 5

    def test_until_matches_brute_force(self):
        rng = np.random.default_rng(2)
        phi = parse("(x1 >= 0) U[1,3] (x2 >= 0.2)")
        for _ in range(300):
            x = rng.uniform(-1, 1, (6, 2))
            expected = any(
                x[i, 1] >= 0.2 and all(x[j, 0] >= 0 for j in range(i))
                for i in range(1, 4))
            assert satisfies(x, 0, phi) == expected


class TestRobustness:
    def test_always_is_min(self):
        x = np.array([[1.0], [3.0], [2.0]])
        assert robustness(x, 0, parse("G[0,2] (x1 >= 0)")) == pytest.approx(1.0)

    def test_eventually_is_max(self):
        x = np.array([[-2.0], [5.0]])
        assert robustness(x, 0, parse("F[0,1] (x1 >= 0)")) == pytest.approx(5.0)

    def test_top_is_sentinel(self):
        assert robustness(np.zeros((1, 1)), 0, stl.true_()) == SENTINEL

    def test_until_matches_brute_force(self):
        rng = np.random.default_rng(3)
        phi = parse("(x1 >= 0) U[1,3] (x2 >= 0.2)")
        for _ in range(300):
            x = rng.uniform(-1, 1, (6, 2))
            best = -np.inf
            for i in range(1, 4):
                v = x[i, 1] - 0.2
                for j in range(i):
                    v = min(v, x[j, 0])
                best = max(best, v)
            assert robustness(x, 0, phi) == pytest.approx(best)

    def test_negation_duality(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            phi = random_formula(rng)
            x = rng.uniform(-1, 1, (horizon(phi) + 1, 2))
            assert robustness(x, 0, stl.not_(phi)) == -robustness(x, 0, phi)

    def test_sign_soundness(self):
        # rho > 0 implies satisfaction, rho < 0 implies violation
        rng = np.random.default_rng(5)
        checked = 0
        while checked < 10_000:
            phi = random_formula(rng, depth=int(rng.integers(1, 5)))
            T = horizon(phi) + int(rng.integers(1, 4))
            if T + 1 > 20:
                continue
            x = rng.uniform(-1, 1, (T + 1, 2))
            rho = robustness(x, 0, phi)
            if abs(rho) < 1e-9:
                continue  # ties are excluded
            sat = satisfies(x, 0, phi)
            assert (rho > 0) == sat, format_formula(phi)
            checked += 1

    def test_derived_operator_coherence(self):
        # F phi == true U phi and G phi == !F!phi under both semantics
        rng = np.random.default_rng(6)
        for _ in range(200):
            child = random_formula(rng, depth=1)
            a = int(rng.integers(0, 3))
            b = int(rng.integers(a, 4))
            f_direct = stl.eventually(child, a, b)
            f_until = stl.until(stl.true_(), child, a, b)
            g_direct = stl.always(child, a, b)
            g_dual = stl.not_(stl.eventually(stl.not_(child), a, b))
            T = max(horizon(f_direct), horizon(g_direct)) + 1
            x = rng.uniform(-1, 1, (T + 1, 2))
            assert satisfies(x, 0, f_direct) == satisfies(x, 0, f_until)
            assert robustness(x, 0, f_direct) == pytest.approx(
                robustness(x, 0, f_until), abs=1e-12)
            assert satisfies(x, 0, g_direct) == satisfies(x, 0, g_dual)
            assert robustness(x, 0, g_direct) == pytest.approx(
                robustness(x, 0, g_dual), abs=1e-12)


class TestGates:
    def test_inactive_gate_discharges(self):
        phi = parse("gate(occ) -> (x1 >= 70)")
        signals = {"occ": np.array([-1.0, 1.0])}
        x = np.array([[60.0], [70.5]])
        assert satisfies(x, 0, phi, signals)
        assert robustness(x, 0, phi, signals) == SENTINEL
        assert satisfies(x, 1, phi, signals)
        assert robustness(x, 1, phi, signals) == pytest.approx(0.5)

    def test_occupancy_style_window(self):
        phi = parse("G[0,3] (gate(occ) -> (x1 >= 70))")
        signals = {"occ": np.array([-1.0, 1.0, 1.0, -1.0])}
        x = np.array([[0.0], [71.0], [72.0], [0.0]])
        assert robustness(x, 0, phi, signals) == pytest.approx(1.0)

    def test_missing_signal_raises(self):
        phi = parse("gate(occ) -> (x1 >= 0)")
        with pytest.raises(stl.GateError):
            robustness(np.zeros((1, 1)), 0, phi, {})

    def test_short_signal_raises(self):
        phi = parse("G[0,3] (gate(occ) -> (x1 >= 0))")
        with pytest.raises(stl.GateError):
            robustness(np.zeros((5, 1)), 0, phi, {"occ": np.array([1.0, 1.0])})
