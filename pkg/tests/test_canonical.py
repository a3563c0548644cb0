import json

import numpy as np
import pytest

from shmpc import stl
from shmpc.canonical import (AffineExpr, FormContext, FormSizeError, MaxMinForm,
                             MinMaxForm, atom_of_predicate, dump_form_json,
                             evaluate_form, max_min_form, min_max_form, prune_form)
from shmpc.system import HorizonError, LinearSystem, explicit_state, simulate
from tests.test_stl import random_formula


def make_ctx(rng, n=2, m=1, N=8, t=0, signals=None, x_hist=None):
    A = rng.uniform(-0.9, 0.9, (n, n))
    B = rng.uniform(-1.0, 1.0, (n, m))
    sys = LinearSystem.create(A, B, N, [[-2.0, 2.0]] * m)
    if x_hist is None:
        x_hist = rng.uniform(-1, 1, (t + 1, n))
    return FormContext(sys=sys, t=t, x_hist=x_hist, N=N, signals=signals)


class TestAtomOfPredicate:
    def test_observed_time_folds(self):
        rng = np.random.default_rng(0)
        ctx = make_ctx(rng, t=2)
        p = stl.parse("x1 - 0.5*x2 >= 0.3").pred
        atom = atom_of_predicate(p, 1, ctx)
        assert atom.is_constant
        assert atom.constant == pytest.approx(p.alpha(ctx.x_hist[1]))

    def test_scalar_one_step(self):
        sys = LinearSystem.create([[1.0]], [[1.0]], 4, [[-1, 1]])
        ctx = FormContext(sys=sys, t=0, x_hist=np.array([[0.7]]), N=4)
        p = stl.parse("x1 >= 0").pred
        atom = atom_of_predicate(p, 1, ctx)
        assert atom.constant == pytest.approx(0.7)
        assert dict(atom.input_coeffs) == {(0, 0): 1.0}
        assert dict(atom.dist_coeffs) == {(0, 0): 1.0}

    def test_two_step_matches_explicit_state(self):
        rng = np.random.default_rng(1)
        ctx = make_ctx(rng)
        p = stl.parse("0.8*x1 + 0.3*x2 >= -0.2").pred
        atom = atom_of_predicate(p, 2, ctx)
        for _ in range(20):
            u = rng.uniform(-2, 2, (2, 1))
            w = rng.uniform(-1, 1, (2, 2))
            x2 = explicit_state(ctx.sys, 0, ctx.x_hist[0], u, w, 2)
            assert atom.evaluate(u, w) == pytest.approx(p.alpha(x2), abs=1e-10)

    def test_beyond_horizon(self):
        rng = np.random.default_rng(2)
        ctx = make_ctx(rng, N=3)
        with pytest.raises(HorizonError):
            atom_of_predicate(stl.parse("x1 >= 0").pred, 4, ctx)


class TestFormShapes:
    def test_single_predicate(self):
        rng = np.random.default_rng(3)
        ctx = make_ctx(rng)
        phi = stl.parse("x1 >= 0")
        assert max_min_form(phi, 0, ctx).group_sizes == (1,)
        assert min_max_form(phi, 0, ctx).group_sizes == (1,)

    def test_always_is_one_min_group(self):
        rng = np.random.default_rng(4)
        ctx = make_ctx(rng)
        form = max_min_form(stl.parse("G[0,2] (x1 >= 0)"), 0, ctx)
        assert form.group_sizes == (3,)

    def test_eventually_is_one_max_group(self):
        rng = np.random.default_rng(5)
        ctx = make_ctx(rng)
        form = min_max_form(stl.parse("F[0,2] (x1 >= 0)"), 0, ctx)
        assert form.group_sizes == (3,)

    def test_conjunction_group_bound(self):
        # L <= L1 * L2 for the distributed conjunction
        rng = np.random.default_rng(6)
        ctx = make_ctx(rng)
        f1 = stl.parse("F[0,2] (x1 >= 0)")
        f2 = stl.parse("F[0,3] (x2 >= 0)")
        l1 = len(max_min_form(f1, 0, ctx).groups)
        l2 = len(max_min_form(f2, 0, ctx).groups)
        both = max_min_form(stl.and_(f1, f2), 0, ctx)
        assert len(both.groups) <= l1 * l2

    def test_negation_maps_to_dual(self):
        rng = np.random.default_rng(7)
        done = 0
        while done < 30:
            phi = random_formula(rng)
            ctx = make_ctx(rng, N=stl.horizon(phi) + 1)
            try:
                mm = max_min_form(stl.not_(phi), 0, ctx)
                dual = min_max_form(phi, 0, ctx).negate()
            except FormSizeError:
                continue
            # construction deduplicates, so the built form may only be smaller
            assert len(mm.groups) <= len(dual.groups)
            assert mm.total_atoms <= dual.total_atoms
            for _ in range(10):
                u = rng.uniform(-2, 2, (ctx.N, 1))
                w = rng.uniform(-1, 1, (ctx.N, 2))
                assert mm.evaluate(u, w) == pytest.approx(dual.evaluate(u, w),
                                                          abs=1e-12)
            done += 1

    def test_atom_budget_enforced(self):
        rng = np.random.default_rng(8)
        ctx = make_ctx(rng, N=8)
        ctx.atom_budget = 10
        phi = stl.parse("(F[0,3] (x1 >= 0)) & (F[0,3] (x2 >= 0)) & (F[0,3] (x1 <= 0))")
        with pytest.raises(FormSizeError):
            max_min_form(phi, 0, ctx)


class TestOracleEquivalence:
    def test_forms_match_robustness(self):
        # the module's central property: for sampled inputs and noise, both
        # canonical forms reproduce the recursive robustness exactly.
        # Formulas whose form exceeds the documented atom budget are resampled
        # (the builder is specified to fail loudly on those, tested elsewhere).
        rng = np.random.default_rng(9)
        worst = 0.0
        done = 0
        while done < 100:
            phi = random_formula(rng, depth=3, max_bound=4)
            N = stl.horizon(phi)
            ctx = make_ctx(rng, N=max(N, 1))
            try:
                mm = max_min_form(phi, 0, ctx)
                mn = min_max_form(phi, 0, ctx)
            except FormSizeError:
                continue
            for _ in range(50):
                u = rng.uniform(-2, 2, (ctx.N, 1))
                w = rng.uniform(-1, 1, (ctx.N, 2))
                states = simulate(ctx.sys, ctx.x_hist[0], u, w)
                rho = stl.robustness(states, 0, phi)
                assert abs(mm.evaluate(u, w) - rho) <= 1e-9
                assert abs(mn.evaluate(u, w) - rho) <= 1e-9
                worst = max(worst, abs(mm.evaluate(u, w) - rho))
            done += 1
        assert worst <= 1e-9

    def test_observed_prefix_forms(self):
        # at t > 0 the forms condition on the observed prefix
        rng = np.random.default_rng(10)
        for _ in range(20):
            phi = random_formula(rng, depth=2, max_bound=3)
            N = max(stl.horizon(phi), 1)
            t = int(rng.integers(1, N + 1))
            n = 2
            A = rng.uniform(-0.9, 0.9, (n, n))
            B = rng.uniform(-1, 1, (n, 1))
            sys = LinearSystem.create(A, B, N, [[-2, 2]])
            u = rng.uniform(-2, 2, (N, 1))
            w = rng.uniform(-1, 1, (N, n))
            states = simulate(sys, rng.uniform(-1, 1, n), u, w)
            ctx = FormContext(sys=sys, t=t, x_hist=states[:t + 1], N=N)
            mm = max_min_form(phi, 0, ctx)
            rho = stl.robustness(states, 0, phi)
            assert mm.evaluate(u, w) == pytest.approx(rho, abs=1e-9)

    def test_gated_forms(self):
        rng = np.random.default_rng(11)
        signals = {"sig": np.array([1.0, -1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0])}
        for _ in range(30):
            phi = random_formula(rng, depth=2, max_bound=3, allow_gate=True)
            N = max(stl.horizon(phi), 1)
            ctx = make_ctx(rng, N=N, signals=signals)
            mm = max_min_form(phi, 0, ctx)
            u = rng.uniform(-2, 2, (N, 1))
            w = rng.uniform(-1, 1, (N, 2))
            states = simulate(ctx.sys, ctx.x_hist[0], u, w)
            rho = stl.robustness(states, 0, phi, signals)
            got = mm.evaluate(u, w)
            if abs(rho) >= 1e17:
                assert abs(got) >= 1e17 and np.sign(got) == np.sign(rho)
            else:
                assert got == pytest.approx(rho, abs=1e-9)

    def test_missing_assignment_rejected(self):
        rng = np.random.default_rng(12)
        ctx = make_ctx(rng)
        form = max_min_form(stl.parse("G[0,2] (x1 >= 0)"), 0, ctx)
        with pytest.raises(ValueError):
            evaluate_form(form, np.zeros((1, 1)), np.zeros((3, 2)))
        with pytest.raises(ValueError):
            evaluate_form(form, None, np.zeros((3, 2)))


class TestPruneForm:
    def test_uniform_domination(self):
        # group {x + 1, x + 2} under min collapses to {x + 1}
        a1 = AffineExpr.make(1.0, {(0, 0): 1.0})
        a2 = AffineExpr.make(2.0, {(0, 0): 1.0})
        form = MaxMinForm(((a1, a2),))
        pruned = prune_form(form)
        assert pruned.group_sizes == (1,)
        assert pruned.groups[0][0].constant == 1.0

    def test_max_group_keeps_larger(self):
        a1 = AffineExpr.make(1.0, {(0, 0): 1.0})
        a2 = AffineExpr.make(2.0, {(0, 0): 1.0})
        pruned = prune_form(MinMaxForm(((a1, a2),)))
        assert pruned.groups[0][0].constant == 2.0

    def test_no_domination_unchanged(self):
        a1 = AffineExpr.make(1.0, {(0, 0): 1.0})
        a2 = AffineExpr.make(0.0, {(0, 0): -1.0})
        form = MaxMinForm(((a1, a2),))
        assert prune_form(form) is not None
        assert prune_form(form).group_sizes == (2,)

    def test_budget_refusal(self):
        a1 = AffineExpr.make(1.0, {(0, 0): 1.0})
        a2 = AffineExpr.make(2.0, {(0, 0): 1.0})
        form = MaxMinForm(((a1, a2),))
        assert prune_form(form, budget=5) is form

    def test_pruning_preserves_value(self):
        rng = np.random.default_rng(13)
        done = 0
        while done < 20:
            phi = random_formula(rng, depth=3, max_bound=3)
            N = max(stl.horizon(phi), 1)
            ctx = make_ctx(rng, N=N)
            try:
                form = max_min_form(phi, 0, ctx)
            except FormSizeError:
                continue
            pruned = prune_form(form)
            for _ in range(50):
                u = rng.uniform(-2, 2, (N, 1))
                w = rng.uniform(-1, 1, (N, 2))
                assert pruned.evaluate(u, w) == pytest.approx(
                    form.evaluate(u, w), abs=1e-12)
            done += 1


class TestDebugDump:
    def test_json_round_trippable(self):
        rng = np.random.default_rng(14)
        ctx = make_ctx(rng)
        form = max_min_form(stl.parse("G[0,2] (x1 >= 0)"), 0, ctx)
        data = json.loads(dump_form_json(form))
        assert data["kind"] == "max-min"
        assert len(data["groups"]) == 1 and len(data["groups"][0]) == 3
