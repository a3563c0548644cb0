import math

import numpy as np
import pytest
from scipy import integrate

from shmpc.canonical import AffineExpr, MaxMinForm, MinMaxForm
from shmpc.disturbance import DisturbanceModel
from shmpc.expectation import (bounded_conservative_bound, bounded_expectation_bound,
                               bounded_expectation_lower_bound, gaussian_maxmin_bound,
                               gaussian_minmax_bound, gaussian_moment,
                               gaussian_moment_vec, hermite)
from tests.formgen import (mc_form_values, random_bounded_model, random_form,
                           random_gaussian_model, sample_noise)


class TestHermite:
    def test_order_zero(self):
        assert hermite(0, 0.7) == 1

    def test_order_two(self):
        for z in (-1.5, 0.0, 2.0):
            assert hermite(2, z) == pytest.approx(z * z - 1.0)

    def test_order_four(self):
        for z in (-2.0, 0.3, 1.7):
            assert hermite(4, z) == pytest.approx(z ** 4 - 6 * z ** 2 + 3)

    def test_against_recurrence(self):
        # H_{p+1}(z) = z H_p(z) - p H_{p-1}(z), stepping two orders at a time
        def by_recurrence(p, z):
            h0, h1 = 1.0, z
            for k in range(1, p + 1):
                h0, h1 = h1, z * h1 - k * h0
            return h0 if p >= 0 else 1.0
        for p in (2, 4, 6, 8):
            for z in (-1.2, 0.4, 2.5):
                assert complex(hermite(p, z)).real == pytest.approx(
                    by_recurrence(p, z), rel=1e-12)

    def test_odd_order_rejected(self):
        with pytest.raises(ValueError):
            hermite(3, 1.0)


class TestGaussianMoment:
    def test_unit_variance_second(self):
        assert gaussian_moment(0.0, 1.0, 2) == pytest.approx(1.0)

    def test_second_moment_identity(self):
        assert gaussian_moment(1.0, 2.0, 2) == pytest.approx(5.0)
        rng = np.random.default_rng(0)
        for _ in range(50):
            mu, sd = rng.uniform(-3, 3), rng.uniform(0.1, 3)
            assert gaussian_moment(mu, sd, 2) == pytest.approx(mu * mu + sd * sd,
                                                               abs=1e-10)

    def test_fourth_moment_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            mu, sd = rng.uniform(-3, 3), rng.uniform(0.1, 3)
            expect = 3 * sd ** 4 + 6 * sd ** 2 * mu ** 2 + mu ** 4
            assert gaussian_moment(mu, sd, 4) == pytest.approx(expect, abs=1e-10)

    def test_central_double_factorial(self):
        for p, dfact in ((2, 1), (4, 3), (6, 15), (8, 105)):
            for sd in (0.5, 1.0, 2.0):
                assert gaussian_moment(0.0, sd, p) == pytest.approx(
                    dfact * sd ** p, rel=1e-12)

    def test_against_quadrature(self):
        # adaptive quadrature of z^p N(z; mu, sd^2) is the independent oracle
        for p in (2, 4, 6, 8):
            for mu in (-2.0, -0.5, 0.0, 0.5, 2.0):
                for sd in (0.5, 1.0, 2.0):
                    def f(z):
                        return z ** p * math.exp(-0.5 * ((z - mu) / sd) ** 2) \
                            / (sd * math.sqrt(2 * math.pi))
                    ref, _ = integrate.quad(f, mu - 12 * sd, mu + 12 * sd,
                                            limit=200)
                    assert gaussian_moment(mu, sd, p) == pytest.approx(
                        ref, rel=1e-6)

    def test_zero_sigma(self):
        assert gaussian_moment(1.5, 0.0, 4) == pytest.approx(1.5 ** 4)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(2)
        mu = rng.uniform(-2, 2, 16)
        sd = rng.uniform(0.1, 2, 16)
        for p in (2, 4, 8):
            vec = gaussian_moment_vec(mu, sd, p)
            for i in range(16):
                assert vec[i] == pytest.approx(gaussian_moment(mu[i], sd[i], p),
                                               rel=1e-12)

    def test_odd_p_rejected(self):
        with pytest.raises(ValueError):
            gaussian_moment(0.0, 1.0, 3)


class TestBoundedExpectationBound:
    def test_zero_width_moment(self):
        # atom u + W with E[W] in [0, 0]: the bound atom is u + 0
        model = DisturbanceModel.bounded([-1.0], [1.0], [0.0], [0.0])
        atom = AffineExpr.make(0.0, {(0, 0): 1.0}, {(0, 0): 1.0})
        out = bounded_expectation_bound(MaxMinForm(((atom,),)), model)
        res = out.groups[0][0]
        assert res.constant == pytest.approx(0.0)
        assert not res.dist_coeffs
        assert dict(res.input_coeffs) == {(0, 0): 1.0}

    def test_sign_aware_endpoint(self):
        # atom u - 2W with E[W] in [0.1, 0.3]: upper endpoint is -2*0.1 = -0.2
        model = DisturbanceModel.bounded([-1.0], [1.0], [0.1], [0.3])
        atom = AffineExpr.make(0.0, {(0, 0): 1.0}, {(0, 0): -2.0})
        out = bounded_expectation_bound(MaxMinForm(((atom,),)), model)
        assert out.groups[0][0].constant == pytest.approx(-0.2)
        lower = bounded_expectation_lower_bound(MaxMinForm(((atom,),)), model)
        assert lower.groups[0][0].constant == pytest.approx(-0.6)

    def test_single_group_mc_conservative(self):
        # E[min_j Y_j] <= min_j (d_j + eta_j) for a single min group
        rng = np.random.default_rng(3)
        for _ in range(20):
            model = random_bounded_model(rng)
            form = random_form(rng, "maxmin", max_groups=1, max_atoms=3)
            bound = bounded_expectation_bound(form, model).evaluate(None, None)
            w = sample_noise(model, 2, 100_000, rng)
            vals = mc_form_values(form, w)
            mc = vals.mean()
            se = vals.std() / math.sqrt(len(vals))
            assert mc <= bound + 3 * se

    def test_gaussian_model_rejected(self):
        model = DisturbanceModel.gaussian(1)
        atom = AffineExpr.make(0.0, {}, {(0, 0): 1.0})
        with pytest.raises(TypeError):
            bounded_expectation_bound(MaxMinForm(((atom,),)), model)


class TestBoundedConservativeBound:
    def test_multi_group_mc_conservative(self):
        rng = np.random.default_rng(4)
        for kind in ("maxmin", "minmax"):
            for _ in range(15):
                model = random_bounded_model(rng)
                form = random_form(rng, kind)
                bound = bounded_conservative_bound(form, model).evaluate(None, None)
                w = sample_noise(model, 2, 100_000, rng)
                vals = mc_form_values(form, w)
                se = vals.std() / math.sqrt(len(vals))
                assert vals.mean() <= bound + 3 * se

    def test_embeds_as_form_over_inputs(self):
        rng = np.random.default_rng(5)
        model = random_bounded_model(rng)
        form = random_form(rng, "maxmin", with_inputs=True)
        out = bounded_conservative_bound(form, model)
        assert isinstance(out, MaxMinForm)
        for g in out.groups:
            for a in g:
                assert not a.dist_coeffs


class TestGaussianBounds:
    def test_single_atom_dominates_mean(self):
        # p=2 single atom: bound = sqrt(mu^2 + sigma^2) >= mu
        model = DisturbanceModel.gaussian(1, mean=[0.0], cov=[[1.0]])
        atom = AffineExpr.make(0.7, {}, {(0, 0): 1.0})
        bound = gaussian_maxmin_bound(MaxMinForm(((atom,),)), model, p_orders=(2,))
        val = bound.value(None, p=2)
        assert val == pytest.approx(math.sqrt(0.7 ** 2 + 1.0))
        assert val >= 0.7

    def test_degenerate_sums_equal_pnorm(self):
        model = DisturbanceModel.gaussian(1, mean=[0.2], cov=[[0.5]])
        atom = AffineExpr.make(-0.3, {}, {(0, 0): 0.8})
        for p in (2, 4, 8):
            one = gaussian_maxmin_bound(MaxMinForm(((atom,),)), model,
                                        p_orders=(p,)).value(None, p=p)
            mu = -0.3 + 0.8 * 0.2
            sd = 0.8 * math.sqrt(0.5)
            assert one == pytest.approx(gaussian_moment(mu, sd, p) ** (1.0 / p))

    def test_minmax_single_group_matches_maxmin(self):
        rng = np.random.default_rng(6)
        model = random_gaussian_model(rng)
        groups = (tuple(random_form(rng, "maxmin", 1, 3).groups[0]),)
        mm = gaussian_maxmin_bound(MaxMinForm(groups), model, p_orders=(4,))
        mn = gaussian_minmax_bound(MinMaxForm(groups), model, p_orders=(4,))
        assert mm.value(None, 4) == pytest.approx(mn.value(None, 4))

    def test_maxmin_mc_conservative(self):
        rng = np.random.default_rng(7)
        for _ in range(15):
            model = random_gaussian_model(rng)
            form = random_form(rng, "maxmin")
            bound = gaussian_maxmin_bound(form, model)
            w = sample_noise(model, 2, 100_000, rng)
            vals = mc_form_values(form, w)
            se = vals.std() / math.sqrt(len(vals))
            for p in (2, 4, 8):
                assert vals.mean() <= bound.value(None, p) + 3 * se

    def test_minmax_mc_conservative(self):
        rng = np.random.default_rng(8)
        for _ in range(15):
            model = random_gaussian_model(rng)
            form = random_form(rng, "minmax")
            bound = gaussian_minmax_bound(form, model)
            w = sample_noise(model, 2, 100_000, rng)
            vals = mc_form_values(form, w)
            se = vals.std() / math.sqrt(len(vals))
            for p in (2, 4, 8):
                assert vals.mean() <= bound.value(None, p) + 3 * se

    def test_pnorm_infnorm_ratio(self):
        # a group of near-deterministic equal atoms: the group bound stays
        # within n^(1/p) of the true expected max
        rng = np.random.default_rng(9)
        model = DisturbanceModel.gaussian(1, mean=[0.0], cov=[[1e-6]])
        for n_atoms in (2, 3, 4):
            atoms = tuple(AffineExpr.make(2.0, {}, {(0, 0): 1.0})
                          for _ in range(n_atoms))
            form = MinMaxForm((atoms,))
            bound = gaussian_minmax_bound(form, model, p_orders=(4,))
            w = sample_noise(model, 1, 20_000, rng)
            mc = mc_form_values(form, w).mean()
            val = bound.value(None, 4)
            assert mc <= val <= n_atoms ** 0.25 * mc * 1.001

    def test_choose_best_p_rule(self):
        # the reported bound is the minimum over the configured p orders
        rng = np.random.default_rng(10)
        monotone = 0
        total = 0
        for _ in range(40):
            model = random_gaussian_model(rng)
            form = random_form(rng, "minmax", max_groups=1)
            bound = gaussian_minmax_bound(form, model)
            vals = [bound.value(None, p) for p in (2, 4, 8)]
            if vals[0] >= vals[1] >= vals[2]:
                monotone += 1
            total += 1
            assert bound.value(None, None) == pytest.approx(min(vals))
        assert total == 40 and monotone >= 0

    def test_bounded_model_rejected(self):
        model = DisturbanceModel.bounded([-1.0], [1.0], [0.0], [0.0])
        atom = AffineExpr.make(0.0, {}, {(0, 0): 1.0})
        with pytest.raises(TypeError):
            gaussian_maxmin_bound(MaxMinForm(((atom,),)), model)

    def test_odd_p_rejected(self):
        model = DisturbanceModel.gaussian(1)
        atom = AffineExpr.make(0.0, {}, {(0, 0): 1.0})
        with pytest.raises(ValueError):
            gaussian_maxmin_bound(MaxMinForm(((atom,),)), model, p_orders=(3,))
