"""Upper bounds on the expected value of max-min / min-max robustness objectives.

Two routes, by disturbance model:

* bounded support: replace each atom's noise contribution with an endpoint of
  its first-moment interval (interval arithmetic over the per-component
  moment intervals), leaving a canonical form over the inputs alone;
* Gaussian: even-order moment bounds via the p-norm inequality, with the
  p-th moment of a normal variable in closed form through Hermite
  polynomials.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .canonical import AffineExpr, MaxMinForm, MinMaxForm
from .disturbance import DisturbanceModel, UnsupportedModelError
from .intervals import Interval, interval_affine, interval_sum


def hermite(p: int, z: complex) -> complex:
    """Physicists' Hermite polynomial H_p(z) by its explicit sum."""
    if p < 0 or p != int(p):
        raise ValueError("order must be a nonnegative integer")
    if p % 2 != 0:
        raise ValueError("only even orders are used here, got p=%d" % p)
    z = complex(z)
    total = 0j
    for l in range(p // 2 + 1):
        total += ((-1) ** l) * z ** (p - 2 * l) / (2 ** l * factorial(l) * factorial(p - 2 * l))
    return factorial(p) * total


def gaussian_moment(mu: float, sigma: float, p: int) -> float:
    """E[Z^p] for Z ~ N(mu, sigma^2) and even p, via sigma^p i^{-p} H_p(i mu / sigma)."""
    if p % 2 != 0 or p < 0:
        raise ValueError("the closed form needs an even nonnegative p, got %d" % p)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0:
        return float(mu) ** p
    val = sigma ** p * (1j ** (-p)) * hermite(p, 1j * mu / sigma)
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise ArithmeticError("imaginary residue %g in an even-order moment" % val.imag)
    return float(val.real)


def _moment_coeffs(p: int) -> list:
    """Coefficients c_l with E[Z^p] = sum_l c_l mu^(p-2l) sigma^(2l)."""
    return [factorial(p) / (2 ** l * factorial(l) * factorial(p - 2 * l))
            for l in range(p // 2 + 1)]


def gaussian_moment_vec(mu: np.ndarray, sigma: np.ndarray, p: int) -> np.ndarray:
    """Vectorized E[Z^p]; mu and sigma broadcast together."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    out = np.zeros(np.broadcast(mu, sigma).shape)
    for l, c in enumerate(_moment_coeffs(p)):
        out = out + c * mu ** (p - 2 * l) * sigma ** (2 * l)
    return out


# --- bounded-support route ---------------------------------------------------


def atom_moment_interval(atom: AffineExpr, model: DisturbanceModel) -> Interval:
    """First-moment interval of the atom's disturbance part (constant excluded)."""
    if model.kind != "bounded":
        raise UnsupportedModelError("moment intervals need the bounded model")
    return interval_sum(interval_affine(c, model.moment(k)[j])
                        for (k, j), c in atom.dist_coeffs)


def atom_support_interval(atom: AffineExpr, model: DisturbanceModel) -> Interval:
    if model.kind != "bounded":
        raise UnsupportedModelError("support intervals need the bounded model")
    return interval_sum(interval_affine(c, model.support(k)[j])
                        for (k, j), c in atom.dist_coeffs)


def _substitute_moment(form_groups, model: DisturbanceModel, upper: bool):
    groups = []
    for g in form_groups:
        atoms = []
        for a in g:
            iv = atom_moment_interval(a, model)
            atoms.append(a.drop_disturbance(a.constant + (iv.hi if upper else iv.lo)))
        groups.append(tuple(atoms))
    return tuple(groups)


def bounded_expectation_bound(form: MaxMinForm, model: DisturbanceModel) -> MaxMinForm:
    """Moment-interval substitution on E[max min Y]: each atom's noise part
    replaced by the upper end of its first-moment interval, leaving a max-min
    form over inputs only.

    For a single group this is a true upper bound (expectation of a min never
    exceeds the min of the expectations).  With several groups the outer max
    can exceed the max of the group means, so the substituted value is an
    estimate rather than a certificate; ``bounded_conservative_bound`` trades
    tightness for a guarantee in that case.
    """
    return MaxMinForm(_substitute_moment(form.groups, model, upper=True))


def bounded_expectation_lower_bound(form: MaxMinForm, model: DisturbanceModel) -> MaxMinForm:
    """Lower-endpoint twin of bounded_expectation_bound.

    Maximizing this pessimistic form over the inputs is the same computation
    as minimizing the moment-interval upper bound of the negated (min-max)
    objective, which is what the controller does with the robustness term.
    """
    return MaxMinForm(_substitute_moment(form.groups, model, upper=False))


def bounded_minmax_expectation_bound(form: MinMaxForm, model: DisturbanceModel) -> MinMaxForm:
    """The same moment-interval substitution applied to a min-max form."""
    return MinMaxForm(_substitute_moment(form.groups, model, upper=True))


def _substitute_conservative(group, model: DisturbanceModel, inner_min: bool):
    """One group with a certified expectation bound: moment endpoints are valid
    through an expectation only on the concave (min) side, so a max over
    several atoms falls back to support endpoints."""
    atoms = []
    use_moment = inner_min or len(group) == 1
    for a in group:
        if use_moment:
            hi = atom_moment_interval(a, model).hi
        else:
            hi = atom_support_interval(a, model).hi
        atoms.append(a.drop_disturbance(a.constant + hi))
    return tuple(atoms)


def bounded_conservative_bound(form, model: DisturbanceModel):
    """Certified upper bound on E[form] for bounded-support noise.

    min-max forms use moment endpoints per atom and Jensen across the outer
    min; max-min forms keep moment endpoints only while the outer max has a
    single group, falling back to support endpoints otherwise (the pointwise
    bound), since E[max] may exceed the max of means.
    """
    if isinstance(form, MaxMinForm):
        if len(form.groups) == 1:
            return MaxMinForm((_substitute_conservative(form.groups[0], model,
                                                        inner_min=True),))
        groups = []
        for g in form.groups:
            atoms = [a.drop_disturbance(a.constant + atom_support_interval(a, model).hi)
                     for a in g]
            groups.append(tuple(atoms))
        return MaxMinForm(tuple(groups))
    if isinstance(form, MinMaxForm):
        return MinMaxForm(tuple(_substitute_conservative(g, model, inner_min=False)
                                for g in form.groups))
    raise TypeError("expected a canonical form, got %r" % type(form).__name__)


# --- Gaussian route ----------------------------------------------------------


@dataclass(frozen=True)
class GaussianAtomStats:
    """Mean (affine in the inputs) and standard deviation of one atom."""

    mean: AffineExpr
    sigma: float


def gaussian_atom_stats(atom: AffineExpr, model: DisturbanceModel) -> GaussianAtomStats:
    if model.kind != "gaussian":
        raise UnsupportedModelError("atom statistics need the gaussian model")
    const = atom.constant
    by_time: dict = {}
    for (k, j), c in atom.dist_coeffs:
        const += c * float(model.mean(k)[j])
        by_time.setdefault(k, []).append((j, c))
    var = 0.0
    for k, terms in by_time.items():
        lam = np.zeros(model.dim)
        for j, c in terms:
            lam[j] = c
        var += float(lam @ model.cov(k) @ lam)
    var = max(var, 0.0)
    return GaussianAtomStats(mean=AffineExpr(const, atom.input_coeffs, ()),
                             sigma=float(np.sqrt(var)))


@dataclass(frozen=True)
class GaussianFormBound:
    """A p-norm moment bound, kept symbolic in the inputs.

    ``groups`` holds per-group atom statistics.  For a min-max source form the
    bound is min over groups of (sum_j E[Y_ij^p])^(1/p); a max-min source form
    collapses to a single pseudo-group containing every atom.
    """

    groups: tuple  # tuple of tuples of GaussianAtomStats
    p_orders: tuple = (2, 4, 8)

    def group_value(self, gi: int, u, p: int) -> float:
        u = None if u is None else np.atleast_2d(np.asarray(u, dtype=float))
        total = 0.0
        for st in self.groups[gi]:
            total += gaussian_moment(st.mean.evaluate(u, None), st.sigma, p)
        return total ** (1.0 / p)

    def value(self, u, p: int | None = None) -> float:
        """Bound at concrete inputs; with p=None the tightest configured order wins."""
        orders = self.p_orders if p is None else (p,)
        return min(min(self.group_value(gi, u, q) for q in orders)
                   for gi in range(len(self.groups)))


def gaussian_maxmin_bound(form: MaxMinForm, model: DisturbanceModel,
                          p_orders=(2, 4, 8)) -> GaussianFormBound:
    """E[max min Y] <= (sum over every atom of E[Y^p])^(1/p)."""
    for p in p_orders:
        if p % 2 != 0 or p <= 0:
            raise ValueError("p orders must be positive even integers")
    atoms = tuple(gaussian_atom_stats(a, model) for g in form.groups for a in g)
    return GaussianFormBound(groups=(atoms,), p_orders=tuple(p_orders))


def gaussian_minmax_bound(form: MinMaxForm, model: DisturbanceModel,
                          p_orders=(2, 4, 8)) -> GaussianFormBound:
    """E[min max Y] <= min over groups of (sum_j E[Y_ij^p])^(1/p)."""
    for p in p_orders:
        if p % 2 != 0 or p <= 0:
            raise ValueError("p orders must be positive even integers")
    groups = tuple(tuple(gaussian_atom_stats(a, model) for a in g) for g in form.groups)
    return GaussianFormBound(groups=groups, p_orders=tuple(p_orders))
