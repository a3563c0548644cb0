"""Shared generators and Monte Carlo evaluators for expectation-bound tests."""

import numpy as np

from shmpc.canonical import AffineExpr, MaxMinForm, MinMaxForm
from shmpc.disturbance import DisturbanceModel


def random_bounded_model(rng, dims=2, spread=1.5):
    """Support boxes with moment intervals guaranteed to contain the uniform mean."""
    a = rng.uniform(-spread, 0.0, dims)
    b = rng.uniform(0.1, spread, dims)
    mid = (a + b) / 2.0
    c = mid - rng.uniform(0.0, 0.5, dims) * (mid - a)
    d = mid + rng.uniform(0.0, 0.5, dims) * (b - mid)
    return DisturbanceModel.bounded(a, b, c, d, sampling="uniform")


def random_gaussian_model(rng, dims=2):
    sd = rng.uniform(0.3, 1.2, dims)
    mean = rng.uniform(-0.5, 0.5, dims)
    return DisturbanceModel.gaussian(dims, mean=mean, cov=np.diag(sd ** 2))


def random_atoms(rng, n_atoms, dims, horizon, with_inputs=False):
    atoms = []
    for _ in range(n_atoms):
        dist = {}
        for k in range(horizon):
            for j in range(dims):
                if rng.random() < 0.6:
                    dist[(k, j)] = float(rng.uniform(-1.0, 1.0))
        inputs = {}
        if with_inputs and rng.random() < 0.5:
            inputs[(0, 0)] = float(rng.uniform(-1.0, 1.0))
        atoms.append(AffineExpr.make(float(rng.uniform(-1.0, 1.0)), inputs, dist))
    return tuple(atoms)


def random_form(rng, kind, max_groups=3, max_atoms=3, dims=2, horizon=2,
                with_inputs=False):
    n_groups = int(rng.integers(1, max_groups + 1))
    groups = tuple(random_atoms(rng, int(rng.integers(1, max_atoms + 1)), dims,
                                horizon, with_inputs)
                   for _ in range(n_groups))
    return MaxMinForm(groups) if kind == "maxmin" else MinMaxForm(groups)


def sample_noise(model, horizon, n_samples, rng):
    """(n_samples, horizon, dims) draws, vectorized per kind."""
    dims = model.dim
    w = np.zeros((n_samples, horizon, dims))
    for k in range(horizon):
        if model.kind == "gaussian":
            w[:, k, :] = rng.multivariate_normal(model.mean(k), model.cov(k),
                                                 size=n_samples)
        else:
            sup = model.support(k)
            for j in range(dims):
                w[:, k, j] = rng.uniform(sup[j].lo, sup[j].hi, n_samples)
    return w


def atom_values(atom, w, u=None):
    vals = np.full(w.shape[0], atom.constant)
    for (k, j), c in atom.dist_coeffs:
        vals += c * w[:, k, j]
    for (k, j), c in atom.input_coeffs:
        vals += c * u[k, j]
    return vals


def mc_form_values(form, w, u=None):
    """Vectorized form evaluation over sampled noise paths."""
    group_vals = []
    for g in form.groups:
        stack = np.stack([atom_values(a, w, u) for a in g])
        group_vals.append(stack.min(axis=0) if isinstance(form, MaxMinForm)
                          else stack.max(axis=0))
    stacked = np.stack(group_vals)
    return stacked.max(axis=0) if isinstance(form, MaxMinForm) else stacked.min(axis=0)
