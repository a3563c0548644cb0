"""Disturbance models: bounded-support with moment intervals, and Gaussian.

The bounded model only assumes per-component support intervals [a, b] and
first-moment intervals [c, d] with a <= c <= d <= b; a sampling distribution
is attached purely for simulation.  The Gaussian model carries a (possibly
time-varying) mean and covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .intervals import Interval

SAMPLING_KINDS = ("uniform", "truncated-normal", "beta")


class UnsupportedModelError(TypeError):
    """An operation was asked to run on the wrong disturbance model kind."""


def _as_table(arr, dim: int, name: str) -> np.ndarray:
    """Accept a per-component vector or a (T, dim) per-time table."""
    a = np.asarray(arr, dtype=float)
    if a.ndim == 1:
        if a.shape[0] != dim:
            raise ValueError("%s must have %d components, got %d" % (name, dim, a.shape[0]))
        return a[None, :]
    if a.ndim == 2 and a.shape[1] == dim:
        return a
    raise ValueError("%s must be (%d,) or (T, %d), got shape %s" % (name, dim, dim, a.shape))


@dataclass
class DisturbanceModel:
    """Either bounded-support-with-moments or Gaussian noise on every state component.

    Per-time tables hold one row per time step; a single row is broadcast to
    all times.  ``sampling`` picks the simulation-only draw for the bounded
    kind.
    """

    kind: str
    dim: int
    # bounded kind
    support_lo: np.ndarray | None = field(default=None, repr=False)
    support_hi: np.ndarray | None = field(default=None, repr=False)
    moment_lo: np.ndarray | None = field(default=None, repr=False)
    moment_hi: np.ndarray | None = field(default=None, repr=False)
    sampling: str = "uniform"
    beta_params: tuple = (2.0, 2.0)
    # gaussian kind
    mean_table: np.ndarray | None = field(default=None, repr=False)
    cov_table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == "bounded":
            for name in ("support_lo", "support_hi", "moment_lo", "moment_hi"):
                if getattr(self, name) is None:
                    raise ValueError("bounded model requires %s" % name)
            self.support_lo = _as_table(self.support_lo, self.dim, "support_lo")
            self.support_hi = _as_table(self.support_hi, self.dim, "support_hi")
            self.moment_lo = _as_table(self.moment_lo, self.dim, "moment_lo")
            self.moment_hi = _as_table(self.moment_hi, self.dim, "moment_hi")
            rows = {a.shape[0] for a in (self.support_lo, self.support_hi,
                                         self.moment_lo, self.moment_hi) if a.shape[0] > 1}
            if len(rows) > 1:
                raise ValueError("bounded tables disagree on the number of time rows")
            T = max(a.shape[0] for a in (self.support_lo, self.support_hi,
                                         self.moment_lo, self.moment_hi))
            for t in range(T):
                a, b = self._row(self.support_lo, t), self._row(self.support_hi, t)
                c, d = self._row(self.moment_lo, t), self._row(self.moment_hi, t)
                ok = (a <= c) & (c <= d) & (d <= b)
                if not np.all(ok):
                    k = int(np.argmin(ok))
                    raise ValueError(
                        "moment interval must sit inside the support: component %d at t=%d "
                        "has a=%g c=%g d=%g b=%g" % (k, t, a[k], c[k], d[k], b[k]))
            if self.sampling not in SAMPLING_KINDS:
                raise ValueError("sampling must be one of %s" % (SAMPLING_KINDS,))
        elif self.kind == "gaussian":
            if self.mean_table is None:
                self.mean_table = np.zeros((1, self.dim))
            self.mean_table = _as_table(self.mean_table, self.dim, "mean")
            cov = np.asarray(self.cov_table, dtype=float)
            if cov.ndim == 2:
                cov = cov[None, :, :]
            if cov.ndim != 3 or cov.shape[1:] != (self.dim, self.dim):
                raise ValueError("cov must be (dim, dim) or (T, dim, dim)")
            for t in range(cov.shape[0]):
                if not np.allclose(cov[t], cov[t].T, atol=1e-12):
                    raise ValueError("covariance at t=%d is not symmetric" % t)
                eigs = np.linalg.eigvalsh(cov[t])
                if eigs.min() < -1e-10:
                    raise ValueError("covariance at t=%d is not positive semidefinite "
                                     "(min eigenvalue %g)" % (t, eigs.min()))
            self.cov_table = cov
        else:
            raise ValueError("unknown disturbance kind %r" % self.kind)

    @staticmethod
    def _row(table: np.ndarray, t: int) -> np.ndarray:
        return table[t] if table.shape[0] > 1 else table[0]

    # --- bounded accessors -------------------------------------------------

    def support(self, t: int) -> list:
        if self.kind != "bounded":
            raise UnsupportedModelError("support intervals only exist for the bounded model")
        lo, hi = self._row(self.support_lo, t), self._row(self.support_hi, t)
        return [Interval(lo[j], hi[j]) for j in range(self.dim)]

    def moment(self, t: int) -> list:
        if self.kind != "bounded":
            raise UnsupportedModelError("moment intervals only exist for the bounded model")
        lo, hi = self._row(self.moment_lo, t), self._row(self.moment_hi, t)
        return [Interval(lo[j], hi[j]) for j in range(self.dim)]

    # --- gaussian accessors ------------------------------------------------

    def mean(self, t: int) -> np.ndarray:
        if self.kind != "gaussian":
            raise UnsupportedModelError("mean vector only exists for the gaussian model")
        return self._row(self.mean_table, t)

    def cov(self, t: int) -> np.ndarray:
        if self.kind != "gaussian":
            raise UnsupportedModelError("covariance only exists for the gaussian model")
        return self.cov_table[t] if self.cov_table.shape[0] > 1 else self.cov_table[0]

    # --- constructors ------------------------------------------------------

    @classmethod
    def gaussian(cls, dim: int, mean=None, cov=None) -> "DisturbanceModel":
        if cov is None:
            cov = np.eye(dim)
        return cls(kind="gaussian", dim=dim, mean_table=mean, cov_table=cov)

    @classmethod
    def bounded(cls, support_lo, support_hi, moment_lo, moment_hi,
                sampling: str = "uniform", beta_params=(2.0, 2.0)) -> "DisturbanceModel":
        dim = np.atleast_1d(np.asarray(support_lo, dtype=float)).shape[-1]
        return cls(kind="bounded", dim=dim, support_lo=support_lo, support_hi=support_hi,
                   moment_lo=moment_lo, moment_hi=moment_hi, sampling=sampling,
                   beta_params=tuple(beta_params))

    @classmethod
    def bounded_from_gaussian(cls, mean, sigma, k: float = 2.0,
                              sampling: str = "truncated-normal") -> "DisturbanceModel":
        """Truncate a normal disturbance at mean +/- k*sigma (default k = 2)."""
        mu = np.atleast_1d(np.asarray(mean, dtype=float))
        sd = np.broadcast_to(np.asarray(sigma, dtype=float), mu.shape)
        return cls.bounded(mu - k * sd, mu + k * sd, mu, mu, sampling=sampling)

    def zeroed(self) -> "DisturbanceModel":
        """A noiseless copy (for --noise off runs): same kind, degenerate spread."""
        if self.kind == "gaussian":
            return DisturbanceModel.gaussian(self.dim, mean=np.zeros(self.dim),
                                             cov=np.zeros((self.dim, self.dim)))
        zero = np.zeros_like(self.support_lo)
        return DisturbanceModel.bounded(zero, zero, zero, zero, sampling="uniform")


def sample_disturbance(model: DisturbanceModel, t: int, rng: np.random.Generator) -> np.ndarray:
    """One draw w(t) from the model's sampling distribution."""
    if model.kind == "gaussian":
        cov = model.cov(t)
        if np.all(cov == 0.0):
            return model.mean(t).copy()
        return rng.multivariate_normal(model.mean(t), cov)
    lo = np.array([iv.lo for iv in model.support(t)])
    hi = np.array([iv.hi for iv in model.support(t)])
    width = hi - lo
    if model.sampling == "uniform":
        w = lo + width * rng.random(model.dim)
    elif model.sampling == "beta":
        a, b = model.beta_params
        w = lo + width * rng.beta(a, b, size=model.dim)
    else:  # truncated-normal centered on the moment interval midpoint
        mid = 0.5 * (np.array([iv.lo for iv in model.moment(t)])
                     + np.array([iv.hi for iv in model.moment(t)]))
        sd = np.where(width > 0, width / 4.0, 0.0)
        w = np.empty(model.dim)
        for j in range(model.dim):
            if width[j] == 0.0:
                w[j] = lo[j]
                continue
            while True:
                cand = rng.normal(mid[j], sd[j])
                if lo[j] <= cand <= hi[j]:
                    w[j] = cand
                    break
    assert np.all(w >= lo - 1e-12) and np.all(w <= hi + 1e-12)
    return w
