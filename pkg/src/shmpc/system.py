"""Discrete-time stochastic linear system model.

Dynamics: x(t+1) = A(t) x(t) + B(t) u(t) + w(t), with A, B either constant
or tabulated per step.  The state transition matrix and the explicit state
expansion are the building blocks for everything downstream (atoms of the
canonical robustness forms, interval propagation, simulation).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .intervals import Interval, interval_affine, interval_sum


class HorizonError(IndexError):
    """A time index fell outside the range where the system is defined."""


def _as_matrix_table(mat, horizon: int, shape) -> np.ndarray:
    """Normalize a constant matrix or a per-step list into a (horizon, *shape) table."""
    arr = np.asarray(mat, dtype=float)
    if arr.shape == shape:
        return np.broadcast_to(arr, (horizon,) + shape).copy()
    if arr.shape == (horizon,) + shape:
        return arr.copy()
    raise ValueError("matrix table has shape %s, expected %s or %s"
                     % (arr.shape, shape, (horizon,) + shape))


@dataclass
class LinearSystem:
    """Time-varying linear dynamics over a fixed maximal horizon.

    The disturbance dimension equals the state dimension (the noise enters
    additively on every state component).
    """

    n: int
    m: int
    horizon_max: int
    A_table: np.ndarray = field(repr=False)
    B_table: np.ndarray = field(repr=False)
    input_box: np.ndarray = field(repr=False)  # (m, 2) rows [lo, hi]

    def __post_init__(self):
        self.A_table = np.asarray(self.A_table, dtype=float)
        self.B_table = np.asarray(self.B_table, dtype=float)
        self.input_box = np.asarray(self.input_box, dtype=float)
        if self.A_table.shape != (self.horizon_max, self.n, self.n):
            raise ValueError("A table shape %s does not match horizon/state dims"
                             % (self.A_table.shape,))
        if self.B_table.shape != (self.horizon_max, self.n, self.m):
            raise ValueError("B table shape %s does not match horizon/input dims"
                             % (self.B_table.shape,))
        if self.input_box.shape != (self.m, 2):
            raise ValueError("input_box must be (m, 2), got %s" % (self.input_box.shape,))
        if not np.all(np.isfinite(self.A_table)) or not np.all(np.isfinite(self.B_table)):
            raise ValueError("system matrices must be finite")
        if np.any(self.input_box[:, 0] > self.input_box[:, 1]):
            raise ValueError("input_box has lo > hi")

    @property
    def s(self) -> int:
        """Disturbance dimension (fixed equal to the state dimension)."""
        return self.n

    @classmethod
    def create(cls, A, B, horizon_max: int, input_box) -> "LinearSystem":
        """Build from constant or per-step A, B.  input_box is (m, 2)."""
        A0 = np.asarray(A, dtype=float)
        n = A0.shape[-1]
        B0 = np.asarray(B, dtype=float)
        m = B0.shape[-1]
        return cls(
            n=n,
            m=m,
            horizon_max=horizon_max,
            A_table=_as_matrix_table(A0, horizon_max, (n, n)),
            B_table=_as_matrix_table(B0, horizon_max, (n, m)),
            input_box=np.asarray(input_box, dtype=float),
        )

    def A(self, t: int) -> np.ndarray:
        if not 0 <= t < self.horizon_max:
            raise HorizonError("A(t) undefined for t=%d (horizon_max=%d)" % (t, self.horizon_max))
        return self.A_table[t]

    def B(self, t: int) -> np.ndarray:
        if not 0 <= t < self.horizon_max:
            raise HorizonError("B(t) undefined for t=%d (horizon_max=%d)" % (t, self.horizon_max))
        return self.B_table[t]


def transition_matrix(sys: LinearSystem, tau: int, t: int) -> np.ndarray:
    """State transition matrix: A(tau-1) A(tau-2) ... A(t), identity for tau == t."""
    if not 0 <= t <= tau <= sys.horizon_max:
        raise HorizonError("transition_matrix needs 0 <= t <= tau <= %d, got tau=%d t=%d"
                           % (sys.horizon_max, tau, t))
    phi = np.eye(sys.n)
    for k in range(t, tau):
        phi = sys.A(k) @ phi
    return phi


def explicit_state(sys: LinearSystem, t: int, x_t, inputs, disturbances, tau: int) -> np.ndarray:
    """State at tau from x(t) and the input/disturbance segments over [t, tau).

    inputs[i] and disturbances[i] correspond to time t + i.
    """
    if not 0 <= t <= tau <= sys.horizon_max:
        raise HorizonError("explicit_state needs 0 <= t <= tau <= %d" % sys.horizon_max)
    u = np.atleast_2d(np.asarray(inputs, dtype=float)) if tau > t else np.zeros((0, sys.m))
    w = np.atleast_2d(np.asarray(disturbances, dtype=float)) if tau > t else np.zeros((0, sys.s))
    if u.shape[0] < tau - t or w.shape[0] < tau - t:
        raise ValueError("need %d inputs and disturbances covering [%d, %d), got %d and %d"
                         % (tau - t, t, tau, u.shape[0], w.shape[0]))
    x = transition_matrix(sys, tau, t) @ np.asarray(x_t, dtype=float)
    for k in range(t, tau):
        phi = transition_matrix(sys, tau, k + 1)
        x = x + phi @ (sys.B(k) @ u[k - t] + w[k - t])
    return x


def simulate(sys: LinearSystem, x0, inputs, disturbances) -> np.ndarray:
    """Iterate the difference equation; returns states with shape (T+1, n)."""
    u = np.atleast_2d(np.asarray(inputs, dtype=float))
    w = np.atleast_2d(np.asarray(disturbances, dtype=float))
    T = u.shape[0]
    if w.shape[0] != T:
        raise ValueError("inputs and disturbances must cover the same %d steps" % T)
    states = np.zeros((T + 1, sys.n))
    states[0] = np.asarray(x0, dtype=float)
    for k in range(T):
        states[k + 1] = sys.A(k) @ states[k] + sys.B(k) @ u[k] + w[k]
    return states


@dataclass
class Trajectory:
    """A realized finite run: states x(0..T), inputs u(0..T-1), noise w(0..T-1)."""

    states: np.ndarray
    inputs: np.ndarray
    disturbances: np.ndarray

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.disturbances = np.atleast_2d(np.asarray(self.disturbances, dtype=float))

    def __len__(self) -> int:
        return self.states.shape[0]

    def check_consistency(self, sys: LinearSystem, tol: float = 1e-10) -> None:
        """Assert the states obey the difference equation given inputs and noise."""
        for k in range(self.states.shape[0] - 1):
            pred = sys.A(k) @ self.states[k] + sys.B(k) @ self.inputs[k] + self.disturbances[k]
            resid = np.max(np.abs(pred - self.states[k + 1]))
            if resid > tol:
                raise ValueError("trajectory violates the dynamics at step %d (residual %g)"
                                 % (k, resid))


@dataclass
class StatePropagation:
    """Per-component support/moment intervals of the noise contribution to X(tau),
    together with the deterministic part (initial state plus input terms).

    The deterministic part is returned both folded (when concrete inputs were
    supplied) and as symbolic coefficient arrays for undetermined inputs.
    """

    noise_support: list          # list[Interval], noise accumulation only
    noise_moment: list           # list[Interval]
    const: np.ndarray            # Phi(tau,t) x_t plus any folded input terms, (n,)
    input_coeffs: dict           # (k, j) -> (n,) coefficient column for u_j(k), symbolic part

    def support(self) -> list:
        """Concrete per-component support intervals; requires no symbolic inputs left."""
        if self.input_coeffs:
            raise ValueError("support is symbolic in %d undetermined input terms"
                             % len(self.input_coeffs))
        return [iv.shift(c) for iv, c in zip(self.noise_support, self.const)]

    def moment(self) -> list:
        if self.input_coeffs:
            raise ValueError("moment is symbolic in %d undetermined input terms"
                             % len(self.input_coeffs))
        return [iv.shift(c) for iv, c in zip(self.noise_moment, self.const)]


def propagate_state_interval(sys: LinearSystem, t: int, x_t, inputs, tau: int,
                             model) -> StatePropagation:
    """Support and first-moment intervals of X(tau) given x(t), for bounded noise.

    ``inputs`` may be None (all inputs over [t, tau) stay symbolic) or an
    array covering [t, tau) which is folded into the constant part.
    """
    if model.kind != "bounded":
        raise ValueError("interval propagation requires a bounded-support disturbance model")
    if not 0 <= t <= tau <= sys.horizon_max:
        raise HorizonError("propagate_state_interval needs 0 <= t <= tau <= %d" % sys.horizon_max)
    const = transition_matrix(sys, tau, t) @ np.asarray(x_t, dtype=float)
    input_coeffs: dict = {}
    sup = [[] for _ in range(sys.n)]
    mom = [[] for _ in range(sys.n)]
    u = None if inputs is None else np.atleast_2d(np.asarray(inputs, dtype=float))
    for k in range(t, tau):
        phi = transition_matrix(sys, tau, k + 1)
        bk = phi @ sys.B(k)
        if u is not None:
            const = const + bk @ u[k - t]
        else:
            for j in range(sys.m):
                col = bk[:, j]
                if np.any(col != 0.0):
                    input_coeffs[(k, j)] = col
        w_sup = model.support(k)
        w_mom = model.moment(k)
        for i in range(sys.n):
            for j in range(sys.s):
                coeff = phi[i, j]
                if coeff != 0.0:
                    sup[i].append(interval_affine(coeff, w_sup[j]))
                    mom[i].append(interval_affine(coeff, w_mom[j]))
    return StatePropagation(
        noise_support=[interval_sum(terms) for terms in sup],
        noise_moment=[interval_sum(terms) for terms in mom],
        const=const,
        input_coeffs=input_coeffs,
    )
