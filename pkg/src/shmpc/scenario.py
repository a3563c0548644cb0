"""Scenario files: JSON schema, loading, validation, and round-trip dumping.

A scenario bundles the plant matrices, disturbance model, STL control
specification, external signals, and the experiment block (runs, seed,
confidence level, output directory).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import stl
from .controller import CD_STRATEGY, HOLD_PREVIOUS, ControlSpec
from .disturbance import DisturbanceModel
from .system import LinearSystem


class ScenarioError(ValueError):
    """Schema or consistency violation, with a JSON-pointer-style path."""

    def __init__(self, path: str, message: str):
        super().__init__("%s: %s" % (path or "$", message))
        self.path = path


_NUM = {"type": "number"}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 1},
           "minItems": 1}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["system", "disturbance", "control"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "units": {"type": "object"},
        "system": {
            "type": "object",
            "required": ["A", "B", "x0", "input_box"],
            "properties": {
                "A": {"type": "array"},
                "B": {"type": "array"},
                "x0": {"type": "array", "items": _NUM, "minItems": 1},
                "input_box": _MATRIX,
            },
        },
        "disturbance": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["gaussian", "bounded"]},
                "mean": {"type": "array"},
                "cov": {"type": "array"},
                "support": {"type": "array"},
                "moment": {"type": "array"},
                "sampling": {"enum": ["uniform", "truncated-normal", "beta"]},
                "beta_params": {"type": "array", "items": _NUM, "minItems": 2,
                                "maxItems": 2},
            },
        },
        "signals": {"type": "object",
                    "additionalProperties": {"type": "array", "items": _NUM}},
        "control": {
            "type": "object",
            "required": ["formula", "delta", "N"],
            "properties": {
                "formula": {"type": "string"},
                "objective_formula": {"type": "string"},
                "delta": {"type": "number", "exclusiveMinimum": 0,
                          "exclusiveMaximum": 1},
                "N": {"type": "integer", "minimum": 1},
                "input_cost": {
                    "type": "object",
                    "properties": {"form": {"enum": ["l1", "quadratic"]},
                                   "weights": {"type": "array", "items": _NUM}},
                },
                "risk_policy": {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {"kind": {"enum": ["uniform", "weights"]},
                                   "weights": {"type": "array", "items": _NUM}},
                },
                "p_order": {"type": "integer", "minimum": 2},
                "p_orders": {"type": "array", "items": {"type": "integer"}},
                "gaussian_strategy": {"enum": ["coordinate-descent", "cutting-plane"]},
                "nu": {"type": "number", "exclusiveMinimum": 0},
                "atom_budget": {"type": "integer", "minimum": 1},
            },
        },
        "experiment": {
            "type": "object",
            "properties": {
                "runs": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "beta": {"type": "number", "exclusiveMinimum": 0,
                         "exclusiveMaximum": 1},
                "out_dir": {"type": "string"},
                "fallback": {"enum": ["hold_previous", "terminate"]},
                "mode": {"enum": ["shmpc", "openloop"]},
            },
        },
    },
}


@dataclass
class Scenario:
    name: str
    sys: LinearSystem
    model: DisturbanceModel
    spec: ControlSpec
    x0: np.ndarray
    signals: dict = field(default_factory=dict)
    units: dict = field(default_factory=dict)
    description: str = ""
    runs: int = 1
    seed: int = 0
    beta: float = 0.05
    out_dir: str = "results"
    fallback: str = HOLD_PREVIOUS
    mode: str = "shmpc"


def _fail(path: str, message: str):
    raise ScenarioError(path, message)


def _load_system(raw: dict, N: int) -> tuple:
    x0 = np.asarray(raw["x0"], dtype=float)
    n = x0.shape[0]
    A = np.asarray(raw["A"], dtype=float)
    B = np.asarray(raw["B"], dtype=float)
    if A.ndim == 2:
        if A.shape != (n, n):
            _fail("/system/A", "expected %dx%d, got %s" % (n, n, A.shape))
    elif A.ndim == 3:
        if A.shape[1:] != (n, n):
            _fail("/system/A", "per-step entries must be %dx%d" % (n, n))
        if A.shape[0] < N:
            _fail("/system/A", "per-step table covers %d steps, need %d"
                  % (A.shape[0], N))
        A = A[:N]
    else:
        _fail("/system/A", "must be a matrix or a list of matrices")
    m = np.asarray(raw["B"], dtype=float).shape[-1]
    if B.ndim == 2:
        if B.shape != (n, m):
            _fail("/system/B", "expected %dx%d, got %s" % (n, m, B.shape))
    elif B.ndim == 3:
        if B.shape[1:] != (n, m):
            _fail("/system/B", "per-step entries must be %dx%d" % (n, m))
        if B.shape[0] < N:
            _fail("/system/B", "per-step table covers %d steps, need %d"
                  % (B.shape[0], N))
        B = B[:N]
    else:
        _fail("/system/B", "must be a matrix or a list of matrices")
    box = np.asarray(raw["input_box"], dtype=float)
    if box.shape != (m, 2):
        _fail("/system/input_box", "expected %d [lo, hi] pairs, got %s"
              % (m, box.shape))
    try:
        return LinearSystem.create(A, B, N, box), x0
    except ValueError as exc:
        _fail("/system", str(exc))


def _load_disturbance(raw: dict, n: int, N: int) -> DisturbanceModel:
    kind = raw["kind"]
    try:
        if kind == "gaussian":
            if "cov" not in raw:
                _fail("/disturbance/cov", "gaussian model requires a covariance")
            return DisturbanceModel.gaussian(n, mean=raw.get("mean"),
                                             cov=np.asarray(raw["cov"], dtype=float))
        for key in ("support", "moment"):
            if key not in raw:
                _fail("/disturbance/%s" % key, "bounded model requires %s" % key)
        sup = np.asarray(raw["support"], dtype=float)
        mom = np.asarray(raw["moment"], dtype=float)
        for nameo, arr in (("support", sup), ("moment", mom)):
            if arr.ndim == 2 and arr.shape == (n, 2):
                continue
            if arr.ndim == 3 and arr.shape[1:] == (n, 2) and arr.shape[0] >= N:
                continue
            _fail("/disturbance/%s" % nameo,
                  "expected (%d, 2) pairs or a per-step table covering %d steps"
                  % (n, N))
        def split(arr):
            if arr.ndim == 2:
                return arr[:, 0], arr[:, 1]
            return arr[:N, :, 0], arr[:N, :, 1]
        slo, shi = split(sup)
        mlo, mhi = split(mom)
        return DisturbanceModel.bounded(slo, shi, mlo, mhi,
                                        sampling=raw.get("sampling", "uniform"),
                                        beta_params=tuple(raw.get("beta_params",
                                                                  (2.0, 2.0))))
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        _fail("/disturbance", str(exc))


def load_scenario_dict(data: dict) -> Scenario:
    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/" + "/".join(str(p) for p in exc.absolute_path)
        raise ScenarioError(path, exc.message) from None
    ctrl = data["control"]
    N = ctrl["N"]
    sys_obj, x0 = _load_system(data["system"], N)
    model = _load_disturbance(data["disturbance"], sys_obj.n, N)
    signals = {name: np.asarray(vals, dtype=float)
               for name, vals in data.get("signals", {}).items()}
    for name, vals in signals.items():
        if vals.shape[0] < N + 1:
            _fail("/signals/%s" % name,
                  "signal covers %d steps, need N+1 = %d" % (vals.shape[0], N + 1))
    try:
        phi = stl.parse(ctrl["formula"], n_states=sys_obj.n)
    except stl.StlSyntaxError as exc:
        _fail("/control/formula", str(exc))
    if "objective_formula" in ctrl:
        try:
            psi = stl.parse(ctrl["objective_formula"], n_states=sys_obj.n)
        except stl.StlSyntaxError as exc:
            _fail("/control/objective_formula", str(exc))
    else:
        psi = phi
    need = max(stl.horizon(phi), stl.horizon(psi))
    if N < need:
        _fail("/control/N", "N=%d is below the formula horizon %d "
                            "(need N >= max over both formulas)" % (N, need))
    for pred_gate in _gates_of(phi) | _gates_of(psi):
        if pred_gate not in signals:
            _fail("/signals", "formula gates on undeclared signal %r" % pred_gate)
    cost = ctrl.get("input_cost", {})
    risk = ctrl.get("risk_policy", {"kind": "uniform"})
    weights = cost.get("weights")
    spec = ControlSpec(
        phi=phi, psi=psi, delta=float(ctrl["delta"]), N=N,
        jin_form=cost.get("form", "l1"),
        jin_weights=None if weights is None else np.asarray(weights, dtype=float),
        risk_policy=risk.get("kind", "uniform"),
        risk_weights=None if "weights" not in risk
        else np.asarray(risk["weights"], dtype=float),
        p_order=int(ctrl.get("p_order", 4)),
        p_orders=tuple(ctrl.get("p_orders", (2, 4, 8))),
        gaussian_strategy=ctrl.get("gaussian_strategy", CD_STRATEGY),
        nu=float(ctrl.get("nu", 0.5)),
        atom_budget=int(ctrl.get("atom_budget", 100_000)),
    )
    try:
        spec.validate(sys_obj)
    except ValueError as exc:
        _fail("/control", str(exc))
    exp = data.get("experiment", {})
    return Scenario(
        name=data.get("name", "scenario"),
        sys=sys_obj, model=model, spec=spec, x0=x0, signals=signals,
        units=data.get("units", {}), description=data.get("description", ""),
        runs=int(exp.get("runs", 1)), seed=int(exp.get("seed", 0)),
        beta=float(exp.get("beta", 0.05)), out_dir=exp.get("out_dir", "results"),
        fallback=exp.get("fallback", HOLD_PREVIOUS),
        mode=exp.get("mode", "shmpc"),
    )


def _gates_of(phi: stl.StlFormula) -> set:
    if phi.kind == stl.PRED:
        return {phi.pred.gate} if phi.pred.gate is not None else set()
    out: set = set()
    for c in phi.children:
        out |= _gates_of(c)
    return out


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError("$", "not valid JSON: %s" % exc) from None
    return load_scenario_dict(data)


def dump_scenario(sc: Scenario) -> dict:
    """Back to the JSON structure; load(dump(x)) is structurally equal to x."""
    sys_block = {
        "A": sc.sys.A_table.tolist() if not _constant_table(sc.sys.A_table)
        else sc.sys.A_table[0].tolist(),
        "B": sc.sys.B_table.tolist() if not _constant_table(sc.sys.B_table)
        else sc.sys.B_table[0].tolist(),
        "x0": sc.x0.tolist(),
        "input_box": sc.sys.input_box.tolist(),
    }
    if sc.model.kind == "gaussian":
        dist = {"kind": "gaussian",
                "mean": sc.model.mean_table.tolist()
                if sc.model.mean_table.shape[0] > 1 else sc.model.mean_table[0].tolist(),
                "cov": sc.model.cov_table.tolist()
                if sc.model.cov_table.shape[0] > 1 else sc.model.cov_table[0].tolist()}
    else:
        def pairs(lo, hi):
            if lo.shape[0] > 1:
                return np.stack([lo, hi], axis=-1).tolist()
            return np.stack([lo[0], hi[0]], axis=-1).tolist()
        dist = {"kind": "bounded",
                "support": pairs(sc.model.support_lo, sc.model.support_hi),
                "moment": pairs(sc.model.moment_lo, sc.model.moment_hi),
                "sampling": sc.model.sampling,
                "beta_params": list(sc.model.beta_params)}
    ctrl = {
        "formula": stl.format_formula(sc.spec.phi),
        "objective_formula": stl.format_formula(sc.spec.psi),
        "delta": sc.spec.delta,
        "N": sc.spec.N,
        "input_cost": {"form": sc.spec.jin_form,
                       **({"weights": sc.spec.jin_weights.tolist()}
                          if sc.spec.jin_weights is not None else {})},
        "risk_policy": {"kind": sc.spec.risk_policy,
                        **({"weights": sc.spec.risk_weights.tolist()}
                           if sc.spec.risk_weights is not None else {})},
        "p_order": sc.spec.p_order,
        "p_orders": list(sc.spec.p_orders),
        "gaussian_strategy": sc.spec.gaussian_strategy,
        "nu": sc.spec.nu,
    }
    return {
        "name": sc.name,
        "description": sc.description,
        "units": sc.units,
        "system": sys_block,
        "disturbance": dist,
        "signals": {k: v.tolist() for k, v in sc.signals.items()},
        "control": ctrl,
        "experiment": {"runs": sc.runs, "seed": sc.seed, "beta": sc.beta,
                       "out_dir": sc.out_dir, "fallback": sc.fallback,
                       "mode": sc.mode},
    }


def _constant_table(table: np.ndarray) -> bool:
    return bool(np.all(table == table[0]))
