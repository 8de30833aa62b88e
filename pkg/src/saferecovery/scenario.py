"""Scenario files: strict YAML parsing and the design step that builds a runnable setup.

A scenario has six top-level sections::

    plant:      {A, B, C, secured_rows}
    observer:   {L, L_tilde, nominal_cert, attack_cert}
    controller: {K} or {lqr: {Q, R}}
    sets:       {S: {M, q, r}, epsilon, e_bar, barrier: {M, q, r}}
    attack:     {mode: worst_case|explicit, T_a, T_na, start_attacked, intervals, policy}
    sim:        {x0, xhat0, horizon, step, seed, input_update, strict}

``L`` is a matrix or ``{strategy: dual_lqr, Q, R}``; ``L_tilde`` is a
matrix or ``{strategy: delete_columns|dual_lqr_on_secured, Q, R}``.
Matrices are row-major nested lists and row indices are zero-based.  Unknown
or duplicate keys are errors, reported with the line and column of the node.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
import yaml

from .attacks import AttackSchedule, AttackScheduleError, AttackSignalPolicy, worst_case_schedule
from .certificates import (
    AttackGrowthCert,
    CertificateError,
    NominalDecayCert,
    build_attack_cert,
    build_nominal_cert,
    gamma2,
)
from .controller import ControllerConfig, ControllerError, lqr_reference_gain
from .linalg import LinalgError
from .observer import (
    ObserverError,
    ObserverGains,
    attack_loop,
    design_attack_gain,
    design_nominal_gain,
    nominal_loop,
)
from .plant import LtiPlant, PlantError
from .sets import QuadraticSet, SetError, SetFamily
from .simulation import ScenarioConfig

__all__ = [
    "ScenarioError",
    "DesignError",
    "Scenario",
    "BuiltScenario",
    "parse_scenario",
    "load_scenario",
    "dump_scenario",
    "build",
]


class ScenarioError(ValueError):
    """Malformed scenario file; ``line`` / ``column`` are 1-based when known."""

    def __init__(self, msg, line=None, column=None, path=None):
        loc = ""
        if line is not None:
            loc = f"line {line}, column {column}: "
        where = f"{path}: " if path else ""
        super().__init__(f"{where}{loc}{msg}")
        self.msg = msg
        self.path = path
        self.line = line
        self.column = column


class DesignError(RuntimeError):
    """The scenario parses but a gain design or certificate is infeasible."""


class _Map(dict):
    """Mapping that remembers where each key and the mapping itself start."""

    mark = None
    key_marks: dict  # value node of each key
    name_marks: dict  # the key itself


class _StrictLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node, deep=False):
    loader.flatten_mapping(node)
    out = _Map()
    out.mark = node.start_mark
    out.key_marks = {}
    out.name_marks = {}
    for knode, vnode in node.value:
        key = loader.construct_object(knode, deep=True)
        if not isinstance(key, str):
            raise ScenarioError(f"keys must be strings, got {key!r}",
                                knode.start_mark.line + 1, knode.start_mark.column + 1)
        if key in out:
            raise ScenarioError(f"duplicate key {key!r}",
                                knode.start_mark.line + 1, knode.start_mark.column + 1)
        out[key] = loader.construct_object(vnode, deep=True)
        out.key_marks[key] = vnode.start_mark
        out.name_marks[key] = knode.start_mark
    return out


_StrictLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


# schema: section -> {key: required?}
_SCHEMA = {
    "plant": {"A": True, "B": True, "C": True, "secured_rows": True},
    "observer": {"L": True, "L_tilde": True, "nominal_cert": False, "attack_cert": False},
    "controller": {"K": False, "lqr": False},
    "sets": {"S": True, "epsilon": True, "e_bar": True, "barrier": True},
    "attack": {"mode": True, "T_a": False, "T_na": False, "start_attacked": False,
               "intervals": False, "policy": False},
    "sim": {"x0": True, "xhat0": True, "horizon": True, "step": False, "seed": False,
            "input_update": False, "strict": False},
}
_SUB = {
    "gain_design": {"strategy": True, "Q": False, "R": False},
    "nominal_cert": {"P": False, "Q": False},
    "attack_cert": {"Phi": False, "Q_hat": False, "P_hat": False, "constants": False},
    "constants": {"c1_hat": True, "c2_hat": True, "lambda1_hat": True, "lambda2_hat": True},
    "lqr": {"Q": False, "R": False},
    "quadratic": {"M": True, "q": False, "r": True},
    "policy": {"kind": True, "amplitude": False, "seed": False, "table": False},
}


def _loc(node, key=None):
    mark = None
    if isinstance(node, _Map):
        mark = node.key_marks.get(key) if key is not None else node.mark
        if mark is None:
            mark = node.mark
    if mark is None:
        return {}
    return {"line": mark.line + 1, "column": mark.column + 1}


def _check_keys(node, schema, where):
    if not isinstance(node, dict):
        raise ScenarioError(f"{where} must be a mapping", **_loc(node))
    for k in node:
        if k not in schema:
            m = getattr(node, "name_marks", {}).get(k)
            loc = {"line": m.line + 1, "column": m.column + 1} if m is not None else {}
            raise ScenarioError(f"unknown key {k!r} in {where} (allowed: {', '.join(schema)})",
                                **loc)
    for k, req in schema.items():
        if req and k not in node:
            raise ScenarioError(f"missing key {k!r} in {where}", **_loc(node))


def _matrix(node, parent, key, rows=None, cols=None):
    val = node
    try:
        arr = np.array(val, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{key} must be a numeric matrix", **_loc(parent, key)) from None
    if arr.ndim == 1 and arr.size and cols == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ScenarioError(f"{key} must be a nested list of rows", **_loc(parent, key))
    if (rows is not None and arr.shape[0] != rows) or (cols is not None and arr.shape[1] != cols):
        raise ScenarioError(f"{key} must be {rows or '?'}x{cols or '?'}, got "
                            f"{arr.shape[0]}x{arr.shape[1]}", **_loc(parent, key))
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{key} has non-finite entries", **_loc(parent, key))
    return arr.tolist()


def _vector(node, parent, key, size=None):
    try:
        arr = np.array(node, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{key} must be a numeric vector", **_loc(parent, key)) from None
    if arr.ndim != 1 or (size is not None and arr.size != size):
        raise ScenarioError(f"{key} must be a vector of length {size}", **_loc(parent, key))
    return arr.tolist()


def _number(node, parent, key, positive=False, nonneg=False):
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ScenarioError(f"{key} must be a number", **_loc(parent, key))
    v = float(node)
    if not math.isfinite(v) or (positive and v <= 0) or (nonneg and v < 0):
        cond = "positive" if positive else "nonnegative" if nonneg else "finite"
        raise ScenarioError(f"{key} must be {cond}", **_loc(parent, key))
    return v


def _flag(node, parent, key):
    if not isinstance(node, bool):
        raise ScenarioError(f"{key} must be true or false", **_loc(parent, key))
    return node


def _integer(node, parent, key):
    if isinstance(node, bool) or not isinstance(node, int):
        raise ScenarioError(f"{key} must be an integer", **_loc(parent, key))
    return int(node)


def _quadratic(node, parent, key, n):
    _check_keys(node, _SUB["quadratic"], f"sets.{key}")
    out = {"M": _matrix(node["M"], node, "M", n, n), "r": _number(node["r"], node, "r")}
    out["q"] = _vector(node["q"], node, "q", n) if "q" in node else [0.0] * n
    return out


def _weights(node, where, q_dim, r_dim):
    out = {}
    if "Q" in node:
        out["Q"] = _matrix(node["Q"], node, "Q", q_dim, q_dim)
    if "R" in node:
        out["R"] = _matrix(node["R"], node, "R", r_dim, r_dim)
    return out


def _normalize(doc) -> dict:
    """Validate the parsed document and return a plain, canonical dict."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a mapping with sections " + ", ".join(_SCHEMA),
                            **_loc(doc))
    _check_keys(doc, {k: True for k in _SCHEMA}, "scenario")
    for sec, schema in _SCHEMA.items():
        _check_keys(doc[sec], schema, sec)
    out: dict = {}

    pl = doc["plant"]
    a = _matrix(pl["A"], pl, "A")
    n = len(a)
    if any(len(r) != n for r in a):
        raise ScenarioError("A must be square", **_loc(pl, "A"))
    b = _matrix(pl["B"], pl, "B", rows=n)
    c = _matrix(pl["C"], pl, "C", cols=n)
    p, m = len(c), len(b[0])
    sec_rows = pl["secured_rows"]
    if not isinstance(sec_rows, list) or any(isinstance(i, bool) or not isinstance(i, int)
                                             for i in sec_rows):
        raise ScenarioError("secured_rows must be a list of integers", **_loc(pl, "secured_rows"))
    if any(i < 0 or i >= p for i in sec_rows) or len(set(sec_rows)) != len(sec_rows):
        raise ScenarioError(f"secured_rows must be distinct indices in [0, {p})",
                            **_loc(pl, "secured_rows"))
    if len(sec_rows) >= p:
        raise ScenarioError("at least one output row must be vulnerable", **_loc(pl, "secured_rows"))
    out["plant"] = {"A": a, "B": b, "C": c, "secured_rows": sorted(sec_rows)}
    ps = len(sec_rows)

    ob = doc["observer"]
    obs: dict = {}
    if isinstance(ob["L"], dict):
        _check_keys(ob["L"], _SUB["gain_design"], "observer.L")
        if ob["L"]["strategy"] != "dual_lqr":
            raise ScenarioError("observer.L strategy must be 'dual_lqr'", **_loc(ob["L"], "strategy"))
        obs["L"] = {"strategy": "dual_lqr", **_weights(ob["L"], "observer.L", n, p)}
    else:
        obs["L"] = _matrix(ob["L"], ob, "L", n, p)
    if isinstance(ob["L_tilde"], dict):
        lt = ob["L_tilde"]
        _check_keys(lt, _SUB["gain_design"], "observer.L_tilde")
        if lt["strategy"] not in ("delete_columns", "dual_lqr_on_secured"):
            raise ScenarioError("observer.L_tilde strategy must be 'delete_columns' or "
                                "'dual_lqr_on_secured'", **_loc(lt, "strategy"))
        obs["L_tilde"] = {"strategy": lt["strategy"], **_weights(lt, "observer.L_tilde", n, ps)}
    else:
        obs["L_tilde"] = _matrix(ob["L_tilde"], ob, "L_tilde", n, ps) if ps else []
    if "nominal_cert" in ob:
        nc = ob["nominal_cert"]
        _check_keys(nc, _SUB["nominal_cert"], "observer.nominal_cert")
        if ("P" in nc) == ("Q" in nc):
            raise ScenarioError("nominal_cert needs exactly one of P or Q", **_loc(nc))
        k = "P" if "P" in nc else "Q"
        obs["nominal_cert"] = {k: _matrix(nc[k], nc, k, n, n)}
    if "attack_cert" in ob:
        ac = ob["attack_cert"]
        _check_keys(ac, _SUB["attack_cert"], "observer.attack_cert")
        entry: dict = {}
        if "constants" in ac:
            if len(ac) > 1:
                raise ScenarioError("attack_cert.constants excludes the other keys", **_loc(ac))
            cst = ac["constants"]
            _check_keys(cst, _SUB["constants"], "observer.attack_cert.constants")
            entry["constants"] = {k: _number(cst[k], cst, k, nonneg=True)
                                  for k in ("c1_hat", "c2_hat", "lambda1_hat", "lambda2_hat")}
        else:
            if "Phi" in ac:
                entry["Phi"] = _matrix(ac["Phi"], ac, "Phi", n, n)
            if "Q_hat" in ac and "P_hat" in ac:
                raise ScenarioError("give at most one of Q_hat or P_hat", **_loc(ac))
            for k in ("Q_hat", "P_hat"):
                if k in ac:
                    entry[k] = _matrix(ac[k], ac, k)
        obs["attack_cert"] = entry
    out["observer"] = obs

    ct = doc["controller"]
    if ("K" in ct) == ("lqr" in ct):
        raise ScenarioError("controller needs exactly one of K or lqr", **_loc(ct))
    if "K" in ct:
        out["controller"] = {"K": _matrix(ct["K"], ct, "K", m, n)}
    else:
        _check_keys(ct["lqr"], _SUB["lqr"], "controller.lqr")
        out["controller"] = {"lqr": _weights(ct["lqr"], "controller.lqr", n, m)}

    st = doc["sets"]
    out["sets"] = {
        "S": _quadratic(st["S"], st, "S", n),
        "epsilon": _number(st["epsilon"], st, "epsilon", positive=True),
        "e_bar": _number(st["e_bar"], st, "e_bar", positive=True),
        "barrier": _quadratic(st["barrier"], st, "barrier", n),
    }

    at = doc["attack"]
    mode = at["mode"]
    if mode not in ("worst_case", "explicit"):
        raise ScenarioError("attack.mode must be 'worst_case' or 'explicit'", **_loc(at, "mode"))
    att: dict = {"mode": mode}
    for k in ("T_a", "T_na"):
        if k in at:
            att[k] = _number(at[k], at, k, positive=True)
    if mode == "worst_case":
        for k in ("T_a", "T_na"):
            if k not in at:
                raise ScenarioError(f"worst_case attacks need {k}", **_loc(at))
        if "intervals" in at:
            raise ScenarioError("intervals are only allowed with mode: explicit",
                                **_loc(at, "intervals"))
        att["start_attacked"] = _flag(at.get("start_attacked", True), at, "start_attacked")
    else:
        if "intervals" not in at:
            raise ScenarioError("explicit attacks need intervals", **_loc(at))
        if "start_attacked" in at:
            raise ScenarioError("start_attacked only applies to mode: worst_case",
                                **_loc(at, "start_attacked"))
        ivs = at["intervals"]
        if not isinstance(ivs, list):
            raise ScenarioError("intervals must be a list of [start, end] pairs",
                                **_loc(at, "intervals"))
        pairs = []
        for iv in ivs:
            if (not isinstance(iv, list) or len(iv) != 2
                    or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in iv)):
                raise ScenarioError("each interval must be [start, end]", **_loc(at, "intervals"))
            pairs.append([float(iv[0]), float(iv[1])])
        att["intervals"] = pairs
    pol = at.get("policy", {"kind": "zero"})
    if isinstance(pol, str):
        pol = {"kind": pol}
    _check_keys(pol, _SUB["policy"], "attack.policy")
    if pol["kind"] not in AttackSignalPolicy.KINDS:
        raise ScenarioError(f"attack.policy.kind must be one of {', '.join(AttackSignalPolicy.KINDS)}",
                            **_loc(pol, "kind"))
    pentry = {"kind": pol["kind"]}
    if "amplitude" in pol:
        pentry["amplitude"] = _number(pol["amplitude"], pol, "amplitude", nonneg=True)
    if "seed" in pol:
        pentry["seed"] = _integer(pol["seed"], pol, "seed")
    if "table" in pol:
        pentry["table"] = _matrix(pol["table"], pol, "table", cols=p - ps)
    att["policy"] = pentry
    out["attack"] = att

    sm = doc["sim"]
    sim = {
        "x0": _vector(sm["x0"], sm, "x0", n),
        "xhat0": _vector(sm["xhat0"], sm, "xhat0", n),
        "horizon": _number(sm["horizon"], sm, "horizon", positive=True),
        "step": _number(sm.get("step", 1e-3), sm, "step", positive=True),
        "seed": _integer(sm.get("seed", 0), sm, "seed"),
        "input_update": sm.get("input_update", "stage"),
        "strict": _flag(sm.get("strict", True), sm, "strict"),
    }
    if sim["input_update"] not in ("stage", "step"):
        raise ScenarioError("sim.input_update must be 'stage' or 'step'", **_loc(sm, "input_update"))
    out["sim"] = sim
    return out


@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated, canonical scenario data (plain lists and numbers)."""

    data: dict
    source: str | None = None

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.data == other.data

    def replace(self, section: str, **values) -> "Scenario":
        """Copy with keys of one section overwritten (the result is revalidated)."""
        d = copy.deepcopy(self.data)
        d[section].update(values)
        return Scenario(_normalize(d), self.source)


def parse_scenario(text: str, path: str | None = None) -> Scenario:
    try:
        doc = yaml.load(text, Loader=_StrictLoader)  # noqa: S506 - SafeLoader subclass
    except ScenarioError as exc:
        raise ScenarioError(exc.msg, exc.line, exc.column, path) from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        if mark is not None:
            raise ScenarioError(f"YAML syntax error: {problem}", mark.line + 1, mark.column + 1,
                                path) from None
        raise ScenarioError(f"YAML syntax error: {problem}", path=path) from None
    try:
        return Scenario(_normalize(doc), path)
    except ScenarioError as exc:
        if path and exc.path is None:
            raise ScenarioError(exc.msg, exc.line, exc.column, path) from None
        raise


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_scenario(text, str(path))


def dump_scenario(scn: Scenario) -> str:
    """YAML text that parses back to an equal :class:`Scenario`."""
    return yaml.safe_dump(scn.data, sort_keys=False, default_flow_style=None, width=100)


@dataclass(frozen=True, eq=False)
class BuiltScenario:
    scenario: Scenario
    plant: LtiPlant
    gains: ObserverGains
    controller: ControllerConfig
    family: SetFamily
    schedule: AttackSchedule
    policy: AttackSignalPolicy
    nominal: NominalDecayCert
    attack: AttackGrowthCert
    t_a: float
    t_na: float

    def config(self, strict: bool | None = None, check_initial: bool = True) -> ScenarioConfig:
        sim = self.scenario.data["sim"]
        return ScenarioConfig(
            self.plant, self.gains, self.controller, self.family, self.schedule, self.policy,
            np.array(sim["x0"]), np.array(sim["xhat0"]), sim["horizon"], step=sim["step"],
            seed=sim["seed"], nominal_cert=self.nominal, attack_cert=self.attack,
            strict=sim["strict"] if strict is None else strict, check_initial=check_initial,
            input_update=sim["input_update"])


def build(scn: Scenario) -> BuiltScenario:
    """Design gains and certificates for *scn*.

    Raises :class:`DesignError` when a design step or certificate is
    infeasible (for instance a non-Hurwitz nominal loop).
    """
    d = scn.data
    pd = d["plant"]
    try:
        plant = LtiPlant(np.array(pd["A"]), np.array(pd["B"]), np.array(pd["C"]),
                         tuple(pd["secured_rows"]))
    except PlantError as exc:
        raise DesignError(str(exc)) from exc
    n, p, m = plant.n, plant.p, plant.m
    ob = d["observer"]
    try:
        if isinstance(ob["L"], dict):
            l_nom = design_nominal_gain(plant, np.array(ob["L"].get("Q", np.eye(n))),
                                        np.array(ob["L"].get("R", np.eye(p))))
        else:
            l_nom = np.array(ob["L"])
        if isinstance(ob["L_tilde"], dict):
            lt = ob["L_tilde"]
            l_att, _ = design_attack_gain(plant, l_nom, lt["strategy"],
                                          np.array(lt["Q"]) if "Q" in lt else None,
                                          np.array(lt["R"]) if "R" in lt else None)
        else:
            l_att = np.array(ob["L_tilde"]).reshape(n, plant.p_secured)
        gains = ObserverGains.checked(plant, l_nom, l_att)
        nc = ob.get("nominal_cert", {"Q": np.eye(n).tolist()})
        nominal = build_nominal_cert(nominal_loop(plant, gains.l_nominal),
                                     q=np.array(nc["Q"]) if "Q" in nc else None,
                                     p=np.array(nc["P"]) if "P" in nc else None)
        ac = ob.get("attack_cert", {})
        if "constants" in ac:
            cst = ac["constants"]
            attack = AttackGrowthCert.from_constants(cst["c1_hat"], cst["c2_hat"],
                                                     cst["lambda1_hat"], cst["lambda2_hat"])
        else:
            phi = ac.get("Phi")
            attack = build_attack_cert(
                attack_loop(plant, gains.l_attack),
                phi_override=None if phi is None else np.array(phi),
                q_hat=np.array(ac["Q_hat"]) if "Q_hat" in ac else None,
                p_hat=np.array(ac["P_hat"]) if "P_hat" in ac else None)
        ctd = d["controller"]
        if "K" in ctd:
            k_gain = lqr_reference_gain(plant, k_gain=np.array(ctd["K"]))
        else:
            w = ctd["lqr"]
            k_gain = lqr_reference_gain(plant, np.array(w.get("Q", np.eye(n))),
                                        np.array(w.get("R", np.eye(m))))
    except (ObserverError, CertificateError, ControllerError, LinalgError,
            np.linalg.LinAlgError) as exc:
        raise DesignError(str(exc)) from exc

    at = d["attack"]
    horizon = d["sim"]["horizon"]
    try:
        if at["mode"] == "worst_case":
            schedule = worst_case_schedule(horizon, at["T_a"], at["T_na"], at["start_attacked"])
        else:
            schedule = AttackSchedule(tuple(tuple(iv) for iv in at["intervals"]),
                                      declared_t_a=at.get("T_a"), declared_t_na=at.get("T_na"))
        pol = at["policy"]
        policy = AttackSignalPolicy(pol["kind"], pol.get("amplitude", 0.0), pol.get("seed", 0),
                                    tuple(tuple(r) for r in pol.get("table", ())))
        policy.check_covers(schedule)
    except AttackScheduleError as exc:
        raise ScenarioError(f"attack: {exc}") from exc

    sd = d["sets"]
    beta = nominal.c1 * gamma2(attack, schedule.declared_t_a)
    try:
        safe = QuadraticSet(np.array(sd["S"]["M"]), np.array(sd["S"]["q"]), sd["S"]["r"])
        barrier = QuadraticSet(np.array(sd["barrier"]["M"]), np.array(sd["barrier"]["q"]),
                               sd["barrier"]["r"])
        family = SetFamily(safe, sd["epsilon"], sd["e_bar"], barrier, bound_factor=beta)
    except SetError as exc:
        raise ScenarioError(f"sets: {exc}") from exc
    controller = ControllerConfig(k_gain, barrier, gains)
    return BuiltScenario(scn, plant, gains, controller, family, schedule, policy, nominal, attack,
                         schedule.declared_t_a, schedule.declared_t_na)
