"""Experiment configuration: YAML (or JSON) documents validated into plans.

Every error carries the line of the offending node. Unknown keys are
rejected. ``normalize`` fills in defaults, and a normalized document parses
back to the same normalized document.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
import yaml

from .asymptotics import PsiSpec
from .core import (
    DEFAULT_HORIZON,
    ConfigurationError,
    EngineKind,
    ErrorBudget,
    HypothesisLayout,
    PriorGrid,
    Region,
    ThresholdMatrix,
)
from .models import (
    ArCovModel,
    ArMeanModel,
    BernoulliModel,
    Signal,
    TInvariantModel,
    UnknownVarianceModel,
    gaussian_mean,
)
from .models.base import ObservationModel
from .montecarlo import ExperimentPlan


class ConfigError(ConfigurationError):
    def __init__(self, path: str, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{path}: {message}")
        self.path = path
        self.line = line


MODEL_KINDS = ("gaussian_mean", "ar_mean", "ar_cov", "t_invariant", "unknown_variance", "bernoulli")


class _Doc:
    """Plain data plus the source line of every node, keyed by dotted path."""

    def __init__(self, text: str):
        try:
            root = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError("<document>", f"cannot parse: {getattr(exc, 'problem', exc)}",
                              mark.line + 1 if mark else None) from None
        self.lines: dict[str, int] = {}
        self.data = {} if root is None else self._convert(root, "")

    def _convert(self, node: yaml.Node, path: str) -> Any:
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            out = {}
            for key_node, value_node in node.value:
                key = key_node.value
                sub = f"{path}.{key}" if path else key
                if key in out:
                    raise ConfigError(sub, "duplicate key", key_node.start_mark.line + 1)
                out[key] = self._convert(value_node, sub)
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self._convert(v, f"{path}[{i}]") for i, v in enumerate(node.value)]
        return _scalar(node)

    def line(self, path: str) -> int | None:
        while path:
            if path in self.lines:
                return self.lines[path]
            cut = max(path.rfind("."), path.rfind("["))
            path = path[:cut] if cut > 0 else ""
        return self.lines.get("")


def _scalar(node: yaml.ScalarNode) -> Any:
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


class _Checker:
    def __init__(self, doc: _Doc):
        self.doc = doc

    def fail(self, path: str, message: str) -> ConfigError:
        return ConfigError(path, message, self.doc.line(path))

    def mapping(self, value: Any, path: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
        if not isinstance(value, dict):
            raise self.fail(path, "expected a mapping")
        for key in value:
            if key not in allowed:
                raise self.fail(f"{path}.{key}" if path else key, "unknown key")
        for key in required:
            if key not in value:
                raise self.fail(path or "<document>", f"missing required key {key!r}")
        return value

    def number(self, value: Any, path: str, positive: bool = False) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "-inf"):
                value = float(value)
            else:
                raise self.fail(path, f"expected a number, got {value!r}")
        value = float(value)
        if math.isnan(value):
            raise self.fail(path, "NaN is not allowed")
        if positive and not value > 0:
            raise self.fail(path, f"must be positive, got {value}")
        return value

    def integer(self, value: Any, path: str, minimum: int | None = None) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.fail(path, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise self.fail(path, f"must be >= {minimum}, got {value}")
        return int(value)

    def vector(self, value: Any, path: str) -> list[float]:
        if isinstance(value, list):
            if not value:
                raise self.fail(path, "empty vector")
            return [self.number(v, f"{path}[{i}]") for i, v in enumerate(value)]
        return [self.number(value, path)]

    def choice(self, value: Any, path: str, options: tuple[str, ...]) -> str:
        if value not in options:
            raise self.fail(path, f"expected one of {', '.join(options)}, got {value!r}")
        return value

    def matrix_or_scalar(self, value: Any, path: str, size: int) -> list[list[float]]:
        if isinstance(value, list):
            if len(value) != size:
                raise self.fail(path, f"expected a {size}x{size} matrix")
            rows = []
            for i, row in enumerate(value):
                if not isinstance(row, list) or len(row) != size:
                    raise self.fail(f"{path}[{i}]", f"expected a row of length {size}")
                rows.append([self.number(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)])
            return rows
        v = self.number(value, path)
        return [[0.0 if i == j else v for j in range(size)] for i in range(size)]


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def _norm_model(c: _Checker, raw: Any) -> dict:
    m = c.mapping(raw, "model", {"kind", "sigma", "coefficients", "signal", "order", "exact"}, {"kind"})
    kind = c.choice(m["kind"], "model.kind", MODEL_KINDS)
    allowed = {
        "gaussian_mean": {"sigma"},
        "ar_mean": {"sigma", "coefficients", "signal"},
        "ar_cov": {"order"},
        "t_invariant": {"sigma", "exact"},
        "unknown_variance": set(),
        "bernoulli": set(),
    }[kind]
    for key in m:
        if key != "kind" and key not in allowed:
            raise c.fail(f"model.{key}", f"not a parameter of model kind {kind!r}")
    out: dict[str, Any] = {"kind": kind}
    if "sigma" in allowed:
        out["sigma"] = c.number(m.get("sigma", 1.0), "model.sigma", positive=True)
    if kind == "ar_mean":
        coeffs = m.get("coefficients", [])
        out["coefficients"] = c.vector(coeffs, "model.coefficients") if coeffs != [] else []
        s = c.mapping(m.get("signal", {}), "model.signal", {"kind", "amplitude", "degree", "frequency"})
        out["signal"] = {
            "kind": c.choice(s.get("kind", "constant"), "model.signal.kind", ("constant", "polynomial", "harmonic")),
            "amplitude": c.number(s.get("amplitude", 1.0), "model.signal.amplitude"),
            "degree": c.integer(s.get("degree", 0), "model.signal.degree", 0),
            "frequency": c.number(s.get("frequency", 0.0), "model.signal.frequency"),
        }
    if kind == "ar_cov":
        out["order"] = c.integer(m.get("order", 1), "model.order", 1)
    if kind == "t_invariant":
        exact = m.get("exact", False)
        if not isinstance(exact, bool):
            raise c.fail("model.exact", "expected true or false")
        out["exact"] = exact
    return out


def _norm_hypotheses(c: _Checker, raw: Any, model_kind: str) -> dict:
    h = c.mapping(raw, "hypotheses", {"points", "regions", "indifference", "two_sided"})
    forms = [k for k in ("points", "regions", "two_sided") if k in h]
    if len(forms) != 1:
        raise c.fail("hypotheses", "give exactly one of points, regions or two_sided")
    form = forms[0]
    if model_kind == "unknown_variance" and form != "two_sided":
        raise c.fail(f"hypotheses.{form}", "the unknown-variance model takes two_sided: [mu0, mu1]")
    if form == "points":
        pts = h["points"]
        if not isinstance(pts, list) or len(pts) < 2:
            raise c.fail("hypotheses.points", "need at least two points")
        if "indifference" in h:
            raise c.fail("hypotheses.indifference", "simple hypotheses take no indifference zone")
        return {"points": [c.vector(p, f"hypotheses.points[{i}]") for i, p in enumerate(pts)]}
    if form == "two_sided":
        pair = c.vector(h["two_sided"], "hypotheses.two_sided")
        if len(pair) != 2 or not pair[0] < pair[1]:
            raise c.fail("hypotheses.two_sided", "expected [lower, upper] with lower < upper")
        if "indifference" in h:
            raise c.fail("hypotheses.indifference", "two_sided layouts define their own indifference zone")
        return {"two_sided": pair}
    regs = h["regions"]
    if not isinstance(regs, list) or len(regs) < 2:
        raise c.fail("hypotheses.regions", "need at least two regions")
    out = {"regions": [_norm_region(c, r, f"hypotheses.regions[{i}]") for i, r in enumerate(regs)]}
    if "indifference" in h and h["indifference"] is not None:
        out["indifference"] = _norm_region(c, h["indifference"], "hypotheses.indifference", closed=False)
    return out


def _norm_region(c: _Checker, raw: Any, path: str, closed: bool = True) -> dict:
    r = c.mapping(raw, path, {"lo", "hi", "closed"}, {"lo", "hi"})
    flag = r.get("closed", closed)
    if not isinstance(flag, bool):
        raise c.fail(f"{path}.closed", "expected true or false")
    return {"lo": c.vector(r["lo"], f"{path}.lo"), "hi": c.vector(r["hi"], f"{path}.hi"), "closed": flag}


def _hypothesis_count(hyp: dict) -> int:
    if "points" in hyp:
        return len(hyp["points"])
    if "regions" in hyp:
        return len(hyp["regions"])
    return 2


def _norm_engine(c: _Checker, raw: Any) -> dict:
    e = c.mapping(raw, "engine", {"kind", "horizon", "sup", "prior", "initial_estimate"}, {"kind"})
    kind = c.choice(e["kind"], "engine.kind", tuple(k.value for k in EngineKind))
    out: dict[str, Any] = {"kind": kind, "horizon": c.integer(e.get("horizon", DEFAULT_HORIZON), "engine.horizon", 1)}
    if kind == "mmsprt":
        out["sup"] = c.choice(e.get("sup", "model"), "engine.sup", ("model", "grid"))
        if "prior" not in e:
            raise c.fail("engine", "the mmsprt engine needs a prior")
        p = c.mapping(e["prior"], "engine.prior", {"axes"}, {"axes"})
        axes = p["axes"]
        if not isinstance(axes, list) or not axes:
            raise c.fail("engine.prior.axes", "expected a list of axes")
        norm_axes = []
        for i, ax in enumerate(axes):
            path = f"engine.prior.axes[{i}]"
            a = c.mapping(ax, path, {"lo", "hi", "size", "scale"}, {"lo", "hi"})
            norm_axes.append({
                "lo": c.number(a["lo"], f"{path}.lo"),
                "hi": c.number(a["hi"], f"{path}.hi"),
                "size": c.integer(a.get("size", 201), f"{path}.size", 1),
                "scale": c.choice(a.get("scale", "linear"), f"{path}.scale", ("linear", "log")),
            })
        out["prior"] = {"axes": norm_axes}
    else:
        for key in ("sup", "prior"):
            if key in e:
                raise c.fail(f"engine.{key}", "only used by the mmsprt engine")
    if kind == "amsprt":
        if "initial_estimate" not in e:
            raise c.fail("engine", "the amsprt engine needs an initial_estimate")
        out["initial_estimate"] = c.vector(e["initial_estimate"], "engine.initial_estimate")
    elif "initial_estimate" in e:
        raise c.fail("engine.initial_estimate", "only used by the amsprt engine")
    return out


def _norm_budget(c: _Checker, doc: dict, size: int) -> dict:
    has_b, has_t = "budget" in doc, "thresholds" in doc
    if has_b == has_t:
        raise c.fail("<document>", "give exactly one of budget or thresholds")
    if has_b:
        b = c.mapping(doc["budget"], "budget", {"alpha"}, {"alpha"})
        alpha = c.matrix_or_scalar(b["alpha"], "budget.alpha", size)
        for i in range(size):
            for j in range(size):
                if i != j and not 0 < alpha[i][j] < 1:
                    path = f"budget.alpha[{i}][{j}]" if isinstance(b["alpha"], list) else "budget.alpha"
                    raise c.fail(path, f"alpha[{i}][{j}] = {alpha[i][j]} is outside (0, 1)")
        return {"budget": {"alpha": alpha}}
    t = c.mapping(doc["thresholds"], "thresholds", {"a"}, {"a"})
    a = c.matrix_or_scalar(t["a"], "thresholds.a", size)
    for i in range(size):
        for j in range(size):
            if i != j and not a[i][j] > 0:
                path = f"thresholds.a[{i}][{j}]" if isinstance(t["a"], list) else "thresholds.a"
                raise c.fail(path, f"a[{i}][{j}] = {a[i][j]} must be positive")
    return {"thresholds": {"a": a}}


def _norm_experiment(c: _Checker, raw: Any) -> dict:
    e = c.mapping(raw, "experiment", {"trials", "seed", "workers", "orders", "truths", "chunk"}, {"trials", "truths"})
    truths = e["truths"]
    if not isinstance(truths, list) or not truths:
        raise c.fail("experiment.truths", "expected a non-empty list of parameter values")
    orders = e.get("orders", [1, 2])
    if not isinstance(orders, list) or not orders:
        raise c.fail("experiment.orders", "expected a non-empty list of integers")
    out = {
        "trials": c.integer(e["trials"], "experiment.trials", 1),
        "seed": c.integer(e.get("seed", 0), "experiment.seed", 0),
        "orders": [c.integer(r, f"experiment.orders[{i}]", 1) for i, r in enumerate(orders)],
        "truths": [c.vector(t, f"experiment.truths[{i}]") for i, t in enumerate(truths)],
        "chunk": c.integer(e.get("chunk", 2000), "experiment.chunk", 1),
    }
    if "workers" in e and e["workers"] is not None:
        out["workers"] = c.integer(e["workers"], "experiment.workers", 1)
    return out


TOP_KEYS = {"name", "model", "hypotheses", "engine", "budget", "thresholds", "experiment", "psi", "output"}


def normalize_document(doc: _Doc) -> dict:
    c = _Checker(doc)
    raw = c.mapping(doc.data, "", TOP_KEYS, {"model", "hypotheses", "engine", "experiment"})
    name = raw.get("name", "experiment")
    if not isinstance(name, str) or not name or any(ch in name for ch in "/\\"):
        raise c.fail("name", "expected a plain file-name-safe string")
    model = _norm_model(c, raw["model"])
    hyp = _norm_hypotheses(c, raw["hypotheses"], model["kind"])
    out: dict[str, Any] = {"name": name, "model": model, "hypotheses": hyp, "engine": _norm_engine(c, raw["engine"])}
    out.update(_norm_budget(c, raw, _hypothesis_count(hyp)))
    out["experiment"] = _norm_experiment(c, raw["experiment"])
    psi = c.mapping(raw.get("psi", {}), "psi", {"beta"})
    if "beta" in psi:
        out["psi"] = {"beta": c.number(psi["beta"], "psi.beta", positive=True)}
    o = c.mapping(raw.get("output", {}), "output", {"dir", "format"})
    out["output"] = {
        "dir": str(o.get("dir", "results")),
        "format": c.choice(o.get("format", "csv"), "output.format", ("csv", "json")),
    }
    _check_semantics(c, out)
    return out


def _check_semantics(c: _Checker, cfg: dict) -> None:
    """Catch model/layout/engine mismatches with the path of the culprit."""
    try:
        model = build_model(cfg)
    except (ConfigurationError, ValueError) as exc:
        raise c.fail("model", str(exc)) from None
    try:
        layout = build_layout(cfg, model)
    except (ConfigurationError, ValueError) as exc:
        raise c.fail("hypotheses", str(exc)) from None
    dim = model.dim
    if layout.dim != dim:
        raise c.fail("hypotheses", f"parameters have dimension {layout.dim}, model {cfg['model']['kind']} expects {dim}")
    eng = cfg["engine"]
    if eng["kind"] == "msprt" and not layout.is_simple:
        raise c.fail("engine.kind", "the msprt engine needs point hypotheses")
    if eng["kind"] != "msprt" and cfg["model"]["kind"] == "t_invariant":
        raise c.fail("engine.kind", "the t_invariant model runs with the msprt engine only")
    if eng["kind"] == "mmsprt" and len(eng["prior"]["axes"]) != dim:
        raise c.fail("engine.prior.axes", f"expected {dim} axes")
    if eng["kind"] == "amsprt" and len(eng["initial_estimate"]) != dim:
        raise c.fail("engine.initial_estimate", f"expected {dim} values")
    for i, t in enumerate(cfg["experiment"]["truths"]):
        try:
            model.check_parameter(t)
        except ValueError as exc:
            raise c.fail(f"experiment.truths[{i}]", str(exc)) from None
    try:
        build_plan(cfg)
    except (ConfigurationError, ValueError) as exc:
        raise c.fail("engine", str(exc)) from None


def parse_text(text: str, overrides: dict[str, Any] | None = None) -> dict:
    """Validate a document (after applying dotted-path ``overrides``) and normalize it."""
    doc = _Doc(text)
    for path, value in (overrides or {}).items():
        node = doc.data
        parts = path.split(".")
        for key in parts[:-1]:
            node = node.setdefault(key, {}) if isinstance(node, dict) else node
        if isinstance(node, dict):
            node[parts[-1]] = value
    return normalize_document(doc)


def load_config(path: str, overrides: dict[str, Any] | None = None) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(path, f"cannot read: {exc.strerror}") from None
    return parse_text(text, overrides)


def dump_normalized(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_model(cfg: dict) -> ObservationModel:
    m = cfg["model"]
    kind = m["kind"]
    if kind == "gaussian_mean":
        return gaussian_mean(m["sigma"])
    if kind == "ar_mean":
        return ArMeanModel(tuple(m["coefficients"]), m["sigma"], Signal(**m["signal"]))
    if kind == "ar_cov":
        return ArCovModel(m["order"])
    if kind == "t_invariant":
        return TInvariantModel(m["sigma"], m["exact"])
    if kind == "unknown_variance":
        mu0, mu1 = cfg["hypotheses"]["two_sided"]
        return UnknownVarianceModel(mu0, mu1)
    return BernoulliModel()


def build_layout(cfg: dict, model: ObservationModel) -> HypothesisLayout:
    h = cfg["hypotheses"]
    if isinstance(model, UnknownVarianceModel):
        return model.layout()
    if "points" in h:
        return HypothesisLayout.simple(h["points"])
    if "two_sided" in h:
        return HypothesisLayout.two_sided(*h["two_sided"])
    regions = tuple(Region(r["lo"], r["hi"], r["closed"]) for r in h["regions"])
    ind = h.get("indifference")
    return HypothesisLayout(regions, Region(ind["lo"], ind["hi"], ind["closed"]) if ind else None)


@dataclass(frozen=True)
class Experiment:
    name: str
    plan: ExperimentPlan
    config: dict


def build_plan(cfg: dict, workers: int = 1) -> ExperimentPlan:
    model = build_model(cfg)
    layout = build_layout(cfg, model)
    eng = cfg["engine"]
    ex = cfg["experiment"]
    prior = None
    if eng["kind"] == "mmsprt":
        prior = PriorGrid.product([(a["lo"], a["hi"], a["size"], a["scale"]) for a in eng["prior"]["axes"]])
    budget = ErrorBudget(np.array(cfg["budget"]["alpha"])) if "budget" in cfg else None
    thresholds = ThresholdMatrix(np.array(cfg["thresholds"]["a"])) if "thresholds" in cfg else None
    return ExperimentPlan(
        model=model,
        layout=layout,
        engine=EngineKind(eng["kind"]),
        truths=tuple(tuple(t) for t in ex["truths"]),
        trials=ex["trials"],
        budget=budget,
        thresholds=thresholds,
        seed=ex["seed"],
        orders=tuple(ex["orders"]),
        workers=ex.get("workers", workers),
        horizon=eng["horizon"],
        chunk=ex["chunk"],
        prior=prior,
        sup=eng.get("sup", "model"),
        initial_estimate=tuple(eng["initial_estimate"]) if "initial_estimate" in eng else None,
        psi=PsiSpec(cfg["psi"]["beta"]) if "psi" in cfg else None,
    )
