"""JSON scenario documents: schema validation, canonical digest, builders."""

from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources

import numpy as np
from jsonschema import Draft202012Validator

from . import model as M


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` holds one message per offending field."""

    def __init__(self, errors):
        self.errors = list(errors) if not isinstance(errors, str) else [errors]
        super().__init__("; ".join(self.errors))


_VALIDATOR = None


def schema() -> dict:
    text = resources.files("latqueue").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _validator():
    global _VALIDATOR
    if _VALIDATOR is None:
        _VALIDATOR = Draft202012Validator(schema())
    return _VALIDATOR


def _where(err) -> str:
    path = "/".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def validate(doc: dict) -> None:
    errors = sorted(_validator().iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError([f"{_where(e)}: {e.message}" for e in errors])


def load(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<root>: config must be a JSON object")
    validate(doc)
    return doc


def with_overrides(doc: dict, seed=None, trace_stride=None) -> dict:
    doc = copy.deepcopy(doc)
    run = doc.setdefault("run", {})
    if seed is not None:
        run["seed"] = int(seed)
    if trace_stride is not None:
        stride = float(trace_stride)
        run["trace_stride"] = int(stride) if stride.is_integer() else stride
    validate(doc)
    return doc


def canonical(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def digest(doc: dict) -> str:
    return hashlib.sha256(canonical(doc).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _kernel(spec, dim: int) -> M.InterferenceKernel:
    if spec is None or spec == "nearest-neighbour":
        return M.InterferenceKernel.nearest_neighbour(dim)
    if spec == "isolated":
        return M.InterferenceKernel.isolated(dim)
    if "weights" in spec:
        if dim != 1:
            raise ConfigError("topology/kernel/weights: weights describe a 1-d kernel")
        return M.InterferenceKernel.from_1d(spec["weights"])
    if "offsets" in spec:
        return M.InterferenceKernel({tuple(o): float(w) for o, w in spec["offsets"]}, dim)
    raise ConfigError("topology/kernel: give weights or offsets")


def build_topology(section: dict) -> M.Topology:
    kind = section["kind"]
    if kind == "graph":
        if "adjacency" not in section:
            raise ConfigError("topology/adjacency: required for graph topologies")
        return M.build_topology("graph", adjacency=np.asarray(section["adjacency"], dtype=float))
    if "dims" not in section:
        raise ConfigError(f"topology/dims: required for {kind} topologies")
    dims = section["dims"]
    dims = [dims] if isinstance(dims, int) else list(dims)
    kern = _kernel(section.get("kernel"), len(dims))
    return M.build_topology(kind, dims, kern, convention=section.get("convention", "sides"))


def build_arrivals(section: dict, n: int) -> M.ArrivalSpec:
    kind = section["kind"]
    if kind == "pmf":
        pmf = section["pmf"]
        arr = M.from_pmf(pmf, n) if np.ndim(pmf) == 1 else M.from_pmf(np.asarray(pmf), n)
        if arr.n != n:
            raise ConfigError(f"arrivals/pmf: {arr.n} rows for {n} nodes")
        if "truncation" in section:
            arr = arr.truncated(section["truncation"])
        return arr
    if "rates" in section:
        rates = section["rates"]
        if len(rates) != n:
            raise ConfigError(f"arrivals/rates: {len(rates)} entries for {n} nodes")
    elif "rate" in section:
        rates = section["rate"]
    else:
        raise ConfigError("arrivals: give rate or rates")
    factory = M.bernoulli if kind == "bernoulli" else M.poisson
    return factory(rates, n)


def build_scenario(doc: dict) -> M.ScenarioConfig:
    """Materialise a validated document; model errors become ConfigError."""
    try:
        topo = build_topology(doc["topology"])
        arr = build_arrivals(doc["arrivals"], topo.n)
        rsec = doc.get("rates", {})
        rates = M.RateFamily(rsec.get("family", "sir"), float(rsec.get("noise", 0.0)))
        t = doc.get("time", {})
        tm = t.get("model", "discrete")
        sched = doc.get("scheduler", "D2" if tm == "discrete" else "uniformized")
        rt = doc.get("routing", {})
        multi = rt.get("mode", "multi-hop" if "q" in rt else "single-hop") == "multi-hop"
        if multi and "q" not in rt:
            raise ConfigError("routing/q: required for multi-hop routing")
        routing = M.Routing(rt["q"] if multi else None, rt.get("degree", "lattice"))
        run = doc.get("run", {})
        return M.ScenarioConfig(
            topology=topo, arrivals=arr, rates=rates, scheduler=sched, routing=routing,
            time_model=tm, horizon=t.get("horizon", 10_000), burn_in=t.get("burn_in", 0.1),
            replications=run.get("replications", 1), seed=run.get("seed", 0),
            batches=run.get("batches", 20), trace_stride=run.get("trace_stride", 0),
            hist_cap=run.get("hist_cap", 256),
            initial=None if "initial" not in run else np.asarray(run["initial"]),
        )
    except M.ModelError as exc:
        raise ConfigError(f"model: {exc}") from None


def build_lyapunov(doc: dict, n: int) -> M.LyapunovSpec | None:
    sec = doc.get("analysis", {}).get("lyapunov")
    if sec is None:
        return None
    try:
        u = sec.get("utility", {"family": "quadratic-inverse"})
        utility = M.make_utility(u["family"], **u.get("params", {}))
        nu = np.broadcast_to(np.asarray(sec["nu"], dtype=float), (n,)).copy()
        return M.LyapunovSpec(nu, float(sec["epsilon"]), utility)
    except (M.ModelError, TypeError, ValueError) as exc:
        raise ConfigError(f"analysis/lyapunov: {exc}") from None
