"""YAML analysis configs: parsing, validation, and construction of model objects.

The schema is documented in ``docs/config.md``.  Every block is normalised into
plain python values on load, so ``load -> dump -> load`` is the identity.
"""
from dataclasses import asdict, dataclass, field
import math

import numpy as np
import yaml

from .graph import GraphError, TorusSpec, UncertainGraph, ring_graph
from .margin import MarginError, ScalarTorusParams
from .prl import InputError, LureSystem, SolverOptions, coupling_matrix
from .simulator import NOISE_MODELS, ChuaParams, Nonlinearity, build_chua_network_system

CHECKS = ("full", "reduced", "torus")
MARGINS = ("small_gain", "critical_cod")
TOLERANCE_KEYS = ("eta", "max_iter", "tol", "blowup", "pd_margin", "r_scale", "bisection_tol")


class ConfigError(InputError):
    pass


@dataclass
class AnalysisConfig:
    system: dict = field(default_factory=dict)
    graph: dict = field(default_factory=dict)
    coupling: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    torus_sweep: dict = field(default_factory=dict)
    source: str = field(default="<string>", compare=False, repr=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("source")
        return {k: v for k, v in d.items() if v}


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def _line_map(text):
    """Map of key paths to 1-based line numbers of the YAML source."""
    lines = {}

    def walk(node, path):
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                walk(v, path + (str(k.value),))
                lines[path + (str(k.value),)] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if root is not None:
        walk(root, ())
    return lines


class _Ctx:
    def __init__(self, source, lines):
        self.source = source
        self.lines = lines

    def fail(self, path, msg):
        where = self.source
        p = tuple(path)
        while p and p not in self.lines:
            p = p[:-1]
        if p in self.lines:
            where += f":{self.lines[p]}"
        name = ".".join(str(x) if not isinstance(x, int) else f"[{x}]" for x in path).replace(".[", "[")
        raise ConfigError(f"{where}: {name or '<root>'}: {msg}")


def _num(ctx, path, v, kind=float, lo=None, strict=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        ctx.fail(path, f"expected a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            ctx.fail(path, f"expected an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
        if not math.isfinite(v):
            ctx.fail(path, "must be finite")
    if lo is not None and (v <= lo if strict else v < lo):
        ctx.fail(path, f"must be {'>' if strict else '>='} {lo}, got {v}")
    return v


def _matrix(ctx, path, v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return [[_num(ctx, path, v)]]
    if not isinstance(v, list) or not v:
        ctx.fail(path, "expected a number or a (nested) list of numbers")
    if not isinstance(v[0], list):
        return [[_num(ctx, path + (i,), x) for i, x in enumerate(v)]]
    rows = []
    for i, r in enumerate(v):
        if not isinstance(r, list):
            ctx.fail(path + (i,), "expected a row list")
        rows.append([_num(ctx, path + (i, j), x) for j, x in enumerate(r)])
    if len({len(r) for r in rows}) != 1:
        ctx.fail(path, "rows have different lengths")
    return rows


def _vector(ctx, path, v):
    if not isinstance(v, list):
        ctx.fail(path, "expected a list of numbers")
    return [_num(ctx, path + (i,), x) for i, x in enumerate(v)]


def _mapping(ctx, path, v, allowed):
    if v is None:
        return {}
    if not isinstance(v, dict):
        ctx.fail(path, "expected a mapping")
    for k in v:
        if k not in allowed:
            ctx.fail(path + (k,), f"unknown key; expected one of {sorted(allowed)}")
    return v


def _one_of(ctx, path, block, options):
    present = [k for k in options if k in block]
    if len(present) != 1:
        ctx.fail(path, f"exactly one of {list(options)} is required, found {present or 'none'}")
    return present[0]


# ---------------------------------------------------------------------------
# blocks
# ---------------------------------------------------------------------------


def _norm_system(ctx, v):
    P = ("system",)
    v = _mapping(ctx, P, v, {"A", "B", "C", "D", "D1", "nonlinearity", "chua"})
    if not v:
        return {}
    explicit = any(k in v for k in ("A", "B", "C", "D", "D1"))
    if explicit and "chua" in v:
        ctx.fail(P, "give either explicit matrices or the chua preset, not both")
    if "chua" in v:
        c = _mapping(ctx, P + ("chua",), v["chua"] or {}, {"T", "alpha", "beta", "epsilon", "m0", "m1", "D", "D1"})
        out = {"T": _num(ctx, P + ("chua", "T"), c.get("T", 0.01), lo=0.0, strict=True)}
        base = ChuaParams()
        for k in ("alpha", "beta", "epsilon", "m0", "m1"):
            out[k] = _num(ctx, P + ("chua", k), c.get(k, getattr(base, k)))
        for k in ("D", "D1"):
            if c.get(k) is not None:
                out[k] = _num(ctx, P + ("chua", k), c[k], lo=0.0, strict=True)
        return {"chua": out}
    out = {}
    for k in ("A", "B", "C", "D"):
        if k not in v:
            ctx.fail(P + (k,), "missing (explicit systems need A, B, C and D)")
        out[k] = _matrix(ctx, P + (k,), v[k])
    if v.get("D1") is not None:
        out["D1"] = _matrix(ctx, P + ("D1",), v["D1"])
    nl = _mapping(ctx, P + ("nonlinearity",), v.get("nonlinearity") or {"kind": "zero"}, {"kind", "params"})
    kind = nl.get("kind", "zero")
    params = _vector(ctx, P + ("nonlinearity", "params"), nl.get("params", []))
    try:
        Nonlinearity(kind, tuple(params))
    except InputError as exc:
        ctx.fail(P + ("nonlinearity",), str(exc))
    out["nonlinearity"] = {"kind": kind, "params": params}
    return out


def _norm_graph(ctx, v):
    P = ("graph",)
    v = _mapping(ctx, P, v, {"nodes", "edges", "ring", "torus"})
    if not v:
        return {}
    src = _one_of(ctx, P, v, ("edges", "ring", "torus"))
    if src != "edges" and "nodes" in v:
        ctx.fail(P + ("nodes",), f"only used with an edge list, not with {src}")
    if src == "edges":
        if "nodes" not in v:
            ctx.fail(P + ("nodes",), "missing node count")
        nodes = _num(ctx, P + ("nodes",), v["nodes"], int, lo=2)
        if not isinstance(v.get("edges"), list):
            ctx.fail(P + ("edges",), "expected a list of edges")
        edges = []
        for idx, e in enumerate(v["edges"]):
            q = P + ("edges", idx)
            e = _mapping(ctx, q, e, {"i", "j", "mu", "var", "uncertain"})
            for k in ("i", "j"):
                if k not in e:
                    ctx.fail(q + (k,), "missing")
            i = _num(ctx, q + ("i",), e["i"], int, lo=0)
            j = _num(ctx, q + ("j",), e["j"], int, lo=0)
            if i >= nodes or j >= nodes:
                ctx.fail(q, f"node index outside 0..{nodes - 1}")
            mu = _num(ctx, q + ("mu",), e.get("mu", 1.0), lo=0.0, strict=True)
            unc = e.get("uncertain", "var" in e)
            if not isinstance(unc, bool):
                ctx.fail(q + ("uncertain",), "expected true or false")
            var = _num(ctx, q + ("var",), e.get("var", 0.0), lo=0.0)
            if not unc and var > 0:
                ctx.fail(q, "a deterministic edge cannot carry a variance")
            edges.append({"i": i, "j": j, "mu": mu, "var": var, "uncertain": unc})
        out = {"nodes": nodes, "edges": edges}
    elif src == "ring":
        r = _mapping(ctx, P + ("ring",), v["ring"], {"N", "mu", "var", "uncertain"})
        out = {
            "ring": {
                "N": _num(ctx, P + ("ring", "N"), r.get("N"), int, lo=2),
                "mu": _num(ctx, P + ("ring", "mu"), r.get("mu", 1.0), lo=0.0, strict=True),
                "var": _num(ctx, P + ("ring", "var"), r.get("var", 0.0), lo=0.0),
                "uncertain": bool(r.get("uncertain", True)),
            }
        }
    else:
        t = _mapping(ctx, P + ("torus",), v["torus"], {"N", "k", "d", "mu", "sigma_sq"})
        out = {
            "torus": {
                "N": _num(ctx, P + ("torus", "N"), t.get("N"), int, lo=2),
                "k": _num(ctx, P + ("torus", "k"), t.get("k", 1), int, lo=1),
                "d": _num(ctx, P + ("torus", "d"), t.get("d", 1), int, lo=1),
                "mu": _num(ctx, P + ("torus", "mu"), t.get("mu", 1.0), lo=0.0, strict=True),
                "sigma_sq": _num(ctx, P + ("torus", "sigma_sq"), t.get("sigma_sq", 0.0), lo=0.0),
            }
        }
        try:
            TorusSpec(out["torus"]["N"], out["torus"]["k"], out["torus"]["d"])
        except GraphError as exc:
            ctx.fail(P + ("torus",), str(exc))
    return out


def _norm_coupling(ctx, v):
    P = ("coupling",)
    v = _mapping(ctx, P, v, {"g", "G"})
    if not v:
        return {}
    src = _one_of(ctx, P, v, ("g", "G"))
    if src == "g":
        return {"g": _num(ctx, P + ("g",), v["g"])}
    return {"G": _matrix(ctx, P + ("G",), v["G"])}


def _norm_list(ctx, path, v, allowed):
    if isinstance(v, str):
        v = [v]
    if not isinstance(v, list):
        ctx.fail(path, "expected a list")
    for i, x in enumerate(v):
        if x not in allowed:
            ctx.fail(path + (i,), f"unknown entry {x!r}; expected one of {list(allowed)}")
    return list(v)


def _norm_analysis(ctx, v):
    P = ("analysis",)
    v = _mapping(ctx, P, v, {"checks", "margins", "gamma_bar", "sigma_sq", "reference_sigma_sq", "tolerances"})
    out = {}
    if "checks" in v:
        out["checks"] = _norm_list(ctx, P + ("checks",), v["checks"], CHECKS)
    if "margins" in v:
        out["margins"] = _norm_list(ctx, P + ("margins",), v["margins"], MARGINS)
    for k in ("gamma_bar", "sigma_sq", "reference_sigma_sq"):
        if v.get(k) is not None:
            out[k] = _num(ctx, P + (k,), v[k], lo=0.0)
    if v.get("tolerances"):
        t = _mapping(ctx, P + ("tolerances",), v["tolerances"], set(TOLERANCE_KEYS))
        tol = {}
        for k, x in t.items():
            tol[k] = _num(ctx, P + ("tolerances", k), x, int if k == "max_iter" else float, lo=0.0, strict=k != "pd_margin")
        out["tolerances"] = tol
    return out


def _norm_sim(ctx, v):
    P = ("sim",)
    keys = {"horizon", "trials", "seed", "noise", "additive_noise", "gamma_bar", "gamma_bar_factor", "init_center", "init_spread"}
    v = _mapping(ctx, P, v, keys)
    if not v:
        return {}
    if "gamma_bar" in v and "gamma_bar_factor" in v:
        ctx.fail(P, "give gamma_bar or gamma_bar_factor, not both")
    out = {
        "horizon": _num(ctx, P + ("horizon",), v.get("horizon", 1000), int, lo=1),
        "trials": _num(ctx, P + ("trials",), v.get("trials", 100), int, lo=1),
        "seed": _num(ctx, P + ("seed",), v.get("seed", 0), int, lo=0),
        "noise": v.get("noise", "gaussian"),
        "additive_noise": _num(ctx, P + ("additive_noise",), v.get("additive_noise", 0.0), lo=0.0),
        "init_spread": _num(ctx, P + ("init_spread",), v.get("init_spread", 1.0), lo=0.0),
    }
    if out["seed"] >= 2**64:
        ctx.fail(P + ("seed",), "must fit in 64 bits")
    if out["noise"] not in NOISE_MODELS:
        ctx.fail(P + ("noise",), f"expected one of {list(NOISE_MODELS)}")
    for k in ("gamma_bar", "gamma_bar_factor"):
        if v.get(k) is not None:
            out[k] = _num(ctx, P + (k,), v[k], lo=0.0)
    if v.get("init_center") is not None:
        out["init_center"] = _vector(ctx, P + ("init_center",), v["init_center"])
    return out


def _range(ctx, path, v):
    if isinstance(v, int) and not isinstance(v, bool):
        return [v, v]
    if not (isinstance(v, list) and len(v) == 2):
        ctx.fail(path, "expected an integer or an inclusive [lo, hi] pair")
    lo, hi = (_num(ctx, path + (i,), x, int, lo=1) for i, x in enumerate(v))
    if hi < lo:
        ctx.fail(path, "empty range")
    return [lo, hi]


def _norm_sweep(ctx, v):
    P = ("torus_sweep",)
    v = _mapping(ctx, P, v, {"a", "delta", "g", "mu", "sigma_sq", "N", "k", "d"})
    if not v:
        return {}
    out = {}
    for k in ("a", "delta", "g", "mu", "sigma_sq"):
        if k not in v:
            ctx.fail(P + (k,), "missing")
        out[k] = _num(ctx, P + (k,), v[k])
    out["N"] = _num(ctx, P + ("N",), v.get("N"), int, lo=2)
    out["k"] = _range(ctx, P + ("k",), v.get("k", [1, out["N"] // 2]))
    out["d"] = _range(ctx, P + ("d",), v.get("d", 1))
    try:
        ScalarTorusParams(out["a"], out["delta"], out["g"], out["mu"], out["sigma_sq"])
    except MarginError as exc:
        ctx.fail(P, str(exc))
    if out["k"][1] > out["N"] // 2:
        ctx.fail(P + ("k",), f"k must not exceed N // 2 = {out['N'] // 2}")
    return out


# ---------------------------------------------------------------------------
# load / dump
# ---------------------------------------------------------------------------


def parse_config(text, source="<string>"):
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigError(f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    ctx = _Ctx(source, _line_map(text))
    raw = _mapping(ctx, (), raw, {"system", "graph", "coupling", "analysis", "sim", "torus_sweep"})
    cfg = AnalysisConfig(
        system=_norm_system(ctx, raw.get("system")),
        graph=_norm_graph(ctx, raw.get("graph")),
        coupling=_norm_coupling(ctx, raw.get("coupling")),
        analysis=_norm_analysis(ctx, raw.get("analysis")),
        sim=_norm_sim(ctx, raw.get("sim")),
        torus_sweep=_norm_sweep(ctx, raw.get("torus_sweep")),
        source=source,
    )
    _cross_check(cfg, ctx)
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, str(path))


def dump_config(cfg):
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def _cross_check(cfg, ctx):
    """Dimension checks that span several blocks."""
    if "edges" in cfg.graph:
        try:
            build_graph(cfg)
        except ConfigError as exc:
            ctx.fail(("graph", "edges"), str(exc).split("graph: ", 1)[-1])
    if not cfg.system:
        return
    try:
        sys, _ = build_system(cfg)
    except (InputError, ValueError) as exc:
        ctx.fail(("system",), str(exc))
    if cfg.coupling:
        try:
            G = build_coupling(cfg, sys)
        except InputError as exc:
            ctx.fail(("coupling",), str(exc))
        if G.shape != (sys.n, sys.m):
            ctx.fail(("coupling", "G"), f"must be {sys.n}x{sys.m}, got {G.shape[0]}x{G.shape[1]}")
    c = cfg.sim.get("init_center")
    if c is not None and len(c) != sys.n:
        ctx.fail(("sim", "init_center"), f"needs {sys.n} entries, got {len(c)}")


# ---------------------------------------------------------------------------
# model construction
# ---------------------------------------------------------------------------


def require(cfg, *blocks):
    for b in blocks:
        if not getattr(cfg, b):
            raise ConfigError(f"{cfg.source}: {b}: block is required for this command")


def build_system(cfg):
    s = cfg.system
    if "chua" in s:
        c = s["chua"]
        p = ChuaParams(c["alpha"], c["beta"], c["epsilon"], c["m0"], c["m1"])
        return build_chua_network_system(p, c["T"], c.get("D"), c.get("D1"))
    sys = LureSystem(np.array(s["A"]), np.array(s["B"]), np.array(s["C"]), np.array(s["D"]),
                     None if "D1" not in s else np.array(s["D1"]))
    nl = s["nonlinearity"]
    return sys, Nonlinearity(nl["kind"], tuple(nl["params"]))


def build_coupling(cfg, sys):
    c = cfg.coupling
    if not c:
        raise ConfigError(f"{cfg.source}: coupling: block is required for this command")
    return coupling_matrix(sys, c["g"] if "g" in c else np.array(c["G"]))


def build_graph(cfg):
    """An :class:`UncertainGraph`, or a :class:`TorusSpec` for torus configs."""
    g = cfg.graph
    if "torus" in g:
        t = g["torus"]
        return TorusSpec(t["N"], t["k"], t["d"])
    if "ring" in g:
        r = g["ring"]
        return ring_graph(r["N"], r["mu"], r["var"], r["uncertain"])
    det = [(e["i"], e["j"], e["mu"]) for e in g["edges"] if not e["uncertain"]]
    unc = [(e["i"], e["j"], e["mu"], e["var"]) for e in g["edges"] if e["uncertain"]]
    try:
        return UncertainGraph(g["nodes"], det, unc)
    except GraphError as exc:
        raise ConfigError(f"{cfg.source}: graph: {exc}") from None


def solver_options(cfg):
    tol = dict(cfg.analysis.get("tolerances", {}))
    tol.pop("bisection_tol", None)
    return SolverOptions().replace(**tol) if tol else SolverOptions()


def bisection_tol(cfg):
    return cfg.analysis.get("tolerances", {}).get("bisection_tol", 1e-3)


def sweep_params(cfg):
    s = cfg.torus_sweep
    p = ScalarTorusParams(s["a"], s["delta"], s["g"], s["mu"], s["sigma_sq"])
    return p, s["N"], range(s["k"][0], s["k"][1] + 1), range(s["d"][0], s["d"][1] + 1)
