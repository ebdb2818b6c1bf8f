"""Scenario files: YAML documents describing one experiment sweep.

Links are 1-indexed in files and 0-indexed everywhere in the library.
Validation errors carry the line of the offending node.
"""
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .engine import RunConfig
from .graph import make_topology
from .sched import POLICY_NAMES
from .traffic import AdmissionScheme, ArrivalBatch, IIDTraffic, MarkovTraffic, ProductTraffic

TOP_KEYS = {"name", "description", "graph", "traffic", "admission", "schedulers", "run"}


class ScenarioError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class _Map(dict):
    line = None
    key_lines = None


class _Seq(list):
    line = None


def _convert(node):
    if isinstance(node, yaml.MappingNode):
        out = _Map()
        out.line = node.start_mark.line + 1
        out.key_lines = {}
        for k, v in node.value:
            key = _convert(k)
            if key in out:
                raise ScenarioError(f"duplicate key {key!r}", k.start_mark.line + 1)
            out[key] = _convert(v)
            out.key_lines[key] = k.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        out = _Seq(_convert(v) for v in node.value)
        out.line = node.start_mark.line + 1
        return out
    return yaml.safe_load(yaml.serialize(node))


def _parse_yaml(text):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                            mark.line + 1 if mark else None) from None
    if node is None:
        raise ScenarioError("empty scenario file", 1)
    return _convert(node)


def _line(obj, key=None):
    if key is not None and isinstance(obj, _Map) and obj.key_lines and key in obj.key_lines:
        return obj.key_lines[key]
    return getattr(obj, "line", None)


def _require_map(obj, what, allowed, required=()):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{what} must be a mapping", _line(obj))
    for k in obj:
        if k not in allowed:
            raise ScenarioError(f"unknown key {k!r} in {what}", _line(obj, k))
    for k in required:
        if k not in obj:
            raise ScenarioError(f"{what} is missing {k!r}", _line(obj))


def _int(v, what, line, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"{what} must be an integer, got {v!r}", line)
    if lo is not None and v < lo:
        raise ScenarioError(f"{what} must be >= {lo}, got {v}", line)
    return v


def _num(v, what, line):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{what} must be a number, got {v!r}", line)
    return float(v)


# --- sections -----------------------------------------------------------------

def _graph_spec(g):
    _require_map(g, "graph", {"kind", "num_links", "parts", "edges"}, ("kind",))
    kind = g["kind"]
    line = _line(g, "kind")
    if kind in ("collocated", "star"):
        k = _int(g.get("num_links"), "graph.num_links", _line(g, "num_links") or line, 1)
        spec = {"kind": kind, "num_links": k}
    elif kind == "complete_partite":
        parts = g.get("parts")
        if not isinstance(parts, list) or not parts:
            raise ScenarioError("graph.parts must be a nonempty list", _line(g, "parts") or line)
        spec = {"kind": kind, "parts": [_int(p, "part size", _line(parts), 1) for p in parts]}
    elif kind == "explicit":
        k = _int(g.get("num_links"), "graph.num_links", _line(g, "num_links") or line, 1)
        edges = g.get("edges", [])
        norm = []
        for e in edges:
            if not isinstance(e, list) or len(e) != 2:
                raise ScenarioError(f"edge must be a pair, got {e!r}", _line(edges))
            a, b = (_int(x, "edge endpoint", _line(e), 1) for x in e)
            if a > k or b > k or a == b:
                raise ScenarioError(f"bad edge {e!r} for {k} links", _line(e))
            norm.append([a, b])
        spec = {"kind": kind, "num_links": k, "edges": norm}
    else:
        raise ScenarioError(f"unknown graph kind {kind!r}", line)
    return spec


def build_graph(spec):
    if spec["kind"] == "complete_partite":
        return make_topology("complete_partite", parts=spec["parts"])
    if spec["kind"] == "explicit":
        return make_topology("explicit", num_links=spec["num_links"], edges=spec["edges"], one_indexed=True)
    return make_topology(spec["kind"], num_links=spec["num_links"])


def _pattern(p, k, line):
    if not isinstance(p, list):
        raise ScenarioError("pattern must be a list of [link, deadline, count] triples", line)
    out = []
    for t in p:
        tl = _line(t) or line
        if not isinstance(t, list) or len(t) != 3:
            raise ScenarioError(f"arrival entry must be [link, deadline, count], got {t!r}", tl)
        link = _int(t[0], "link", tl, 1)
        if link > k:
            raise ScenarioError(f"link {link} beyond {k} links", tl)
        out.append([link, _int(t[1], "deadline", tl, 1), _int(t[2], "count", tl, 0)])
    return out


def _traffic_spec(tr, k):
    if not isinstance(tr, dict):
        raise ScenarioError("traffic must be a mapping", _line(tr))
    mode = tr.get("mode")
    line = _line(tr, "mode") or _line(tr)
    if mode == "periodic":
        _require_map(tr, "traffic", {"mode", "patterns", "start"}, ("patterns",))
        spec = {"mode": mode, "patterns": _patterns(tr["patterns"], k, _line(tr, "patterns")),
                "start": _int(tr.get("start", 0), "start", line, 0)}
    elif mode == "markov":
        _require_map(tr, "traffic", {"mode", "patterns", "transition", "start"}, ("patterns", "transition"))
        spec = {"mode": mode, "patterns": _patterns(tr["patterns"], k, _line(tr, "patterns")),
                "transition": [[_num(x, "transition entry", _line(row)) for x in row] for row in tr["transition"]],
                "start": _int(tr.get("start", 0), "start", line, 0)}
    elif mode == "iid":
        _require_map(tr, "traffic", {"mode", "outcomes"}, ("outcomes",))
        groups = []
        for grp in tr["outcomes"]:
            _require_map(grp, "iid outcome group", {"links", "choices"}, ("links", "choices"))
            links = [_int(l, "link", _line(grp, "links"), 1) for l in grp["links"]]
            for l in links:
                if l > k:
                    raise ScenarioError(f"link {l} beyond {k} links", _line(grp, "links"))
            choices = []
            for c in grp["choices"]:
                cl = _line(c) or _line(grp, "choices")
                if not isinstance(c, list) or len(c) != 3:
                    raise ScenarioError("choice must be [count, deadline, prob]", cl)
                choices.append([_int(c[0], "count", cl, 0), _int(c[1], "deadline", cl, 1), _num(c[2], "prob", cl)])
            groups.append({"links": links, "choices": choices})
        spec = {"mode": mode, "outcomes": groups}
    elif mode == "product":
        _require_map(tr, "traffic", {"mode", "components"}, ("components",))
        spec = {"mode": mode, "components": [_traffic_spec(c, k) for c in tr["components"]]}
    else:
        raise ScenarioError(f"unknown traffic mode {mode!r}", line)
    return spec


def _patterns(pats, k, line):
    """Slot patterns; ``{repeat: n, slots: [...]}`` entries expand in place."""
    if not isinstance(pats, list) or not pats:
        raise ScenarioError("patterns must be a nonempty list", line)
    out = []
    for p in pats:
        pl = _line(p) or _line(pats)
        if isinstance(p, dict):
            _require_map(p, "repeat block", {"repeat", "slots"}, ("repeat", "slots"))
            n = _int(p["repeat"], "repeat", _line(p, "repeat"), 1)
            out.extend(_patterns(p["slots"], k, _line(p, "slots")) * n)
        else:
            out.append(_pattern(p, k, pl))
    return out


def _batch(p):
    return ArrivalBatch(tuple((l - 1, d, c) for l, d, c in p))


def build_traffic(spec, k):
    mode = spec["mode"]
    if mode == "periodic":
        return MarkovTraffic.periodic(k, [_batch(p) for p in spec["patterns"]], spec["start"])
    if mode == "markov":
        return MarkovTraffic(k, [_batch(p) for p in spec["patterns"]], np.array(spec["transition"]), spec["start"])
    if mode == "iid":
        outcomes = [[] for _ in range(k)]
        for grp in spec["outcomes"]:
            for l in grp["links"]:
                outcomes[l - 1].extend(tuple(c) for c in grp["choices"])
        return IIDTraffic(k, outcomes)
    return ProductTraffic(k, [build_traffic(c, k) for c in spec["components"]])


def _p_values(v, line):
    if isinstance(v, dict):
        _require_map(v, "admission.p", {"start", "stop", "step"}, ("start", "stop", "step"))
        start, stop, step = (_num(v[x], f"p.{x}", _line(v, x)) for x in ("start", "stop", "step"))
        if step <= 0:
            raise ScenarioError("p.step must be positive", _line(v, "step"))
        n = int(np.floor((stop - start) / step + 1e-9))
        return [round(start + i * step, 12) for i in range(n + 1)]
    if isinstance(v, list):
        if not v:
            raise ScenarioError("admission.p list is empty", line)
        return [_num(x, "p", line) for x in v]
    return [_num(v, "p", line)]


def _admission_spec(a, k):
    _require_map(a, "admission", {"kind", "p", "offsets"}, ("kind", "p"))
    if a["kind"] not in ("coin_toss", "deterministic"):
        raise ScenarioError(f"unknown admission kind {a['kind']!r}", _line(a, "kind"))
    ps = _p_values(a["p"], _line(a, "p"))
    offsets = a.get("offsets", [0.0] * k)
    if not isinstance(offsets, list) or len(offsets) != k:
        raise ScenarioError(f"admission.offsets needs {k} entries", _line(a, "offsets"))
    offsets = [_num(o, "offset", _line(a, "offsets")) for o in offsets]
    for p in ps:
        for o in offsets:
            if not 0.0 <= p + o <= 1.0 + 1e-12:
                raise ScenarioError(f"delivery ratio {p + o:g} outside [0, 1]", _line(a, "p"))
    return {"kind": a["kind"], "p": ps, "offsets": offsets}


def _run_spec(r):
    _require_map(r, "run", {"T", "seeds", "sample_every"}, ("T", "seeds"))
    seeds = r["seeds"]
    if not isinstance(seeds, list) or not seeds:
        raise ScenarioError("run.seeds must be a nonempty list", _line(r, "seeds"))
    return {
        "T": _int(r["T"], "run.T", _line(r, "T"), 1),
        "seeds": [_int(s, "seed", _line(r, "seeds"), 0) for s in seeds],
        "sample_every": _int(r.get("sample_every", 100), "run.sample_every", _line(r, "sample_every"), 1),
    }


@dataclass
class Scenario:
    name: str
    description: str
    graph_spec: dict
    traffic_spec: dict
    admission_spec: dict
    schedulers: list
    run_spec: dict
    graph: object = field(default=None, compare=False, repr=False)
    traffic: object = field(default=None, compare=False, repr=False)

    @property
    def num_links(self):
        return self.graph.num_links

    def to_dict(self):
        return {
            "name": self.name,
            "description": self.description,
            "graph": self.graph_spec,
            "traffic": self.traffic_spec,
            "admission": self.admission_spec,
            "schedulers": list(self.schedulers),
            "run": self.run_spec,
        }

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def base_config(self):
        adm = self.admission_spec
        p0 = [round(adm["p"][0] + o, 12) for o in adm["offsets"]]
        return RunConfig(
            graph=self.graph,
            traffic=self.traffic,
            admission=AdmissionScheme(adm["kind"], tuple(p0)),
            scheduler=self.schedulers[0],
            horizon=self.run_spec["T"],
            seed=self.run_spec["seeds"][0],
            sample_every=self.run_spec["sample_every"],
            scenario=self.name,
        )

    def configs(self):
        from .engine import expand_sweep
        return expand_sweep(self.base_config(), self.admission_spec["p"], self.run_spec["seeds"],
                            self.schedulers, self.admission_spec["offsets"])


def from_dict(doc, default_name=""):
    _require_map(doc, "scenario", TOP_KEYS, ("graph", "traffic", "admission", "schedulers", "run"))
    gspec = _graph_spec(doc["graph"])
    try:
        graph = build_graph(gspec)
    except ValueError as exc:
        raise ScenarioError(str(exc), _line(doc, "graph")) from None
    k = graph.num_links
    tspec = _traffic_spec(doc["traffic"], k)
    try:
        traffic = build_traffic(tspec, k)
    except ValueError as exc:
        raise ScenarioError(str(exc), _line(doc, "traffic")) from None
    adm = _admission_spec(doc["admission"], k)
    scheds = doc["schedulers"]
    if not isinstance(scheds, list) or not scheds:
        raise ScenarioError("schedulers must be a nonempty list", _line(doc, "schedulers"))
    for s in scheds:
        if s not in POLICY_NAMES:
            raise ScenarioError(f"unknown scheduler {s!r}", _line(doc, "schedulers"))
        if s == "amnd" and not graph.is_complete():
            raise ScenarioError("amnd needs a collocated graph", _line(doc, "schedulers"))
    run = _run_spec(doc["run"])
    return Scenario(
        name=str(doc.get("name", default_name)),
        description=str(doc.get("description", "")),
        graph_spec=gspec,
        traffic_spec=tspec,
        admission_spec=adm,
        schedulers=list(scheds),
        run_spec=run,
        graph=graph,
        traffic=traffic,
    )


def loads(text, default_name=""):
    return from_dict(_parse_yaml(text), default_name)


def load(path):
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), path.stem)


def builtin_names():
    root = resources.files("rtsched") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_builtin(name):
    root = resources.files("rtsched") / "scenarios"
    f = root / f"{name}.yaml"
    if not f.is_file():
        raise ScenarioError(f"no built-in scenario named {name!r}")
    return loads(f.read_text(encoding="utf-8"), name)


def resolve(ref):
    """A path to a scenario file, or the name of a built-in."""
    if Path(ref).is_file():
        return load(ref)
    return load_builtin(ref)


def apply_override(doc, assignment):
    """Set ``a.b.c=value`` in a parsed document; the value is read as YAML."""
    if "=" not in assignment:
        raise ScenarioError(f"override must look like key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = doc
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ScenarioError(f"override path {key!r} does not exist")
        node = node[p]
    if not isinstance(node, dict):
        raise ScenarioError(f"override path {key!r} does not exist")
    node[parts[-1]] = yaml.safe_load(raw)
    return doc


def read_document(ref):
    if Path(ref).is_file():
        return _parse_yaml(Path(ref).read_text(encoding="utf-8")), Path(ref).stem
    root = resources.files("rtsched") / "scenarios"
    f = root / f"{ref}.yaml"
    if not f.is_file():
        raise ScenarioError(f"{ref!r} is neither a file nor a built-in scenario")
    return _parse_yaml(f.read_text(encoding="utf-8")), ref
