"""Command-line front end: ``rtsched run | oracle | list``."""
import argparse
import sys
from pathlib import Path

from . import scenario as sc
from .engine import sweep, to_csv
from .graph import make_topology
from .oracle import SEARCH_LIMIT, HorizonInstance, OracleBoundError, max_gain, max_uniform_ratio
from .traffic import ArrivalBatch

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID, EXIT_BOUND = 0, 1, 2, 3


def _fail(message, code):
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_run(args, out=None):
    try:
        doc, stem = sc.read_document(args.scenario)
        for ov in args.override or ():
            sc.apply_override(doc, ov)
        if args.seed:
            doc.setdefault("run", {})["seeds"] = list(args.seed)
        scen = sc.from_dict(doc, stem)
        configs = scen.base_config()
    except sc.ScenarioError as exc:
        return _fail(str(exc), EXIT_INVALID)
    adm = scen.admission_spec
    try:
        rows = sweep(configs, adm["p"], scen.run_spec["seeds"], scen.schedulers, adm["offsets"],
                     threads=max(1, args.threads))
    except Exception as exc:  # noqa: BLE001 - anything here is a runtime failure
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_RUNTIME)
    text = to_csv(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        (out or sys.stdout).write(text)
    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"error: {r.scheduler} seed {r.seed} p {r.p}: {r.error}", file=sys.stderr)
    return EXIT_RUNTIME if failed else EXIT_OK


ORACLE_KEYS = {"graph", "buffer", "deficits", "arrivals", "admitted", "horizon", "cycle", "resolution", "limit"}


def _batch(entries, k, line):
    return ArrivalBatch(tuple((l - 1, d, c) for l, d, c in sc._pattern(entries, k, line)))


def load_oracle_instance(text):
    """Parse an oracle file into ``("gain", HorizonInstance, limit)`` or
    ``("ratio", (graph, cycle, resolution), limit)``."""
    doc = sc._parse_yaml(text)
    sc._require_map(doc, "oracle instance", ORACLE_KEYS, ("graph",))
    graph = sc.build_graph(sc._graph_spec(doc["graph"]))
    k = graph.num_links
    limit = sc._int(doc.get("limit", SEARCH_LIMIT), "limit", sc._line(doc, "limit"), 1)
    if "cycle" in doc:
        cyc = doc["cycle"]
        if not isinstance(cyc, list) or not cyc:
            raise sc.ScenarioError("cycle must be a nonempty list of slots", sc._line(doc, "cycle"))
        cycle = [_batch(p, k, sc._line(p) or sc._line(cyc)) for p in cyc]
        res = sc._num(doc.get("resolution", 1e-3), "resolution", sc._line(doc, "resolution"))
        return "ratio", (graph, cycle, res), limit
    for key in ("buffer", "deficits", "horizon"):
        if key not in doc:
            raise sc.ScenarioError(f"oracle instance is missing {key!r}", sc._line(doc))
    buf = doc["buffer"]
    if not isinstance(buf, list) or len(buf) != k or not all(isinstance(r, list) for r in buf):
        raise sc.ScenarioError(f"buffer needs one row of counts per link ({k})", sc._line(doc, "buffer"))
    depth = max(len(r) for r in buf)
    buffer = [[sc._int(x, "buffer count", sc._line(r), 0) for x in r] + [0] * (depth - len(r)) for r in buf]
    line = sc._line(doc, "deficits")
    deficits = doc["deficits"]
    if not isinstance(deficits, list) or len(deficits) != k:
        raise sc.ScenarioError(f"deficits needs {k} entries", line)
    deficits = [sc._num(x, "deficit", line) for x in deficits]
    horizon = sc._int(doc["horizon"], "horizon", sc._line(doc, "horizon"), 1)
    arrivals = [_batch(p, k, sc._line(p) or sc._line(doc, "arrivals")) for p in doc.get("arrivals", [])]
    admitted = [[sc._num(x, "admitted", sc._line(doc, "admitted")) for x in row] for row in doc.get("admitted", [])]
    try:
        inst = HorizonInstance(graph, buffer, deficits, arrivals, admitted, horizon)
    except ValueError as exc:
        raise sc.ScenarioError(str(exc), sc._line(doc)) from None
    return "gain", inst, limit


def cmd_oracle(args, out=None):
    out = out or sys.stdout
    try:
        kind, payload, limit = load_oracle_instance(Path(args.instance).read_text(encoding="utf-8"))
    except OSError as exc:
        return _fail(str(exc), EXIT_INVALID)
    except sc.ScenarioError as exc:
        return _fail(str(exc), EXIT_INVALID)
    try:
        if kind == "ratio":
            graph, cycle, res = payload
            ratio = max_uniform_ratio(graph, cycle, resolution=res, limit=limit)
            out.write(f"max uniform delivery ratio: {ratio:.9g}\n")
            return EXIT_OK
        gain, decisions = max_gain(payload, limit=limit)
    except OracleBoundError as exc:
        return _fail(f"instance exceeds oracle search bound: {exc}", EXIT_BOUND)
    out.write(f"max gain: {gain:.9g}\n")
    for h, dec in enumerate(decisions, 1):
        served = ", ".join(f"link {l + 1} deadline {d}" for l, d in sorted(dec.items())) or "idle"
        out.write(f"slot {h}: {served}\n")
    return EXIT_OK


def cmd_list(args, out=None):
    out = out or sys.stdout
    for name in sc.builtin_names():
        s = sc.load_builtin(name)
        out.write(f"{name}\t{s.description}\n")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="rtsched", description="Deadline-constrained wireless scheduling simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario sweep and emit CSV")
    p_run.add_argument("scenario", help="scenario file or built-in name")
    p_run.add_argument("--out", help="write CSV here instead of stdout")
    p_run.add_argument("--threads", type=int, default=1, help="worker processes for the sweep")
    p_run.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="set a scenario field, e.g. run.T=1000 (repeatable)")
    p_run.add_argument("--seed", type=int, action="append", help="replace run.seeds (repeatable)")
    p_run.set_defaults(func=cmd_run)

    p_or = sub.add_parser("oracle", help="optimal gain or max uniform delivery ratio of a small instance")
    p_or.add_argument("instance")
    p_or.set_defaults(func=cmd_oracle)

    p_ls = sub.add_parser("list", help="list built-in scenarios")
    p_ls.set_defaults(func=cmd_list)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
