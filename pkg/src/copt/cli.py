"""Command-line interface.

Exit codes: 0 success, 2 unreadable or malformed input, 3 invalid graph or
arguments, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .align import nmi, summarize, summarize_laplacian
from .errors import CoptError, NotPSD, SingularSketch, ZeroLine
from .optimizer import OptimConfig, optimize_distance, optimize_sketch, round_to_permutation
from .synthgen import FAMILIES, FamilySpec, generate

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3, 4


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--iters", type=int, default=None, help="iteration budget")
    p.add_argument("--restarts", type=int, default=1, help="independent restarts; the best is kept")
    p.add_argument("--lr", type=float, default=0.4, help="initial learning rate (default 0.4)")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="copt", description="Transport-based distances, sketches and alignments of graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distance", parents=[common], help="distance between two edge-list graphs")
    p.add_argument("graph_a")
    p.add_argument("graph_b")
    p.add_argument("--plan", help="write the transport plan here")
    p.add_argument("--loss", help="write the loss curve CSV here")

    p = sub.add_parser("sketch", parents=[common], help="sketch a graph to SIZE vertices")
    p.add_argument("graph")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--summarize", metavar="DOT", help="write a DOT summary here")
    p.add_argument("--threshold", type=float, default=None, help="summary edge threshold")
    p.add_argument("--loss-csv", help="write iteration,loss,lr,hiked rows here")

    p = sub.add_parser("retrieve", parents=[common], help="rank dataset graphs by similarity to a query")
    p.add_argument("query")
    p.add_argument("dataset", nargs="+")
    p.add_argument("--method", choices=["copt_sketch", "copt_sketch_canonical", "spectral"], default="copt_sketch")
    p.add_argument("--size", type=int, default=10, help="sketch size m, or k for spectral")
    p.add_argument("--metric", choices=["l1", "l2"], default=None)
    p.add_argument("--top-k", type=int, default=None, help="re-rank this many candidates by full distance")

    p = sub.add_parser("align", parents=[common], help="align two graphs of equal or different size")
    p.add_argument("graph_a")
    p.add_argument("graph_b")
    p.add_argument("--labels-a", help="community labels of graph_a, one per line")
    p.add_argument("--labels-b", help="community labels of graph_b, one per line")

    p = sub.add_parser("summarize", parents=[common], help="DOT summary of a sketch file")
    p.add_argument("sketch_file")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--labels-per-node", type=int, default=2)

    p = sub.add_parser("gen", parents=[common], help="emit a synthetic graph as an edge list")
    p.add_argument("family", choices=FAMILIES)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="family parameter")

    p = sub.add_parser("experiment", parents=[common], help="run a retrieval or alignment configuration")
    p.add_argument("config")
    p.add_argument("--csv", help="per-item results CSV (overrides the config's output)")
    return parser


def _cfg(args, **extra) -> OptimConfig:
    try:
        return OptimConfig(n_iter=args.iters, lr0=args.lr, seed=args.seed, restarts=args.restarts, **extra)
    except CoptError as e:
        raise _Fail(EXIT_INVALID, str(e)) from None


def _read_graph(path):
    try:
        return io.read_edge_list(path)
    except OSError as e:
        raise _Fail(EXIT_IO, f"cannot read {path}: {e.strerror or e}") from None
    except io.FormatError as e:
        raise _Fail(EXIT_IO, f"{path}: {e}") from None


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except (OSError, UnicodeDecodeError) as e:
        raise _Fail(EXIT_IO, f"cannot read {path}: {e}") from None


def _write(path, text: str, stdout) -> None:
    if path is None:
        stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise _Fail(EXIT_IO, f"cannot write {path}: {e.strerror or e}") from None


def _read_labels(path):
    text = _read_text(path)
    try:
        return [int(tok) for tok in text.split()]
    except ValueError:
        raise _Fail(EXIT_IO, f"{path}: labels must be integers") from None


def _cmd_distance(args, stdout):
    a, b = _read_graph(args.graph_a), _read_graph(args.graph_b)
    res = optimize_distance(a, b, _cfg(args))
    _write(args.out, f"distance: {res.distance!r}\n", stdout)
    if args.plan:
        _write(args.plan, io.format_plan(res.plan), stdout)
    if args.loss:
        _write(args.loss, io.format_loss_csv(res.loss_history, res.lr_history, res.hike_iterations), stdout)


def _cmd_sketch(args, stdout):
    g = _read_graph(args.graph)
    cfg = _cfg(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SingularSketch)
        res = optimize_sketch(g, args.size, cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _write(args.out, io.SketchFile.from_result(res, cfg).dumps(), stdout)
    if args.summarize:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _write(args.summarize, summarize(res, args.threshold).to_dot(), stdout)
    if args.loss_csv:
        _write(args.loss_csv, io.format_loss_csv(res.loss_history, res.lr_history, res.hike_iterations), stdout)
    print(f"distance: {res.distance!r}", file=sys.stderr)


def _cmd_retrieve(args, stdout):
    from .retrieval import pipeline_retrieve, vectorize

    query = _read_graph(args.query)
    data = [_read_graph(p) for p in args.dataset]
    cfg = _cfg(args)
    metric = args.metric or ("l2" if args.method == "spectral" else "l1")
    qv = vectorize(query, args.method, args.size, cfg)
    dv = [vectorize(g, args.method, args.size, cfg) for g in data]
    top_k = args.top_k or len(data)
    fine = cfg if args.top_k else None
    lines = []
    for c in pipeline_retrieve(query, data, dv, qv, metric, top_k, fine):
        fine_txt = "" if c.fine_distance is None else f" fine={c.fine_distance!r}"
        lines.append(f"{args.dataset[c.index]} coarse={c.coarse_distance!r}{fine_txt}")
    _write(args.out, "\n".join(lines) + "\n", stdout)


def _cmd_align(args, stdout):
    from .align import assignment_from_plan

    a, b = _read_graph(args.graph_a), _read_graph(args.graph_b)
    res = optimize_distance(a, b, _cfg(args))
    match = assignment_from_plan(res.plan)
    lines = [f"distance: {res.distance!r}"]
    if a.n == b.n:
        lines.append(f"residual: {round_to_permutation(res.plan)[1]!r}")
    lines.extend(f"{x} {y}" for x, y in enumerate(match) if y >= 0)
    if args.labels_a and args.labels_b:
        la, lb = _read_labels(args.labels_a), _read_labels(args.labels_b)
        if len(la) != a.n or len(lb) != b.n:
            raise _Fail(EXIT_INVALID, "label files must have one label per vertex")
        rows = [x for x in range(a.n) if match[x] >= 0]
        lines.append(f"nmi: {nmi([la[x] for x in rows], [lb[match[x]] for x in rows])!r}")
    _write(args.out, "\n".join(lines) + "\n", stdout)


def _cmd_summarize(args, stdout):
    try:
        sf = io.read_sketch(args.sketch_file)
    except OSError as e:
        raise _Fail(EXIT_IO, f"cannot read {args.sketch_file}: {e.strerror or e}") from None
    except io.FormatError as e:
        raise _Fail(EXIT_IO, f"{args.sketch_file}: {e}") from None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        summary = summarize_laplacian(sf.laplacian, sf.plan, args.threshold, args.labels_per_node)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _write(args.out, summary.to_dot(), stdout)


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _cmd_gen(args, stdout):
    params = {}
    for item in args.param:
        if "=" not in item:
            raise _Fail(EXIT_INVALID, f"--param expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        params[key] = _parse_value(value)
    g = generate(FamilySpec(args.family, args.n, params, args.seed))
    _write(args.out, io.format_edge_list(g), stdout)


def _cmd_experiment(args, stdout):
    from .align import run_alignment_experiment
    from .retrieval import run_retrieval_experiment

    try:
        cfg = io.RunConfig.loads(_read_text(args.config))
    except io.FormatError as e:
        raise _Fail(EXIT_IO, f"{args.config}: {e}") from None
    run = io.build_run(cfg)
    summary = run_retrieval_experiment(run) if cfg.experiment == "retrieval" else run_alignment_experiment(run)
    csv_path = args.csv or cfg.output
    if csv_path:
        try:
            summary.write_csv(csv_path)
        except OSError as e:
            raise _Fail(EXIT_IO, f"cannot write {csv_path}: {e.strerror or e}") from None
    _write(args.out, summary.line() + "\n", stdout)


COMMANDS = {
    "distance": _cmd_distance,
    "sketch": _cmd_sketch,
    "retrieve": _cmd_retrieve,
    "align": _cmd_align,
    "summarize": _cmd_summarize,
    "gen": _cmd_gen,
    "experiment": _cmd_experiment,
}


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args, stdout)
    except _Fail as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (NotPSD, ZeroLine, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"error: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except CoptError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
