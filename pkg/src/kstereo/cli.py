"""Command-line interface: ``embed``, ``eval``, ``apsp`` and ``selfcheck``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 self-check failure.
"""

import argparse
import json
import logging
import re
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import selfcheck
from .embedding import TrainConfig, TrainingAborted, evaluate, EmbeddingState, train
from .errors import GeometryError, GraphError, ParseError
from .graph import all_pairs_shortest_paths, largest_connected_component, load_edge_list
from .optim import OptimConfig, Strategy
from .stereographic import Curvature, Factor, ProductManifold

log = logging.getLogger("kstereo")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SELFCHECK = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ------------------------------------------------------------ manifold spec

@dataclass(frozen=True)
class FactorSpec:
    dim: int
    count: int
    kappa: float = 0.0
    frozen: bool = False

    def render(self):
        out = f"{self.dim}x{self.count}"
        if self.kappa != 0.0:
            out += f"@{self.kappa!r}"
        return out + ("!" if self.frozen else "")


@dataclass(frozen=True)
class ManifoldSpec:
    text: str
    factors: tuple

    def render(self):
        """Canonical text: no whitespace, ``@`` omitted for zero curvature."""
        return ",".join(f.render() for f in self.factors)

    def build(self):
        """Expand ``DIMxCOUNT`` groups into independent factors."""
        return ProductManifold([
            Factor(f.dim, Curvature(f.kappa, frozen=f.frozen))
            for f in self.factors for _ in range(f.count)
        ])


_FACTOR = re.compile(
    r"(?P<dim>\d+)x(?P<count>\d+)"
    r"(?:@(?P<kappa>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?))?"
    r"(?P<frozen>!)?")


def parse_manifold_spec(text):
    """Parse ``factor ("," factor)*`` with ``factor := DIM "x" COUNT ["@" FLOAT] ["!"]``.

    Examples
    --------
    >>> parse_manifold_spec("2x5@-1!").render()
    '2x5@-1.0!'
    """
    factors, pos = [], 0
    while True:
        m = _FACTOR.match(text, pos)
        if m is None:
            raise ParseError(f"malformed factor in manifold spec {text!r}", pos)
        dim, count = int(m["dim"]), int(m["count"])
        if dim == 0:
            raise ParseError("factor dimension must be positive", m.start("dim"))
        if count == 0:
            raise ParseError("factor count must be positive", m.start("count"))
        kappa = float(m["kappa"]) if m["kappa"] is not None else 0.0
        factors.append(FactorSpec(dim, count, kappa + 0.0, m["frozen"] is not None))
        pos = m.end()
        if pos == len(text):
            return ManifoldSpec(text, tuple(factors))
        if text[pos] != ",":
            raise ParseError(f"unexpected {text[pos]!r} in manifold spec", pos)
        pos += 1


# ------------------------------------------------------------ file formats

def _fmt(x):
    return f"{x:.17g}"


def write_embeddings(path, labels, state):
    lines = [f"# factor {i} dim {f.dim} kappa {_fmt(f.kappa)}"
             for i, f in enumerate(state.manifold.factors)]
    coords = state.coordinates()
    for label, row in zip(labels, coords):
        lines.append("\t".join([label] + [_fmt(v) for v in row]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_embeddings(path):
    """Return ``(manifold, labels, coordinates)`` from an embeddings TSV."""
    factors, labels, rows = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                m = re.fullmatch(r"# factor (\d+) dim (\d+) kappa (\S+)", line)
                if m is None:
                    raise ParseError("bad factor header", lineno)
                factors.append(Factor(int(m[2]), Curvature(float(m[3]))))
                continue
            fields = line.split("\t")
            labels.append(fields[0])
            try:
                rows.append([float(v) for v in fields[1:]])
            except ValueError:
                raise ParseError("non-numeric coordinate", lineno) from None
    if not factors:
        raise ParseError("no factor headers", 1)
    manifold = ProductManifold(factors)
    coords = np.array(rows, dtype=np.float64).reshape(len(rows), -1)
    if coords.shape[1] != manifold.ambient_dim:
        raise ValueError(f"rows have {coords.shape[1]} coordinates, headers declare "
                         f"{manifold.ambient_dim}")
    return manifold, labels, coords


def write_apsp(path_or_file, labels, d):
    out = ["\t".join([""] + labels)]
    for label, row in zip(labels, d):
        out.append("\t".join([label] + [str(int(v)) for v in row]))
    text = "\n".join(out) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# ------------------------------------------------------------ commands

def _load_graph(path, lcc):
    graph = load_edge_list(path)
    if lcc:
        graph, _ = largest_connected_component(graph)
    return graph


def cmd_embed(args):
    spec = parse_manifold_spec(args.manifold)
    # D_avg needs finite hop distances, so training always runs on the largest component
    graph = _load_graph(args.graph, True)
    distances = all_pairs_shortest_paths(graph)
    optim = OptimConfig(lr_points=args.lr, lr_kappa=args.lr_kappa, momentum=args.momentum,
                        strategy=args.strategy, switch_iter=args.switch_iter, seed=args.seed)
    config = TrainConfig(iterations=args.iters, batch_pairs=args.batch_pairs, optim=optim,
                         eval_every=args.eval_every)
    t0 = time.perf_counter()
    result = train(graph, spec.build(), config, distances=distances)
    wall = time.perf_counter() - t0
    state = result.state
    if args.out:
        write_embeddings(args.out, graph.labels, state)
    manifest = {
        "graph": args.graph,
        "manifold": spec.render(),
        "strategy": optim.strategy.value,
        "iters": args.iters,
        "switch_iter": args.switch_iter,
        "lr": args.lr,
        "lr_kappa": optim.kappa_lr,
        "momentum": args.momentum,
        "batch_pairs": config.pairs_per_batch(graph.node_count),
        "eval_every": args.eval_every,
        "lcc": args.lcc,
        "seed": args.seed,
        "nodes": graph.node_count,
        "kappas": [float(k) for k in state.manifold.kappas],
        "d_avg": result.final_d_avg,
        "rejected_steps": result.rejected_steps,
        "iterations": args.iters,
        "wall_time_s": round(wall, 3),
    }
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")
    print(f"D_avg {result.final_d_avg:.6g}  kappas {' '.join(_fmt(k) for k in manifest['kappas'])}")
    return EXIT_OK


def cmd_eval(args):
    graph = _load_graph(args.graph, True)
    manifold, labels, coords = read_embeddings(args.embeddings)
    index = {label: i for i, label in enumerate(graph.labels)}
    if sorted(labels) != sorted(graph.labels) or len(labels) != len(set(labels)):
        raise ValueError("embedding rows do not match the graph's node set")
    order = np.empty(len(labels), dtype=np.int64)
    for row, label in enumerate(labels):
        order[index[label]] = row
    state = EmbeddingState(manifold, manifold.split(coords[order]))
    value = evaluate(state, all_pairs_shortest_paths(graph))
    print(f"{value:.6g}" if value != 0 else "0.000000")
    return EXIT_OK


def cmd_apsp(args):
    graph = _load_graph(args.graph, args.lcc)
    d = all_pairs_shortest_paths(graph)
    write_apsp(args.out if args.out else sys.stdout, graph.labels, d)
    return EXIT_OK


def cmd_selfcheck(args):
    results = selfcheck.run(args.suite or None, args.samples, args.seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_SELFCHECK


# ------------------------------------------------------------ parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _non_negative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return value


def build_parser():
    parser = _Parser(prog="kstereo", description="Graph embeddings in products of constant-curvature spaces.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("embed", help="train an embedding")
    p.add_argument("--graph", required=True, help="edge list, one 'u v' pair per line")
    p.add_argument("--manifold", default="2x1", help="e.g. 5x2, 2x5@-1!, 2x1,3x1@0.5 (default 2x1)")
    p.add_argument("--strategy", default=Strategy.JOINT.value, choices=[s.value for s in Strategy])
    p.add_argument("--iters", type=_non_negative_int, default=20000)
    p.add_argument("--switch-iter", type=_non_negative_int, default=0,
                   help="warmstart: Euclidean iterations before curvature is released")
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--lr-kappa", type=float, default=None, help="default lr/10")
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch-pairs", type=_positive_int, default=None,
                   help="pairs per step (default min(4096, all pairs))")
    p.add_argument("--eval-every", type=_positive_int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="embeddings TSV")
    p.add_argument("--metrics", help="run manifest (JSON)")
    p.add_argument("--lcc", action="store_true",
                   help="accepted for symmetry; embed always keeps the largest component")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="full-batch D_avg of an embeddings file")
    p.add_argument("--graph", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--lcc", action="store_true", help="accepted; eval always uses the largest component")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("apsp", help="hop-distance matrix as TSV")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--lcc", action="store_true")
    p.set_defaults(func=cmd_apsp)

    p = sub.add_parser("selfcheck", help="run the numerical verification suites")
    p.add_argument("--suite", action="append", choices=list(selfcheck.SUITES),
                   help="repeatable; default all")
    p.add_argument("--samples", type=_positive_int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GraphError, GeometryError, TrainingAborted, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
