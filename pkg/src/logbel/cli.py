"""Command-line front end: replay evidence streams, verify strategies
against oracles, and emit operation-count benchmarks.

Stream grammar, one command per line ('#' comments and blank lines ignored):

    U <leaf-id> <value-index>     hard evidence (one-hot)
    S <leaf-id> <v1> ... <vk>     soft evidence likelihood
    Q <node-id>                   print the posterior marginal

Exit codes: 0 ok; 1 parse or validation failure; 2 impossible evidence at a
query; 3 verify found a deviation beyond tolerance.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .contraction import belief_query, contract, update_evidence
from .counters import OpCounters
from .errors import FormatError, ImpossibleEvidence, LogbelError
from .generate import balanced_tree, chain_tree, random_likelihood, random_tree
from .jointree import (
    Polytree,
    brute_polytree_marginal,
    build_engine,
    build_join_tree,
    build_polytree,
    compile_join_tree,
    extract_cliques,
    polytree_query,
    polytree_update,
    prior_marginals,
)
from .model import (
    Belief,
    CausalTree,
    Evidence,
    brute_force_marginal,
    build_tree,
    normalize_tree,
    set_evidence,
)
from .propagate import LazyState, belief, full_propagate, lazy_query, lazy_update

TREE_STRATEGIES = ("full", "lazy", "contract")


def load_problem(path) -> tuple[str, CausalTree | Polytree]:
    with open(path, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    if not isinstance(spec, dict):
        raise FormatError("network file must contain a JSON object")
    if "nodes" in spec:
        return "tree", build_tree(spec)
    if "variables" in spec:
        return "polytree", build_polytree(spec)
    raise FormatError("network file needs a 'nodes' or 'variables' list")


def parse_stream(path) -> list[tuple]:
    """Commands as tuples: ('soft', id, vec), ('hard', id, idx), ('query', id)."""
    ops: list[tuple] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            cmd, args = parts[0], parts[1:]
            try:
                if cmd == "U" and len(args) == 2:
                    ops.append(("hard", args[0], int(args[1])))
                elif cmd == "S" and len(args) >= 2:
                    ops.append(("soft", args[0],
                                np.array([float(v) for v in args[1:]])))
                elif cmd == "Q" and len(args) == 1:
                    ops.append(("query", args[0]))
                else:
                    raise ValueError
            except ValueError:
                raise FormatError(f"line {lineno}: cannot parse {line!r}") from None
    return ops


# -- strategy runners ---------------------------------------------------------------


class FullRunner:
    """Absorbs every update with a complete propagation pass."""

    name = "full"

    def __init__(self, tree: CausalTree):
        self.tree = tree.copy()
        self.counters = OpCounters()
        self.table = full_propagate(self.tree, self.counters)

    def update(self, node_id: str, vec: np.ndarray) -> None:
        set_evidence(self.tree, node_id, vec)
        self.table = full_propagate(self.tree, self.counters)

    def query(self, node_id: str) -> Belief:
        return belief(self.table, node_id)


class LazyRunner:
    name = "lazy"

    def __init__(self, tree: CausalTree):
        self.state = LazyState(tree)
        self.counters = self.state.counters

    def update(self, node_id: str, vec: np.ndarray) -> None:
        lazy_update(self.state, node_id, vec)

    def query(self, node_id: str) -> Belief:
        return lazy_query(self.state, node_id)


class ContractRunner:
    name = "contract"

    def __init__(self, tree: CausalTree):
        normalized, _ = normalize_tree(tree.copy())
        self.index = contract(normalized)
        self.counters = self.index.counters

    def update(self, node_id: str, vec: np.ndarray) -> None:
        update_evidence(self.index, node_id, vec)

    def query(self, node_id: str) -> Belief:
        return belief_query(self.index, node_id)


class PolytreeRunner:
    name = "polytree"

    def __init__(self, pt: Polytree):
        self.engine = build_engine(pt)
        self.counters = self.engine.counters

    def update(self, var_id: str, vec: np.ndarray) -> None:
        polytree_update(self.engine, var_id, vec)

    def query(self, var_id: str) -> Belief:
        return polytree_query(self.engine, var_id)


def _make_runner(kind: str, problem, strategy: str):
    if kind == "tree":
        if strategy not in TREE_STRATEGIES:
            raise FormatError(
                f"strategy {strategy!r} needs a polytree network; "
                f"tree networks support {', '.join(TREE_STRATEGIES)}")
        return {"full": FullRunner, "lazy": LazyRunner,
                "contract": ContractRunner}[strategy](problem)
    if strategy != "polytree":
        raise FormatError("polytree networks support only the 'polytree' strategy")
    return PolytreeRunner(problem)


def _domain_of(kind: str, problem, node_id: str) -> int:
    if kind == "tree":
        return problem.node(node_id).domain
    if node_id not in problem.variables:
        raise FormatError(f"no variable {node_id!r}")
    return problem.variables[node_id].domain


def _evidence_vec(kind: str, problem, op) -> np.ndarray:
    if op[0] == "hard":
        return Evidence.one_hot(_domain_of(kind, problem, op[1]), op[2]).likelihood
    return op[2]


def _format_query(node_id: str, dist: np.ndarray) -> str:
    return f"Q {node_id} " + " ".join(f"{p:.12f}" for p in dist)


def cmd_run(args) -> int:
    try:
        kind, problem = load_problem(args.network)
        ops = parse_stream(args.ops)
        runner = _make_runner(kind, problem, args.strategy)
    except (LogbelError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for op in ops:
        try:
            if op[0] == "query":
                print(_format_query(op[1], runner.query(op[1]).dist))
            else:
                runner.update(op[1], _evidence_vec(kind, problem, op))
        except ImpossibleEvidence as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        except LogbelError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    return 0


# -- verify -------------------------------------------------------------------------


class _BruteTreeOracle:
    def __init__(self, tree: CausalTree):
        self.tree = tree.copy()

    def update(self, node_id, vec):
        set_evidence(self.tree, node_id, vec)

    def query(self, node_id):
        return brute_force_marginal(self.tree, node_id)


class _FullTreeOracle(FullRunner):
    pass


class _BrutePolytreeOracle:
    def __init__(self, pt: Polytree):
        self.pt = pt
        self.evidence: dict[str, np.ndarray] = {}

    def update(self, var_id, vec):
        self.evidence[var_id] = vec

    def query(self, var_id):
        return brute_polytree_marginal(self.pt, self.evidence, var_id)


class _FullPolytreeOracle:
    """Independent slow path: full propagation over the compiled clique tree,
    no contraction involved."""

    def __init__(self, pt: Polytree):
        cliques = extract_cliques(pt)
        jt = build_join_tree(cliques, pt)
        self.compiled = compile_join_tree(jt, pt, prior_marginals(pt))
        self.tree = self.compiled.tree
        self.cliques = cliques

    def update(self, var_id, vec):
        set_evidence(self.tree, self.compiled.evidence_leaf[var_id], vec)

    def query(self, var_id):
        table = full_propagate(self.tree)
        clique_bel = belief(table, self.compiled.clique_node[var_id])
        dist = self.cliques[var_id].projection(var_id).T @ clique_bel.dist
        return Belief(dist=dist, normalizer=clique_bel.normalizer)


def cmd_verify(args, _corrupt=None) -> int:
    """Replay the stream under the log-time strategy and an oracle; compare
    every query.  _corrupt is a fault-injection hook used by tests: it
    receives the ContractionIndex after construction."""
    try:
        kind, problem = load_problem(args.network)
        ops = parse_stream(args.ops)
        if kind == "tree":
            subject = ContractRunner(problem)
            oracle = _BruteTreeOracle(problem) if args.oracle == "brute" \
                else _FullTreeOracle(problem)
            if _corrupt is not None:
                _corrupt(subject.index)
        else:
            subject = PolytreeRunner(problem)
            oracle = _BrutePolytreeOracle(problem) if args.oracle == "brute" \
                else _FullPolytreeOracle(problem)
            if _corrupt is not None:
                _corrupt(subject.engine.index)
    except (LogbelError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    max_dev = 0.0
    queries = 0
    try:
        for op in ops:
            if op[0] == "query":
                queries += 1
                got = subject.query(op[1]).dist
                want = oracle.query(op[1]).dist
                dev = float(np.max(np.abs(got - want)))
                max_dev = max(max_dev, dev)
                if dev > args.tol:
                    print(f"FAIL query #{queries} {op[1]!r}: deviation {dev:.3e} "
                          f"> tol {args.tol:.3e}")
                    return 3
            else:
                vec = _evidence_vec(kind, problem, op)
                subject.update(op[1], vec)
                oracle.update(op[1], vec)
    except ImpossibleEvidence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LogbelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"PASS {queries} queries, max deviation {max_dev:.3e} (tol {args.tol:.3e})")
    return 0


# -- bench --------------------------------------------------------------------------


def _bench_tree(shape: str, n: int, k: int, seed: int) -> CausalTree:
    rng = np.random.default_rng([seed, n, k])
    maker = {"chain": chain_tree, "balanced": balanced_tree, "random": random_tree}[shape]
    return maker(n, k, rng, evidence_floor=0.5)


def _bench_ops(tree: CausalTree, cycles: int, seed: int) -> list[tuple]:
    rng = np.random.default_rng([seed, tree.n, 17])
    leaves = tree.leaf_order()
    ids = list(tree.nodes)
    ops = []
    for _ in range(cycles):
        leaf = leaves[int(rng.integers(len(leaves)))]
        ops.append(("soft", leaf,
                    random_likelihood(tree.nodes[leaf].domain, rng, floor=0.5)))
        ops.append(("query", ids[int(rng.integers(len(ids)))]))
    return ops


def _run_bench_strategy(tree: CausalTree, strategy: str, ops: list[tuple]) -> list[dict]:
    t0 = time.perf_counter_ns()
    runner = {"full": FullRunner, "contract": ContractRunner}[strategy](tree)
    build_ns = time.perf_counter_ns() - t0
    build_snap = runner.counters.snapshot()
    rows = {
        "build": {"count": 1, "mult_adds": build_snap[3],
                  "equation_evals": build_snap[2], "wall_ns": build_ns},
        "update": {"count": 0, "mult_adds": 0, "equation_evals": 0, "wall_ns": 0},
        "query": {"count": 0, "mult_adds": 0, "equation_evals": 0, "wall_ns": 0},
    }
    for op in ops:
        key = "query" if op[0] == "query" else "update"
        before = runner.counters.snapshot()
        t0 = time.perf_counter_ns()
        if key == "query":
            runner.query(op[1])
        else:
            runner.update(op[1], op[2])
        elapsed = time.perf_counter_ns() - t0
        after = runner.counters.snapshot()
        rows[key]["count"] += 1
        rows[key]["mult_adds"] += after[3] - before[3]
        rows[key]["equation_evals"] += after[2] - before[2]
        rows[key]["wall_ns"] += elapsed
    return [{"strategy": strategy, "op": op_kind, **vals} for op_kind, vals in rows.items()]


def cmd_bench(args) -> int:
    try:
        sizes = [int(v) for v in str(args.n).split(",") if v]
    except ValueError:
        print(f"error: cannot parse --n {args.n!r}", file=sys.stderr)
        return 1
    if not sizes or min(sizes) < 3 or args.cycles < 1 or args.k < 2:
        print("error: need n >= 3, k >= 2, cycles >= 1", file=sys.stderr)
        return 1
    all_rows = []
    for n in sizes:
        tree = _bench_tree(args.shape, n, args.k, args.seed)
        ops = _bench_ops(tree, args.cycles, args.seed)
        per_cycle = {}
        for strategy in ("full", "contract"):
            for row in _run_bench_strategy(tree, strategy, ops):
                all_rows.append({"shape": args.shape, "n": tree.n, "k": args.k, **row})
                if row["op"] in ("update", "query"):
                    per_cycle[strategy] = per_cycle.get(strategy, 0) + row["mult_adds"]
        ratio = per_cycle["contract"] / per_cycle["full"] if per_cycle.get("full") else float("nan")
        print(f"{args.shape} n={tree.n} k={args.k}: per-cycle mult_adds "
              f"contract/full = {ratio:.4f}")
    try:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=[
                "shape", "n", "k", "strategy", "op",
                "count", "mult_adds", "equation_evals", "wall_ns"])
            writer.writeheader()
            writer.writerows(all_rows)
    except OSError as exc:
        print(f"error: cannot write {args.csv!r}: {exc}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logbel",
        description="Exact inference on causal trees and polytrees with "
                    "logarithmic-time updates")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replay an update/query stream")
    run.add_argument("--network", required=True)
    run.add_argument("--ops", required=True)
    run.add_argument("--strategy", default="contract",
                     choices=["full", "lazy", "contract", "polytree"])
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="compare a strategy against an oracle")
    verify.add_argument("--network", required=True)
    verify.add_argument("--ops", required=True)
    verify.add_argument("--oracle", default="brute", choices=["brute", "full"])
    verify.add_argument("--tol", type=float, default=1e-8)
    verify.set_defaults(func=cmd_verify)

    bench = sub.add_parser("bench", help="operation-count benchmark, CSV output")
    bench.add_argument("--shape", default="chain",
                       choices=["chain", "balanced", "random"])
    bench.add_argument("--n", default="600")
    bench.add_argument("--k", type=int, default=2)
    bench.add_argument("--cycles", type=int, default=1000)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--csv", required=True)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
