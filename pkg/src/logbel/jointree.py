"""Polytrees compiled into join trees backed by the contraction engine.

A polytree's moral graph is chordal and its maximal cliques are exactly the
families {v} union parents(v), so the join tree has one clique per variable,
one edge per polytree edge, and singleton separators.  The join tree is
itself a causal tree over clique-valued variables; edge conditionals are
stored factored as (projection J) . (separator-conditional R), which keeps
rake updates at O(K L^2) instead of O(K^3).

Clique states use mixed-radix indexing with the clique's own variable most
significant, then its parents in declaration order.  CPT rows likewise run
over joint parent assignments with the first parent most significant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .contraction import ContractionIndex, belief_query, contract, update_evidence
from .counters import OpCounters
from .errors import (
    AllZeroLikelihood,
    ConstructionError,
    DimensionMismatch,
    DimensionOverflow,
    DuplicateId,
    FormatError,
    ImpossibleEvidence,
    NotAPolytree,
    RowNotStochastic,
    UnknownVariable,
    ZeroMarginalDivisor,
)
from .model import (
    STOCHASTIC_TOL,
    Belief,
    CausalTree,
    Evidence,
    as_prob_vector,
    build_tree,
    normalize_tree,
)

DEFAULT_CLIQUE_CAP = 4096

_VAR_KEYS = {"id", "domain", "parents", "cpt", "prior"}


@dataclass
class Variable:
    id: str
    domain: int
    parents: list[str]
    cpt: np.ndarray | None     # (prod parent domains) x domain
    prior: np.ndarray | None   # parentless variables only


class Polytree:
    """Singly connected Bayesian network; parents are ordered per variable."""

    def __init__(self, variables: list[Variable]):
        self.variables: dict[str, Variable] = {}
        for var in variables:
            if var.id in self.variables:
                raise DuplicateId(f"duplicate variable id {var.id!r}")
            self.variables[var.id] = var
        if not self.variables:
            raise FormatError("polytree has no variables")
        self._check_structure()
        self._check_tables()
        self.topological_order()  # rejects directed cycles the edge count misses

    def _check_structure(self) -> None:
        edges: set[tuple[str, str]] = set()
        for var in self.variables.values():
            if len(set(var.parents)) != len(var.parents):
                raise FormatError(f"variable {var.id!r} repeats a parent")
            for parent in var.parents:
                if parent not in self.variables:
                    raise UnknownVariable(f"variable {var.id!r} has unknown parent {parent!r}")
                if parent == var.id:
                    raise NotAPolytree(f"variable {var.id!r} is its own parent")
                edges.add((min(parent, var.id), max(parent, var.id)))
        n = len(self.variables)
        if len(edges) != n - 1:
            raise NotAPolytree(
                f"underlying graph has {len(edges)} edges over {n} variables; "
                "a polytree needs exactly n - 1")
        # n - 1 distinct edges form a tree iff the graph is connected
        adjacency: dict[str, list[str]] = {v: [] for v in self.variables}
        for a, b in edges:
            adjacency[a].append(b)
            adjacency[b].append(a)
        seen = set()
        stack = [next(iter(self.variables))]
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(adjacency[cur])
        if len(seen) != n:
            raise NotAPolytree("underlying graph is disconnected")

    def _check_tables(self) -> None:
        for var in self.variables.values():
            if not isinstance(var.domain, int) or var.domain < 1:
                raise FormatError(f"variable {var.id!r} has invalid domain {var.domain!r}")
            if var.parents:
                if var.cpt is None:
                    raise FormatError(f"variable {var.id!r} has parents but no cpt")
                rows = int(np.prod([self.variables[p].domain for p in var.parents]))
                if var.cpt.shape != (rows, var.domain):
                    raise DimensionMismatch(
                        f"cpt of {var.id!r} has shape {var.cpt.shape}, "
                        f"expected {(rows, var.domain)}")
                for r in range(rows):
                    row = var.cpt[r]
                    if np.any(row < 0.0) or not np.all(np.isfinite(row)):
                        raise RowNotStochastic(var.id, r, f"cpt row {r} of {var.id!r} is invalid")
                    if abs(row.sum() - 1.0) > STOCHASTIC_TOL:
                        raise RowNotStochastic(
                            var.id, r, f"cpt row {r} of {var.id!r} sums to {row.sum()!r}")
            else:
                if var.prior is None:
                    raise FormatError(f"parentless variable {var.id!r} needs a prior")
                if var.prior.shape != (var.domain,):
                    raise DimensionMismatch(f"prior of {var.id!r} has wrong length")
                if abs(var.prior.sum() - 1.0) > STOCHASTIC_TOL or np.any(var.prior < 0.0):
                    raise RowNotStochastic(var.id, "prior", f"prior of {var.id!r} is not a distribution")

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def max_parents(self) -> int:
        return max(len(v.parents) for v in self.variables.values())

    def topological_order(self) -> list[str]:
        order: list[str] = []
        pending = {vid: len(v.parents) for vid, v in self.variables.items()}
        ready = [vid for vid, deg in pending.items() if deg == 0]
        children: dict[str, list[str]] = {vid: [] for vid in self.variables}
        for vid, var in self.variables.items():
            for p in var.parents:
                children[p].append(vid)
        while ready:
            cur = ready.pop()
            order.append(cur)
            for child in children[cur]:
                pending[child] -= 1
                if pending[child] == 0:
                    ready.append(child)
        if len(order) != self.n:
            raise NotAPolytree("directed cycle among variables")
        return order


def build_polytree(spec: dict) -> Polytree:
    if not isinstance(spec, dict) or "variables" not in spec:
        raise FormatError("polytree spec must be a mapping with a 'variables' list")
    extra = set(spec) - {"variables"}
    if extra:
        raise FormatError(f"unknown top-level keys {sorted(extra)}")
    variables = []
    for raw in spec["variables"]:
        unknown = set(raw) - _VAR_KEYS
        if unknown:
            raise FormatError(f"unknown variable keys {sorted(unknown)}")
        if "id" not in raw or "domain" not in raw:
            raise FormatError("every variable needs 'id' and 'domain'")
        variables.append(Variable(
            id=raw["id"],
            domain=raw["domain"],
            parents=list(raw.get("parents", [])),
            cpt=np.asarray(raw["cpt"], dtype=np.float64) if raw.get("cpt") is not None else None,
            prior=np.asarray(raw["prior"], dtype=np.float64) if raw.get("prior") is not None else None,
        ))
    return Polytree(variables)


def load_polytree(path) -> Polytree:
    with open(path, "r", encoding="utf-8") as fh:
        return build_polytree(json.load(fh))


# -- cliques and join tree --------------------------------------------------------


@dataclass
class Clique:
    """Family clique of one variable: members [variable, *parents].

    Mixed-radix state indexing, first member most significant.
    """

    variable: str
    members: list[str]
    domains: list[int]
    K: int = field(init=False)
    strides: list[int] = field(init=False)

    def __post_init__(self):
        self.K = int(np.prod(self.domains))
        strides = []
        acc = 1
        for d in reversed(self.domains):
            strides.append(acc)
            acc *= d
        self.strides = list(reversed(strides))

    def digit(self, state: int, member: str) -> int:
        i = self.members.index(member)
        return (state // self.strides[i]) % self.domains[i]

    def projection(self, member: str) -> np.ndarray:
        """K x k_member 0/1 matrix picking the member's coordinate; exactly
        one 1 per row."""
        i = self.members.index(member)
        out = np.zeros((self.K, self.domains[i]))
        states = np.arange(self.K)
        out[states, (states // self.strides[i]) % self.domains[i]] = 1.0
        return out


def _moral_graph(pt: Polytree) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {v: set() for v in pt.variables}
    for var in pt.variables.values():
        for p in var.parents:
            adj[var.id].add(p)
            adj[p].add(var.id)
        for i, a in enumerate(var.parents):
            for b in var.parents[i + 1:]:
                adj[a].add(b)
                adj[b].add(a)
    return adj


def _is_chordal(adj: dict[str, set[str]]) -> bool:
    """Maximum cardinality search; the graph is chordal iff the resulting
    order is a perfect elimination order."""
    weight = {v: 0 for v in adj}
    order: list[str] = []
    numbered: set[str] = set()
    for _ in range(len(adj)):
        pick = max((v for v in adj if v not in numbered), key=lambda v: (weight[v], v))
        numbered.add(pick)
        order.append(pick)
        for u in adj[pick]:
            if u not in numbered:
                weight[u] += 1
    position = {v: i for i, v in enumerate(reversed(order))}
    for v in adj:
        later = [u for u in adj[v] if position[u] > position[v]]
        if not later:
            continue
        first = min(later, key=lambda u: position[u])
        if any(u != first and u not in adj[first] for u in later):
            return False
    return True


def _maximal_cliques(adj: dict[str, set[str]]) -> list[frozenset[str]]:
    out: list[frozenset[str]] = []

    def extend(r: set[str], p: set[str], x: set[str]) -> None:
        if not p and not x:
            out.append(frozenset(r))
            return
        pivot = max(p | x, key=lambda u: len(adj[u] & p))
        for v in list(p - adj[pivot]):
            extend(r | {v}, p & adj[v], x & adj[v])
            p.remove(v)
            x.add(v)

    extend(set(), set(adj), set())
    return out


def extract_cliques(pt: Polytree) -> dict[str, Clique]:
    """One family clique per variable, with the moral graph verified chordal
    and every maximal clique verified to be a family."""
    cliques = {}
    for vid, var in pt.variables.items():
        members = [vid] + list(var.parents)
        cliques[vid] = Clique(variable=vid, members=members,
                              domains=[pt.variables[m].domain for m in members])
    adj = _moral_graph(pt)
    if not _is_chordal(adj):
        raise ConstructionError("moral graph of a polytree must be chordal")
    families = {frozenset(c.members) for c in cliques.values()}
    for maximal in _maximal_cliques(adj):
        if maximal not in families:
            raise ConstructionError(f"maximal clique {sorted(maximal)} is not a family")
    return cliques


@dataclass
class JoinTree:
    """Clique tree with one edge per polytree edge and singleton separators."""

    cliques: dict[str, Clique]
    root: str                                  # variable id of the root clique
    children: dict[str, list[tuple[str, str]]]  # clique -> [(child clique, separator var)]
    parent: dict[str, tuple[str, str] | None]   # clique -> (parent clique, separator var)


def build_join_tree(cliques: dict[str, Clique], pt: Polytree,
                    root_var: str | None = None) -> JoinTree:
    """Root the clique graph; verify running intersection and c = 1."""
    if root_var is None:
        root_var = next(v for v in pt.variables if not pt.variables[v].parents)
    if root_var not in cliques:
        raise UnknownVariable(f"no variable {root_var!r}")

    undirected: dict[str, list[tuple[str, str]]] = {v: [] for v in cliques}
    for vid, var in pt.variables.items():
        for p in var.parents:
            # polytree edge p -> vid, separator {p}
            undirected[p].append((vid, p))
            undirected[vid].append((p, p))

    children: dict[str, list[tuple[str, str]]] = {v: [] for v in cliques}
    parent: dict[str, tuple[str, str] | None] = {root_var: None}
    stack = [root_var]
    seen = {root_var}
    while stack:
        cur = stack.pop()
        for nxt, sep in undirected[cur]:
            if nxt in seen:
                continue
            seen.add(nxt)
            parent[nxt] = (cur, sep)
            children[cur].append((nxt, sep))
            stack.append(nxt)
    if len(seen) != len(cliques):
        raise ConstructionError("join tree is not connected")
    for order in children.values():
        order.sort()

    # c = 1 and running intersection, checked rather than assumed
    for vid, (pc, sep) in ((v, pr) for v, pr in parent.items() if pr is not None):
        overlap = set(cliques[vid].members) & set(cliques[pc].members)
        if overlap != {sep}:
            raise ConstructionError(
                f"cliques {vid!r} and {pc!r} share {sorted(overlap)}, expected [{sep!r}]")
    for var in pt.variables:
        holders = {cid for cid, c in cliques.items() if var in c.members}
        reachable = set()
        inside = [next(iter(holders))]
        while inside:
            cur = inside.pop()
            if cur in reachable:
                continue
            reachable.add(cur)
            nbrs = [c for c, _ in children[cur]]
            if parent[cur] is not None:
                nbrs.append(parent[cur][0])
            inside.extend(n for n in nbrs if n in holders)
        if reachable != holders:
            raise ConstructionError(f"running intersection fails for {var!r}")
    return JoinTree(cliques=cliques, root=root_var, children=children, parent=parent)


def prior_marginals(pt: Polytree) -> dict[str, np.ndarray]:
    """Evidence-free marginal of every variable, one topological pass.

    Parents of a polytree node are marginally independent, so the joint
    parent distribution is the Kronecker product of parent marginals.
    """
    marginals: dict[str, np.ndarray] = {}
    for vid in pt.topological_order():
        var = pt.variables[vid]
        if not var.parents:
            marginals[vid] = var.prior.copy()
            continue
        joint = np.ones(1)
        for p in var.parents:
            joint = np.kron(joint, marginals[p])
        marginals[vid] = var.cpt.T @ joint
    return marginals


# -- factored coefficients ---------------------------------------------------------

class FactoredMatrix:
    """K_parent x K_child conditional stored as left (K_parent x L) times
    right (L x K_child); never materialized outside tests.

    Implements the coefficient protocol used by contraction: matvec,
    rmatvec, rake_product, materialize.  Only four product shapes occur,
    tagged on the counters so tests can assert nothing else sneaks in.
    """

    __slots__ = ("left", "right")

    def __init__(self, left: np.ndarray, right: np.ndarray):
        if left.shape[1] != right.shape[0]:
            raise DimensionMismatch(
                f"factored parts do not chain: {left.shape} x {right.shape}")
        self.left = left
        self.right = right

    @property
    def shape(self) -> tuple[int, int]:
        return (self.left.shape[0], self.right.shape[1])

    @property
    def width(self) -> int:
        return self.left.shape[1]

    def matvec(self, vec: np.ndarray, counters: OpCounters) -> np.ndarray:
        counters.tag("matxvec")
        counters.count_matvec(*self.right.shape)
        counters.count_matvec(*self.left.shape)
        return self.left @ (self.right @ vec)

    def rmatvec(self, vec: np.ndarray, counters: OpCounters) -> np.ndarray:
        counters.tag("matxvec")
        counters.count_matvec(self.left.shape[1], self.left.shape[0])
        counters.count_matvec(self.right.shape[1], self.right.shape[0])
        return self.right.T @ (self.left.T @ vec)

    def rake_product(self, diag: np.ndarray, other: "FactoredMatrix",
                     counters: OpCounters) -> "FactoredMatrix":
        """self . Diag(diag) . other, keeping self's left factor fixed and
        folding everything else into the right factor: O(K L^2) work."""
        if not isinstance(other, FactoredMatrix):
            raise DimensionMismatch("factored coefficients only combine with factored ones")
        counters.tag("LKxdiag")
        counters.count_diag_scale(*self.right.shape)
        scaled = self.right * diag
        counters.tag("LKxKL")
        counters.count_matmat(scaled.shape[0], scaled.shape[1], other.left.shape[1])
        m1 = scaled @ other.left
        counters.tag("LLxLK")
        counters.count_matmat(m1.shape[0], m1.shape[1], other.right.shape[1])
        m2 = m1 @ other.right
        return FactoredMatrix(self.left, m2)

    def materialize(self) -> np.ndarray:
        return self.left @ self.right

    def __repr__(self):
        return f"<FactoredMatrix {self.shape} width={self.width}>"


def factored_coeff_update(parent_coeff: FactoredMatrix, diag: np.ndarray,
                          raked_coeff: FactoredMatrix,
                          counters: OpCounters) -> FactoredMatrix:
    """One rake rewrite in factored form; the building block the engine runs
    through contraction's coefficient protocol."""
    return parent_coeff.rake_product(diag, raked_coeff, counters)


# -- compilation to a causal tree --------------------------------------------------


def _separator_conditional(pt: Polytree, clique: Clique, separator: str,
                           marginals: dict[str, np.ndarray]) -> np.ndarray:
    """R[s_value, clique_state] = p(clique state | separator = s_value).

    For separator s among the parents: rows combine the child CPT with the
    marginals of the other parents.  For s equal to the clique's own
    variable the parent marginals enter in full and the variable's own
    marginal divides out (Bayes flip), which requires it to be positive.
    """
    w = clique.variable
    var = pt.variables[w]
    k_s = pt.variables[separator].domain
    R = np.zeros((k_s, clique.K))
    divide_by_own = separator == w
    if divide_by_own:
        own = marginals[w]
        if np.any(own == 0.0):
            raise ZeroMarginalDivisor(
                f"marginal of {w!r} has a zero entry; cannot root the join tree there")
    for state in range(clique.K):
        digits = {m: clique.digit(state, m) for m in clique.members}
        row = 0
        for p in var.parents:
            row = row * pt.variables[p].domain + digits[p]
        p_w = var.cpt[row, digits[w]] if var.parents else var.prior[digits[w]]
        weight = p_w
        for p in var.parents:
            if p != separator or divide_by_own:
                weight *= marginals[p][digits[p]]
        if divide_by_own:
            weight /= marginals[w][digits[w]]
        R[digits[separator], state] = weight
    return R


def _clique_prior(pt: Polytree, clique: Clique, marginals: dict[str, np.ndarray]) -> np.ndarray:
    var = pt.variables[clique.variable]
    prior = np.zeros(clique.K)
    for state in range(clique.K):
        digits = {m: clique.digit(state, m) for m in clique.members}
        row = 0
        for p in var.parents:
            row = row * pt.variables[p].domain + digits[p]
        weight = var.cpt[row, digits[clique.variable]] if var.parents \
            else var.prior[digits[clique.variable]]
        for p in var.parents:
            weight *= marginals[p][digits[p]]
        prior[state] = weight
    return prior


@dataclass
class CompiledTree:
    """Normalized causal tree over cliques plus the factored edge forms."""

    tree: CausalTree
    coeffs: dict[str, FactoredMatrix]   # tree node id -> factored edge into it
    clique_node: dict[str, str]         # variable id -> clique tree-node id
    evidence_leaf: dict[str, str]       # variable id -> indicator leaf id


def compile_join_tree(jt: JoinTree, pt: Polytree,
                      marginals: dict[str, np.ndarray] | None = None,
                      state_cap: int = DEFAULT_CLIQUE_CAP) -> CompiledTree:
    """Emit the clique causal tree: domain-K clique nodes, factored edge
    conditionals, one indicator evidence leaf per variable, then normalize
    to complete binary form with factored identities on the dummy edges."""
    if marginals is None:
        marginals = prior_marginals(pt)
    for clique in jt.cliques.values():
        if clique.K > state_cap:
            raise DimensionOverflow(
                f"clique of {clique.variable!r} has {clique.K} states, cap is {state_cap}")

    nodes: list[dict] = []
    factored: dict[str, FactoredMatrix] = {}
    clique_node: dict[str, str] = {}
    evidence_leaf: dict[str, str] = {}

    stack = [jt.root]
    while stack:
        cvar = stack.pop()
        clique = jt.cliques[cvar]
        node_id = f"C:{cvar}"
        clique_node[cvar] = node_id
        entry: dict = {"id": node_id, "domain": clique.K}
        if jt.parent[cvar] is None:
            entry["parent"] = None
            entry["prior"] = _clique_prior(pt, clique, marginals).tolist()
        else:
            parent_cvar, separator = jt.parent[cvar]
            entry["parent"] = f"C:{parent_cvar}"
            J = jt.cliques[parent_cvar].projection(separator)
            R = _separator_conditional(pt, clique, separator, marginals)
            entry["cpt"] = (J @ R).tolist()
            factored[node_id] = FactoredMatrix(J, R)
        nodes.append(entry)
        leaf_id = f"E:{cvar}"
        evidence_leaf[cvar] = leaf_id
        J_own = clique.projection(cvar)
        nodes.append({"id": leaf_id, "domain": clique.domains[0],
                      "parent": node_id, "cpt": J_own.tolist(),
                      "evidence": [1.0] * clique.domains[0]})
        factored[leaf_id] = FactoredMatrix(J_own, np.eye(clique.domains[0]))
        # declaration order fixes sibling order: evidence leaf first
        stack.extend(cv for cv, _ in reversed(jt.children[cvar]))
    raw_tree = build_tree({"nodes": nodes})
    tree, _ = normalize_tree(raw_tree)
    for node_id, node in tree.nodes.items():
        if node.parent is None or node_id in factored:
            continue
        # normalization dummies: identity splitters and unit virtual leaves
        k_parent = tree.nodes[node.parent].domain
        if node.domain == k_parent:
            eye = np.eye(k_parent)
            factored[node_id] = FactoredMatrix(eye, eye)
        else:
            factored[node_id] = FactoredMatrix(node.cpt.copy(), np.eye(node.domain))
    return CompiledTree(tree=tree, coeffs=factored,
                        clique_node=clique_node, evidence_leaf=evidence_leaf)


# -- the engine --------------------------------------------------------------------


@dataclass
class PolytreeEngine:
    polytree: Polytree
    join_tree: JoinTree
    compiled: CompiledTree
    index: ContractionIndex
    marginals: dict[str, np.ndarray]
    evidence: dict[str, np.ndarray]

    @property
    def counters(self) -> OpCounters:
        return self.index.counters


def build_engine(pt: Polytree, root_var: str | None = None,
                 state_cap: int = DEFAULT_CLIQUE_CAP) -> PolytreeEngine:
    cliques = extract_cliques(pt)
    jt = build_join_tree(cliques, pt, root_var=root_var)
    marginals = prior_marginals(pt)
    compiled = compile_join_tree(jt, pt, marginals, state_cap=state_cap)
    index = contract(compiled.tree, coeffs=dict(compiled.coeffs))
    evidence = {vid: np.ones(v.domain) for vid, v in pt.variables.items()}
    return PolytreeEngine(polytree=pt, join_tree=jt, compiled=compiled,
                          index=index, marginals=marginals, evidence=evidence)


def polytree_update(engine: PolytreeEngine, var_id: str, likelihood) -> PolytreeEngine:
    if var_id not in engine.polytree.variables:
        raise UnknownVariable(f"no variable {var_id!r}")
    vec = likelihood.likelihood if isinstance(likelihood, Evidence) else \
        as_prob_vector(likelihood, what=f"evidence of {var_id!r}")
    if vec.shape[0] != engine.polytree.variables[var_id].domain:
        raise DimensionMismatch(
            f"evidence of {var_id!r} has length {vec.shape[0]}, "
            f"domain is {engine.polytree.variables[var_id].domain}")
    if not np.any(vec > 0.0):
        raise AllZeroLikelihood(f"evidence of {var_id!r} has no positive entry")
    update_evidence(engine.index, engine.compiled.evidence_leaf[var_id], vec)
    engine.evidence[var_id] = vec.copy()
    return engine


def polytree_query(engine: PolytreeEngine, var_id: str, via: str | None = None) -> Belief:
    """Posterior marginal of a variable: clique belief marginalized onto the
    variable's coordinate.  via selects any clique containing the variable
    (defaults to the variable's own)."""
    if var_id not in engine.polytree.variables:
        raise UnknownVariable(f"no variable {var_id!r}")
    clique_var = var_id if via is None else via
    if clique_var not in engine.join_tree.cliques:
        raise UnknownVariable(f"no clique for {clique_var!r}")
    clique = engine.join_tree.cliques[clique_var]
    if var_id not in clique.members:
        raise UnknownVariable(f"clique of {clique_var!r} does not contain {var_id!r}")
    clique_bel = belief_query(engine.index, engine.compiled.clique_node[clique_var])
    dist = clique.projection(var_id).T @ clique_bel.dist
    return Belief(dist=dist, normalizer=clique_bel.normalizer)


def brute_polytree_marginal(pt: Polytree, evidence: dict[str, np.ndarray],
                            var_id: str) -> Belief:
    """Joint enumeration oracle over all variable assignments."""
    if var_id not in pt.variables:
        raise UnknownVariable(f"no variable {var_id!r}")
    order = list(pt.variables)
    axis = {vid: i for i, vid in enumerate(order)}
    shape = tuple(pt.variables[v].domain for v in order)
    weight = np.ones(shape)
    for vid in order:
        var = pt.variables[vid]
        axes = [axis[p] for p in var.parents] + [axis[vid]]
        dims = [pt.variables[p].domain for p in var.parents] + [var.domain]
        table = var.cpt.reshape(dims) if var.parents else var.prior
        aligned = np.transpose(table, np.argsort(axes))
        view_shape = [shape[ax] if ax in axes else 1 for ax in range(len(order))]
        weight = weight * aligned.reshape(view_shape)
        if vid in evidence:
            ev_shape = [var.domain if ax == axis[vid] else 1 for ax in range(len(order))]
            weight = weight * evidence[vid].reshape(ev_shape)
    other = tuple(ax for ax in range(len(order)) if ax != axis[var_id])
    raw = weight.sum(axis=other)
    total = raw.sum()
    if total <= 0.0:
        raise ImpossibleEvidence(f"total probability mass is zero at {var_id!r}")
    return Belief(dist=raw / total, normalizer=1.0 / total)


def random_polytree(n_vars: int, p: int, k, rng) -> Polytree:
    """Random singly connected network with at most p parents per variable."""
    n_vars = max(1, n_vars)
    ids = [f"v{i}" for i in range(n_vars)]
    domains = {vid: (k if isinstance(k, int) else int(rng.integers(k[0], k[1] + 1)))
               for vid in ids}
    parents: dict[str, list[str]] = {vid: [] for vid in ids}
    for i in range(1, n_vars):
        other = ids[int(rng.integers(i))]
        new = ids[i]
        # orient the attachment edge without exceeding p parents anywhere
        if len(parents[other]) < p and (len(parents[new]) >= p or rng.random() < 0.5):
            parents[other].append(new)
        else:
            parents[new].append(other)
    variables = []
    for vid in ids:
        rows = int(np.prod([domains[q] for q in parents[vid]])) if parents[vid] else 0
        if parents[vid]:
            cpt = np.stack([rng.dirichlet(np.ones(domains[vid])) for _ in range(rows)])
            variables.append(Variable(vid, domains[vid], parents[vid], cpt, None))
        else:
            variables.append(Variable(vid, domains[vid], [], None,
                                      rng.dirichlet(np.ones(domains[vid]))))
    return Polytree(variables)
