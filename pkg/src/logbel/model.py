"""Tree-structured network model.

A causal tree is a rooted directed tree: the root carries a prior over its
domain, every other node carries a row-stochastic conditional matrix indexed
(parent value, own value), and every leaf carries a soft-evidence likelihood
vector over its own domain.  Child order is significant (it is the
declaration order of the child nodes) and drives the left-to-right leaf
order used by the contraction engine.

This module owns construction and validation, normalization to complete
binary form, evidence assignment, JSON (de)serialization, and the
joint-enumeration oracle that every other engine is tested against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllZeroLikelihood,
    Cycle,
    DimensionMismatch,
    DuplicateId,
    FormatError,
    ImpossibleEvidence,
    InvalidProbability,
    LeafWithoutEvidence,
    MissingRoot,
    MultipleRoots,
    NotALeaf,
    RowNotStochastic,
    StateSpaceTooLarge,
    UnknownNode,
)

STOCHASTIC_TOL = 1e-9
DEFAULT_STATE_CAP = 1 << 24

_NODE_KEYS = {"id", "domain", "parent", "cpt", "prior", "evidence"}


def as_prob_vector(values, *, what: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array with finite, nonnegative entries."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1:
        raise DimensionMismatch(f"{what} must be one-dimensional, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise InvalidProbability(f"{what} contains a non-finite entry")
    if np.any(vec < 0.0):
        raise InvalidProbability(f"{what} contains a negative entry")
    return vec


@dataclass(frozen=True)
class Belief:
    """A normalized distribution together with the constant that normalized it.

    dist sums to one; normalizer is the positive scalar the raw product was
    multiplied by (1 / total mass).
    """

    dist: np.ndarray
    normalizer: float


def normalize_belief(raw: np.ndarray, *, node: str = "?") -> Belief:
    total = float(raw.sum())
    if not total > 0.0:
        raise ImpossibleEvidence(f"total probability mass is zero at node {node!r}")
    return Belief(dist=raw / total, normalizer=1.0 / total)


@dataclass(frozen=True)
class Evidence:
    """Soft-evidence likelihood vector; at least one entry must be positive."""

    likelihood: np.ndarray

    def __post_init__(self):
        vec = as_prob_vector(self.likelihood, what="likelihood")
        if not np.any(vec > 0.0):
            raise AllZeroLikelihood("likelihood has no positive entry")
        object.__setattr__(self, "likelihood", vec)

    @classmethod
    def one_hot(cls, domain: int, index: int) -> "Evidence":
        if not 0 <= index < domain:
            raise DimensionMismatch(f"value index {index} outside domain of size {domain}")
        vec = np.zeros(domain)
        vec[index] = 1.0
        return cls(vec)


@dataclass
class Node:
    id: str
    domain: int
    parent: str | None = None
    children: list[str] = field(default_factory=list)
    cpt: np.ndarray | None = None       # (parent domain, own domain), row-stochastic
    prior: np.ndarray | None = None     # root only
    evidence: np.ndarray | None = None  # leaves only


class CausalTree:
    """Validated rooted tree.  Immutable after construction except through
    set_evidence."""

    def __init__(self, nodes: list[Node]):
        self.nodes: dict[str, Node] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise DuplicateId(f"node id {node.id!r} declared twice")
            self.nodes[node.id] = node
        self._derive_children(nodes)
        self.root = self._find_root()
        self._check_reachable()
        self._check_tables()

    # -- construction checks --------------------------------------------------

    def _derive_children(self, nodes: list[Node]) -> None:
        if any(node.children for node in nodes):
            # Children lists supplied explicitly (e.g. by normalize_tree);
            # verify they agree with the parent links.
            seen: dict[str, str] = {}
            for node in nodes:
                for child in node.children:
                    if child not in self.nodes:
                        raise UnknownNode(f"{node.id!r} lists unknown child {child!r}")
                    if child in seen:
                        raise Cycle(f"{child!r} appears under two parents")
                    seen[child] = node.id
                    if self.nodes[child].parent != node.id:
                        raise Cycle(f"child list of {node.id!r} disagrees with parent links")
            for node in nodes:
                if node.parent is not None and seen.get(node.id) != node.parent:
                    raise Cycle(f"{node.id!r} missing from its parent's child list")
            return
        for node in nodes:  # declaration order defines sibling order
            if node.parent is not None:
                if node.parent not in self.nodes:
                    raise UnknownNode(f"{node.id!r} references unknown parent {node.parent!r}")
                self.nodes[node.parent].children.append(node.id)

    def _find_root(self) -> str:
        roots = [n.id for n in self.nodes.values() if n.parent is None]
        if not roots:
            raise MissingRoot("no node without a parent")
        if len(roots) > 1:
            raise MultipleRoots(f"several parentless nodes: {roots}")
        return roots[0]

    def _check_reachable(self) -> None:
        seen = set()
        stack = [self.root]
        while stack:
            cur = stack.pop()
            if cur in seen:
                raise Cycle(f"node {cur!r} reached twice")
            seen.add(cur)
            stack.extend(self.nodes[cur].children)
        if len(seen) != len(self.nodes):
            missing = sorted(set(self.nodes) - seen)
            raise Cycle(f"nodes unreachable from root (cycle or orphan): {missing}")

    def _check_tables(self) -> None:
        for node in self.nodes.values():
            if not isinstance(node.domain, int) or node.domain < 1:
                raise FormatError(f"node {node.id!r}: domain must be a positive integer")
            is_root = node.parent is None
            is_leaf = not node.children
            if is_root:
                if node.cpt is not None:
                    raise FormatError(f"root {node.id!r} must not carry a conditional table")
                if node.prior is None:
                    raise FormatError(f"root {node.id!r} must carry a prior")
                prior = as_prob_vector(node.prior, what=f"prior of {node.id!r}")
                if prior.shape[0] != node.domain:
                    raise DimensionMismatch(
                        f"prior of {node.id!r} has length {prior.shape[0]}, domain is {node.domain}")
                if abs(prior.sum() - 1.0) > STOCHASTIC_TOL:
                    raise RowNotStochastic(node.id, "prior", f"prior of {node.id!r} does not sum to 1")
                node.prior = prior
            else:
                if node.prior is not None:
                    raise FormatError(f"non-root {node.id!r} must not carry a prior")
                if node.cpt is None:
                    raise FormatError(f"non-root {node.id!r} must carry a conditional table")
                cpt = np.asarray(node.cpt, dtype=np.float64)
                parent_domain = self.nodes[node.parent].domain
                if cpt.ndim != 2 or cpt.shape != (parent_domain, node.domain):
                    raise DimensionMismatch(
                        f"conditional table of {node.id!r} has shape {cpt.shape}, "
                        f"expected {(parent_domain, node.domain)}")
                if not np.all(np.isfinite(cpt)):
                    raise RowNotStochastic(node.id, "*", f"table of {node.id!r} has non-finite entries")
                for r in range(cpt.shape[0]):
                    if np.any(cpt[r] < 0.0) or abs(cpt[r].sum() - 1.0) > STOCHASTIC_TOL:
                        raise RowNotStochastic(node.id, r)
                node.cpt = cpt
            if is_leaf:
                if node.evidence is None:
                    if is_root:
                        continue  # a bare single-node tree carries only its prior
                    raise LeafWithoutEvidence(f"leaf {node.id!r} has no evidence")
                vec = as_prob_vector(node.evidence, what=f"evidence of {node.id!r}")
                if vec.shape[0] != node.domain:
                    raise DimensionMismatch(
                        f"evidence of {node.id!r} has length {vec.shape[0]}, domain is {node.domain}")
                if not np.any(vec > 0.0):
                    raise AllZeroLikelihood(f"evidence of {node.id!r} has no positive entry")
                node.evidence = vec
            elif node.evidence is not None:
                raise FormatError(f"internal node {node.id!r} must not carry evidence")

    # -- accessors -------------------------------------------------------------

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node {node_id!r}") from None

    def is_leaf(self, node_id: str) -> bool:
        return not self.node(node_id).children

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def k_max(self) -> int:
        return max(n.domain for n in self.nodes.values())

    @property
    def depth(self) -> int:
        depths = {self.root: 0}
        stack = [self.root]
        best = 0
        while stack:
            cur = stack.pop()
            for child in self.nodes[cur].children:
                depths[child] = depths[cur] + 1
                best = max(best, depths[child])
                stack.append(child)
        return best

    def node_depth(self, node_id: str) -> int:
        return len(self.ancestors(node_id))

    def ancestors(self, node_id: str) -> list[str]:
        """Proper ancestors, nearest first, ending at the root."""
        out = []
        cur = self.node(node_id).parent
        while cur is not None:
            out.append(cur)
            cur = self.nodes[cur].parent
        return out

    def leaf_order(self) -> list[str]:
        """Leaves in left-to-right frontier order."""
        out = []
        stack = [self.root]
        while stack:
            cur = stack.pop()
            kids = self.nodes[cur].children
            if not kids:
                out.append(cur)
            else:
                stack.extend(reversed(kids))
        return out

    def internal_ids(self) -> list[str]:
        return [n.id for n in self.nodes.values() if n.children]

    def post_order(self) -> list[str]:
        """Children before parents (iterative; safe on deep chains)."""
        out = []
        stack: list[tuple[str, bool]] = [(self.root, False)]
        while stack:
            cur, expanded = stack.pop()
            if expanded:
                out.append(cur)
            else:
                stack.append((cur, True))
                for child in reversed(self.nodes[cur].children):
                    stack.append((child, False))
        return out

    def is_complete_binary(self) -> bool:
        return all(len(n.children) in (0, 2) for n in self.nodes.values())

    def copy(self) -> "CausalTree":
        nodes = []
        for node in self.nodes.values():
            nodes.append(Node(
                id=node.id,
                domain=node.domain,
                parent=node.parent,
                children=list(node.children),
                cpt=None if node.cpt is None else node.cpt.copy(),
                prior=None if node.prior is None else node.prior.copy(),
                evidence=None if node.evidence is None else node.evidence.copy(),
            ))
        return CausalTree(nodes)


# -- construction from a network description -----------------------------------

def build_tree(spec: dict) -> CausalTree:
    """Build and validate a tree from a {"nodes": [...]} description.

    Child order is the declaration order of the child nodes.  Unknown keys
    are rejected so that silent typos in network files cannot change
    semantics.
    """
    if not isinstance(spec, dict) or "nodes" not in spec:
        raise FormatError('network description must be a dict with a "nodes" list')
    extra_top = set(spec) - {"nodes"}
    if extra_top:
        raise FormatError(f"unknown top-level keys: {sorted(extra_top)}")
    if not isinstance(spec["nodes"], list):
        raise FormatError('"nodes" must be a list')
    nodes = []
    for raw in spec["nodes"]:
        if not isinstance(raw, dict):
            raise FormatError("each node must be an object")
        extra = set(raw) - _NODE_KEYS
        if extra:
            raise FormatError(f"unknown node keys: {sorted(extra)}")
        if "id" not in raw or "domain" not in raw:
            raise FormatError('every node needs "id" and "domain"')
        node_id = raw["id"]
        if not isinstance(node_id, str) or not node_id:
            raise FormatError("node id must be a non-empty string")
        nodes.append(Node(
            id=node_id,
            domain=raw["domain"],
            parent=raw.get("parent"),
            cpt=None if raw.get("cpt") is None else np.asarray(raw["cpt"], dtype=np.float64),
            prior=None if raw.get("prior") is None else np.asarray(raw["prior"], dtype=np.float64),
            evidence=None if raw.get("evidence") is None else np.asarray(raw["evidence"], dtype=np.float64),
        ))
    return CausalTree(nodes)


def tree_to_spec(tree: CausalTree) -> dict:
    """Serialize to the network-description format (inverse of build_tree).

    Nodes are emitted in breadth-first order following child lists, so the
    rebuilt tree derives identical sibling order from declaration order.
    """
    order = []
    queue = [tree.root]
    while queue:
        cur = queue.pop(0)
        order.append(cur)
        queue.extend(tree.nodes[cur].children)
    out = []
    for node_id in order:
        node = tree.nodes[node_id]
        entry: dict = {"id": node.id, "domain": node.domain, "parent": node.parent}
        if node.cpt is not None:
            entry["cpt"] = node.cpt.tolist()
        if node.prior is not None:
            entry["prior"] = node.prior.tolist()
        if node.evidence is not None:
            entry["evidence"] = node.evidence.tolist()
        out.append(entry)
    return {"nodes": out}


def load_network(path) -> CausalTree:
    with open(path) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON in {path}: {exc}") from exc
    return build_tree(spec)


def save_network(tree: CausalTree, path) -> None:
    with open(path, "w") as fh:
        json.dump(tree_to_spec(tree), fh, indent=1)


# -- evidence -------------------------------------------------------------------

def set_evidence(tree: CausalTree, leaf_id: str, evidence) -> CausalTree:
    """Replace the likelihood vector of a leaf (in place)."""
    node = tree.node(leaf_id)
    if node.children:
        raise NotALeaf(f"{leaf_id!r} is not a leaf")
    vec = evidence.likelihood if isinstance(evidence, Evidence) else evidence
    vec = as_prob_vector(vec, what=f"evidence of {leaf_id!r}")
    if vec.shape[0] != node.domain:
        raise DimensionMismatch(
            f"evidence of {leaf_id!r} has length {vec.shape[0]}, domain is {node.domain}")
    if not np.any(vec > 0.0):
        raise AllZeroLikelihood(f"evidence of {leaf_id!r} has no positive entry")
    node.evidence = vec.copy()
    return tree


# -- normalization to complete binary form ---------------------------------------

def normalize_tree(tree: CausalTree) -> tuple[CausalTree, dict[str, str]]:
    """Return an equivalent complete binary tree and an id map.

    Nodes with more than two children are split with dummy internal nodes
    whose edge matrix is the identity over the parent's domain; nodes with
    exactly one child gain a virtual unit-domain evidence leaf (likelihood
    [1], all-ones column edge matrix).  Original ids are preserved, so the
    id map is the identity on them; beliefs of original nodes are unchanged.
    """
    if tree.is_complete_binary():
        return tree, {nid: nid for nid in tree.nodes}

    parent = {nid: n.parent for nid, n in tree.nodes.items()}
    children = {nid: list(n.children) for nid, n in tree.nodes.items()}
    domain = {nid: n.domain for nid, n in tree.nodes.items()}
    aux: list[Node] = []

    counter = 0

    def fresh(kind: str) -> str:
        nonlocal counter
        while True:
            cand = f"{kind}{counter}"
            counter += 1
            if cand not in domain:
                return cand

    work = list(tree.nodes)
    while work:
        cur = work.pop()
        kids = children[cur]
        if len(kids) == 1:
            virt = fresh("unit")
            domain[virt] = 1
            parent[virt] = cur
            children[virt] = []
            aux.append(Node(id=virt, domain=1, parent=cur,
                            cpt=np.ones((domain[cur], 1)), evidence=np.ones(1)))
            children[cur] = [kids[0], virt]
        elif len(kids) > 2:
            split = fresh("split")
            domain[split] = domain[cur]
            parent[split] = cur
            children[split] = kids[1:]
            for moved in kids[1:]:
                parent[moved] = split
            aux.append(Node(id=split, domain=domain[cur], parent=cur,
                            cpt=np.eye(domain[cur])))
            children[cur] = [kids[0], split]
            work.append(split)  # may still hold more than two children

    nodes = []
    for node in tree.nodes.values():
        nodes.append(Node(
            id=node.id, domain=node.domain, parent=parent[node.id],
            children=list(children[node.id]),
            cpt=None if node.cpt is None else node.cpt.copy(),
            prior=None if node.prior is None else node.prior.copy(),
            evidence=None if node.evidence is None else node.evidence.copy(),
        ))
    for node in aux:
        node.children = list(children[node.id])
        nodes.append(node)
    normalized = CausalTree(nodes)
    return normalized, {nid: nid for nid in tree.nodes}


# -- joint-enumeration oracle ------------------------------------------------------

def brute_force_marginal(tree: CausalTree, node_id: str, *,
                         state_cap: int = DEFAULT_STATE_CAP) -> Belief:
    """Exact marginal by enumerating the full joint (the testing oracle).

    Builds the joint weight tensor over all node domains: prior at the root,
    one conditional factor per edge, one likelihood factor per leaf with
    evidence.  Works on any valid tree, normalized or not.
    """
    tree.node(node_id)
    ids = list(tree.nodes)
    axis = {nid: i for i, nid in enumerate(ids)}
    dims = [tree.nodes[nid].domain for nid in ids]
    total_states = 1
    for d in dims:
        total_states *= d
        if total_states > state_cap:
            raise StateSpaceTooLarge(
                f"joint has more than {state_cap} states; raise state_cap to force enumeration")

    weight = np.ones(dims)
    for nid in ids:
        node = tree.nodes[nid]
        if node.parent is None:
            weight = weight * _expand(node.prior, (axis[nid],), dims)
        else:
            weight = weight * _expand(node.cpt, (axis[node.parent], axis[nid]), dims)
        if node.evidence is not None:
            weight = weight * _expand(node.evidence, (axis[nid],), dims)

    keep = axis[node_id]
    marg = weight.sum(axis=tuple(i for i in range(len(dims)) if i != keep))
    return normalize_belief(marg, node=node_id)


def _expand(arr: np.ndarray, axes: tuple[int, ...], dims: list[int]) -> np.ndarray:
    """Reshape a factor so it broadcasts over the joint tensor with the given axes."""
    if len(axes) == 2 and axes[0] > axes[1]:
        arr = arr.T
        axes = (axes[1], axes[0])
    shape = [1] * len(dims)
    for ax in axes:
        shape[ax] = dims[ax]
    return arr.reshape(shape)
