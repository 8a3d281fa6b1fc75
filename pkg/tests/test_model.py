import json

import numpy as np
import pytest

from logbel import (
    AllZeroLikelihood,
    Cycle,
    DimensionMismatch,
    DuplicateId,
    Evidence,
    FormatError,
    InvalidProbability,
    LeafWithoutEvidence,
    MissingRoot,
    MultipleRoots,
    NotALeaf,
    RowNotStochastic,
    StateSpaceTooLarge,
    UnknownNode,
    brute_force_marginal,
    build_tree,
    chain_tree,
    full_propagate,
    load_network,
    normalize_tree,
    save_network,
    set_evidence,
    tree_to_spec,
)
from logbel.generate import random_tree


def identity_tree(evidence_e=(1.0, 1.0), evidence_f=(1.0, 1.0)):
    eye = [[1.0, 0.0], [0.0, 1.0]]
    return build_tree({"nodes": [
        {"id": "u", "domain": 2, "parent": None, "prior": [0.5, 0.5]},
        {"id": "e", "domain": 2, "parent": "u", "cpt": eye, "evidence": list(evidence_e)},
        {"id": "f", "domain": 2, "parent": "u", "cpt": eye, "evidence": list(evidence_f)},
    ]})


class TestBuildTree:
    def test_identity_three_node(self):
        tree = identity_tree()
        assert tree.n == 3
        assert tree.depth == 1
        assert tree.root == "u"
        assert tree.nodes["u"].children == ["e", "f"]

    def test_chain_fixture_shape(self):
        tree = chain_tree(9, k=2, rng=np.random.default_rng(0))
        assert list(tree.nodes) == ["x1", "e1", "x2", "e2", "x3", "e3", "x4", "e4", "e5"]
        for i in range(1, 4):
            assert tree.nodes[f"x{i}"].children == [f"e{i}", f"x{i+1}"]
        assert tree.nodes["x4"].children == ["e4", "e5"]
        assert tree.depth == 4

    def test_duplicate_id(self):
        with pytest.raises(DuplicateId):
            build_tree({"nodes": [
                {"id": "u", "domain": 2, "prior": [1.0, 0.0]},
                {"id": "u", "domain": 2, "parent": "u", "cpt": [[1, 0], [0, 1]]},
            ]})

    def test_missing_root(self):
        with pytest.raises(MissingRoot):
            build_tree({"nodes": [
                {"id": "a", "domain": 2, "parent": "b", "cpt": [[1, 0], [0, 1]]},
                {"id": "b", "domain": 2, "parent": "a", "cpt": [[1, 0], [0, 1]]},
            ]})

    def test_multiple_roots(self):
        with pytest.raises(MultipleRoots):
            build_tree({"nodes": [
                {"id": "a", "domain": 2, "prior": [0.5, 0.5]},
                {"id": "b", "domain": 2, "prior": [0.5, 0.5]},
            ]})

    def test_cycle_detached_from_root(self):
        with pytest.raises(Cycle):
            build_tree({"nodes": [
                {"id": "r", "domain": 1, "prior": [1.0], "evidence": [1.0]},
                {"id": "a", "domain": 2, "parent": "b", "cpt": [[1, 0], [0, 1]]},
                {"id": "b", "domain": 2, "parent": "a", "cpt": [[1, 0], [0, 1]]},
            ]})

    def test_row_not_stochastic(self):
        with pytest.raises(RowNotStochastic) as info:
            build_tree({"nodes": [
                {"id": "u", "domain": 2, "prior": [0.5, 0.5]},
                {"id": "e", "domain": 2, "parent": "u",
                 "cpt": [[0.6, 0.6], [0.5, 0.5]], "evidence": [1, 1]},
            ]})
        assert info.value.node == "e"
        assert info.value.row == 0

    def test_negative_cpt_entry(self):
        with pytest.raises(RowNotStochastic):
            build_tree({"nodes": [
                {"id": "u", "domain": 2, "prior": [0.5, 0.5]},
                {"id": "e", "domain": 2, "parent": "u",
                 "cpt": [[1.2, -0.2], [0.5, 0.5]], "evidence": [1, 1]},
            ]})

    def test_cpt_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            build_tree({"nodes": [
                {"id": "u", "domain": 2, "prior": [0.5, 0.5]},
                {"id": "e", "domain": 3, "parent": "u",
                 "cpt": [[0.5, 0.5], [0.5, 0.5]], "evidence": [1, 1, 1]},
            ]})

    def test_leaf_without_evidence(self):
        with pytest.raises(LeafWithoutEvidence):
            build_tree({"nodes": [
                {"id": "u", "domain": 2, "prior": [0.5, 0.5]},
                {"id": "e", "domain": 2, "parent": "u", "cpt": [[1, 0], [0, 1]]},
            ]})

    def test_unknown_keys_rejected(self):
        with pytest.raises(FormatError):
            build_tree({"nodes": [
                {"id": "u", "domain": 2, "prior": [0.5, 0.5], "color": "red"},
            ]})

    def test_evidence_on_internal_rejected(self):
        with pytest.raises(FormatError):
            build_tree({"nodes": [
                {"id": "u", "domain": 2, "prior": [0.5, 0.5], "evidence": [1, 1]},
                {"id": "e", "domain": 2, "parent": "u",
                 "cpt": [[1, 0], [0, 1]], "evidence": [1, 1]},
            ]})

    def test_prior_on_non_root_rejected(self):
        with pytest.raises(FormatError):
            build_tree({"nodes": [
                {"id": "u", "domain": 2, "prior": [0.5, 0.5]},
                {"id": "e", "domain": 2, "parent": "u", "cpt": [[1, 0], [0, 1]],
                 "prior": [0.5, 0.5], "evidence": [1, 1]},
            ]})


class TestEvidence:
    def test_one_hot(self):
        ev = Evidence.one_hot(3, 1)
        np.testing.assert_array_equal(ev.likelihood, [0.0, 1.0, 0.0])

    def test_one_hot_out_of_range(self):
        with pytest.raises(DimensionMismatch):
            Evidence.one_hot(3, 3)

    def test_all_zero_rejected(self):
        with pytest.raises(AllZeroLikelihood):
            Evidence(np.zeros(2))

    def test_negative_rejected(self):
        with pytest.raises(InvalidProbability):
            Evidence(np.array([0.5, -0.1]))


class TestSetEvidence:
    def test_hard_then_soft(self):
        tree = identity_tree()
        set_evidence(tree, "e", Evidence.one_hot(2, 1))
        np.testing.assert_array_equal(tree.nodes["e"].evidence, [0.0, 1.0])
        set_evidence(tree, "e", np.array([0.3, 0.7]))
        np.testing.assert_array_equal(tree.nodes["e"].evidence, [0.3, 0.7])

    def test_all_zero(self):
        with pytest.raises(AllZeroLikelihood):
            set_evidence(identity_tree(), "e", np.zeros(2))

    def test_not_a_leaf(self):
        with pytest.raises(NotALeaf):
            set_evidence(identity_tree(), "u", np.ones(2))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            set_evidence(identity_tree(), "e", np.ones(3))

    def test_only_target_leaf_touched(self):
        tree = identity_tree()
        before_f = tree.nodes["f"].evidence.copy()
        before_cpt = tree.nodes["e"].cpt.copy()
        set_evidence(tree, "e", np.array([0.2, 0.9]))
        np.testing.assert_array_equal(tree.nodes["f"].evidence, before_f)
        np.testing.assert_array_equal(tree.nodes["e"].cpt, before_cpt)


class TestNormalizeTree:
    def test_already_binary_unchanged(self):
        tree = identity_tree()
        normalized, id_map = normalize_tree(tree)
        assert normalized is tree
        assert id_map == {"u": "u", "e": "e", "f": "f"}

    def _wide_tree(self, fanout):
        rng = np.random.default_rng(fanout)
        nodes = [{"id": "r", "domain": 2, "prior": [0.4, 0.6]}]
        for i in range(fanout):
            nodes.append({"id": f"c{i}", "domain": 2, "parent": "r",
                          "cpt": [list(rng.dirichlet([1, 1])) for _ in range(2)],
                          "evidence": list(0.1 + rng.random(2))})
        return build_tree({"nodes": nodes})

    def test_three_children_one_dummy(self):
        tree = self._wide_tree(3)
        normalized, id_map = normalize_tree(tree)
        assert normalized.is_complete_binary()
        assert normalized.n == 5
        assert normalized.n <= 2 * tree.n
        assert set(id_map) == set(tree.nodes)

    def test_single_child_gets_unit_leaf(self):
        tree = build_tree({"nodes": [
            {"id": "r", "domain": 2, "prior": [0.5, 0.5]},
            {"id": "m", "domain": 2, "parent": "r", "cpt": [[0.9, 0.1], [0.3, 0.7]]},
            {"id": "e", "domain": 2, "parent": "m", "cpt": [[0.8, 0.2], [0.4, 0.6]],
             "evidence": [0.5, 1.0]},
        ]})
        normalized, _ = normalize_tree(tree)
        assert normalized.is_complete_binary()
        unit_leaves = [n for n in normalized.nodes.values() if n.domain == 1]
        assert len(unit_leaves) == 2  # r and m each had one child
        for leaf in unit_leaves:
            np.testing.assert_array_equal(leaf.evidence, [1.0])

    def test_marginals_preserved(self):
        rng = np.random.default_rng(42)
        for fanout in (3, 4, 5):
            tree = self._wide_tree(fanout)
            normalized, id_map = normalize_tree(tree)
            for node_id in tree.nodes:
                before = brute_force_marginal(tree, node_id)
                after = brute_force_marginal(normalized, id_map[node_id])
                np.testing.assert_allclose(after.dist, before.dist, atol=1e-12)

    def test_node_count_bound(self):
        rng = np.random.default_rng(7)
        for fanout in (3, 6, 9):
            tree = self._wide_tree(fanout)
            singles = sum(1 for n in tree.nodes.values() if len(n.children) == 1)
            normalized, _ = normalize_tree(tree)
            assert normalized.n <= 2 * tree.n + singles


class TestBruteForce:
    def test_identity_channel_pins_root(self):
        tree = identity_tree(evidence_e=(1.0, 0.0))
        bel = brute_force_marginal(tree, "u")
        np.testing.assert_allclose(bel.dist, [1.0, 0.0], atol=1e-15)

    def test_uniform_rows_leave_prior(self):
        tree = build_tree({"nodes": [
            {"id": "u", "domain": 2, "prior": [0.3, 0.7]},
            {"id": "e", "domain": 2, "parent": "u",
             "cpt": [[0.5, 0.5], [0.5, 0.5]], "evidence": [0.9, 0.1]},
            {"id": "f", "domain": 2, "parent": "u",
             "cpt": [[0.5, 0.5], [0.5, 0.5]], "evidence": [0.2, 0.8]},
        ]})
        bel = brute_force_marginal(tree, "u")
        np.testing.assert_allclose(bel.dist, [0.3, 0.7], atol=1e-12)

    def test_matches_full_propagate(self):
        tree = random_tree(7, k=2, rng=np.random.default_rng(123))
        table = full_propagate(tree)
        for node_id in tree.nodes:
            bf = brute_force_marginal(tree, node_id)
            np.testing.assert_allclose(bf.dist, table.beliefs[node_id].dist, atol=1e-12)

    def test_outputs_normalized(self):
        rng = np.random.default_rng(5)
        for seed in range(10):
            tree = random_tree(int(rng.integers(3, 15)), k=(2, 3), rng=rng)
            for node_id in tree.nodes:
                assert abs(brute_force_marginal(tree, node_id).dist.sum() - 1.0) < 1e-9

    def test_state_space_cap(self):
        tree = random_tree(31, k=2, rng=np.random.default_rng(1))
        with pytest.raises(StateSpaceTooLarge):
            brute_force_marginal(tree, tree.root, state_cap=1 << 10)

    def test_unknown_node(self):
        with pytest.raises(UnknownNode):
            brute_force_marginal(identity_tree(), "nope")


class TestRoundTrip:
    def test_spec_round_trip(self):
        tree = random_tree(15, k=(2, 3), rng=np.random.default_rng(9))
        spec = tree_to_spec(tree)
        again = build_tree(json.loads(json.dumps(spec)))
        assert list(again.nodes) == list(tree.nodes) or set(again.nodes) == set(tree.nodes)
        for node_id, node in tree.nodes.items():
            other = again.nodes[node_id]
            assert other.parent == node.parent
            assert other.children == node.children
            if node.cpt is not None:
                np.testing.assert_array_equal(other.cpt, node.cpt)
            if node.prior is not None:
                np.testing.assert_array_equal(other.prior, node.prior)
            if node.evidence is not None:
                np.testing.assert_array_equal(other.evidence, node.evidence)

    def test_file_round_trip(self, tmp_path):
        tree = random_tree(11, k=2, rng=np.random.default_rng(2))
        path = tmp_path / "net.json"
        save_network(tree, path)
        again = load_network(path)
        table_a = full_propagate(tree)
        table_b = full_propagate(again)
        for node_id in tree.nodes:
            np.testing.assert_allclose(table_b.beliefs[node_id].dist,
                                       table_a.beliefs[node_id].dist, atol=1e-15)
