"""
Tests for Rips graphs, component certificates and the criterion decision.
"""

import random
import time
from fractions import Fraction

import networkx as nx
import pytest

from raycert.exceptions import ContractViolation, ModelError
from raycert.lengths import Length
from raycert.rips_multiscale import (
    ComponentCertificate,
    Outcome,
    ScaleGraph,
    Status,
    UnionFind,
    analyze_scales,
    analyze_scales_async,
    build_rips,
    classify_components,
    decide_criterion,
    merge_tree,
    scan_scales,
    tree_from_results,
)
from raycert.bm_homology import LimitVerdict, bm_report
from raycert.ray_synthesis import synthesize_ray_structure, validate_ray_structure
from raycert.space_models import (
    Box,
    FiniteCloud,
    Lattice,
    LatticeWithDefects,
    bundled_model_paths,
    distance,
    enumerate_window,
)


def random_graph(rng: random.Random, size: int, density: float):
    labels = [f"v{i}" for i in range(size)]
    edges = [
        (labels[i], labels[j])
        for i in range(size)
        for j in range(i + 1, size)
        if rng.random() < density
    ]
    return labels, edges


class TestUnionFind:
    """Test the disjoint-set forest."""

    def test_union_and_groups(self):
        """Groups come back sorted and ordered by smallest member."""
        forest = UnionFind(6)
        assert forest.union(4, 1)
        assert forest.union(5, 0)
        assert not forest.union(1, 4)
        assert forest.num_components == 4
        assert forest.groups() == [[0, 5], [1, 4], [2], [3]]


class TestScaleGraph:
    """Test graphs built from explicit edges."""

    def test_components_match_networkx(self):
        """Union-find components agree with networkx on random graphs."""
        rng = random.Random(7)
        for _ in range(100):
            labels, edges = random_graph(rng, rng.randint(1, 30), rng.uniform(0.0, 0.2))
            graph = ScaleGraph.from_edges(labels, edges)
            reference = nx.Graph()
            reference.add_nodes_from(labels)
            reference.add_edges_from(edges)
            expected = {frozenset(c) for c in nx.connected_components(reference)}
            assert {frozenset(c) for c in graph.components} == expected

    def test_component_order(self):
        """Components are ordered by their first vertex in label order."""
        graph = ScaleGraph.from_edges(["a", "b", "c", "d"], [("d", "b")])
        assert graph.components == (("a",), ("b", "d"), ("c",))
        assert graph.degree_max == 1

    def test_self_loop_rejected(self):
        """Self-loops violate the graph contract."""
        with pytest.raises(ContractViolation):
            ScaleGraph.from_edges(["a"], [("a", "a")])

    def test_duplicate_labels_rejected(self):
        """Vertex labels must be distinct."""
        with pytest.raises(ContractViolation):
            ScaleGraph.from_edges(["a", "a"], [])


class TestBuildRips:
    """Test D(alpha) on windows."""

    def test_lattice_edges(self, lattice2d):
        """At alpha=1 the grid graph has 2n(n-1) edges."""
        window = enumerate_window(lattice2d, Box.from_bounds([0, 0], [4, 4]))
        graph = build_rips(window, Length.of(1), lattice2d)
        assert len(graph.edges) == 2 * 5 * 4
        assert len(graph.components) == 1
        assert graph.degree_max == 4

    def test_threshold_is_closed(self, lattice1d):
        """Points exactly alpha apart are joined."""
        window = enumerate_window(lattice1d, Box.from_bounds([0], [2]))
        assert build_rips(window, Length.of(1), lattice1d).edges == (("0", "1"), ("1", "2"))
        assert build_rips(window, Length.of("0.99"), lattice1d).edges == ()

    def test_wedge_basepoints(self, bundled_window):
        """Basepoints of distinct rays are 1 apart."""
        model, window = bundled_window("wedge3")
        graph = build_rips(window, Length.of(1), model)
        assert ("a:0", "b:0") in graph.edges
        assert len(graph.components) == 1

    @pytest.mark.parametrize("alpha", [Length.of(1), Length.from_square(2), Length.of(3)], ids=str)
    @pytest.mark.parametrize("path", bundled_model_paths(), ids=lambda p: p.stem)
    def test_matches_pairwise_scan(self, bundled_window, path, alpha):
        """The bucketed edge set equals a scan over every pair of window points."""
        model, window = bundled_window(path.stem)
        if len(window) > 500:
            pytest.skip("pairwise scan is limited to 500 points")
        labels = window.labels
        expected = {
            frozenset((a, b))
            for i, a in enumerate(labels)
            for b in labels[i + 1 :]
            if distance(model, a, b) <= alpha
        }
        graph = build_rips(window, alpha, model)
        assert {frozenset(edge) for edge in graph.edges} == expected
        assert len(graph.edges) == len(expected)


class TestClassifyComponents:
    """Test component certificates."""

    def test_lattice_infinite(self, bundled_window, one):
        """The lattice component at alpha=1 is certified infinite."""
        model, window = bundled_window("lattice1d")
        graph = build_rips(window, one, model)
        certs = classify_components(model, graph, window)
        assert [c.status for c in certs] == [Status.CERTIFIED_INFINITE]

    def test_clusters_finite(self, bundled_window, one):
        """Every power-of-two cluster is certified finite at alpha=1."""
        model, window = bundled_window("clusters_pow2")
        graph = build_rips(window, one, model)
        certs = classify_components(model, graph, window)
        assert len(certs) == 5
        assert all(c.status is Status.CERTIFIED_FINITE for c in certs)
        assert certs[3].margin == Length.of(8)

    def test_cut_cluster_is_unknown(self, bundled_model, one):
        """A component cut by the window edge cannot be certified either way."""
        model = bundled_model("clusters_pow2")
        window = enumerate_window(model, Box.from_bounds([0], [2]))
        certs = classify_components(model, build_rips(window, one, model), window)
        assert [c.status for c in certs] == [Status.UNKNOWN]

    def test_whole_cloud_has_no_margin(self, one):
        """A component holding the whole finite model is isolated."""
        model = FiniteCloud(1, {"a": (Fraction(0),), "b": (Fraction(1),)})
        window = enumerate_window(model, model.bounding_box())
        certs = classify_components(model, build_rips(window, one, model), window)
        assert certs[0].status is Status.CERTIFIED_FINITE
        assert certs[0].margin is None
        assert certs[0].to_schema().margin == "inf"

    def test_foreign_graph_rejected(self, bundled_window, one):
        """Certificates need the graph built from the same window."""
        model, window = bundled_window("lattice1d")
        other = enumerate_window(model, Box.from_bounds([0], [3]))
        with pytest.raises(ContractViolation):
            classify_components(model, build_rips(other, one, model), window)


class TestScaleAnalysis:
    """Test sequential and threaded scale scans."""

    async def test_async_matches_sequential(self, bundled_window):
        """Threaded analysis returns the sequential results in scale order."""
        model, window = bundled_window("lattice2d_defects")
        scales = scan_scales(model, window, Length.of(2))
        threaded = await analyze_scales_async(model, window, scales, threads=4)
        sequential = analyze_scales(model, window, scales, threads=1)
        assert [g.alpha for g, _ in threaded] == scales
        assert [g.components for g, _ in threaded] == [g.components for g, _ in sequential]

    def test_threads_do_not_change_the_verdict(self, bundled_window):
        """decide_criterion gives the same verdict for any thread count."""
        model, window = bundled_window("clusters_linear")
        one_thread = decide_criterion(model, window, Length.of(3), threads=1)
        four_threads = decide_criterion(model, window, Length.of(3), threads=4)
        assert one_thread.to_schema() == four_threads.to_schema()

    def test_worker_failure_propagates(self, bundled_window, mocker):
        """An exception in one worker surfaces from the scan."""
        model, window = bundled_window("lattice1d")
        mocker.patch("raycert.rips_multiscale.analyze_scale", side_effect=ModelError("boom"))
        with pytest.raises(ModelError):
            analyze_scales(model, window, [Length.of(1), Length.of(2)], threads=2)


class TestMergeTree:
    """Test the component merge tree."""

    def test_parents_nest(self, bundled_window):
        """Every component sits inside its parent at the next scale."""
        model, window = bundled_window("clusters_pow2")
        scales = scan_scales(model, window, Length.of(8))
        tree = merge_tree(model, window, scales)
        for k in range(len(tree.levels) - 1):
            upper = tree.levels[k + 1].components
            for c, members in enumerate(tree.levels[k].components):
                assert set(members) <= set(upper[tree.parents[k][c]])

    def test_component_count_never_grows(self, bundled_window):
        """Raising alpha only merges components."""
        model, window = bundled_window("lattice2d_defects")
        tree = merge_tree(model, window, scan_scales(model, window, Length.of(2)))
        counts = [len(level.components) for level in tree.levels]
        assert counts == sorted(counts, reverse=True)

    def test_no_infinite_to_finite(self, bundled_window):
        """No infinite component has a finite parent."""
        for name in ("lattice1d", "lattice2d_defects", "clusters_constant", "wedge3"):
            model, window = bundled_window(name)
            tree = merge_tree(model, window, scan_scales(model, window, Length.of(4)))
            assert tree.monotone_violations() == []

    def test_unsorted_scales_rejected(self, bundled_window):
        """Scales must ascend."""
        model, window = bundled_window("lattice1d")
        with pytest.raises(ContractViolation):
            merge_tree(model, window, [Length.of(2), Length.of(1)])

    def test_splitting_component_rejected(self, lattice1d):
        """A component that splits at a larger scale breaks the tree."""
        window = enumerate_window(lattice1d, Box.from_bounds([0], [2]))
        labels = window.labels
        joined = ScaleGraph.from_edges(labels, [("0", "1"), ("1", "2")], Length.of(1))
        split = ScaleGraph.from_edges(labels, [], Length.of(2))
        results = [(joined, []), (split, [])]
        with pytest.raises(ContractViolation):
            tree_from_results(results)

    def test_monotone_violation_reported(self, lattice1d):
        """An infinite child under a finite parent is reported."""
        window = enumerate_window(lattice1d, Box.from_bounds([0], [1]))
        lower = ScaleGraph.from_edges(window.labels, [("0", "1")], Length.of(1))
        upper = ScaleGraph.from_edges(window.labels, [("0", "1")], Length.of(2))
        members = ("0", "1")
        tree = tree_from_results(
            [
                (lower, [ComponentCertificate(0, Length.of(1), members, Status.CERTIFIED_INFINITE)]),
                (upper, [ComponentCertificate(0, Length.of(2), members, Status.CERTIFIED_FINITE)]),
            ]
        )
        assert len(tree.monotone_violations()) == 1


class TestDecideCriterion:
    """Test the finite-component criterion on the bundled models."""

    @pytest.mark.parametrize(
        ("name", "alpha_max", "alpha_star"),
        [
            ("lattice1d", 2, 1),
            ("lattice2d", 2, 1),
            ("lattice3d", 2, 1),
            ("lattice1d_defects", 2, 1),
            ("lattice2d_defects", 2, 1),
            ("wedge3", 2, 1),
            ("clusters_constant", 4, 3),
            ("clusters_capped", 6, 5),
        ],
    )
    def test_satisfied(self, bundled_window, name, alpha_max, alpha_star):
        """Models with bounded gaps satisfy the criterion at the least joining scale."""
        model, window = bundled_window(name)
        verdict = decide_criterion(model, window, Length.of(alpha_max))
        assert verdict.outcome is Outcome.SATISFIED
        assert verdict.alpha_star == Length.of(alpha_star)

    @pytest.mark.parametrize("name", ["clusters_pow2", "clusters_linear", "cloud_small", "cloud_two_clusters"])
    def test_fails(self, bundled_window, name):
        """Unbounded gaps and finite models fail with finite witnesses at every scale."""
        model, window = bundled_window(name)
        verdict = decide_criterion(model, window, Length.of(3))
        assert verdict.outcome is Outcome.FAILS
        assert verdict.rule
        assert len(verdict.witnesses) == len(verdict.scales_examined)
        for alpha, found in verdict.witnesses:
            assert found, f"no finite witness at {alpha}"
            assert all(c.status is Status.CERTIFIED_FINITE for c in found)

    def test_defect_below_spacing(self, bundled_window):
        """The added defect point is joined at sqrt(1/2) but the grid is not."""
        model, window = bundled_window("lattice2d_defects")
        verdict = decide_criterion(model, window, Length.of(2))
        assert verdict.scales_examined[0] == Length.from_square(Fraction(1, 2))
        assert verdict.alpha_star == Length.of(1)

    def test_constant_gap_below_joining_scale(self, bundled_window):
        """Below the constant gap the scan is inconclusive, not failing."""
        model, window = bundled_window("clusters_constant")
        verdict = decide_criterion(model, window, Length.of(2))
        assert verdict.outcome is Outcome.INCONCLUSIVE

    def test_nonpositive_alpha_max(self, bundled_window):
        """alpha_max must be positive."""
        model, window = bundled_window("lattice1d")
        with pytest.raises(ModelError):
            decide_criterion(model, window, Length.of(0))

    def test_fails_at_every_scale_up_to_eight(self, bundled_window):
        """Power-of-two gaps leave an isolated cluster at every scale up to 8."""
        model, window = bundled_window("clusters_pow2")
        verdict = decide_criterion(model, window, Length.of(8))
        assert verdict.outcome is Outcome.FAILS
        assert verdict.scales_examined[-1] > Length.of(3)
        for alpha, found in verdict.witnesses:
            assert found, f"no finite witness at {alpha}"
            for cert in found:
                assert cert.margin is not None
                assert cert.margin > alpha


class TestDefectsBeyondWindow:
    """Test that removed points outside the window are not overlooked."""

    @pytest.fixture
    def ringed(self):
        """Z^2 with the four neighbours of (10,10) removed, seen through [0,5]^2."""
        model = LatticeWithDefects(2, removed=[(9, 10), (11, 10), (10, 9), (10, 11)], name="ringed")
        return model, enumerate_window(model, Box.from_bounds([0, 0], [5, 5]))

    def test_isolated_point_blocks_satisfied(self, ringed, one):
        """(10,10) is alone in D(1), so the window alone cannot decide."""
        model, window = ringed
        verdict = decide_criterion(model, window, one)
        assert verdict.outcome is Outcome.INCONCLUSIVE
        assert verdict.alpha_star is None

        tree = merge_tree(model, window, [one])
        hidden = tree.beyond_window[one]
        assert [c.members for c in hidden] == [("10,10",)]
        assert hidden[0].status is Status.CERTIFIED_FINITE

    def test_satisfied_once_the_point_is_reached(self, ringed):
        """At sqrt(2) the diagonal neighbours join (10,10) to the grid."""
        model, window = ringed
        verdict = decide_criterion(model, window, Length.of(2))
        assert verdict.outcome is Outcome.SATISFIED
        assert verdict.alpha_star == Length.from_square(2)

    def test_borel_moore_limit_agrees(self, ringed, one):
        """The direct limit does not vanish where the criterion is not satisfied."""
        model, window = ringed
        assert bm_report(model, window, one).limit.verdict is LimitVerdict.INCONCLUSIVE
        limit = bm_report(model, window, Length.of(2)).limit
        assert limit.verdict is LimitVerdict.VANISHES
        assert limit.alpha_star == Length.from_square(2)

    def test_defects_inside_window_need_no_extra_scan(self, bundled_model, one):
        """Models whose defects the rule already covers record nothing beyond the window."""
        model = bundled_model("lattice1d_defects")
        window = enumerate_window(model, Box.from_bounds([0], [19]))
        assert merge_tree(model, window, [one]).beyond_window == {}


class TestRuntime:
    """Test the desk-scale runtime bound."""

    def test_lattice_20x20_under_five_seconds(self, one):
        """Criterion and witness for a 20x20 grid take under 5 s."""
        model = Lattice(2)
        window = enumerate_window(model, Box.from_bounds([0, 0], [19, 19]))
        assert len(window) == 400

        start = time.perf_counter()
        verdict = decide_criterion(model, window, Length.of(2))
        witness = synthesize_ray_structure(model, window, one)
        report = validate_ray_structure(witness, model, window)
        elapsed = time.perf_counter() - start

        assert verdict.alpha_star == one
        assert report.ok
        assert elapsed < 5.0
