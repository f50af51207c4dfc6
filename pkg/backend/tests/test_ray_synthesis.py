"""
Tests for ray structure synthesis, validation and the trap argument.
"""

import os
import random
import subprocess
import sys
from pathlib import Path

import networkx as nx
import pytest

from raycert.exceptions import ContractViolation, SynthesisRefused
from raycert.lengths import Length
from raycert.ray_synthesis import (
    CLONE_MARK,
    Ray,
    RayStructureWitness,
    attach_finite,
    make_clone_walk,
    original_of,
    spanning_forest,
    synthesize_ray_structure,
    tree_to_rays,
    trap_conflict,
    validate_ray_structure,
)
from raycert.rips_multiscale import ComponentCertificate, ScaleGraph, Status, build_rips, classify_components
from raycert.schemas import WitnessSchema
from raycert.space_models import ContinuationRule


def bounded_degree_graph(rng: random.Random, size: int, bound: int) -> ScaleGraph:
    labels = [f"v{i}" for i in range(size)]
    degree = [0] * size
    pairs = set()
    for _ in range(size * bound):
        i, j = sorted(rng.sample(range(size), 2))
        if degree[i] < bound and degree[j] < bound and (i, j) not in pairs:
            pairs.add((i, j))
            degree[i] += 1
            degree[j] += 1
    return ScaleGraph.from_edges(labels, [(labels[i], labels[j]) for i, j in pairs])


def bounded_degree_tree(rng: random.Random, size: int, bound: int) -> nx.Graph:
    tree = nx.Graph()
    tree.add_node("t0")
    for i in range(1, size):
        parent = rng.choice([v for v in tree if tree.degree(v) < bound])
        tree.add_edge(parent, f"t{i}")
    return tree


class TestSpanningForest:
    """Test edge-disjoint forest decompositions."""

    def test_random_graphs(self):
        """At most N forests, each acyclic, together covering every edge once."""
        rng = random.Random(5)
        for _ in range(100):
            graph = bounded_degree_graph(rng, rng.randint(2, 25), 6)
            forests = spanning_forest(graph).forests
            assert len(forests) <= graph.degree_max
            listed = [edge for forest in forests for edge in forest]
            assert sorted(listed) == sorted(graph.edges)
            for forest in forests:
                assert nx.is_forest(nx.Graph(forest))

    def test_empty_graph(self):
        """A graph without edges needs no forest."""
        graph = ScaleGraph.from_edges(["a", "b"], [])
        assert spanning_forest(graph).count == 0

    def test_four_cycle(self):
        """The closing edge of a 4-cycle opens a second forest."""
        graph = ScaleGraph.from_edges(["a", "b", "c", "d"], [("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")])
        assert spanning_forest(graph).forests == [
            [("a", "b"), ("a", "d"), ("b", "c")],
            [("c", "d")],
        ]

    def test_complete_graph_on_four(self):
        """K4 splits into a star, a path and a single edge."""
        labels = ["a", "b", "c", "d"]
        graph = ScaleGraph.from_edges(labels, [(x, y) for i, x in enumerate(labels) for y in labels[i + 1 :]])
        decomposition = spanning_forest(graph)
        assert decomposition.forests == [
            [("a", "b"), ("a", "c"), ("a", "d")],
            [("b", "c"), ("b", "d")],
            [("c", "d")],
        ]
        assert decomposition.count == graph.degree_max == 3


class TestTreeToRays:
    """Test peeling rays from a spanning tree."""

    @pytest.fixture
    def binary_tree(self):
        """Complete binary tree of depth 8; node i has children 2i+1 and 2i+2."""
        tree = nx.relabel_nodes(nx.balanced_tree(2, 8), str)
        leaves = [str(i) for i in range(255, 511)]
        return tree, {leaf: ContinuationRule("wedge-ray", leaf) for leaf in leaves}

    def test_first_rays(self, binary_tree):
        """Rays follow the leftmost branch, then restart from the shallowest root."""
        tree, exits = binary_tree
        peeled = tree_to_rays(tree, "0", exits)
        assert peeled.rays[0].prefix == ["0", "1", "3", "7", "15", "31", "63", "127", "255"]
        assert peeled.rays[0].continuation == exits["255"]
        assert peeled.rays[1].prefix == ["2", "5", "11", "23", "47", "95", "191", "383"]
        assert peeled.rays[2].prefix == ["4", "9", "19", "39", "79", "159", "319"]
        assert peeled.rays[-1].prefix == ["510"]

    def test_every_leaf_ends_one_ray(self, binary_tree):
        """256 rays partition the 511 vertices without clones."""
        tree, exits = binary_tree
        peeled = tree_to_rays(tree, "0", exits)
        assert [ray.id for ray in peeled.rays] == list(range(256))
        assert sorted(ray.prefix[-1] for ray in peeled.rays) == sorted(exits)
        lengths = [len(ray.prefix) for ray in peeled.rays]
        assert lengths == [9, 8] + [7] * 2 + [6] * 4 + [5] * 8 + [4] * 16 + [3] * 32 + [2] * 64 + [1] * 128
        assert sorted(label for ray in peeled.rays for label in ray.prefix) == sorted(tree.nodes)
        assert peeled.clones == {}
        assert peeled.finite is None

    def test_no_exit_returns_the_tree(self):
        """A tree reaching no exit is handed back whole."""
        tree = nx.path_graph(["a", "b", "c"])
        peeled = tree_to_rays(tree, "a", {})
        assert peeled.rays == []
        assert sorted(peeled.finite.edges) == [("a", "b"), ("b", "c")]


class TestCloneWalk:
    """Test closed depth-first clone walks."""

    def test_random_trees(self):
        """The walk closes at the root, follows tree edges and stays within 2N visits."""
        rng = random.Random(9)
        for _ in range(100):
            bound = rng.randint(2, 5)
            tree = bounded_degree_tree(rng, rng.randint(1, 30), bound)
            walk = make_clone_walk(tree, "t0", bound=bound)

            assert walk.originals[0] == walk.originals[-1] == "t0"
            assert len(set(walk.walk)) == len(walk.walk)
            for a, b in zip(walk.originals, walk.originals[1:]):
                assert tree.has_edge(a, b)
            assert len(walk.walk) == 2 * tree.number_of_edges() + 1
            assert max(walk.multiplicity.values()) <= 2 * bound
            for vertex, count in walk.multiplicity.items():
                assert count == tree.degree(vertex) + (1 if vertex == "t0" else 0)
            for label, vertex in walk.clones.items():
                assert original_of(label) == vertex
                assert CLONE_MARK in label

    def test_degree_bound_enforced(self):
        """Trees above the declared degree are rejected."""
        star = nx.star_graph(["hub", "a", "b", "c"])
        with pytest.raises(ContractViolation):
            make_clone_walk(star, "hub", bound=2)

    def test_cycle_rejected(self):
        """Clone walks need a tree."""
        with pytest.raises(ContractViolation):
            make_clone_walk(nx.cycle_graph(["a", "b", "c"]), "a")

    def test_first_visit_keeps_label(self):
        """A path walked from one end reads x0 x1 x2 x1#1 x0#1."""
        walk = make_clone_walk(nx.path_graph(["x0", "x1", "x2"]), "x0")
        assert walk.walk == ["x0", "x1", "x2", "x1#1", "x0#1"]
        assert walk.clones == {"x1#1": "x1", "x0#1": "x0"}


class TestSynthesizeRayStructure:
    """Test ray structure synthesis on the bundled models."""

    @pytest.mark.parametrize("name", ["lattice1d", "lattice2d", "wedge3", "lattice1d_defects"])
    def test_witness_validates(self, bundled_window, one, name):
        """Synthesized witnesses pass every check with a small constant."""
        model, window = bundled_window(name)
        witness = synthesize_ray_structure(model, window, one)
        report = validate_ray_structure(witness, model, window)
        assert report.ok, [c for c in report.checks if not c.passed]
        assert witness.lipschitz_c <= Length.of(3)

    def test_lattice1d_two_rays(self, bundled_window, one):
        """The line splits into a left ray and a right ray."""
        model, window = bundled_window("lattice1d")
        witness = synthesize_ray_structure(model, window, one)
        assert len(witness.rays) == 2
        assert witness.lipschitz_c == one
        assert {ray.continuation.sign for ray in witness.rays} == {1, -1}

    def test_wedge_one_ray_per_branch(self, bundled_window, one):
        """Each wedge branch carries its own ray."""
        model, window = bundled_window("wedge3")
        witness = synthesize_ray_structure(model, window, one)
        assert sorted(ray.prefix[0] for ray in witness.rays) == ["a:0", "b:0", "c:0"]

    @pytest.mark.parametrize("name", ["clusters_pow2", "cloud_two_clusters"])
    def test_refused_when_criterion_fails(self, bundled_window, one, name):
        """Models with finite components get no witness."""
        model, window = bundled_window(name)
        with pytest.raises(SynthesisRefused):
            synthesize_ray_structure(model, window, one)

    def test_refused_below_joining_scale(self, bundled_window):
        """The constant-gap sequence is refused below its gap."""
        model, window = bundled_window("clusters_constant")
        with pytest.raises(SynthesisRefused):
            synthesize_ray_structure(model, window, Length.of(2))

    def test_deterministic(self, bundled_window, one):
        """Two runs give identical witnesses."""
        model, window = bundled_window("lattice2d_defects")
        first = synthesize_ray_structure(model, window, one).to_schema()
        second = synthesize_ray_structure(model, window, one).to_schema()
        assert first == second

    def test_schema_round_trip_validates(self, bundled_window, one):
        """A witness read back from its JSON form still validates."""
        model, window = bundled_window("wedge3")
        schema = synthesize_ray_structure(model, window, one).to_schema()
        restored = RayStructureWitness.from_schema(WitnessSchema.model_validate_json(schema.model_dump_json()))
        assert validate_ray_structure(restored, model, window).ok


class TestAttachFinite:
    """Test hanging finite trees off a carrier ray."""

    def test_splices_a_closed_walk(self, lattice1d, one):
        """The finite tree is walked from the nearest ray vertex and spliced after it."""
        witness = RayStructureWitness(
            one, [Ray(0, ["0", "1", "2"], ContinuationRule("lattice-direction", "2", 0, 1))]
        )
        finite = nx.path_graph(["-1", "-2"])
        attached = attach_finite(witness, finite, lattice1d)
        prefix = attached.rays[0].prefix
        assert prefix[:4] == ["0", "-1", "-2", "-1#1"]
        assert original_of(prefix[4]) == "0"
        assert prefix[5:] == ["1", "2"]
        assert validate_ray_structure(attached, lattice1d).ok

    def test_hanging_star(self, lattice1d, one):
        """A 3-vertex star centred at -2 is entered at -1 and walked back to 0."""
        witness = RayStructureWitness(
            one, [Ray(0, ["0", "1", "2"], ContinuationRule("lattice-direction", "2", 0, 1))]
        )
        finite = nx.Graph([("-2", "-1"), ("-2", "-3")])
        attached = attach_finite(witness, finite, lattice1d)
        assert attached.rays[0].prefix == ["0", "-1", "-2", "-3", "-2#1", "-1#1", "0#2", "1", "2"]
        assert attached.clones == {"-2#1": "-2", "-1#1": "-1", "0#2": "0"}
        assert attached.lipschitz_c == one
        assert validate_ray_structure(attached, lattice1d).ok

    def test_no_carrier(self, lattice1d):
        """Without rays there is nothing to attach to."""
        with pytest.raises(SynthesisRefused):
            attach_finite(RayStructureWitness(Length.of(1), []), nx.path_graph(["0", "1"]), lattice1d)


class TestValidateRayStructure:
    """Test witness validation failures."""

    @pytest.fixture
    def line_witness(self, bundled_window, one):
        """A valid witness for the 1D lattice window."""
        model, window = bundled_window("lattice1d")
        return model, window, synthesize_ray_structure(model, window, one)

    def test_shared_label_breaks_partition(self, line_witness):
        """A label listed in two rays fails the partition check."""
        model, window, witness = line_witness
        witness.rays[0].prefix.insert(1, witness.rays[1].prefix[0])
        report = validate_ray_structure(witness, model, window)
        assert not report.ok
        assert not report.check("partition").passed
        assert witness.rays[1].prefix[0] in report.check("partition").counterexample

    def test_repeated_label_breaks_injectivity(self, line_witness):
        """A label listed twice in one ray fails injectivity."""
        model, window, witness = line_witness
        witness.rays[1].prefix.append(witness.rays[1].prefix[0])
        assert not validate_ray_structure(witness, model, window).check("injectivity").passed

    def test_small_constant_breaks_step_bound(self, line_witness):
        """Unit steps exceed a constant of 1/2."""
        model, window, witness = line_witness
        witness.lipschitz_c = Length.of("0.5")
        assert not validate_ray_structure(witness, model, window).check("step-bound").passed

    def test_missing_point_breaks_covering(self, line_witness):
        """Dropping a window point fails the covering check."""
        model, window, witness = line_witness
        witness.rays[1].prefix.remove("5")
        assert not validate_ray_structure(witness, model, window).check("covering").passed

    def test_unknown_label(self, line_witness):
        """Labels outside the model fail resolution."""
        model, window, witness = line_witness
        witness.rays[0].prefix.insert(0, "x")
        assert not validate_ray_structure(witness, model, window).check("labels-resolve").passed

    def test_unrecorded_clone(self, line_witness):
        """Clone labels need a recorded original."""
        model, window, witness = line_witness
        witness.rays[0].prefix.insert(0, "3#7")
        assert not validate_ray_structure(witness, model, window).check("labels-resolve").passed

    def test_facing_rules_meet(self, lattice1d, one):
        """Half-lines pointing at each other overlap."""
        witness = RayStructureWitness(
            one,
            [
                Ray(0, ["0"], ContinuationRule("lattice-direction", "0", 0, 1)),
                Ray(1, ["5"], ContinuationRule("lattice-direction", "5", 0, -1)),
            ],
        )
        report = validate_ray_structure(witness, lattice1d)
        assert not report.check("rule-vs-rule").passed
        assert not report.check("rule-vs-label").passed


CROSSED_RAYS = """
import django
django.setup()
from raycert.lengths import Length
from raycert.ray_synthesis import Ray, RayStructureWitness, validate_ray_structure
from raycert.space_models import ContinuationRule, Lattice
labels = [str(i) for i in range(8)]
witness = RayStructureWitness(
    Length.of(1),
    [
        Ray(0, labels),
        Ray(1, labels[::-1], ContinuationRule("lattice-direction", "0", 0, 1)),
    ],
)
print(validate_ray_structure(witness, Lattice(1)).to_schema().model_dump_json())
"""


class TestCounterexampleOrder:
    """Test that reported counterexamples follow listing order."""

    def test_first_listed_label_is_reported(self, lattice1d, one):
        """Partition and rule checks name the first offending label as listed."""
        labels = [str(i) for i in range(8)]
        witness = RayStructureWitness(
            one,
            [Ray(0, labels), Ray(1, labels[::-1], ContinuationRule("lattice-direction", "0", 0, 1))],
        )
        report = validate_ray_structure(witness, lattice1d)
        assert report.check("partition").counterexample == "7 appears in rays 0 and 1"
        assert report.check("rule-vs-label").counterexample == "continuation of ray 1 runs through listed point 1"

    def test_independent_of_hash_seed(self):
        """Two interpreters with different hash seeds print the same report."""
        backend = Path(__file__).resolve().parent.parent
        outputs = []
        for seed in ("1", "2"):
            env = {
                **os.environ,
                "PYTHONHASHSEED": seed,
                "PYTHONPATH": str(backend),
                "DJANGO_SETTINGS_MODULE": "config.settings",
            }
            result = subprocess.run(
                [sys.executable, "-c", CROSSED_RAYS], capture_output=True, text=True, env=env, check=True
            )
            outputs.append(result.stdout)
        assert outputs[0] == outputs[1]
        assert "7 appears in rays 0 and 1" in outputs[0]


class TestTrapConflict:
    """Test that rays cannot cross isolated finite components."""

    @pytest.fixture
    def cluster_three(self, bundled_window, one):
        """The certificate of cluster F_3 at alpha=1."""
        model, window = bundled_window("clusters_pow2")
        certs = classify_components(model, build_rips(window, one, model), window)
        return model, next(c for c in certs if c.members[0] == "c3.0")

    def test_leaving_step_is_long(self, cluster_three, one):
        """A ray through F_3 must leave it by a step of length 8 or more."""
        model, cert = cluster_three
        labels = [f"c3.{j}" for j in range(5)] + ["c4.0"]
        witness = RayStructureWitness(one, [Ray(0, labels)])
        conflict = trap_conflict(witness, cert, model)
        assert conflict is not None
        assert "leaves" in conflict and "16" in conflict

    def test_ray_ending_inside(self, cluster_three, one):
        """A ray that never leaves is reported too."""
        model, cert = cluster_three
        witness = RayStructureWitness(one, [Ray(0, ["c3.0", "c3.1"])])
        assert "ends inside" in trap_conflict(witness, cert, model)

    def test_ray_elsewhere(self, cluster_three, one):
        """Rays avoiding the component raise no conflict."""
        model, cert = cluster_three
        witness = RayStructureWitness(one, [Ray(0, ["c2.0", "c2.1"])])
        assert trap_conflict(witness, cert, model) is None

    def test_margin_must_exceed_constant(self, cluster_three):
        """The trap argument needs margin > C."""
        model, cert = cluster_three
        witness = RayStructureWitness(Length.of(8), [])
        with pytest.raises(ContractViolation):
            trap_conflict(witness, cert, model)

    def test_needs_finite_certificate(self, bundled_model, one):
        """Infinite certificates cannot trap rays."""
        model = bundled_model("lattice1d")
        cert = ComponentCertificate(0, one, ("0",), Status.CERTIFIED_INFINITE)
        with pytest.raises(ContractViolation):
            trap_conflict(RayStructureWitness(one, []), cert, model)
