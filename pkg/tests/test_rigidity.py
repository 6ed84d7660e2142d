"""Tests for frameworks, rigidity predicates, and the singular length set."""

import numpy as np
import pytest

from formation_forge.errors import ConfigurationError, InfeasibleLengthsError
from formation_forge.graph import FormationGraph, mixed_adjacency, two_cycles
from formation_forge.numkernel import kron_I2, rank_tol
from formation_forge.rigidity import (
    Framework,
    TargetLengths,
    edge_errors,
    edge_vectors,
    in_singular_set,
    is_infinitesimally_rigid,
    is_minimally_rigid,
    make_singular_lengths,
    planar_cross,
    realize_two_cycles,
    rigidity_matrix,
    singular_witnesses,
)

BENCHMARK_SQUARED = (4.0, 6.76, 4.0, 10.89, 1.96)


def framework(x):
    return Framework(graph=two_cycles(), x=np.asarray(x, dtype=float))


def random_framework(rng, graph=None):
    g = graph if graph is not None else two_cycles()
    return Framework(graph=g, x=rng.normal(size=(g.n, 2)))


def rotate_translate(fw, theta, t):
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return fw.with_positions(fw.x @ rot.T + np.asarray(t))


class TestEdgeVectors:
    def test_explicit_square_layout(self):
        fw = framework([(0, 0), (1, 0), (0, 1), (-1, 0)])
        z = edge_vectors(fw).z
        expected = [(1, 0), (-1, 1), (0, -1), (1, 1), (-1, 0)]
        assert np.array_equal(z, np.asarray(expected, float))

    def test_superposed_agents_give_zero_vectors(self):
        fw = framework(np.ones((4, 2)))
        assert np.array_equal(edge_vectors(fw).z, np.zeros((5, 2)))

    def test_translation_invariance(self):
        fw = framework([(0, 0), (1, 0), (0, 1), (-1, 0)])
        shifted = fw.with_positions(fw.x + np.array([5.0, 7.0]))
        assert np.array_equal(edge_vectors(fw).z, edge_vectors(shifted).z)

    def test_matches_doubled_incidence_product(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            fw = random_framework(rng)
            stacked = kron_I2(mixed_adjacency(fw.graph)) @ fw.x.ravel()
            assert np.max(np.abs(edge_vectors(fw).z.ravel() - stacked)) <= 1e-14

    def test_block_row_matrix_projects_onto_edges(self):
        rng = np.random.default_rng(1)
        fw = random_framework(rng)
        ev = edge_vectors(fw)
        w = rng.normal(size=(5, 2))
        assert np.allclose(ev.Dz @ w.ravel(), np.sum(ev.z * w, axis=1))


class TestEdgeErrors:
    def test_vanish_on_design_frameworks(self):
        lengths = TargetLengths(d=BENCHMARK_SQUARED)
        for fw in realize_two_cycles(lengths):
            assert np.max(np.abs(edge_errors(fw, lengths))) <= 1e-12

    def test_unit_edge_zero_error(self):
        g = FormationGraph(n=2, edges=((0, 1),))
        fw = Framework(graph=g, x=np.array([[0.0, 0.0], [1.0, 0.0]]))
        assert edge_errors(fw, TargetLengths(d=(1.0,)))[0] == 0.0

    def test_squared_convention_value(self):
        g = FormationGraph(n=2, edges=((0, 1),))
        fw = Framework(graph=g, x=np.array([[0.0, 0.0], [2.0, 0.0]]))
        assert edge_errors(fw, TargetLengths(d=(1.0,)))[0] == 3.0

    def test_plain_convention_value(self):
        g = FormationGraph(n=2, edges=((0, 1),))
        fw = Framework(graph=g, x=np.array([[0.0, 0.0], [2.0, 0.0]]))
        lengths = TargetLengths(d=(1.0,), convention="plain")
        assert edge_errors(fw, lengths)[0] == 1.0

    def test_length_count_mismatch(self):
        fw = framework(np.zeros((4, 2)))
        with pytest.raises(ConfigurationError):
            edge_errors(fw, TargetLengths(d=(1.0, 1.0)))


class TestTargetLengths:
    def test_plain_values_are_squared_for_storage(self):
        lengths = TargetLengths.from_values((2.0, 3.0), convention="plain")
        assert lengths.d == (4.0, 9.0)
        assert lengths.values == (2.0, 3.0)

    def test_nonpositive_rejected(self):
        with pytest.raises(InfeasibleLengthsError):
            TargetLengths(d=(1.0, 0.0))

    def test_unknown_convention_rejected(self):
        with pytest.raises(ConfigurationError):
            TargetLengths(d=(1.0,), convention="cubed")

    def test_perturbed_shifts_one_entry(self):
        lengths = TargetLengths(d=(1.0, 2.0, 3.0))
        assert lengths.perturbed(1, 0.5).d == (1.0, 2.5, 3.0)


class TestRigidityMatrix:
    def test_row_sign_layout(self):
        fw = framework([(0, 0), (1, 0), (0, 1), (-1, 0)])
        r = rigidity_matrix(fw)
        z = edge_vectors(fw).z
        for i, (o, t) in enumerate(fw.graph.edges):
            row = np.zeros(8)
            row[2 * o : 2 * o + 2] = -z[i]
            row[2 * t : 2 * t + 2] = z[i]
            assert np.array_equal(r[i], row)

    def test_factors_through_block_rows(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            fw = random_framework(rng)
            ev = edge_vectors(fw)
            product = ev.Dz @ kron_I2(mixed_adjacency(fw.graph))
            assert np.max(np.abs(rigidity_matrix(fw) - product)) <= 1e-12

    def test_collinear_framework_drops_rank(self):
        fw = framework([(0, 0), (1, 0), (2, 0), (3, 0)])
        assert rank_tol(rigidity_matrix(fw), 1e-9) < 5

    def test_rank_is_rigid_motion_invariant(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            fw = random_framework(rng)
            rank = rank_tol(rigidity_matrix(fw), 1e-9)
            moved = rotate_translate(fw, rng.uniform(0, 2 * np.pi), rng.normal(size=2))
            assert rank_tol(rigidity_matrix(moved), 1e-9) == rank


class TestRigidityPredicates:
    def test_generic_framework_is_rigid(self):
        fw = realize_two_cycles(TargetLengths(d=BENCHMARK_SQUARED))[0]
        assert is_infinitesimally_rigid(fw)

    def test_parallel_edge_witness_is_rigid(self):
        out = make_singular_lengths(1.0, 5.0, 4.0, 2.0)
        assert is_infinitesimally_rigid(out.witness)

    def test_collinear_framework_is_not_rigid(self):
        fw = framework([(0, 0), (1, 0), (2, 0), (3, 0)])
        assert not is_infinitesimally_rigid(fw)

    def test_two_cycles_is_minimally_rigid(self):
        fw = realize_two_cycles(TargetLengths(d=BENCHMARK_SQUARED))[0]
        assert is_minimally_rigid(fw)

    def test_redundant_edge_breaks_minimality(self):
        base = realize_two_cycles(TargetLengths(d=BENCHMARK_SQUARED))[0]
        g = FormationGraph(n=4, edges=base.graph.edges + ((1, 3),))
        fw = Framework(graph=g, x=base.x)
        assert is_infinitesimally_rigid(fw)
        assert not is_minimally_rigid(fw)

    def test_triangle_is_minimally_rigid(self):
        g = FormationGraph(n=3, edges=((0, 1), (1, 2), (2, 0)))
        fw = Framework(graph=g, x=np.array([[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]]))
        assert is_minimally_rigid(fw)


class TestRealization:
    def test_generic_lengths_give_four_frameworks(self):
        frameworks = realize_two_cycles(TargetLengths(d=BENCHMARK_SQUARED))
        assert len(frameworks) == 4
        for fw in frameworks:
            assert np.array_equal(fw.x[0], [0.0, 0.0])
            assert fw.x[1][1] == 0.0 and fw.x[1][0] > 0.0

    def test_infeasible_triangle_names_edges(self):
        lengths = TargetLengths(d=(1.0, 25.0, 4.0, 8.0, 4.0))
        with pytest.raises(InfeasibleLengthsError, match="edges 1, 2, 3"):
            realize_two_cycles(lengths)

    def test_second_triangle_infeasibility_names_edges(self):
        lengths = TargetLengths(d=(1.0, 5.0, 4.0, 100.0, 4.0))
        with pytest.raises(InfeasibleLengthsError, match="edges 3, 4, 5"):
            realize_two_cycles(lengths)

    def test_rejects_other_graphs(self):
        g = FormationGraph(n=3, edges=((0, 1), (1, 2), (2, 0)))
        with pytest.raises(ConfigurationError):
            realize_two_cycles(TargetLengths(d=(1.0, 1.0, 1.0)), g)


class TestSingularLengths:
    def test_canonical_construction(self):
        out = make_singular_lengths(1.0, 5.0, 4.0, 2.0)
        assert out.lengths.d == (1.0, 5.0, 4.0, 8.0, 4.0)
        z = edge_vectors(out.witness).z
        assert abs(planar_cross(z[0], z[4])) <= 1e-12
        assert np.max(np.abs(edge_errors(out.witness, out.lengths))) <= 1e-12
        assert not out.coincident_agents

    def test_negative_offset_lands_on_second_agent(self):
        out = make_singular_lengths(1.0, 5.0, 4.0, -1.0)
        assert out.coincident_agents
        assert np.max(np.abs(out.witness.x[3] - out.witness.x[1])) <= 1e-12

    def test_degenerate_triangle_is_rejected(self):
        with pytest.raises(InfeasibleLengthsError, match="degenerate"):
            make_singular_lengths(1.0, 4.0, 9.0, 2.0)

    def test_zero_offset_is_rejected(self):
        with pytest.raises(InfeasibleLengthsError):
            make_singular_lengths(1.0, 5.0, 4.0, 0.0)


class TestSingularSet:
    def test_constructed_lengths_are_members(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            r = rng.uniform(0.5, 2.0, size=3)
            d1, d2 = r[0] ** 2, (r[0] + r[1]) ** 2 * 0.8
            d3 = (np.sqrt(d1) + np.sqrt(d2)) ** 2 * 0.7
            s = rng.uniform(0.3, 2.0) * (1 if rng.uniform() < 0.5 else -1)
            out = make_singular_lengths(d1, d2, d3, s)
            assert in_singular_set(out.lengths)
            assert len(singular_witnesses(out.lengths)) >= 1

    def test_benchmark_lengths_are_not_members(self):
        lengths = TargetLengths.from_values((2.0, 2.6, 2.0, 1.4, 3.3), convention="plain")
        assert not in_singular_set(TargetLengths(d=lengths.d), 1e-6)

    def test_equilateral_lengths_are_members_via_coincident_agents(self):
        # Two of the four realizations place agent 4 on top of agent 2, which
        # makes the first and last edge vectors equal and hence parallel.
        lengths = TargetLengths(d=(1.0, 1.0, 1.0, 1.0, 1.0))
        assert in_singular_set(lengths)
        coincident = [
            fw
            for fw in singular_witnesses(lengths)
            if np.max(np.abs(fw.x[3] - fw.x[1])) <= 1e-12
        ]
        assert len(coincident) == 2

    def test_generic_scaled_lengths_are_not_members(self):
        assert not in_singular_set(TargetLengths(d=(1.0, 2.0, 1.5, 2.5, 1.2)))

    def test_witness_appears_among_realizations(self):
        out = make_singular_lengths(1.0, 5.0, 4.0, 2.0)
        hits = singular_witnesses(out.lengths)
        assert hits
        for fw in hits:
            z = edge_vectors(fw).z
            n1, n5 = np.hypot(*z[0]), np.hypot(*z[4])
            assert abs(planar_cross(z[0], z[4])) <= 1e-9 * n1 * n5


class TestBlockRowRank:
    def test_full_row_rank_without_zero_edges(self):
        rng = np.random.default_rng(7)
        fw = random_framework(rng)
        assert rank_tol(edge_vectors(fw).Dz, 1e-9) == 5

    def test_zero_edge_drops_row_rank(self):
        # Superposing the first two agents kills the first edge vector.
        fw = framework([(0, 0), (0, 0), (0.4, 1.1), (-0.9, 0.2)])
        ev = edge_vectors(fw)
        assert np.max(np.abs(ev.z[0])) == 0.0
        assert rank_tol(ev.Dz, 1e-9) == 4
