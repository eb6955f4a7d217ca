"""Diagnostics tests: exact reference moments, census and excess, residual
criticality, forest paths, and report plumbing."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfs_frontier.diagnostics import (METRIC_FIELDS, RunReport,
                                      TrajectorySample, aggregate,
                                      component_census, default_checkpoints,
                                      excess, forest_diameter_from_parents,
                                      longest_forest_path,
                                      predicted_stack_at_m1,
                                      reference_moments,
                                      residual_criticality,
                                      write_aggregate_csv,
                                      write_seed_table_csv,
                                      write_trajectory_csv)
from dfs_frontier.errors import ConfigError, InvariantViolation
from dfs_frontier.randomness import Graph, materialize_graph


class TestReferenceMoments:
    def test_frozen_n1000(self):
        # floor((eps - eps^2) n^2 / (1+eps)) at eps=0.1, n=1000: the exact
        # rational is 81818.18..., m2 adds eps^3 n^2/(1+eps).
        mom = reference_moments(1000, 0.1)
        assert (mom.m1, mom.m2) == (81818, 82727)

    def test_frozen_n_million(self):
        mom = reference_moments(1_000_000, 0.1)
        assert mom.m1 == 81_818_181_818
        assert mom.m2 == 82_727_272_727

    def test_more_cells(self):
        assert reference_moments(800_000, 0.05).m1 == 28_952_380_952
        assert reference_moments(1_000_000, 0.2).m1 == 133_333_333_333

    @settings(deadline=None, max_examples=150)
    @given(st.integers(2, 10**7),
           st.floats(1e-6, 0.9, allow_nan=False, allow_infinity=False))
    def test_floor_exactness(self, n, epsilon):
        # m1 must be the exact floor: (1+e) m1 - (e - e^2) n^2 in (-(1+e), 0]
        # with e the exact binary Fraction of the float epsilon.
        try:
            mom = reference_moments(n, epsilon)
        except ConfigError:
            return  # m2 does not fit this (n, epsilon); rejection is fine
        e = Fraction(epsilon)
        resid = (1 + e) * mom.m1 - (e - e * e) * n * n
        assert -(1 + e) < resid <= 0
        resid2 = (1 + e) * mom.m2 - (e - e * e + e**3) * n * n
        assert -(1 + e) < resid2 <= 0
        assert mom.m1 <= mom.m2

    def test_m2_must_fit_pair_space(self):
        with pytest.raises(ConfigError):
            reference_moments(4, 0.9)

    def test_validation(self):
        with pytest.raises(ConfigError):
            reference_moments(0, 0.1)
        with pytest.raises(ConfigError):
            reference_moments(100, 0.0)
        with pytest.raises(ConfigError):
            reference_moments(100, 1.0)

    def test_predicted_stack(self):
        # eps^2 n / 2 + q/n with easy numbers: 0.01*1000/2 + 50000/1000.
        assert predicted_stack_at_m1(1000, 0.1, 50000) == 55.0

    def test_default_checkpoints(self):
        assert default_checkpoints(1000, 0.1) == [0, 81818, 82727]
        assert default_checkpoints(1000) == [0]
        assert default_checkpoints(4, 0.9) == [0]  # infeasible moments


class TestComponentCensus:
    def test_isolated_vertices(self):
        census = component_census(Graph.from_edges(5, []))
        assert census.sizes == [1, 1, 1, 1, 1]
        assert census.giant_size == 1
        assert census.second_size == 1
        assert census.n_components == 5
        assert census.tie

    def test_triangle_plus_edge(self):
        g = Graph.from_edges(5, [(0, 1), (0, 2), (1, 2), (3, 4)])
        census = component_census(g)
        assert census.sizes == [3, 2]
        assert census.giant_size == 3
        assert census.second_size == 2
        assert sorted(census.giant.tolist()) == [0, 1, 2]
        assert not census.tie

    def test_tie_breaks_to_smallest_label(self):
        g = Graph.from_edges(4, [(1, 3), (0, 2)])
        census = component_census(g)
        assert census.tie
        assert sorted(census.giant.tolist()) == [0, 2]

    def test_single_component(self):
        g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
        census = component_census(g)
        assert census.sizes == [4]
        assert census.second_size == 0

    def test_giant_size_band_supercritical(self):
        # Branching-process fixed point rho = 1 - exp(-(1+eps) rho) gives
        # rho ~ 0.1763 at eps = 0.1, so giant/(2 eps n) ~ 0.88; the band
        # is wide enough for n = 2e5 fluctuations.
        n, eps = 200_000, 0.1
        g = materialize_graph(n, (1 + eps) / n, 424242)
        census = component_census(g)
        ratio = census.giant_size / (2 * eps * n)
        assert 0.8 <= ratio <= 1.1, ratio
        assert census.second_size < 1000


class TestExcess:
    def test_forest_zero(self):
        g = Graph.from_edges(6, [(0, 1), (1, 2), (3, 4)])
        assert excess(g) == 0

    def test_triangle_one(self):
        assert excess(Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)])) == 1

    def test_k4_three(self):
        g = Graph.from_edges(4, [(u, v) for u in range(4)
                                 for v in range(u + 1, 4)])
        assert excess(g) == 3

    def test_sums_over_components(self):
        g = Graph.from_edges(7, [(0, 1), (0, 2), (1, 2),   # triangle: +1
                                 (3, 4), (4, 5), (3, 5),   # triangle: +1
                                 ])
        assert excess(g) == 2


class TestResidualCriticality:
    def test_labels(self):
        label, margin = residual_criticality(11_000, 1e-4, 0.1)
        assert label == "Supercritical"
        assert margin == pytest.approx(0.1)
        label, _ = residual_criticality(9_900, 1e-4, 0.1)
        assert label == "Subcritical"
        label, _ = residual_criticality(10_005, 1e-4, 0.1)
        assert label == "NearCritical"

    def test_threshold_edges(self):
        # Exactly at the bounds counts as the decisive side.
        eps = 0.1
        label, _ = residual_criticality((1 + eps**3) * 1e4, 1e-4, eps)
        assert label == "Supercritical"
        label, _ = residual_criticality((1 - eps**4) * 1e4, 1e-4, eps)
        assert label == "Subcritical"

    def test_monotone_in_t_size(self):
        labels = [residual_criticality(t, 1e-3, 0.2)[0]
                  for t in (800, 999, 1001, 1300)]
        assert labels == ["Subcritical", "NearCritical",
                          "NearCritical", "Supercritical"]


def naive_tree_diameter(n, edges):
    # Max over BFS eccentricities; fine for tiny test forests.
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    best = 0
    for src in range(n):
        dist = {src: 0}
        queue = [src]
        for v in queue:
            for w in adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        best = max(best, max(dist.values()))
    return best


class TestLongestForestPath:
    def test_star(self):
        assert longest_forest_path(6, [(0, i) for i in range(1, 6)]) == 2

    def test_path(self):
        assert longest_forest_path(7, [(i, i + 1) for i in range(6)]) == 6

    def test_trivial(self):
        assert longest_forest_path(1, []) == 0
        assert longest_forest_path(4, []) == 0

    def test_two_components(self):
        edges = [(0, 1), (1, 2), (3, 4)]
        assert longest_forest_path(5, edges) == 2

    def test_cycle_rejected(self):
        with pytest.raises(InvariantViolation):
            longest_forest_path(3, [(0, 1), (1, 2), (0, 2)])

    def test_duplicate_edge_rejected(self):
        with pytest.raises(InvariantViolation):
            longest_forest_path(2, [(0, 1), (0, 1)])

    def test_random_trees_match_naive(self):
        import random
        rng = random.Random(2024)
        for trial in range(30):
            n = rng.randint(2, 40)
            edges = [(rng.randint(0, v - 1), v) for v in range(1, n)]
            got = longest_forest_path(n, edges)
            assert got == naive_tree_diameter(n, edges), (n, edges)

    def test_parent_array_variant_agrees(self):
        import random
        rng = random.Random(7)
        for trial in range(20):
            n = rng.randint(1, 40)
            parents = [-1] + [rng.randint(0, v - 1) for v in range(1, n)]
            order = list(range(n))  # parents precede children by label
            edges = [(parents[v], v) for v in range(n) if parents[v] >= 0]
            assert (forest_diameter_from_parents(parents, order)
                    == longest_forest_path(n, edges))


class TestReports:
    def make_report(self, seed=1, **overrides):
        fields = dict(
            config={"n": 100, "epsilon": 0.1, "p": 0.011, "seed": seed,
                    "engine": "fast"},
            u_at_m1=10, q_UT_at_m1=500, max_U=12, max_U_argmax_m=40,
            longest_forest_path=11, excess_total=0, giant_size=20,
            second_size=5, T_p_at_m1=1.001, T_p_at_m2=0.999,
            first_giant_entry_m=3, dfs_query_total=4000)
        fields.update(overrides)
        return RunReport(**fields)

    def test_json_round_trip(self):
        rep = self.make_report()
        assert RunReport.from_json(rep.to_json()) == rep

    def test_missing_field_rejected(self):
        with pytest.raises(ConfigError):
            RunReport.from_dict({"config": {}})

    def test_metric_fields_exist(self):
        rep = self.make_report()
        for name in METRIC_FIELDS:
            assert hasattr(rep, name)

    def test_aggregate_single(self):
        agg = aggregate([self.make_report()])
        s = agg.metrics["max_U"]
        assert s.count == 1
        assert s.mean == 12 and s.std == 0.0
        assert (s.ci_lo, s.ci_hi) == (12.0, 12.0)

    def test_aggregate_known_values(self):
        reports = [self.make_report(seed=i, max_U=v)
                   for i, v in enumerate((1, 2, 3))]
        s = aggregate(reports).metrics["max_U"]
        # mean 2, sample std 1, CI half-width 1.96/sqrt(3).
        assert s.mean == 2.0
        assert s.std == pytest.approx(1.0)
        assert s.ci_hi - s.ci_lo == pytest.approx(2 * 1.96 / 3**0.5)
        assert (s.min, s.max) == (1.0, 3.0)

    def test_aggregate_order_insensitive(self):
        a = [self.make_report(seed=i, max_U=v)
             for i, v in enumerate((5, 9, 7, 11))]
        fwd = aggregate(a)
        rev = aggregate(list(reversed(a)))
        assert fwd.metrics == rev.metrics

    def test_aggregate_skips_none(self):
        reports = [self.make_report(seed=0),
                   self.make_report(seed=1, T_p_at_m1=None)]
        agg = aggregate(reports)
        assert agg.metrics["T_p_at_m1"].count == 1
        assert agg.metrics["max_U"].count == 2

    def test_aggregate_rejects_mixed_cells(self):
        a = self.make_report(seed=0)
        b = self.make_report(seed=1)
        b.config = dict(b.config, n=200)
        with pytest.raises(ConfigError):
            aggregate([a, b])

    def test_csv_writers(self, tmp_path):
        reports = [self.make_report(seed=i, max_U=10 + i) for i in range(3)]
        seeds_path = tmp_path / "seeds.csv"
        write_seed_table_csv(reports, str(seeds_path))
        lines = seeds_path.read_text().strip().split("\n")
        assert lines[0].startswith("seed,u_at_m1,")
        assert len(lines) == 4
        agg_path = tmp_path / "agg.csv"
        write_aggregate_csv(aggregate(reports), str(agg_path))
        lines = agg_path.read_text().strip().split("\n")
        assert lines[0] == "metric,count,mean,std,min,max,ci_lo,ci_hi"
        assert len(lines) == 1 + len(METRIC_FIELDS)

    def test_trajectory_csv(self, tmp_path):
        samples = [TrajectorySample(0, 0, 1, 9, 0, 0, 0),
                   TrajectorySample(5, 2, 1, 7, 14, 3, 2)]
        path = tmp_path / "t.csv"
        write_trajectory_csv(samples, str(path))
        assert path.read_text() == (
            "m,size_S,size_U,size_T,q_ST,q_SU,q_UT\n"
            "0,0,1,9,0,0,0\n"
            "5,2,1,7,14,3,2\n")
