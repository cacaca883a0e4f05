from itertools import permutations

import numpy as np
import pytest

from tempseg import globalassign as ga
from tempseg.videocluster import WithinVideoClusters


def _brute_force_matching(cost):
    """Exhaustive oracle for the square assignment problem."""
    n = cost.shape[0]
    best_cost = np.inf
    best_pi = None
    for pi in permutations(range(n)):
        c = sum(cost[i, pi[i]] for i in range(n))
        if c < best_cost - 1e-12:
            best_cost = c
            best_pi = pi
    return np.array(best_pi), best_cost


def _planted_instance(rng, n, k, sep=10.0, noise=0.1):
    """Centroid table where video v holds prototype p at a random slot."""
    protos = rng.normal(size=(k, 8)) * sep
    table = np.empty((n, k, 8))
    slots = np.empty((n, k), dtype=int)  # slots[v, p] = within index of proto p
    for v in range(n):
        perm = rng.permutation(k)
        for p in range(k):
            table[v, perm[p]] = protos[p] + rng.normal(scale=noise, size=8)
        slots[v] = perm
    return table, slots


def _random_clusters(rng, table):
    n, k, e = table.shape
    out = []
    for v in range(n):
        out.append(WithinVideoClusters(
            video_id=f"v{v}", labels=np.repeat(np.arange(k), 3),
            centroids=table[v], mean_timestamps=rng.random(k), n_clusters=k))
    return out


class TestHungarian:
    def test_two_by_two(self):
        pi = ga.hungarian(np.array([[1.0, 2.0], [2.0, 1.0]]))
        np.testing.assert_array_equal(pi, [0, 1])

    def test_zero_diagonal(self):
        cost = np.ones((3, 3)) - np.eye(3)
        pi = ga.hungarian(cost)
        np.testing.assert_array_equal(pi, [0, 1, 2])

    def test_matches_brute_force(self, rng):
        for _ in range(40):
            cost = rng.uniform(0, 10, size=(5, 5))
            pi = ga.hungarian(cost)
            _, best = _brute_force_matching(cost)
            assert cost[np.arange(5), pi].sum() == pytest.approx(best, rel=1e-12)

    def test_lexicographic_tie_break(self):
        # every permutation optimal: identity is lexicographically smallest
        pi = ga.hungarian(np.ones((4, 4)))
        np.testing.assert_array_equal(pi, [0, 1, 2, 3])
        # two optima: (0->1, 1->0) and (0->0, 1->1) both cost 2 -> pick identity
        pi = ga.hungarian(np.array([[1.0, 1.0], [1.0, 1.0]]))
        np.testing.assert_array_equal(pi, [0, 1])

    def test_negative_costs(self, rng):
        for _ in range(10):
            cost = rng.uniform(-5, 5, size=(4, 4))
            pi = ga.hungarian(cost)
            _, best = _brute_force_matching(cost)
            assert cost[np.arange(4), pi].sum() == pytest.approx(best, rel=1e-12)

    def test_lexicographic_among_ties_matches_oracle(self, rng):
        # small integer matrices force many optimal permutations
        for trial in range(60):
            n = int(rng.integers(2, 6))
            cost = rng.integers(0, 3, size=(n, n)).astype(float)
            pi = ga.hungarian(cost)
            best = min(sum(cost[i, p[i]] for i in range(n))
                       for p in permutations(range(n)))
            optimal = sorted(p for p in permutations(range(n))
                             if sum(cost[i, p[i]] for i in range(n)) == best)
            assert tuple(pi) == optimal[0]

    def test_invalid_inputs_raise(self):
        with pytest.raises(ValueError):
            ga.hungarian(np.ones((2, 3)))
        with pytest.raises(ValueError):
            ga.hungarian(np.array([[np.nan, 1.0], [1.0, 0.0]]))


class TestMultiHub:
    def test_n1_identity(self, rng):
        table = rng.normal(size=(1, 3, 4))
        out = ga.multi_hub_assign(table)
        assert out.cost == 0.0
        assert out.cliques == [[(0, 0)], [(0, 1)], [(0, 2)]]

    def test_n2_equals_single_hungarian(self, rng):
        table = rng.normal(size=(2, 4, 5))
        out = ga.multi_hub_assign(table)
        pi = ga.hungarian(ga._pair_distances(table, 0, 1))
        expected = sorted([sorted([(0, j), (1, int(pi[j]))]) for j in range(4)])
        assert sorted(out.cliques) == expected
        direct = sum(np.linalg.norm(table[0, j] - table[1, pi[j]])
                     for j in range(4))
        assert out.cost == pytest.approx(direct, rel=1e-12)

    def test_planted_prototypes_grouped(self, rng):
        table, slots = _planted_instance(rng, n=4, k=3)
        out = ga.multi_hub_assign(table)
        # oracle: clique members must share the planted prototype
        for clique in out.cliques:
            protos = {int(np.where(slots[v] == within)[0][0])
                      for v, within in clique}
            assert len(protos) == 1

    def test_bounded_by_brute_force_and_naive(self, rng):
        for _ in range(25):
            table = rng.normal(size=(4, 3, 6))
            heur = ga.multi_hub_assign(table)
            exact = ga.brute_force_assign(table)
            assert heur.cost >= exact.cost - 1e-9

    def test_cost_recomputable_from_centroids(self, rng):
        table = rng.normal(size=(3, 3, 4))
        out = ga.multi_hub_assign(table)
        assert out.cost == pytest.approx(
            ga.assignment_cost(table, out.cliques), abs=1e-9)

    def test_partition_structure(self, rng):
        table = rng.normal(size=(5, 4, 3))
        out = ga.multi_hub_assign(table)
        seen = set()
        for clique in out.cliques:
            assert len(clique) == 5
            assert sorted(v for v, _ in clique) == list(range(5))
            seen.update(clique)
        assert len(seen) == 20

    def test_invariant_under_relabeling(self, rng):
        table = rng.normal(size=(4, 3, 5))
        base = ga.multi_hub_assign(table)
        relabeled = table.copy()
        perms = [rng.permutation(3) for _ in range(4)]
        for v, perm in enumerate(perms):
            relabeled[v] = table[v][perm]
        out = ga.multi_hub_assign(relabeled)
        assert out.cost == pytest.approx(base.cost, rel=1e-9)


class TestNaive:
    def test_identical_timings_group_by_rank(self, rng):
        table = rng.normal(size=(3, 4, 5))
        clusters = []
        for v in range(3):
            clusters.append(WithinVideoClusters(
                video_id=f"v{v}", labels=np.repeat(np.arange(4), 2),
                centroids=table[v],
                mean_timestamps=np.array([0.8, 0.2, 0.6, 0.4]),
                n_clusters=4))
        out = ga.naive_assign(clusters)
        expected_rank = [1, 3, 2, 0]  # indices sorted by timestamp
        for rank, clique in enumerate(out.cliques):
            assert clique == [(v, expected_rank[rank]) for v in range(3)]

    def test_single_video_singletons(self, rng):
        clusters = [WithinVideoClusters(
            video_id="v0", labels=np.repeat(np.arange(3), 2),
            centroids=rng.normal(size=(3, 4)),
            mean_timestamps=np.array([0.2, 0.5, 0.9]), n_clusters=3)]
        out = ga.naive_assign(clusters)
        assert out.cliques == [[(0, 0)], [(0, 1)], [(0, 2)]]
        assert out.cost == 0.0

    def test_timestamp_tie_breaks_to_lower_index(self, rng):
        clusters = [WithinVideoClusters(
            video_id="v0", labels=np.repeat(np.arange(2), 2),
            centroids=rng.normal(size=(2, 3)),
            mean_timestamps=np.array([0.5, 0.5]), n_clusters=2)]
        out = ga.naive_assign(clusters)
        assert out.cliques == [[(0, 0)], [(0, 1)]]

    def test_reversed_order_video_costs_more_than_multi_hub(self, rng):
        # video 1 plays the actions in reverse: timestamp ranks disagree
        # with feature-space proximity, so the naive grouping pays more
        protos = rng.normal(size=(3, 6)) * 10.0
        table = np.stack([protos + rng.normal(scale=0.05, size=(3, 6)),
                          protos + rng.normal(scale=0.05, size=(3, 6))])
        clusters = [
            WithinVideoClusters(video_id="v0",
                                labels=np.repeat(np.arange(3), 2),
                                centroids=table[0],
                                mean_timestamps=np.array([0.2, 0.5, 0.8]),
                                n_clusters=3),
            WithinVideoClusters(video_id="v1",
                                labels=np.repeat(np.arange(3), 2),
                                centroids=table[1],
                                mean_timestamps=np.array([0.8, 0.5, 0.2]),
                                n_clusters=3),
        ]
        naive = ga.naive_assign(clusters)
        heur = ga.multi_hub_assign(table)
        assert naive.cost > heur.cost


class TestBruteForce:
    def test_n2_matches_hungarian(self, rng):
        table = rng.normal(size=(2, 3, 4))
        exact = ga.brute_force_assign(table)
        heur = ga.multi_hub_assign(table)
        assert exact.cost == pytest.approx(heur.cost, rel=1e-12)

    def test_optimality_bound(self, rng):
        table = rng.normal(size=(3, 2, 5))
        exact = ga.brute_force_assign(table)
        heur = ga.multi_hub_assign(table)
        assert exact.cost <= heur.cost + 1e-12

    def test_candidate_count_n3_k3(self, rng, monkeypatch):
        table = rng.normal(size=(3, 3, 2))
        calls = []
        original = ga.assignment_cost

        def counting(centroids, cliques):
            calls.append(1)
            return original(centroids, cliques)

        monkeypatch.setattr(ga, "assignment_cost", counting)
        ga.brute_force_assign(table)
        assert len(calls) == 36  # (3!)^2

    def test_size_guard(self, rng):
        with pytest.raises(ValueError):
            ga.brute_force_assign(rng.normal(size=(5, 3, 2)))
        with pytest.raises(ValueError):
            ga.brute_force_assign(rng.normal(size=(3, 5, 2)))


class TestPlantedPrototypeOptimality:
    def test_multi_hub_matches_brute_force_on_planted(self, rng):
        failures = 0
        for trial in range(100):
            n = 3 + trial % 2
            k = 2 + trial % 2
            table, _ = _planted_instance(rng, n, k, sep=10.0, noise=1.0)
            heur = ga.multi_hub_assign(table)
            exact = ga.brute_force_assign(table)
            assert heur.cost >= exact.cost - 1e-9
            if heur.cost > exact.cost + 1e-9:
                failures += 1
        assert failures == 0

    def test_multi_hub_never_worse_than_naive_on_planted(self, rng):
        failures = 0
        for trial in range(100):
            n = 3 + trial % 3
            k = 2 + trial % 2
            table, _ = _planted_instance(rng, n, k, sep=10.0, noise=1.0)
            clusters = _random_clusters(rng, table)
            heur = ga.multi_hub_assign(table)
            naive = ga.naive_assign(clusters)
            if heur.cost > naive.cost + 1e-9:
                failures += 1
        assert failures == 0


class TestAssignmentIO:
    def test_round_trip(self, rng):
        table = rng.normal(size=(3, 2, 4))
        out = ga.multi_hub_assign(table)
        video_ids = ["a", "b", "c"]
        text = ga.format_assignment(out, video_ids)
        back = ga.parse_assignment(text, video_ids)
        assert sorted(map(sorted, back.cliques)) == sorted(map(sorted, out.cliques))
        assert back.cost == pytest.approx(out.cost, rel=1e-9)
        assert back.strategy == "multi_hub"
