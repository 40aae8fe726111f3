import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from conftest import gaussian_blobs
from respcast.community import (
    CombinedEmbedding,
    Community,
    cluster,
    combine,
    discover_communities,
    medoid_of,
    reduce_vectors,
    select_representatives,
    split_outliers,
)


def make_embeddings(points, ideology=None, prefix="d"):
    points = np.asarray(points, dtype=np.float64)
    ids = [f"{prefix}{i}" for i in range(len(points))]
    ideo = ideology if ideology is not None else [np.zeros(2)] * len(points)
    return combine(ids, points, ideo, lam=1.0)


def test_combine_lambda_zero_leaves_reduced_distances():
    rng = np.random.default_rng(0)
    reduced = rng.random((10, 4))
    ideology = [rng.random(2) for _ in range(10)]
    ids = [f"d{i}" for i in range(10)]
    embs = combine(ids, reduced, ideology, lam=0.0)
    for a, b in zip(embs[:-1], embs[1:]):
        original = np.linalg.norm(a.reduced_semantic - b.reduced_semantic)
        combined = np.linalg.norm(a.combined - b.combined)
        assert np.isclose(original, combined)


def test_combine_dimension_is_r_plus_d_prime():
    embs = make_embeddings(np.zeros((3, 8)), [np.zeros(2)] * 3)
    assert all(e.combined.shape == (10,) for e in embs)


def test_combine_length_mismatch_errors():
    with pytest.raises(ValueError):
        combine(["a"], np.zeros((2, 4)), [np.zeros(2), np.zeros(2)])


def test_identical_semantics_cluster_by_ideology():
    reduced = np.zeros((24, 4))
    ideology = [np.array([2.0, 0.0])] * 12 + [np.array([0.0, 2.0])] * 12
    ids = [f"d{i}" for i in range(24)]
    embs = combine(ids, reduced, ideology, lam=1.0)
    clusters, outliers = cluster(embs)
    assert len(clusters) == 2
    groups = [set(c) for c in clusters]
    assert {f"d{i}" for i in range(12)} in groups
    assert {f"d{i}" for i in range(12, 24)} in groups
    assert outliers == []


def test_cluster_two_blobs_with_noise():
    rng = np.random.default_rng(1)
    pts = np.vstack(
        [rng.normal(0, 1, (30, 4)), rng.normal(20, 1, (30, 4)), rng.uniform(-60, 60, (5, 4))]
    )
    truth = [0] * 30 + [1] * 30 + [-1] * 5
    embs = make_embeddings(pts)
    clusters, outliers = cluster(embs)
    labels = {}
    for k, members in enumerate(clusters):
        for m in members:
            labels[m] = k
    for o in outliers:
        labels[o] = -1
    predicted = [labels[f"d{i}"] for i in range(65)]
    assert adjusted_rand_score(truth, predicted) >= 0.95


def test_cluster_partition_property():
    rng = np.random.default_rng(2)
    embs = make_embeddings(rng.random((40, 4)))
    clusters, outliers = cluster(embs)
    all_ids = [m for c in clusters for m in c] + outliers
    assert sorted(all_ids) == sorted(e.doc_id for e in embs)


def test_split_outliers_by_argmax():
    ideology = {
        "a": np.array([0.9, 0.1]),
        "b": np.array([0.1, 0.9]),
        "c": np.array([0.0, 0.0]),
    }
    groups = split_outliers(["a", "b", "c"], ideology)
    assert groups["pro"] == ["a"]
    assert groups["anti"] == ["b"]
    assert groups["undetermined"] == ["c"]


def test_split_outliers_hand_labeled_fixture():
    rng = np.random.default_rng(3)
    ideology = {}
    expected = {"pro": 0, "anti": 0, "undetermined": 0}
    for i in range(10):
        vec = rng.random(2)
        ideology[f"o{i}"] = vec
        expected["pro" if vec[0] >= vec[1] else "anti"] += 1
    groups = split_outliers(list(ideology), ideology)
    assert len(groups.get("pro", [])) == expected["pro"]
    assert len(groups.get("anti", [])) == expected["anti"]


def test_split_outliers_empty_groups_omitted():
    groups = split_outliers(["a"], {"a": np.array([1.0, 0.0])})
    assert set(groups) == {"pro"}


def test_medoid_minimizes_total_distance():
    vectors = {
        "a": np.array([0.0, 0.0]),
        "b": np.array([1.0, 0.0]),
        "c": np.array([2.0, 0.0]),
    }
    assert medoid_of(["a", "b", "c"], vectors) == "b"


def greedy_mmr_oracle(member_ids, combined_of, semantic_of, medoid, k, lam):
    """Independent recomputation of the greedy selection."""

    def cosine(a, b):
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        return 0.0 if na == 0 or nb == 0 else float(a @ b / (na * nb))

    selected = [medoid]
    pool = [m for m in member_ids if m != medoid]
    while len(selected) < k and pool:
        scored = []
        for cand in pool:
            rel = -float(np.linalg.norm(combined_of[cand] - combined_of[medoid]))
            red = max(cosine(semantic_of[cand], semantic_of[s]) for s in selected)
            scored.append((lam * rel - (1 - lam) * red, cand))
        scored.sort(key=lambda t: (-t[0], t[1]))
        best = scored[0][1]
        selected.append(best)
        pool.remove(best)
    return selected


def test_mmr_matches_greedy_oracle():
    rng = np.random.default_rng(4)
    members = [f"m{i}" for i in range(20)]
    combined = {m: rng.random(6) for m in members}
    semantic = {m: combined[m][:4] for m in members}
    medoid = medoid_of(members, combined)
    got = select_representatives(members, combined, semantic, medoid, k_c=5, lambda_mmr=0.7)
    expected = greedy_mmr_oracle(members, combined, semantic, medoid, 5, 0.7)
    assert got == expected


def test_mmr_pure_relevance_degenerates_to_distance_order():
    members = [f"m{i}" for i in range(6)]
    combined = {m: np.array([float(i), 0.0]) for i, m in enumerate(members)}
    semantic = combined
    got = select_representatives(members, combined, semantic, "m0", k_c=3, lambda_mmr=1.0)
    assert got == ["m0", "m1", "m2"]


def test_mmr_small_community_returns_all():
    members = ["a", "b"]
    vectors = {"a": np.array([0.0]), "b": np.array([1.0])}
    got = select_representatives(members, vectors, vectors, "a", k_c=5)
    assert sorted(got) == ["a", "b"]


def test_representatives_distinct_and_members():
    rng = np.random.default_rng(5)
    members = [f"m{i}" for i in range(15)]
    vectors = {m: rng.random(4) for m in members}
    medoid = medoid_of(members, vectors)
    reps = select_representatives(members, vectors, vectors, medoid, k_c=5)
    assert len(reps) == len(set(reps)) == 5
    assert set(reps) <= set(members)
    assert reps[0] == medoid


def test_discover_communities_full_partition():
    rng = np.random.default_rng(6)
    pts = np.vstack(
        [rng.normal(0, 1, (20, 4)), rng.normal(15, 1, (20, 4)), rng.uniform(-50, 50, (4, 4))]
    )
    ideology = [np.array([1.0, 0.0])] * 22 + [np.array([0.0, 1.0])] * 22
    ids = [f"d{i}" for i in range(44)]
    embs = combine(ids, pts, ideology, lam=1.0)
    communities = discover_communities(embs)
    member_union = [m for c in communities for m in c.members]
    assert sorted(member_union) == sorted(ids)
    for comm in communities:
        assert comm.medoid in comm.members
        assert set(comm.representatives) <= set(comm.members)
        if comm.kind == "outlier_side":
            assert comm.side_label


def test_reduce_and_cluster_recover_three_blobs():
    X, truth = gaussian_blobs([40, 40, 40], [[0.0] * 8, [12.0] * 8, [-12.0] * 8], dim=64, seed=0)
    reduced, degraded = reduce_vectors(X, r=8, seed=0)
    assert not degraded
    embs = make_embeddings(reduced)
    clusters, outliers = cluster(embs)
    labels = {}
    for k, members in enumerate(clusters):
        for m in members:
            labels[m] = k
    for o in outliers:
        labels[o] = -1
    predicted = [labels[f"d{i}"] for i in range(120)]
    assert adjusted_rand_score(truth, predicted) >= 0.9


def test_within_cluster_distances_smaller_than_across():
    rng = np.random.default_rng(7)
    pts = np.vstack([rng.normal(0, 1, (20, 4)), rng.normal(12, 1, (20, 4))])
    embs = make_embeddings(pts)
    clusters, _ = cluster(embs)
    assert len(clusters) == 2
    vec = {e.doc_id: e.combined for e in embs}
    within, across = [], []
    for i, a in enumerate(embs):
        for b in embs[i + 1 :]:
            same = any(a.doc_id in c and b.doc_id in c for c in clusters)
            (within if same else across).append(np.linalg.norm(vec[a.doc_id] - vec[b.doc_id]))
    assert np.mean(within) < np.mean(across)


def test_reduce_vectors_disabled_passthrough():
    X = np.random.default_rng(8).random((30, 16))
    out, degraded = reduce_vectors(X, r=8, enabled=False)
    assert np.array_equal(out, X)
    assert not degraded
