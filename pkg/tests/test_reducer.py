import numpy as np

from conftest import gaussian_blobs
from respcast.reducer import EmbeddingReducer, neighborhood_preservation


def three_blob_fixture():
    centers = [[0.0] * 8, [12.0] * 8, [-12.0] * 8]
    return gaussian_blobs([40, 40, 40], centers, dim=64, seed=0)


def silhouette(X, labels):
    from sklearn.metrics import silhouette_score

    return silhouette_score(X, labels)


def test_three_blobs_stay_separable():
    X, labels = three_blob_fixture()
    reduced = EmbeddingReducer(r=8, seed=0).fit_transform(X)
    assert silhouette(reduced, labels) > 0.5


def test_identical_inputs_collapse_to_one_point():
    X = np.ones((20, 16))
    reduced = EmbeddingReducer(r=4, seed=0).fit_transform(X)
    assert np.allclose(reduced, reduced[0], atol=1e-8)


def test_seed_determinism_byte_identical():
    X, _ = three_blob_fixture()
    a = EmbeddingReducer(r=8, seed=3).fit_transform(X)
    b = EmbeddingReducer(r=8, seed=3).fit_transform(X)
    assert np.array_equal(a, b)


def test_too_few_vectors_degraded_passthrough():
    X = np.arange(12.0).reshape(3, 4)
    reducer = EmbeddingReducer(r=8, seed=0)
    reduced = reducer.fit_transform(X)
    assert reducer.degraded
    assert reduced.shape == (3, 8)
    assert np.allclose(reduced[:, :4], X)
    assert np.allclose(reduced[:, 4:], 0.0)


def test_preservation_beats_random_projection():
    X, _ = three_blob_fixture()
    reduced = EmbeddingReducer(r=8, seed=0).fit_transform(X)
    rng = np.random.default_rng(0)
    projection = X @ rng.standard_normal((64, 8))
    ours = neighborhood_preservation(X, reduced)
    baseline = neighborhood_preservation(X, projection)
    assert ours >= baseline


def test_outputs_finite():
    X, _ = three_blob_fixture()
    reduced = EmbeddingReducer(r=8, seed=1).fit_transform(X)
    assert np.all(np.isfinite(reduced))


def test_transform_places_near_training_neighbors():
    X, labels = three_blob_fixture()
    reducer = EmbeddingReducer(r=8, seed=0)
    train = reducer.fit_transform(X)
    # a point on blob 1's center should land near blob 1's embeddings
    probe = np.full((1, 64), 0.0)
    probe[0, :8] = 12.0
    probe[0, 8:] = 12.0
    placed = reducer.transform(probe)[0]
    blob1_center = train[labels == 1].mean(axis=0)
    blob0_center = train[labels == 0].mean(axis=0)
    assert np.linalg.norm(placed - blob1_center) < np.linalg.norm(placed - blob0_center)
