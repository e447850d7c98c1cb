import math

import numpy as np
import pytest
import torch

from attrswap.errors import ContractError
from attrswap.metrics import (EmbeddingSet, cluster_tendency_report,
                              embedding_set, encode_dataset, export_embeddings,
                              frechet_distance, hopkins, load_embeddings,
                              pca_project, posterior_entropy,
                              transfer_accuracy)


# ---------------------------------------------------------------- Hopkins

def test_hopkins_uniform_box_near_half():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, (500, 4))
    mean, std = hopkins(pts, rng=1)
    assert 0.4 < mean < 0.6
    assert std < 0.1


def test_hopkins_tight_blobs_near_one():
    rng = np.random.default_rng(0)
    a = rng.normal(0, 0.01, (250, 4))
    b = rng.normal(5, 0.01, (250, 4)) + 5
    mean, _ = hopkins(np.concatenate([a, b]), rng=1)
    assert mean > 0.9


def test_hopkins_degenerate_box():
    with pytest.raises(ContractError):
        hopkins(np.ones((50, 3)), rng=0)


def test_hopkins_probe_bounds():
    pts = np.random.default_rng(0).uniform(0, 1, (20, 2))
    with pytest.raises(ContractError):
        hopkins(pts, probe_count=20)
    with pytest.raises(ContractError):
        hopkins(pts, probe_count=0)


def test_hopkins_deterministic_given_seed():
    pts = np.random.default_rng(3).uniform(0, 1, (100, 3))
    assert hopkins(pts, rng=7) == hopkins(pts, rng=7)


# ------------------------------------------------------- posterior entropy

def test_entropy_uniform_is_log_k():
    for k in (2, 4, 8):
        h, mean = posterior_entropy(np.full((5, k), 1.0 / k))
        assert np.allclose(h, math.log(k), atol=1e-9)
        assert mean == pytest.approx(math.log(k), abs=1e-9)


def test_entropy_one_hot_is_zero():
    p = np.eye(6)[[0, 3, 5]]
    h, mean = posterior_entropy(p)
    assert np.all(h == 0.0)
    assert mean == 0.0


def test_entropy_hand_value():
    # -0.5 ln 0.5 - 0.5 ln 0.5 = ln 2; mixed row computed by hand
    h, _ = posterior_entropy(np.array([[0.5, 0.5], [0.9, 0.1]]))
    assert h[0] == pytest.approx(math.log(2), abs=1e-12)
    assert h[1] == pytest.approx(-0.9 * math.log(0.9) - 0.1 * math.log(0.1),
                                 abs=1e-12)


def test_entropy_rejects_non_pmf():
    with pytest.raises(ContractError):
        posterior_entropy(np.array([[0.5, 0.6]]))
    with pytest.raises(ContractError):
        posterior_entropy(np.array([[1.2, -0.2]]))


def test_entropy_accepts_torch_softmax_rows():
    logits = torch.randn(4, 7)
    h, mean = posterior_entropy(torch.softmax(logits, dim=1))
    assert np.all(h >= 0) and np.all(h <= math.log(7) + 1e-9)


# --------------------------------------------------------- Frechet distance

def test_frechet_identical_sets_is_zero():
    x = np.random.default_rng(0).normal(0, 1, (2000, 6))
    assert frechet_distance(x, x) == pytest.approx(0.0, abs=1e-6)


def test_frechet_mean_shift_oracle():
    """For equal covariances the distance reduces to the squared mean gap."""
    rng = np.random.default_rng(1)
    base = rng.normal(0, 1, (100_000, 8))
    for shift in (1.0, 2.0):
        mu = np.zeros(8)
        mu[0] = shift
        d = frechet_distance(base, base + mu)
        assert d == pytest.approx(shift ** 2, rel=0.05)


def test_frechet_univariate_closed_form():
    """1-D Gaussians: (mu_a - mu_b)^2 + (sigma_a - sigma_b)^2."""
    rng = np.random.default_rng(2)
    a = rng.normal(0.0, 1.0, (200_000, 1))
    b = rng.normal(3.0, 2.0, (200_000, 1))
    assert frechet_distance(a, b) == pytest.approx(9.0 + 1.0, rel=0.05)


def test_frechet_symmetric_and_nonnegative():
    rng = np.random.default_rng(3)
    a = rng.normal(0, 1, (500, 5))
    b = rng.normal(1, 2, (500, 5))
    d_ab, d_ba = frechet_distance(a, b), frechet_distance(b, a)
    assert d_ab == pytest.approx(d_ba, rel=1e-6)
    assert d_ab > 0


def test_frechet_rejects_nan():
    a = np.zeros((10, 2))
    a[0, 0] = np.nan
    with pytest.raises(ContractError):
        frechet_distance(a, np.ones((10, 2)))


# ------------------------------------------------------------------- PCA

def test_pca_recovers_dominant_direction():
    rng = np.random.default_rng(0)
    t = rng.normal(0, 5, 300)
    pts = np.stack([t, 0.1 * rng.normal(size=300), 0.1 * rng.normal(size=300)], 1)
    proj = pca_project(pts, 2)
    assert proj.shape == (300, 2)
    # first component carries (almost) all of the variance of t
    assert abs(np.corrcoef(proj[:, 0], t)[0, 1]) > 0.99


def test_pca_deterministic():
    pts = np.random.default_rng(1).normal(0, 1, (50, 6))
    assert np.array_equal(pca_project(pts), pca_project(pts))


# ---------------------------------------------------- embeddings + export

def test_encode_dataset_shape(tiny_model, small_dataset):
    ds = small_dataset.select_attributes(["shape", "hue"])
    emb = encode_dataset(tiny_model, ds, 1, batch=13)
    # latent is (32, 8, 8) for the tiny 32 px model with base 8
    assert emb.shape == (len(ds), 32 * 8 * 8)


def test_export_load_roundtrip(tmp_path, tiny_model, small_dataset):
    ds = small_dataset.select_attributes(["shape", "hue"]).subset(range(12))
    path, proj_path = export_embeddings(tiny_model, ds, 2, tmp_path / "emb.tsv")
    assert path.exists() and proj_path.exists()
    loaded = load_embeddings(path, n_attributes=2)
    original = embedding_set(tiny_model, ds, 2)
    assert np.allclose(loaded.points, original.points, atol=1e-5)
    assert np.array_equal(loaded.labels, original.labels)
    assert loaded.attribute_names == ["shape", "hue"]


def test_embedding_set_rejects_nan():
    with pytest.raises(ContractError):
        EmbeddingSet(points=np.array([[np.nan, 0.0]]), labels=np.zeros((1, 1)))


# --------------------------------------------------- cluster tendency rows

def _synthetic_embedding(rng):
    """Three well separated clusters along attribute 1, each split into two
    subgroups along attribute 2."""
    points, labels = [], []
    for c in range(3):
        for s in range(2):
            center = np.array([10.0 * c, 4.0 * s, 0.0])
            points.append(center + rng.normal(0, 0.2, (40, 3)))
            labels.append(np.tile([c, s], (40, 1)))
    return EmbeddingSet(points=np.concatenate(points),
                        labels=np.concatenate(labels),
                        attribute_names=["a", "b"])


def test_cluster_tendency_report_structure():
    rng = np.random.default_rng(0)
    emb = _synthetic_embedding(rng)
    rows = cluster_tendency_report(emb, cluster_by=1, score_within=2, rng=1)
    assert [r.cluster_label for r in rows] == [0, 1, 2]
    for r in rows:
        assert r.n_points == 80
        # two tight subgroups inside each cluster: pooled Hopkins is high
        assert r.pooled_mean > 0.7
        assert 0.0 <= r.per_label_mean <= 1.0


def test_cluster_tendency_skips_tiny_clusters():
    rng = np.random.default_rng(0)
    pts = rng.normal(0, 1, (45, 3))
    labels = np.zeros((45, 2), dtype=np.int64)
    labels[:1, 0] = 1  # single-point cluster cannot host any probes
    emb = EmbeddingSet(points=pts, labels=labels, attribute_names=["a", "b"])
    rows = cluster_tendency_report(emb, cluster_by=1, score_within=2,
                                   probe_fraction=0.9, rng=0)
    assert all(r.cluster_label == 0 for r in rows)


# ------------------------------------------------------- transfer accuracy

def test_transfer_accuracy_structure(tiny_model, small_dataset):
    ds = small_dataset.select_attributes(["shape", "hue"])
    import copy
    eval_model = copy.deepcopy(tiny_model)
    result = transfer_accuracy(tiny_model, eval_model, ds, attribute=2,
                               max_images=3, donor_rng=0)
    assert set(result) == {"hue", "preserve_shape"}
    for mean, std in result.values():
        assert 0.0 <= mean <= 1.0
        assert std >= 0.0


def test_transfer_accuracy_donor_mode(tiny_model, small_dataset):
    ds = small_dataset.select_attributes(["shape", "hue"])
    import copy
    eval_model = copy.deepcopy(tiny_model)
    result = transfer_accuracy(tiny_model, eval_model, ds, attribute=1,
                               mode="donor", max_images=2, donor_rng=0)
    assert "shape" in result and "preserve_hue" in result


def test_transfer_accuracy_unknown_mode(tiny_model, small_dataset):
    ds = small_dataset.select_attributes(["shape", "hue"]).subset(range(4))
    with pytest.raises(ContractError):
        transfer_accuracy(tiny_model, tiny_model, ds, attribute=1,
                          mode="other", max_images=1)
