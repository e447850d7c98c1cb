"""Quantitative diagnostics: Hopkins cluster tendency, posterior entropy,
Fréchet distance between feature distributions, transfer classification
accuracy, and embedding export with a built-in PCA projection."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import ContractError
from .latent_ops import decode_with_code, image_to_tensor, mean_code, swap, SwapRequest
from .nets import ModelBundle
from .schema import Dataset

log = logging.getLogger(__name__)


@dataclass
class EmbeddingSet:
    points: np.ndarray  # (N, d)
    labels: np.ndarray  # (N, M) class indices
    attribute_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.points.ndim != 2 or len(self.points) < 1:
            raise ContractError("points must be a nonempty (N, d) matrix")
        if np.isnan(self.points).any():
            raise ContractError("points contain NaN")


def _nn_distances(query: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Nearest-neighbor Euclidean distance from each query row to `data`."""
    d2 = ((query[:, None, :] - data[None, :, :]) ** 2).sum(axis=2)
    return np.sqrt(d2.min(axis=1))


def hopkins_once(points: np.ndarray, probe_count: int,
                 rng: np.random.Generator) -> float:
    n, d = points.shape
    lo, hi = points.min(axis=0), points.max(axis=0)
    if np.all(hi - lo == 0):
        raise ContractError("degenerate bounding box: all points identical")
    uniform = rng.uniform(lo, hi, size=(probe_count, d))
    u = _nn_distances(uniform, points)
    idx = rng.choice(n, size=probe_count, replace=False)
    sampled = points[idx]
    rest = np.delete(points, idx, axis=0)
    if len(rest) == 0:
        # self-exclusion: nearest other sampled point
        d2 = ((sampled[:, None, :] - sampled[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        w = np.sqrt(d2.min(axis=1))
    else:
        pool = np.concatenate([rest, sampled])
        d2 = ((sampled[:, None, :] - pool[None, :, :]) ** 2).sum(axis=2)
        d2[np.arange(probe_count), len(rest) + np.arange(probe_count)] = np.inf
        w = np.sqrt(d2.min(axis=1))
    return float(u.sum() / (u.sum() + w.sum()))


def hopkins(points: np.ndarray, probe_count: int | None = None,
            rng: np.random.Generator | int | None = None,
            repetitions: int = 20) -> tuple[float, float]:
    """Hopkins statistic H = sum(u) / (sum(u) + sum(w)) in [0, 1]; near 0.5
    for uniformly scattered data, toward 1 for clustered data. Returns
    (mean, std) over repetitions."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if probe_count is None:
        probe_count = max(1, n // 10)
    if not 1 <= probe_count < n:
        raise ContractError(f"need 1 <= probe_count < N, got {probe_count} vs N={n}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    values = [hopkins_once(points, probe_count, rng) for _ in range(repetitions)]
    return float(np.mean(values)), float(np.std(values))


def posterior_entropy(pmf: np.ndarray | torch.Tensor,
                      tol: float = 1e-4) -> tuple[np.ndarray, float]:
    """Shannon entropy per row in nats (0*log0 := 0) and the batch mean."""
    p = pmf.detach().numpy() if isinstance(pmf, torch.Tensor) else np.asarray(pmf)
    p = np.atleast_2d(p).astype(np.float64)
    sums = p.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > tol) or np.any(p < -tol):
        raise ContractError("rows are not valid PMFs")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    h = terms.sum(axis=1)
    return h, float(h.mean())


def frechet_distance(feats_a: np.ndarray, feats_b: np.ndarray) -> float:
    """Fréchet distance between Gaussian fits of two feature sets:
    ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2})."""
    a = np.asarray(feats_a, dtype=np.float64)
    b = np.asarray(feats_b, dtype=np.float64)
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ContractError("non-finite features")
    d = a.shape[1]
    if len(a) <= d or len(b) <= d:
        log.warning("fewer samples than feature dims (%d/%d vs d=%d); "
                    "covariance estimate is rank-deficient", len(a), len(b), d)
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.cov(a, rowvar=False, ddof=1).reshape(d, d)
    cov_b = np.cov(b, rowvar=False, ddof=1).reshape(d, d)
    # tr((S_a S_b)^{1/2}) via the symmetric PSD form S_a^{1/2} S_b S_a^{1/2}
    vals_a, vecs_a = np.linalg.eigh(cov_a)
    vals_a = np.clip(vals_a, 0.0, None)
    root_a = (vecs_a * np.sqrt(vals_a)) @ vecs_a.T
    inner = root_a @ cov_b @ root_a
    vals = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    floor = -1e-8 * max(vals.max(initial=0.0), 1.0)
    if vals.min(initial=0.0) < floor:
        log.warning("matrix square root has eigenvalue %g below the clamp floor",
                    vals.min())
    trace_root = np.sqrt(np.clip(vals, 0.0, None)).sum()
    diff = mu_a - mu_b
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * trace_root)


@torch.no_grad()
def encode_dataset(model: ModelBundle, dataset: Dataset, m: int,
                   batch: int = 64) -> np.ndarray:
    """Flattened E_m codes for every item: (N, C*H*W/16)."""
    chunks = []
    for i in range(0, len(dataset), batch):
        x = torch.from_numpy(
            np.array(dataset.images[i:i + batch], dtype=np.float32)).permute(0, 3, 1, 2)
        chunks.append(model.encoders[m](x).flatten(1).numpy())
    return np.concatenate(chunks) if chunks else np.zeros((0, 0))


def embedding_set(model: ModelBundle, dataset: Dataset, m: int) -> EmbeddingSet:
    return EmbeddingSet(points=encode_dataset(model, dataset, m),
                        labels=np.asarray(dataset.labels),
                        attribute_names=dataset.schema.names)


def pca_project(points: np.ndarray, dim: int = 2) -> np.ndarray:
    """Project onto the top principal components (deterministic sign)."""
    x = points - points.mean(axis=0)
    _, s, vt = np.linalg.svd(x, full_matrices=False)
    comps = vt[:dim]
    # fix sign so the largest-magnitude loading of each component is positive
    for i in range(len(comps)):
        j = np.argmax(np.abs(comps[i]))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    return x @ comps.T


def export_embeddings(model: ModelBundle, dataset: Dataset, m: int,
                      out_path: str | Path) -> tuple[Path, Path]:
    """Write the flattened codes as columnar text (label columns first, then
    features) plus a 2-D PCA projection file; t-SNE is left to external
    tools."""
    emb = embedding_set(model, dataset, m)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    header = "\t".join(emb.attribute_names
                       + [f"f{i}" for i in range(emb.points.shape[1])])
    body = np.concatenate([emb.labels.astype(np.float64), emb.points], axis=1)
    np.savetxt(out_path, body, delimiter="\t", header=header, comments="")
    proj_path = out_path.with_suffix(".pca2d.tsv")
    proj = pca_project(emb.points, 2)
    proj_header = "\t".join(emb.attribute_names + ["pc1", "pc2"])
    np.savetxt(proj_path, np.concatenate([emb.labels.astype(np.float64), proj], axis=1),
               delimiter="\t", header=proj_header, comments="")
    return out_path, proj_path


def load_embeddings(path: str | Path, n_attributes: int) -> EmbeddingSet:
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip().split("\t")
    body = np.loadtxt(path, delimiter="\t", skiprows=1, ndmin=2)
    return EmbeddingSet(points=body[:, n_attributes:],
                        labels=body[:, :n_attributes].astype(np.int64),
                        attribute_names=header[:n_attributes])


@dataclass
class ClusterTendencyRow:
    cluster_label: int
    n_points: int
    pooled_mean: float
    pooled_std: float
    per_label_mean: float
    per_label_std: float


def cluster_tendency_report(emb: EmbeddingSet, cluster_by: int, score_within: int,
                            probe_fraction: float = 0.1, repetitions: int = 20,
                            project_dim: int = 2,
                            rng: np.random.Generator | int | None = None
                            ) -> list[ClusterTendencyRow]:
    """Partition points by the cluster_by attribute; within each cluster
    report the Hopkins statistic under both poolings: pooled over all points
    in the cluster, and averaged over per-score_within-label subgroups.
    Points are PCA-projected per cluster (project_dim=0 disables)."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    rows = []
    for label in np.unique(emb.labels[:, cluster_by - 1]):
        mask = emb.labels[:, cluster_by - 1] == label
        pts = emb.points[mask]
        probes = max(1, int(round(probe_fraction * len(pts))))
        if len(pts) <= probes:
            log.warning("cluster %s has %d points, fewer than probe count; skipped",
                        label, len(pts))
            continue
        if project_dim and pts.shape[1] > project_dim:
            pts = pca_project(pts, project_dim)
        pooled_mean, pooled_std = hopkins(pts, probes, rng, repetitions)
        sub_means = []
        for sub in np.unique(emb.labels[mask, score_within - 1]):
            sub_pts = pts[emb.labels[mask, score_within - 1] == sub]
            sub_probes = max(1, int(round(probe_fraction * len(sub_pts))))
            if len(sub_pts) <= sub_probes:
                continue
            m, _ = hopkins(sub_pts, sub_probes, rng, repetitions)
            sub_means.append(m)
        rows.append(ClusterTendencyRow(
            cluster_label=int(label), n_points=int(mask.sum()),
            pooled_mean=pooled_mean, pooled_std=pooled_std,
            per_label_mean=float(np.mean(sub_means)) if sub_means else float("nan"),
            per_label_std=float(np.std(sub_means)) if sub_means else float("nan")))
    return rows


@torch.no_grad()
def transfer_accuracy(model: ModelBundle, eval_model: ModelBundle,
                      test: Dataset, attribute: int,
                      mode: str = "mean_code", max_images: int | None = None,
                      donor_rng: np.random.Generator | int | None = None
                      ) -> dict[str, tuple[float, float]]:
    """For each test image and each target class of `attribute`, synthesize
    via mean-attribute code (or a random donor swap), classify with the held
    separate evaluation classifiers, and report per-class mean accuracy plus
    std over classes. Also reports preservation accuracy for every other
    attribute."""
    if eval_model is model:
        log.warning("evaluation classifiers should be held separate from the "
                    "training classifiers")
    if not isinstance(donor_rng, np.random.Generator):
        donor_rng = np.random.default_rng(donor_rng)
    k = model.schema.class_count(attribute)
    images = test.images if max_images is None else test.images[:max_images]
    labels = test.labels if max_images is None else test.labels[:max_images]
    per_class_hits = np.zeros(k)
    per_class_n = np.zeros(k)
    preserve_hits = {m: 0 for m in range(1, model.M + 1) if m != attribute}
    preserve_n = 0

    codes = None
    if mode == "mean_code":
        codes = {c: mean_code(model, test, attribute, label=c) for c in range(k)}

    for i in range(len(images)):
        src = images[i]
        for c in range(k):
            if mode == "mean_code":
                out = decode_with_code(model, src, attribute, codes[c])
            elif mode == "donor":
                pool = np.flatnonzero(test.labels[:, attribute - 1] == c)
                donor = test.images[donor_rng.choice(pool)]
                out = swap(model, SwapRequest(src, {attribute: donor}))
            else:
                raise ContractError(f"unknown transfer mode {mode!r}")
            x = image_to_tensor(out)
            pred = eval_model.classify_image(x, attribute).argmax(dim=1).item()
            per_class_hits[c] += pred == c
            per_class_n[c] += 1
            for m in preserve_hits:
                pm = eval_model.classify_image(x, m).argmax(dim=1).item()
                preserve_hits[m] += pm == labels[i, m - 1]
            preserve_n += 1

    per_class = per_class_hits / np.maximum(per_class_n, 1)
    result = {
        model.schema.names[attribute - 1]: (float(per_class.mean()),
                                            float(per_class.std())),
    }
    for m, hits in preserve_hits.items():
        name = model.schema.names[m - 1]
        result[f"preserve_{name}"] = (hits / max(preserve_n, 1), 0.0)
    return result
