"""Rank statistics: Spearman correlation and the method-vs-method
importance correlation matrix with its clustering-based row order.
"""

from __future__ import annotations

import numpy as np
from scipy.cluster.hierarchy import average, leaves_list
from scipy.spatial.distance import pdist


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """Ranks from 1..n with ties assigned the average of their positions."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(xs, ys) -> float:
    """Pearson correlation of average ranks."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"expected equal-length 1-d vectors, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise ValueError(f"need at least 2 values, got {len(x)}")
    rx, ry = _average_ranks(x), _average_ranks(y)
    sx, sy = rx.std(), ry.std()
    if sx == 0.0 or sy == 0.0:
        raise ValueError("spearman_rho undefined: zero rank variance (all values tied)")
    return float(((rx - rx.mean()) * (ry - ry.mean())).mean() / (sx * sy))


def importance_correlation_matrix(
    weight_vectors: dict[str, np.ndarray], cluster_sort: bool = False
) -> tuple[list[str], np.ndarray]:
    """Pairwise Spearman matrix over methods; symmetric with unit diagonal.

    With cluster_sort, rows/columns are reordered by average-linkage
    hierarchical clustering on Euclidean distance between weight vectors
    (presentation only).
    """
    names = list(weight_vectors)
    vecs = [np.asarray(weight_vectors[k], dtype=np.float64) for k in names]
    lengths = {len(v) for v in vecs}
    if len(lengths) > 1:
        raise ValueError(f"inconsistent weight vector lengths: {sorted(lengths)}")
    m = len(names)
    mat = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            rho = spearman_rho(vecs[i], vecs[j])
            mat[i, j] = mat[j, i] = rho
    if cluster_sort and m > 2:
        order = leaves_list(average(pdist(np.stack(vecs))))
        names = [names[i] for i in order]
        mat = mat[np.ix_(order, order)]
    return names, mat
