"""Independent reference implementations the tests check the package against.

These deliberately avoid the library's search machinery: no cache, no
bounds, no pruning — just complete recursion over the admissible tree space
and explicit pair enumeration for partition similarity.
"""

from itertools import combinations

import numpy as np

from qdtrees import BinaryDataset, QuantileGrid, evaluate_leaf


def exhaustive_best_errors(ds, levels, max_depth: int, min_sup: int, start_cover=None) -> np.ndarray:
    """Per-level minimum total loss over every admissible tree.

    A tree is admissible when its depth is <= max_depth, every split sends
    >= min_sup samples to each side, and a bare leaf is allowed at any node.
    The minimum decomposes over subtrees, so complete (unpruned, uncached)
    recursion over covers enumerates the whole space.
    """
    grid = QuantileGrid(levels)
    start = np.ones(ds.n_samples, dtype=bool) if start_cover is None else start_cover

    def rec(cov: np.ndarray, depth: int) -> np.ndarray:
        best = evaluate_leaf(ds, cov, grid).losses.copy()
        n = int(cov.sum())
        if depth >= 1 and n >= 2 * min_sup:
            for f in range(ds.n_features):
                covr = cov & ds.covers[f]
                nr = int(covr.sum())
                if nr < min_sup or n - nr < min_sup:
                    continue
                covl = cov & ~ds.covers[f]
                total = rec(covl, depth - 1) + rec(covr, depth - 1)
                best = np.minimum(best, total)
        return best

    return rec(start, max_depth)


def jaccard_pairs(groups_a, groups_b) -> float:
    """Co-membership Jaccard by explicit pair enumeration."""
    def pair_set(groups):
        pairs = set()
        for g in groups:
            pairs.update(combinations(sorted(int(i) for i in g), 2))
        return pairs

    pa, pb = pair_set(groups_a), pair_set(groups_b)
    union = pa | pb
    if not union:
        return 1.0
    return len(pa & pb) / len(union)


def random_instance(rng, max_features: int = 10, max_samples: int = 64) -> BinaryDataset:
    n = int(rng.integers(4, max_samples + 1))
    k = int(rng.integers(1, max_features + 1))
    x = rng.integers(0, 2, size=(n, k))
    if rng.random() < 0.3:
        y = rng.integers(-3, 4, size=n).astype(float)  # heavy ties
    else:
        y = rng.normal(size=n)
    return BinaryDataset.from_arrays(x, y)
