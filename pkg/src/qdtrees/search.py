"""Branch-and-bound search for optimal quantile regression trees.

One recursive engine serves both entry points: ``fit_single`` runs it with a
one-level grid, ``fit_simultaneous`` with the full grid.  The engine explores
the space of itemsets (sets of signed feature literals identifying tree
nodes) depth-first, carrying a per-quantile vector of upper-bound budgets,
and caches per-itemset results so that an itemset reached along different
paths is only ever solved once.

Subproblem and contract.  For an itemset I with cover C and remaining depth
d, the subproblem is: minimize total quantile loss over all trees on C of
depth <= d whose every split puts at least min_sup samples in each child; a
bare leaf is always admissible.  ``_search`` returns, per quantile, a valid
tree and its exact error, such that

    error_i <  ubs_i  =>  error_i is the true subproblem optimum,
    error_i >= ubs_i  =>  certified: no admissible tree has error < ubs_i
                          (the returned tree is just the best fallback).

To keep the per-node cost independent of the grid size, leaves are lazy: a
``None`` slot in a returned tree list stands for "this subproblem's own
leaf" (value/loss in the accompanying LeafEval) and is only materialized
into a Leaf object when a parent adopts it into a split or a result is
certified into the cache.

Cache entries store per-quantile certified optima (``solved[i]`` set means
``trees[i]``/``errors[i]`` hold the unconditional optimum) and failure
certificates (``lbs[i]`` is a proven lower bound on the optimum, recorded
when a search under budget ubs_i came back empty-handed).  Because a search
that times out returns fallbacks without those guarantees, nothing is stored
once the deadline has passed: anytime results stay valid, the cache stays
sound.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dataset import BinaryDataset, Itemset
from .model import Internal, Leaf, QuantileModel, Tree
from .quantiles import INTERPOLATED, LEAF_VALUE_MODES, LeafEval, QuantileGrid, evaluate_leaf

STATIC = "static"
VARIANCE = "variance"
FEATURE_ORDERS = (STATIC, VARIANCE)


class SearchError(ValueError):
    """Raised for invalid search configurations or arguments."""


@dataclass(frozen=True)
class SearchConfig:
    max_depth: int = 4
    min_sup: int = 1
    timeout_s: float | None = None
    feature_order: str = STATIC
    cache_enabled: bool = True
    leaf_value: str = INTERPOLATED

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise SearchError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_sup < 1:
            raise SearchError(f"min_sup must be >= 1, got {self.min_sup}")
        if self.timeout_s is not None and self.timeout_s < 0:
            raise SearchError(f"timeout_s must be >= 0, got {self.timeout_s}")
        if self.feature_order not in FEATURE_ORDERS:
            raise SearchError(f"feature_order must be one of {FEATURE_ORDERS}")
        if self.leaf_value not in LEAF_VALUE_MODES:
            raise SearchError(f"leaf_value must be one of {LEAF_VALUE_MODES}")


class CacheEntry:
    """Per-itemset search state: bounds, certified optima, cached leaf eval."""

    __slots__ = ("lbs", "errors", "trees", "solved", "n_solved", "leaf")

    def __init__(self, m: int) -> None:
        self.lbs = np.zeros(m)
        self.errors = np.full(m, np.inf)
        self.trees: list[Tree | None] = [None] * m
        self.solved = np.zeros(m, dtype=bool)
        self.n_solved = 0
        self.leaf: LeafEval | None = None


class SearchCache:
    """Map from canonical itemsets to cache entries, with hit/miss counters."""

    def __init__(self) -> None:
        self.map: dict[Itemset, CacheEntry] = {}
        self.hits = 0
        self.misses = 0

    @property
    def entries(self) -> int:
        return len(self.map)

    def lookup_or_create(self, items: Itemset, m: int) -> CacheEntry:
        entry = self.map.get(items)
        if entry is None:
            entry = CacheEntry(m)
            self.map[items] = entry
            self.misses += 1
        else:
            self.hits += 1
        return entry


def can_return(entry: CacheEntry, ubs, leaf_errors) -> bool:
    """True when a cached entry settles every quantile slot without a search.

    A slot is settled when a certified tree is present, or no tree can beat
    the budget (ubs_i <= lbs_i), or the bare leaf already attains the proven
    lower bound (the leaf is itself optimal).
    """
    ubs = np.asarray(ubs, dtype=np.float64)
    leaf_errors = np.asarray(leaf_errors, dtype=np.float64)
    m = len(entry.trees)
    if ubs.shape != (m,) or leaf_errors.shape != (m,):
        raise SearchError(
            f"expected {m} bounds and leaf errors, got {ubs.shape}/{leaf_errors.shape}"
        )
    return bool(np.all(entry.solved | (ubs <= entry.lbs) | (leaf_errors <= entry.lbs)))


def _variance_order(ds: BinaryDataset) -> np.ndarray:
    # Descending reduction of total squared deviation by a single root split;
    # ties fall back to ascending feature id (stable sort on negated keys).
    y = ds.targets
    total = float(np.sum((y - y.mean()) ** 2))
    reduction = np.empty(ds.n_features)
    for f in range(ds.n_features):
        mask = ds.covers[f]
        sse = 0.0
        for side in (y[mask], y[~mask]):
            if side.size:
                sse += float(np.sum((side - side.mean()) ** 2))
        reduction[f] = total - sse
    return np.argsort(-reduction, kind="stable")


class Searcher:
    """One fit: a dataset, a grid, a config, a cache, and a deadline."""

    def __init__(self, ds: BinaryDataset, grid: QuantileGrid, cfg: SearchConfig) -> None:
        if len(grid) > cfg.min_sup:
            warnings.warn(
                f"grid has {len(grid)} levels but min_sup is {cfg.min_sup}; leaves smaller"
                f" than the grid cannot spread their quantile estimates apart",
                stacklevel=3,
            )
        self.ds = ds
        self.grid = grid
        self.cfg = cfg
        self.m = len(grid)
        self.cache = SearchCache()
        self.timed_out = False
        self._deadline = None if cfg.timeout_s is None else time.monotonic() + cfg.timeout_s
        self._zero_lbs = np.zeros(self.m)  # stand-in bounds when caching is off
        if cfg.feature_order == VARIANCE:
            self.order = _variance_order(ds)
        else:
            self.order = np.arange(ds.n_features)

    def run(self) -> tuple[list[Tree], np.ndarray]:
        root_cover = np.ones(self.ds.n_samples, dtype=bool)
        root_ubs = np.full(self.m, np.inf)
        le, trees, errors = self._search(Itemset.empty(), root_cover, self.cfg.max_depth, root_ubs)
        return (
            [t if t is not None else self._leaf_of(le, i) for i, t in enumerate(trees)],
            np.array(errors, dtype=np.float64),
        )

    def _out_of_time(self) -> bool:
        if not self.timed_out and self._deadline is not None and time.monotonic() >= self._deadline:
            self.timed_out = True
        return self.timed_out

    @staticmethod
    def _leaf_of(le: LeafEval, i: int) -> Leaf:
        return Leaf(float(le.values[i]), le.n, float(le.losses[i]))

    def _certify_leaf_slots(self, entry: CacheEntry, le: LeafEval) -> None:
        # A leaf meeting the proven lower bound is itself optimal; certify it
        # (trees[i] stays None: a certified None slot means "this itemset's
        # own leaf") so later visits take the solved fast path.
        hit = ~entry.solved & (le.losses <= entry.lbs)
        entry.errors[hit] = le.losses[hit]
        entry.solved |= hit
        entry.n_solved = int(np.count_nonzero(entry.solved))

    def _search(
        self, items: Itemset, cov: np.ndarray, depth_left: int, ubs: np.ndarray
    ) -> tuple[LeafEval, list[Tree | None], np.ndarray]:
        cfg = self.cfg
        if self._out_of_time():
            le = evaluate_leaf(self.ds, cov, self.grid, cfg.leaf_value)
            return le, [None] * self.m, le.losses

        entry = self.cache.lookup_or_create(items, self.m) if cfg.cache_enabled else None
        if entry is not None:
            if entry.leaf is None:
                entry.leaf = evaluate_leaf(self.ds, cov, self.grid, cfg.leaf_value)
            le = entry.leaf
            if entry.n_solved == self.m:
                return le, entry.trees, entry.errors  # every slot certified: O(1) revisit
            if can_return(entry, ubs, le.losses):
                self._certify_leaf_slots(entry, le)
                if entry.n_solved == self.m:
                    return le, entry.trees, entry.errors
                # Unsolved slots here are hopeless under their budget
                # (ubs <= lbs); their fallback is this node's leaf.
                errors = np.where(entry.solved, entry.errors, le.losses)
                return le, list(entry.trees), errors
            frozen = entry.solved
            lbs = entry.lbs
        else:
            le = evaluate_leaf(self.ds, cov, self.grid, cfg.leaf_value)
            frozen = None
            lbs = self._zero_lbs

        any_frozen = frozen is not None and entry.n_solved > 0
        if any_frozen:
            # Solved slots keep their certified trees (None = this itemset's
            # leaf, same convention as the return value); the rest start from
            # the leaf incumbent.
            best_trees: list[Tree | None] = list(entry.trees)
            best_errs = np.where(frozen, entry.errors, le.losses)
        else:
            best_trees = [None] * self.m
            best_errs = le.losses  # never mutated in place, only rebound

        n = int(np.count_nonzero(cov))
        adopted_any = False
        if depth_left >= 1 and n >= 2 * cfg.min_sup:
            budgets = np.minimum(ubs, best_errs)
            for f in self.order:
                if np.all(best_errs <= lbs):
                    break  # every quantile attained its proven lower bound
                covr = cov & self.ds.covers[f]
                nr = int(np.count_nonzero(covr))
                if nr < cfg.min_sup or n - nr < cfg.min_sup:
                    continue
                covl = cov ^ covr  # covr is a subset of cov, so xor is set difference
                le1, sol1_trees, sol1_errs = self._search(
                    items.extended(f, False), covl, depth_left - 1, budgets
                )
                useful = sol1_errs < budgets
                if not useful.any():
                    continue  # splitting on f helps no quantile
                pos_ubs = np.where(useful, budgets - sol1_errs, -np.inf)
                le2, sol2_trees, sol2_errs = self._search(
                    items.extended(f, True), covr, depth_left - 1, pos_ubs
                )
                feat_errs = sol1_errs + sol2_errs
                improved = useful & (feat_errs < best_errs)
                if any_frozen:
                    improved &= ~frozen
                hits = np.flatnonzero(improved)
                if hits.size:
                    adopted_any = True
                    ff = int(f)
                    v1, l1, n1 = le1.values, le1.losses, le1.n
                    v2, l2, n2 = le2.values, le2.losses, le2.n
                    for i in hits:
                        left = sol1_trees[i]
                        if left is None:
                            left = Leaf(float(v1[i]), n1, float(l1[i]))
                        right = sol2_trees[i]
                        if right is None:
                            right = Leaf(float(v2[i]), n2, float(l2[i]))
                        best_trees[i] = Internal(ff, left, right)
                    best_errs = np.where(improved, feat_errs, best_errs)
                    budgets = np.minimum(budgets, best_errs)

        if entry is not None and not self.timed_out:
            success = best_errs < ubs
            newly = success & ~entry.solved
            failed = ~success & ~entry.solved
            if adopted_any:
                for i in np.flatnonzero(newly):
                    if best_trees[i] is not None:
                        entry.trees[i] = best_trees[i]
            entry.errors[newly] = best_errs[newly]
            entry.lbs[newly] = np.maximum(entry.lbs[newly], best_errs[newly])
            entry.solved |= newly
            entry.n_solved = int(np.count_nonzero(entry.solved))
            entry.lbs[failed] = np.maximum(entry.lbs[failed], ubs[failed])
        return le, best_trees, best_errs


class SingleFit(NamedTuple):
    tree: Tree
    error: float
    optimal: bool


def fit_single(ds: BinaryDataset, q: float, cfg: SearchConfig) -> SingleFit:
    """Optimal tree for one quantile level (degenerate one-level grid)."""
    searcher = Searcher(ds, QuantileGrid([q]), cfg)
    trees, errors = searcher.run()
    return SingleFit(trees[0], float(errors[0]), not searcher.timed_out)


def _as_model(
    ds: BinaryDataset,
    grid: QuantileGrid,
    cfg: SearchConfig,
    trees: list[Tree],
    errors: np.ndarray,
    optimal: tuple[bool, ...],
) -> QuantileModel:
    return QuantileModel(
        grid=grid,
        trees=tuple(trees),
        optimal=optimal,
        binarization=ds.feature_map,
        max_depth=cfg.max_depth,
        min_sup=cfg.min_sup,
        train_errors=np.asarray(errors, dtype=np.float64),
    )


def fit_simultaneous(ds: BinaryDataset, grid: QuantileGrid, cfg: SearchConfig) -> QuantileModel:
    """One shared search producing one optimal tree per grid level."""
    searcher = Searcher(ds, grid, cfg)
    trees, errors = searcher.run()
    return _as_model(ds, grid, cfg, trees, errors, (not searcher.timed_out,) * len(grid))


def fit_naive(
    ds: BinaryDataset, grid: QuantileGrid, cfg: SearchConfig, parallel: bool = False
) -> QuantileModel:
    """Benchmark baseline: a fresh independent search per grid level.

    Per-quantile results are identical to ``fit_simultaneous``; only the
    wall-clock cost differs (roughly linear in the grid size).  With
    ``parallel`` the independent searches run in a thread pool; any
    ``timeout_s`` applies to each single-quantile search separately.
    """
    fits: list[SingleFit]
    if parallel and len(grid) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor() as pool:
            fits = list(pool.map(lambda q: fit_single(ds, q, cfg), grid))
    else:
        fits = [fit_single(ds, q, cfg) for q in grid]
    errors = np.array([f.error for f in fits])
    return _as_model(ds, grid, cfg, [f.tree for f in fits], errors, tuple(f.optimal for f in fits))
