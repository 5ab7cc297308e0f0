"""Fitted-model representation: trees, prediction, similarity, serialization.

A ``QuantileModel`` bundles one decision tree per quantile level, all fitted
on the same binarized dataset.  Internal nodes test one binary feature; the
left child handles samples where the feature is absent (0), the right child
where it is present (1).  Leaves carry the predicted quantile value plus the
training cover size and loss, so a serialized model is self-describing.

Models serialize to versioned JSON (schema version 1):

    {"version": 1,
     "quantiles": [...],
     "optimal": [true, ...],
     "trees": [{"feature": k, "left": {...}, "right": {...}}
               | {"leaf": {"value": v, "n": n, "loss": l}}, ...],
     "binarization": [...],
     "config": {"max_depth": d, "min_sup": s}}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import BinaryDataset, _feature_label
from .quantiles import QuantileGrid


class ModelError(ValueError):
    """Raised for structurally invalid trees or models."""


class ModelFormatError(ModelError):
    """Raised for malformed or version-incompatible serialized payloads."""


# Plain slotted dataclasses (not frozen): tree nodes are constructed in the
# search's innermost loop, where frozen's __setattr__ indirection costs real
# time.  Nodes are never mutated after construction.
@dataclass(slots=True)
class Leaf:
    value: float
    n: int
    loss: float


@dataclass(slots=True)
class Internal:
    feature: int
    left: "Tree"
    right: "Tree"


Tree = Leaf | Internal


def tree_depth(tree: Tree) -> int:
    if isinstance(tree, Leaf):
        return 0
    return 1 + max(tree_depth(tree.left), tree_depth(tree.right))


def tree_leaves(tree: Tree) -> list[Leaf]:
    """Leaves in left-to-right order."""
    if isinstance(tree, Leaf):
        return [tree]
    return tree_leaves(tree.left) + tree_leaves(tree.right)


def tree_loss(tree: Tree) -> float:
    """Training loss of a tree, accumulated left child before right.

    The recursion adds partial sums in the same order the search does, so the
    result is bit-identical to the error reported at fit time.
    """
    if isinstance(tree, Leaf):
        return tree.loss
    return tree_loss(tree.left) + tree_loss(tree.right)


def validate_tree(tree: Tree, n_features: int, max_depth: int) -> None:
    """Check depth bound, feature ranges, and path non-repetition."""

    def walk(node: Tree, depth: int, path: frozenset[int]) -> None:
        if isinstance(node, Leaf):
            if node.n < 1:
                raise ModelError(f"leaf covers {node.n} samples")
            return
        if depth >= max_depth:
            raise ModelError(f"tree deeper than max_depth={max_depth}")
        f = node.feature
        if not 0 <= f < n_features:
            raise ModelError(f"feature id {f} out of range [0, {n_features})")
        if f in path:
            raise ModelError(f"feature {f} repeats along a root-to-leaf path")
        walk(node.left, depth + 1, path | {f})
        walk(node.right, depth + 1, path | {f})

    walk(tree, 0, frozenset())


@dataclass
class QuantileModel:
    """One fitted tree per quantile level, plus everything needed to reuse it.

    ``binarization`` is the feature map the model was trained against; its
    length defines the expected feature count at prediction time.
    ``train_errors`` is a fit-time convenience (the per-quantile training
    losses as computed by the search) and is not serialized; it can always be
    recomputed via ``tree_loss``.
    """

    grid: QuantileGrid
    trees: tuple[Tree, ...]
    optimal: tuple[bool, ...]
    binarization: list[dict]
    max_depth: int
    min_sup: int
    train_errors: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.trees) != len(self.grid):
            raise ModelError(f"{len(self.trees)} trees for {len(self.grid)} quantile levels")
        if len(self.optimal) != len(self.trees):
            raise ModelError("optimality flags do not match trees")
        if self.max_depth < 0 or self.min_sup < 1:
            raise ModelError(f"bad config echo: max_depth={self.max_depth} min_sup={self.min_sup}")
        for tree in self.trees:
            validate_tree(tree, self.n_features, self.max_depth)
        if self.train_errors is not None:
            errs = np.asarray(self.train_errors, dtype=np.float64)
            if errs.shape != (len(self.trees),):
                raise ModelError("train_errors length does not match trees")
            object.__setattr__(self, "train_errors", errs)

    @property
    def n_features(self) -> int:
        return len(self.binarization)

    @property
    def feature_names(self) -> list[str]:
        return [_feature_label(e) for e in self.binarization]


def _route(tree: Tree, sample: np.ndarray) -> Leaf:
    node = tree
    while isinstance(node, Internal):
        node = node.right if sample[node.feature] else node.left
    return node


def predict(model: QuantileModel, sample) -> np.ndarray:
    """Per-quantile predictions for one binary feature vector."""
    x = np.asarray(sample).reshape(-1)
    if x.shape[0] != model.n_features:
        raise ModelError(f"sample has {x.shape[0]} features, model expects {model.n_features}")
    return np.array([_route(t, x).value for t in model.trees], dtype=np.float64)


def predict_batch(model: QuantileModel, features) -> np.ndarray:
    """Predictions for an (n_samples, n_features) 0/1 matrix, one row per sample.

    Routes all samples through each tree with boolean masks instead of
    per-sample loops.
    """
    x = np.asarray(features)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise ModelError(
            f"features must be (n_samples, {model.n_features}), got {x.shape}"
        )
    x = x.astype(bool)
    out = np.empty((x.shape[0], len(model.grid)), dtype=np.float64)

    def walk(node: Tree, mask: np.ndarray, col: int) -> None:
        if isinstance(node, Leaf):
            out[mask, col] = node.value
            return
        present = x[:, node.feature]
        walk(node.left, mask & ~present, col)
        walk(node.right, mask & present, col)

    everything = np.ones(x.shape[0], dtype=bool)
    for j, tree in enumerate(model.trees):
        walk(tree, everything, j)
    return out


def _leaf_labels(tree: Tree, ds: BinaryDataset) -> tuple[np.ndarray, int]:
    """Label each sample with the index of the leaf it routes to."""
    labels = np.empty(ds.n_samples, dtype=np.intp)
    counter = [0]

    def walk(node: Tree, mask: np.ndarray) -> None:
        if isinstance(node, Leaf):
            labels[mask] = counter[0]
            counter[0] += 1
            return
        present = ds.covers[node.feature]
        walk(node.left, mask & ~present)
        walk(node.right, mask & present)

    walk(tree, np.ones(ds.n_samples, dtype=bool))
    return labels, counter[0]


def partition(tree: Tree, ds: BinaryDataset) -> list[np.ndarray]:
    """Split the dataset's sample indices into one group per leaf.

    Groups come back in left-to-right leaf order and are pairwise disjoint
    and exhaustive (some may be empty for samples routed by features the
    training cover never exercised).
    """
    labels, n_leaves = _leaf_labels(tree, ds)
    return [np.flatnonzero(labels == g) for g in range(n_leaves)]


def _pair_count(counts: np.ndarray) -> int:
    c = counts.astype(np.int64)
    return int(np.sum(c * (c - 1)) // 2)


def _jaccard_from_labels(a: np.ndarray, na: int, b: np.ndarray, nb: int) -> float:
    # Co-membership Jaccard via the contingency table: the number of sample
    # pairs co-located by both partitions is sum over cells of C(n_ij, 2).
    joint = np.bincount(a * nb + b, minlength=na * nb)
    both = _pair_count(joint)
    pairs_a = _pair_count(np.bincount(a, minlength=na))
    pairs_b = _pair_count(np.bincount(b, minlength=nb))
    union = pairs_a + pairs_b - both
    if union == 0:
        return 1.0  # two all-singleton partitions are identical
    return both / union


def jaccard_matrix(model: QuantileModel, ds: BinaryDataset) -> np.ndarray:
    """Pairwise partition similarity between the model's trees on ``ds``.

    Entry (i, j) is the Jaccard index between the sets of unordered sample
    pairs that trees i and j each place in a common leaf.  Symmetric, unit
    diagonal, entries in [0, 1].
    """
    if ds.n_features != model.n_features:
        raise ModelError(
            f"dataset has {ds.n_features} features, model expects {model.n_features}"
        )
    m = len(model.trees)
    labelled = [_leaf_labels(t, ds) for t in model.trees]
    out = np.ones((m, m), dtype=np.float64)
    for i in range(m):
        a, na = labelled[i]
        for j in range(i + 1, m):
            b, nb = labelled[j]
            out[i, j] = out[j, i] = _jaccard_from_labels(a, na, b, nb)
    return out


def zone_summary(matrix: np.ndarray, threshold: float = 0.1) -> list[tuple[int, int]]:
    """Group consecutive trees into similarity zones (report annotation only).

    A zone starts at some anchor tree; following the anchor's matrix row, the
    zone ends just before the first tree whose similarity to the anchor drops
    by more than ``threshold`` (relative) from the previous tree's value.
    Returns inclusive (start, end) index ranges covering 0..m-1.
    """
    m = np.asarray(matrix)
    k = m.shape[0]
    zones: list[tuple[int, int]] = []
    start = 0
    for j in range(1, k):
        prev, cur = m[start, j - 1], m[start, j]
        if prev - cur > threshold * max(prev, 1e-12):
            zones.append((start, j - 1))
            start = j
    zones.append((start, k - 1))
    return zones


def format_tree(tree: Tree, names: list[str] | None = None) -> str:
    """Indented textual dump of one tree."""
    lines: list[str] = []

    def describe(node: Tree) -> str:
        if isinstance(node, Leaf):
            return f"value={node.value:.6g}  (n={node.n}, loss={node.loss:.6g})"
        return f"[{names[node.feature] if names else f'f{node.feature}'}]"

    def walk(node: Tree, prefix: str) -> None:
        if isinstance(node, Leaf):
            return
        for branch, child in (("0", node.left), ("1", node.right)):
            tail = branch == "1"
            connector = "`-" if tail else "|-"
            lines.append(f"{prefix}{connector} {branch}: {describe(child)}")
            walk(child, prefix + ("   " if tail else "|  "))

    lines.append(describe(tree))
    walk(tree, "")
    return "\n".join(lines)


def _node_to_json(node: Tree) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": {"value": node.value, "n": node.n, "loss": node.loss}}
    return {
        "feature": node.feature,
        "left": _node_to_json(node.left),
        "right": _node_to_json(node.right),
    }


def _node_from_json(obj) -> Tree:
    if not isinstance(obj, dict):
        raise ModelFormatError(f"tree node must be an object, got {type(obj).__name__}")
    if "leaf" in obj:
        leaf = obj["leaf"]
        try:
            return Leaf(value=float(leaf["value"]), n=int(leaf["n"]), loss=float(leaf["loss"]))
        except (TypeError, KeyError, ValueError) as exc:
            raise ModelFormatError(f"malformed leaf node: {obj!r}") from exc
    try:
        return Internal(
            feature=int(obj["feature"]),
            left=_node_from_json(obj["left"]),
            right=_node_from_json(obj["right"]),
        )
    except (TypeError, KeyError, ValueError) as exc:
        raise ModelFormatError(f"malformed internal node: {obj!r}") from exc


MODEL_SCHEMA_VERSION = 1


def serialize(model: QuantileModel) -> bytes:
    payload = {
        "version": MODEL_SCHEMA_VERSION,
        "quantiles": model.grid.qs.tolist(),
        "optimal": list(model.optimal),
        "trees": [_node_to_json(t) for t in model.trees],
        "binarization": model.binarization,
        "config": {"max_depth": model.max_depth, "min_sup": model.min_sup},
    }
    return json.dumps(payload, indent=1).encode("utf-8")


def deserialize(data: bytes | str) -> QuantileModel:
    try:
        payload = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"not valid model JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ModelFormatError("model payload must be a JSON object")
    version = payload.get("version")
    if version != MODEL_SCHEMA_VERSION:
        raise ModelFormatError(
            f"unsupported model schema version {version!r} (expected {MODEL_SCHEMA_VERSION})"
        )
    try:
        grid = QuantileGrid(payload["quantiles"])
        trees = tuple(_node_from_json(t) for t in payload["trees"])
        optimal = tuple(bool(v) for v in payload["optimal"])
        binarization = payload["binarization"]
        config = payload["config"]
        model = QuantileModel(
            grid=grid,
            trees=trees,
            optimal=optimal,
            binarization=binarization,
            max_depth=int(config["max_depth"]),
            min_sup=int(config["min_sup"]),
        )
    except ModelFormatError:
        raise
    except (TypeError, KeyError, ValueError) as exc:
        raise ModelFormatError(f"malformed model payload: {exc}") from exc
    if not isinstance(binarization, list):
        raise ModelFormatError("binarization map must be a list")
    return model
