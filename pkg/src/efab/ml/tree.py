"""Single-round gradient-boosted decision tree: training, prediction, schema.

One boosting round of log-loss gradient boosting reduces to a prior
log-odds base score plus one regression tree fit to the gradients, so
the trainer is a greedy CART fit (squared error on residuals) with
Newton leaf estimates.  Growth is best-gain-first, which both matches
plain depth-limited CART when unconstrained and doubles as the pruning
knob: capping the internal-node count keeps the most useful splits,
which is how the hardware-scale model (9 thresholds) is produced.

Prediction outputs the probability that a track is signal (truth
pT > 2 GeV); descending goes left when feature <= threshold, and ties
take the left branch - frozen so hardware and software agree bit-exactly.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Leaf", "Split", "TreeModel", "train_tree", "predict", "predict_proba",
    "import_model", "export_model",
    "SchemaError", "DepthExceeded", "FeatureIndexOutOfRange", "SingleClassDataset",
    "MAX_DEPTH", "N_FEATURES",
]

MAX_DEPTH = 5
N_FEATURES = 14
MIN_LEAF = 32


class SchemaError(Exception):
    pass


class DepthExceeded(Exception):
    pass


class FeatureIndexOutOfRange(Exception):
    pass


class SingleClassDataset(Exception):
    pass


@dataclass
class Leaf:
    value: float


@dataclass
class Split:
    feature: int
    threshold: float
    left: "Split | Leaf"
    right: "Split | Leaf"


@dataclass
class TreeModel:
    base_score: float
    learning_rate: float
    root: Split | Leaf

    def depth(self) -> int:
        def d(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(d(node.left), d(node.right))
        return d(self.root)

    def internal_nodes(self) -> list[Split]:
        out = []
        def walk(node):
            if isinstance(node, Split):
                out.append(node)
                walk(node.left)
                walk(node.right)
        walk(self.root)
        return out

    def leaves(self) -> list[Leaf]:
        out = []
        def walk(node):
            if isinstance(node, Leaf):
                out.append(node)
            else:
                walk(node.left)
                walk(node.right)
        walk(self.root)
        return out

    def validate(self, n_features: int = N_FEATURES,
                 max_depth: int = MAX_DEPTH) -> None:
        if self.depth() > max_depth:
            raise DepthExceeded(f"tree depth {self.depth()} exceeds {max_depth}")
        for node in self.internal_nodes():
            if not 0 <= node.feature < n_features:
                raise FeatureIndexOutOfRange(
                    f"feature index {node.feature} not in 0..{n_features - 1}")


def _descend(root, x) -> Leaf:
    node = root
    while isinstance(node, Split):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node


def predict(model: TreeModel, features) -> tuple[float, float]:
    """(raw score, probability).  Score = base + learning_rate * leaf."""
    leaf = _descend(model.root, features)
    score = model.base_score + model.learning_rate * leaf.value
    return score, 1.0 / (1.0 + math.exp(-score))


def predict_proba(model: TreeModel, X) -> np.ndarray:
    return np.array([predict(model, row)[1] for row in np.asarray(X)])


def _best_split(X, r, idx, min_leaf):
    """Best (gain, feature, threshold) for the sample subset, or None."""
    best = None
    rsub = r[idx]
    total = rsub.sum()
    n = len(idx)
    base_sse_term = total * total / n
    for f in range(X.shape[1]):
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        v = vals[order]
        rs = rsub[order]
        csum = np.cumsum(rs)
        # candidate split after position i (1-based count) where value changes
        nl = np.arange(1, n)
        valid = v[1:] != v[:-1]
        valid &= (nl >= min_leaf) & (n - nl >= min_leaf)
        if not valid.any():
            continue
        left = csum[:-1]
        gain = left * left / nl + (total - left) ** 2 / (n - nl) - base_sse_term
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        g = float(gain[i])
        if g <= 1e-12:
            continue
        thr = float((v[i] + v[i + 1]) / 2)
        if best is None or g > best[0] + 1e-15:
            best = (g, f, thr, order, i)
    return best


def train_tree(X, y, max_depth: int = MAX_DEPTH, learning_rate: float = 1.0,
               min_leaf: int = MIN_LEAF, max_nodes: int | None = None) -> TreeModel:
    """Fit the single boosting round; deterministic given input order.

    ``max_nodes`` caps internal nodes (best-gain-first growth), trading
    accuracy for hardware size.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y) or len(X) < 2:
        raise ValueError("need a 2-D feature matrix with at least two rows")
    if len(np.unique(y)) < 2:
        raise SingleClassDataset("training labels contain a single class")
    p = float(y.mean())
    base = math.log(p / (1 - p))
    r = y - p           # log-loss gradient residuals at the base score
    hess = p * (1 - p)  # constant over samples in round one

    def leaf_for(idx) -> Leaf:
        return Leaf(float(r[idx].sum() / (hess * len(idx))))

    root_idx = np.arange(len(y))
    # best-first growth: heap of (-gain, tiebreak, depth, subset, split info)
    counter = 0
    heap = []

    def consider(idx, depth):
        nonlocal counter
        if depth >= max_depth:
            return None
        found = _best_split(X, r, idx, min_leaf)
        if found is None:
            return None
        gain, f, thr, order, cut = found
        counter += 1
        entry = [-gain, counter, depth, idx, f, thr, order, cut, None]
        heapq.heappush(heap, entry)
        return entry

    class _Pending:
        """Placeholder node, replaced by Split or Leaf when resolved."""
        def __init__(self, idx, depth):
            self.idx = idx
            self.depth = depth
            self.node = None

    root_p = _Pending(root_idx, 0)
    entry = consider(root_idx, 0)
    owner_of_entry = {id(entry): root_p} if entry is not None else {}

    n_internal = 0
    budget = max_nodes if max_nodes is not None else (1 << max_depth)
    while heap and n_internal < budget:
        e = heapq.heappop(heap)
        _, _, depth, idx, f, thr, order, cut, _ = e
        owner = owner_of_entry.pop(id(e))
        lp = _Pending(idx[order[:cut + 1]], depth + 1)
        rp = _Pending(idx[order[cut + 1:]], depth + 1)
        owner.node = Split(f, thr, lp, rp)
        n_internal += 1
        for child in (lp, rp):
            ce = consider(child.idx, child.depth)
            if ce is not None:
                owner_of_entry[id(ce)] = child

    def materialise(p: _Pending):
        if p.node is None:
            return leaf_for(p.idx)
        split = p.node
        return Split(split.feature, split.threshold,
                     materialise(split.left), materialise(split.right))

    model = TreeModel(base, learning_rate, materialise(root_p))
    model.validate(n_features=X.shape[1], max_depth=max_depth)
    return model


# -- model schema ------------------------------------------------------------

def _node_to_obj(node):
    if isinstance(node, Leaf):
        return {"value": node.value}
    return {"feature": node.feature, "threshold": node.threshold,
            "left": _node_to_obj(node.left), "right": _node_to_obj(node.right)}


def export_model(model: TreeModel) -> str:
    obj = {"base_score": model.base_score,
           "learning_rate": model.learning_rate,
           "tree": _node_to_obj(model.root)}
    return json.dumps(obj, indent=1, sort_keys=True)


def _node_from_obj(obj):
    if not isinstance(obj, dict):
        raise SchemaError(f"tree node must be an object, got {type(obj).__name__}")
    if "value" in obj:
        if set(obj) != {"value"} or not isinstance(obj["value"], (int, float)):
            raise SchemaError(f"malformed leaf {obj!r}")
        return Leaf(float(obj["value"]))
    want = {"feature", "threshold", "left", "right"}
    if set(obj) != want:
        raise SchemaError(f"split node needs keys {sorted(want)}, got {sorted(obj)}")
    if not isinstance(obj["feature"], int) or isinstance(obj["feature"], bool):
        raise SchemaError("feature index must be an integer")
    if not isinstance(obj["threshold"], (int, float)):
        raise SchemaError("threshold must be a number")
    return Split(obj["feature"], float(obj["threshold"]),
                 _node_from_obj(obj["left"]), _node_from_obj(obj["right"]))


def import_model(text: str, n_features: int = N_FEATURES,
                 max_depth: int = MAX_DEPTH) -> TreeModel:
    """Parse and validate the JSON model schema."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model text is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or not {"base_score", "learning_rate", "tree"} <= set(obj):
        raise SchemaError("model object needs base_score, learning_rate and tree")
    model = TreeModel(float(obj["base_score"]), float(obj["learning_rate"]),
                      _node_from_obj(obj["tree"]))
    model.validate(n_features=n_features, max_depth=max_depth)
    return model
