"""Gradient-boosted regression trees for pinball and absolute losses.

Each round fits a shallow tree to the negative loss gradient at the current
predictions, then replaces every leaf value with the loss-minimizing constant
for the residuals routed there (median for absolute loss, the tau-quantile
for pinball). With line-searched leaves and a learning rate in (0, 1] the
training loss is non-increasing round over round by convexity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _best_split(X: np.ndarray, g: np.ndarray, min_leaf: int):
    """Exhaustive (feature, threshold) search maximizing SSE reduction on g.

    Returns None when no admissible split improves on the parent node.
    Ties keep the first candidate found (lowest feature index, then lowest
    threshold), which makes tree construction deterministic.
    """
    n = len(g)
    if n < 2 * min_leaf:
        return None
    total = g.sum()
    base = total * total / n
    best_gain = 1e-12
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        gs = g[order]
        csum = np.cumsum(gs)
        # candidate cut after position i (1-indexed sizes i, n-i)
        for i in range(min_leaf, n - min_leaf + 1):
            if xs[i - 1] == xs[i]:
                continue
            left_sum = csum[i - 1]
            right_sum = total - left_sum
            gain = left_sum * left_sum / i + right_sum * right_sum / (n - i) - base
            if gain > best_gain:
                best_gain = gain
                best = (f, (xs[i - 1] + xs[i]) / 2.0)
    return best


def _fit_tree(
    X: np.ndarray,
    g: np.ndarray,
    resid: np.ndarray,
    depth: int,
    min_leaf: int,
    leaf_value,
) -> TreeNode:
    if depth == 0:
        return TreeNode(value=float(leaf_value(resid)))
    split = _best_split(X, g, min_leaf)
    if split is None:
        return TreeNode(value=float(leaf_value(resid)))
    f, thr = split
    mask = X[:, f] <= thr
    return TreeNode(
        feature=f,
        threshold=thr,
        left=_fit_tree(X[mask], g[mask], resid[mask], depth - 1, min_leaf, leaf_value),
        right=_fit_tree(
            X[~mask], g[~mask], resid[~mask], depth - 1, min_leaf, leaf_value
        ),
    )


def _tree_predict(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, idx = stack.pop()
        if nd.is_leaf:
            out[idx] = nd.value
            continue
        mask = X[idx, nd.feature] <= nd.threshold
        stack.append((nd.left, idx[mask]))
        stack.append((nd.right, idx[~mask]))
    return out


def _refit_leaves(node: TreeNode, X: np.ndarray, resid: np.ndarray, leaf_value) -> None:
    """Line-search every leaf value on the full training residuals.

    Tree structure may come from a subsample; re-fitting leaf values on all
    routed samples keeps each round a true descent step on the training
    loss (for any learning rate in (0, 1], by convexity of the losses).
    """
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, idx = stack.pop()
        if nd.is_leaf:
            nd.value = float(leaf_value(resid[idx])) if idx.size else 0.0
            continue
        mask = X[idx, nd.feature] <= nd.threshold
        stack.append((nd.left, idx[mask]))
        stack.append((nd.right, idx[~mask]))


def pinball_loss(y: np.ndarray, pred: np.ndarray, tau: float) -> float:
    u = y - pred
    return float(np.maximum(tau * u, (tau - 1.0) * u).mean())


def absolute_loss(y: np.ndarray, pred: np.ndarray) -> float:
    return float(np.abs(y - pred).mean())


def pinball_gradient(y: np.ndarray, pred: np.ndarray, tau: float) -> np.ndarray:
    """Negative subgradient of mean pinball loss w.r.t. predictions (unscaled).

    Exact ties take the midpoint subgradient tau - 1/2. Integer labels make
    ties common: a one-sided choice would zero out the split signal whenever
    the current prediction sits on the boundary label.
    """
    u = y - pred
    return np.where(u > 0, tau, np.where(u < 0, tau - 1.0, tau - 0.5))


def absolute_gradient(y: np.ndarray, pred: np.ndarray) -> np.ndarray:
    return np.sign(y - pred)


@dataclass(frozen=True)
class BoostedModel:
    loss: str  # "absolute" or "pinball"
    tau: float | None
    base_prediction: float
    trees: tuple[TreeNode, ...]
    learning_rate: float
    train_losses: tuple[float, ...] = field(default=())

    def predict(self, X: np.ndarray) -> np.ndarray:
        pred = np.full(len(X), self.base_prediction)
        for tree in self.trees:
            pred += self.learning_rate * _tree_predict(tree, X)
        return pred


def fit_boosted(
    X: np.ndarray,
    y: np.ndarray,
    loss: str,
    rounds: int,
    depth: int = 3,
    rate: float = 0.1,
    tau: float | None = None,
    min_leaf: int = 5,
    subsample: float = 0.7,
    seed: int = 42,
) -> BoostedModel:
    """Boosted shallow trees; each round sees a seeded random subsample.

    Subsampling diversifies split thresholds across rounds, so the ensemble
    prediction surface is fine-grained rather than a coarse leaf lattice
    (coarse lattices put large atoms in downstream nonconformity scores).
    """
    if len(X) == 0:
        raise ValueError("cannot fit on an empty training set")
    if depth > 3 or depth < 0:
        raise ValueError(f"tree depth must be in [0, 3], got {depth}")
    if rounds < 0:
        raise ValueError(f"rounds must be >= 0, got {rounds}")
    if not 0.0 < subsample <= 1.0:
        raise ValueError(f"subsample must be in (0, 1], got {subsample}")
    if loss == "pinball":
        if tau is None or not 0.0 < tau < 1.0:
            raise ValueError("pinball loss needs tau in (0, 1)")
        base = float(np.quantile(y, tau, method="inverted_cdf"))
        grad_fn = lambda r: pinball_gradient(y, r, tau)
        loss_fn = lambda r: pinball_loss(y, r, tau)
        leaf_value = lambda res: np.quantile(res, tau, method="inverted_cdf")
    elif loss == "absolute":
        base = float(np.median(y))
        grad_fn = lambda r: absolute_gradient(y, r)
        loss_fn = lambda r: absolute_loss(y, r)
        leaf_value = np.median
    else:
        raise ValueError(f"unknown loss {loss!r}")

    rng = np.random.default_rng(seed)
    n = len(y)
    n_sub = max(2 * min_leaf, int(round(subsample * n)))
    pred = np.full(n, base)
    trees: list[TreeNode] = []
    losses = [loss_fn(pred)]
    for _ in range(rounds):
        g = grad_fn(pred)
        resid = y - pred
        if n_sub < n:
            idx = rng.choice(n, size=n_sub, replace=False)
            tree = _fit_tree(X[idx], g[idx], resid[idx], depth, min_leaf, leaf_value)
            _refit_leaves(tree, X, resid, leaf_value)
        else:
            tree = _fit_tree(X, g, resid, depth, min_leaf, leaf_value)
        pred = pred + rate * _tree_predict(tree, X)
        trees.append(tree)
        losses.append(loss_fn(pred))
    return BoostedModel(
        loss=loss,
        tau=tau,
        base_prediction=base,
        trees=tuple(trees),
        learning_rate=rate,
        train_losses=tuple(losses),
    )
