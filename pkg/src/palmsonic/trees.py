"""CART decision trees and bagged forests over feature vectors.

Trees are stored as parallel node arrays (feature, threshold, left, right,
score) so that models serialize to flat numeric payloads; feature == -1
marks a leaf and score is the infested fraction of the training samples
that reached it. Splits go left when value <= threshold.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["build_tree", "tree_scores", "gini"]

LEAF = -1


def gini(n_pos: float, n: float) -> float:
    """Impurity of a node with n_pos positives among n samples."""
    if n == 0:
        return 0.0
    p = n_pos / n
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _best_split(x, y, feature_ids):
    """Greedy minimum weighted Gini over (feature, midpoint threshold).

    Candidate thresholds sit at midpoints of consecutive distinct sorted
    values. Ties resolve to the lowest feature index, then the lowest
    threshold, which the ascending scan order gives for free.
    """
    n = y.size
    best = None  # (impurity, feature, threshold)
    for f in sorted(feature_ids):
        vals = x[:, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = y[order]
        distinct = sv[:-1] != sv[1:]
        if not np.any(distinct):
            continue
        pos_left = np.cumsum(sy)[:-1].astype(np.float64)
        n_left = np.arange(1, n, dtype=np.float64)
        n_right = n - n_left
        pos_right = float(sy.sum()) - pos_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        g_l = 1.0 - p_l**2 - (1.0 - p_l) ** 2
        g_r = 1.0 - p_r**2 - (1.0 - p_r) ** 2
        weighted = (n_left * g_l + n_right * g_r) / n
        weighted[~distinct] = np.inf
        i = int(np.argmin(weighted))  # first minimum = lowest threshold
        if best is None or weighted[i] < best[0]:
            best = (float(weighted[i]), f, float(0.5 * (sv[i] + sv[i + 1])))
    return best


def build_tree(x, y, max_depth, min_samples_split, rng=None, n_candidate_features=None):
    """Grow a CART tree; returns the node-array dict.

    When n_candidate_features is given (forests), each split draws that many
    feature indices without replacement from rng; otherwise all features are
    candidates and rng is never consulted.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    d = x.shape[1]
    nodes = {"feature": [], "threshold": [], "left": [], "right": [], "score": []}

    def add_node():
        for key in nodes:
            nodes[key].append(0)
        return len(nodes["feature"]) - 1

    def fill_leaf(node_id, score):
        nodes["feature"][node_id] = LEAF
        nodes["threshold"][node_id] = 0.0
        nodes["left"][node_id] = LEAF
        nodes["right"][node_id] = LEAF
        nodes["score"][node_id] = score

    def grow(idx, depth):
        node_id = add_node()
        n = idx.size
        n_pos = int(y[idx].sum())
        score = n_pos / n
        pure = n_pos == 0 or n_pos == n
        if pure or depth >= max_depth or n < min_samples_split:
            fill_leaf(node_id, score)
            return node_id
        if n_candidate_features is None or n_candidate_features >= d:
            feats = range(d)
        else:
            feats = rng.choice(d, size=n_candidate_features, replace=False)
        split = _best_split(x[idx], y[idx], feats)
        if split is None:  # all candidate features constant here
            fill_leaf(node_id, score)
            return node_id
        _, feature, threshold = split
        nodes["feature"][node_id] = feature
        nodes["threshold"][node_id] = threshold
        nodes["score"][node_id] = score
        go_left = x[idx, feature] <= threshold
        nodes["left"][node_id] = grow(idx[go_left], depth + 1)
        nodes["right"][node_id] = grow(idx[~go_left], depth + 1)
        return node_id

    grow(np.arange(x.shape[0]), 0)
    return {
        "feature": np.asarray(nodes["feature"], dtype=np.int64),
        "threshold": np.asarray(nodes["threshold"], dtype=np.float64),
        "left": np.asarray(nodes["left"], dtype=np.int64),
        "right": np.asarray(nodes["right"], dtype=np.int64),
        "score": np.asarray(nodes["score"], dtype=np.float64),
    }


def tree_scores(tree, x) -> np.ndarray:
    """Leaf infested-fraction for each row of x."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = np.empty(x.shape[0])
    feature = tree["feature"]
    threshold = tree["threshold"]
    left = tree["left"]
    right = tree["right"]
    score = tree["score"]
    for r in range(x.shape[0]):
        node = 0
        while feature[node] != LEAF:
            node = left[node] if x[r, feature[node]] <= threshold[node] else right[node]
        out[r] = score[node]
    return out


def sqrt_feature_count(d: int) -> int:
    return int(math.ceil(math.sqrt(d)))
