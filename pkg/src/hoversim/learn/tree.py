"""CART grown breadth-first with vectorised split search.

A whole tree level is scored at once: rows are sorted by (node, feature
value) and split costs come from segmented cumulative sums. Regression and
Gini classification share one criterion, ``-(|s_L|^2/n_L + |s_R|^2/n_R)``,
where ``s`` sums the per-row statistic (targets, or one-hot classes).
Ties go to the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class TreeArrays:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, m): mean target or class counts

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while len(rows):
            f = self.feature[node[rows]]
            inner = f >= 0
            rows = rows[inner]
            if not len(rows):
                break
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
        return node

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def grow_tree(
    X: np.ndarray,
    S: np.ndarray,
    max_depth: Optional[int] = None,
    min_leaf: int = 1,
    max_features: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    leaf_value: str = "mean",
) -> TreeArrays:
    """Fit one CART on rows of *X* with per-row statistics *S* (n, m).

    ``leaf_value`` is ``"mean"`` for regression and ``"sum"`` for class
    counts. ``max_features`` below ``d`` draws a fresh feature subset per
    node from *rng*.
    """
    X = np.asarray(X, dtype=float)
    S = np.asarray(S, dtype=float)
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot grow a tree on zero rows")
    mtry = d if max_features is None else max(1, min(d, int(max_features)))
    if mtry < d and rng is None:
        raise ValueError("feature subsampling needs an rng")
    depth_cap = np.inf if max_depth is None else max_depth

    cap = 2 * n + 1  # a binary tree with at most n leaves
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros((cap, S.shape[1]))
    n_nodes = 1

    assign = np.zeros(n, dtype=np.int64)  # frontier-local node of each row, -1 once settled
    frontier = np.zeros(1, dtype=np.int64)  # global ids of frontier nodes
    depth = 0
    while len(frontier):
        n_f = len(frontier)
        rows = np.flatnonzero(assign >= 0)
        order = np.argsort(assign[rows], kind="stable")
        rows = rows[order]  # grouped by frontier node
        loc = assign[rows]
        starts = np.searchsorted(loc, np.arange(n_f))
        counts = np.diff(np.append(starts, len(rows)))
        s_rows = S[rows]
        sums = np.add.reduceat(s_rows, starts, axis=0)
        value[frontier] = sums / counts[:, None] if leaf_value == "mean" else sums

        # pure: every row of the node carries the same statistic vector
        pure = np.all(np.maximum.reduceat(s_rows, starts, axis=0) == np.minimum.reduceat(s_rows, starts, axis=0), axis=1)
        splittable = (~pure) & (counts >= 2 * min_leaf) & (depth < depth_cap)
        if not splittable.any():
            break

        if mtry < d:
            allowed = np.zeros((n_f, d), dtype=bool)
            picks = np.argsort(rng.random((n_f, d)), axis=1)[:, :mtry]
            np.put_along_axis(allowed, picks, True, axis=1)
        else:
            allowed = np.ones((n_f, d), dtype=bool)

        best_cost = np.full(n_f, np.inf)
        best_feat = np.full(n_f, -1, dtype=np.int64)
        best_thr = np.zeros(n_f)
        for f in range(d):
            node_ok = splittable & allowed[:, f]
            if not node_ok.any():
                continue
            sel = node_ok[loc]
            r = rows[sel]
            vals = X[r, f]
            o = np.lexsort((vals, loc[sel]))
            nl = loc[sel][o]
            v = vals[o]
            cs = np.cumsum(s_rows[sel][o], axis=0)
            nodes = np.flatnonzero(node_ok)
            seg = np.searchsorted(nl, nodes)  # segment start of each participating node
            seg_of = np.repeat(np.arange(len(nodes)), np.diff(np.append(seg, len(nl))))
            base = np.zeros((len(nodes), cs.shape[1]))
            base[seg > 0] = cs[seg[seg > 0] - 1]
            left_sum = cs - base[seg_of]
            idx = np.arange(len(nl))
            left_n = idx - seg[seg_of] + 1
            right_n = counts[nl] - left_n
            right_sum = sums[nl] - left_sum

            valid = np.zeros(len(nl), dtype=bool)
            valid[:-1] = (nl[1:] == nl[:-1]) & (v[:-1] < v[1:])
            valid &= (left_n >= min_leaf) & (right_n >= min_leaf)
            if not valid.any():
                continue
            cost = np.full(len(nl), np.inf)
            cost[valid] = -(
                np.einsum("ij,ij->i", left_sum[valid], left_sum[valid]) / left_n[valid]
                + np.einsum("ij,ij->i", right_sum[valid], right_sum[valid]) / right_n[valid]
            )
            node_min = np.minimum.reduceat(cost, seg)
            # first (lowest-threshold) position attaining the minimum
            hit = valid & (cost == node_min[seg_of])
            pos = np.minimum.reduceat(np.where(hit, idx, len(nl)), seg)
            better = np.isfinite(node_min) & (node_min < best_cost[nodes])
            nodes, pos = nodes[better], pos[better]
            best_cost[nodes] = node_min[better]
            best_feat[nodes] = f
            lo, hi = v[pos], v[pos + 1]
            thr = (lo + hi) / 2.0
            best_thr[nodes] = np.where(thr >= hi, lo, thr)  # adjacent floats

        split = np.flatnonzero(best_feat >= 0)
        parents = frontier[split]
        kids = n_nodes + 2 * np.arange(len(split))
        feature[parents] = best_feat[split]
        threshold[parents] = best_thr[split]
        left[parents] = kids
        right[parents] = kids + 1
        n_nodes += 2 * len(split)
        new_local = np.full(n_f, -1, dtype=np.int64)
        new_local[split] = 2 * np.arange(len(split))
        new_frontier = np.empty(2 * len(split), dtype=np.int64)
        new_frontier[0::2] = kids
        new_frontier[1::2] = kids + 1

        split_rows = best_feat[loc] >= 0
        go_left = X[rows, np.maximum(best_feat[loc], 0)] <= best_thr[loc]
        nxt = np.full(len(rows), -1, dtype=np.int64)
        base_idx = new_local[loc]
        nxt[split_rows] = np.where(go_left[split_rows], base_idx[split_rows], base_idx[split_rows] + 1)
        assign[rows] = nxt
        frontier = new_frontier
        depth += 1

    return TreeArrays(
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )
