"""Histogram split finding and best-first regression tree growth."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from ethrep.gbdt.bundling import FeatureBundle

# Gains within this relative distance of the best are treated as ties and
# resolved by (feature index, bin index).
TIE_RTOL = 1e-10


class HistogramBuilder:
    """Gradient/hessian/count histograms over bundle slots.

    Per-feature histograms are recovered from the bundle slots; each feature's
    default bin is always derived as node total minus its other bins, so the
    result is bit-identical whether or not features share a bundle.
    """

    def __init__(self, encoded: np.ndarray, bundles: list[FeatureBundle],
                 n_bins: np.ndarray, default_bins: np.ndarray):
        self.n_bundles = len(bundles)
        sizes = np.array([b.n_slots for b in bundles], dtype=np.int64)
        base = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        self.n_slots = int(sizes.sum())
        self.keys = (encoded.astype(np.int64) + base[None, :])

        n_features = len(n_bins)
        self.width = int(n_bins.max()) if n_features else 1
        slot_map = np.full((n_features, self.width), -1, dtype=np.int64)
        for k, b in enumerate(bundles):
            for m, f in enumerate(b.features):
                for bin_ in range(b.n_bins[m]):
                    s = b.encode(m, bin_)
                    if s:
                        slot_map[f, bin_] = base[k] + s
        self.valid = slot_map >= 0
        self.slot_map = np.where(self.valid, slot_map, 0)
        self.default_bins = np.asarray(default_bins, dtype=np.int64)
        self.n_bins = np.asarray(n_bins, dtype=np.int64)

    def build(self, rows: np.ndarray, g: np.ndarray, h: np.ndarray):
        keys = self.keys[rows].ravel()
        nb = self.n_bundles
        G = np.bincount(keys, weights=np.repeat(g[rows], nb), minlength=self.n_slots)
        H = np.bincount(keys, weights=np.repeat(h[rows], nb), minlength=self.n_slots)
        C = np.bincount(keys, minlength=self.n_slots)
        return G, H, C


@dataclass
class SplitInfo:
    feature: int
    bin: int
    gain: float


@numba.njit(cache=True)
def _split_gains(G, H, C, slot_map, valid, default_bins, n_bins,
                 Gt, Ht, Ct, lambda_l2, min_data_in_leaf):
    n_features, width = slot_map.shape
    parent = Gt * Gt / (Ht + lambda_l2)
    gains = np.full((n_features, max(width - 1, 1)), -np.inf)
    g = np.empty(width)
    h = np.empty(width)
    c = np.empty(width, dtype=np.int64)
    for f in range(n_features):
        nb = n_bins[f]
        if nb < 2:
            continue
        d = default_bins[f]
        sg = 0.0
        sh = 0.0
        sc = 0
        for b in range(nb):
            if valid[f, b]:
                s = slot_map[f, b]
                g[b] = G[s]
                h[b] = H[s]
                c[b] = C[s]
            else:
                g[b] = 0.0
                h[b] = 0.0
                c[b] = 0
            sg += g[b]
            sh += h[b]
            sc += c[b]
        g[d] = Gt - sg
        h[d] = Ht - sh
        c[d] = Ct - sc
        gl = 0.0
        hl = 0.0
        cl = 0
        for t in range(nb - 1):
            gl += g[t]
            hl += h[t]
            cl += c[t]
            cr = Ct - cl
            if cl < min_data_in_leaf or cr < min_data_in_leaf:
                continue
            dl = hl + lambda_l2
            dr = Ht - hl + lambda_l2
            if dl <= 0.0 or dr <= 0.0:
                continue
            gr = Gt - gl
            gains[f, t] = gl * gl / dl + gr * gr / dr - parent
    return gains


def find_best_split(builder: "HistogramBuilder", hist, G, H, C,
                    lambda_l2, min_data_in_leaf) -> Optional[SplitInfo]:
    """Best (feature, bin) threshold by the second-order gain, or None.

    Candidates within TIE_RTOL of the best gain go to the lowest
    (feature, bin) pair.
    """
    if not H + lambda_l2 > 0:
        return None
    gains = _split_gains(hist[0], hist[1], hist[2], builder.slot_map, builder.valid,
                         builder.default_bins, builder.n_bins, G, H, C,
                         float(lambda_l2), int(min_data_in_leaf))
    best = gains.max()
    parent = G * G / (H + lambda_l2)
    if not best > TIE_RTOL * parent:
        return None
    flat = int(np.argmax(gains >= best - TIE_RTOL * abs(best)))
    f, t = divmod(flat, gains.shape[1])
    return SplitInfo(f, t, float(gains[f, t]))


class Tree:
    """Binary regression tree stored as flat node arrays; node 0 is the root.

    Internal nodes send ``x[feature] <= raw_threshold`` to the left child.
    """

    def __init__(self, feature, bin_threshold, raw_threshold, left, right, gain, value, n_samples):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.bin_threshold = np.asarray(bin_threshold, dtype=np.int64)
        self.raw_threshold = np.asarray(raw_threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.gain = np.asarray(gain, dtype=np.float64)
        self.value = np.asarray(value, dtype=np.float64)
        self.n_samples = np.asarray(n_samples, dtype=np.int64)
        self.depth = self._depth()

    @classmethod
    def leaf(cls, value: float, n_samples: int) -> "Tree":
        return cls([-1], [0], [0.0], [-1], [-1], [0.0], [value], [n_samples])

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def n_internal(self) -> int:
        return int(np.count_nonzero(self.feature >= 0))

    def _depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def _route(self, values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
        n = values.shape[0]
        node = np.zeros(n, dtype=np.int64)
        if self.n_nodes == 1:
            return node
        rows = np.arange(n)
        for _ in range(self.depth):
            f = self.feature[node]
            internal = f >= 0
            go_left = values[rows, np.where(internal, f, 0)] <= thresholds[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)
        return node

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for each raw feature row."""
        return self._route(np.asarray(X, dtype=np.float64), self.raw_threshold)

    def apply_binned(self, binned: np.ndarray) -> np.ndarray:
        return self._route(binned, self.bin_threshold)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def predict_binned(self, binned: np.ndarray) -> np.ndarray:
        return self.value[self.apply_binned(binned)]

    def to_json(self, i: int = 0) -> dict:
        if self.feature[i] < 0:
            return {"value": float(self.value[i]), "n_samples": int(self.n_samples[i])}
        return {
            "split_feature": int(self.feature[i]),
            "split_bin_threshold": int(self.bin_threshold[i]),
            "raw_threshold": float(self.raw_threshold[i]),
            "gain": float(self.gain[i]),
            "left": self.to_json(int(self.left[i])),
            "right": self.to_json(int(self.right[i])),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Tree":
        cols = {k: [] for k in ("feature", "bin_threshold", "raw_threshold", "left",
                                "right", "gain", "value", "n_samples")}

        def visit(node) -> int:
            i = len(cols["feature"])
            for k in cols:
                cols[k].append(0)
            if "split_feature" in node:
                cols["feature"][i] = int(node["split_feature"])
                cols["bin_threshold"][i] = int(node["split_bin_threshold"])
                cols["raw_threshold"][i] = float(node["raw_threshold"])
                cols["gain"][i] = float(node["gain"])
                cols["left"][i] = visit(node["left"])
                cols["right"][i] = visit(node["right"])
            else:
                cols["feature"][i] = cols["left"][i] = cols["right"][i] = -1
                cols["value"][i] = float(node["value"])
                cols["n_samples"][i] = int(node["n_samples"])
            return i

        visit(doc)
        return cls(**cols)


class _Node:
    __slots__ = ("rows", "depth", "G", "H", "C", "hist", "split", "id", "children")

    def __init__(self, rows, depth, G, H, hist):
        self.rows, self.depth, self.G, self.H = rows, depth, G, H
        self.C = len(rows)
        self.hist = hist
        self.split = None
        self.id = -1
        self.children = None


def grow_tree(builder: HistogramBuilder, binned: np.ndarray, rows: np.ndarray,
              g: np.ndarray, h: np.ndarray, boundaries, *, max_depth: Optional[int],
              lambda_l2: float, min_data_in_leaf: int) -> Tree:
    """Grow one tree leaf-wise: always expand the pending leaf with the largest gain.

    ``g`` and ``h`` are full-length arrays already multiplied by any sampling
    weights; only ``rows`` take part. ``max_depth=None`` means unlimited.
    """
    depth_cap = np.inf if max_depth is None else max_depth

    def evaluate(node: _Node):
        if node.depth >= depth_cap or node.C < 2 * max(min_data_in_leaf, 1):
            return
        node.split = find_best_split(builder, node.hist, node.G, node.H, node.C,
                                     lambda_l2, min_data_in_leaf)

    def make(rows_, depth, hist=None):
        G = float(np.sum(g[rows_]))
        H = float(np.sum(h[rows_]))
        node = _Node(rows_, depth, G, H, hist)
        return node

    root = make(rows, 0, builder.build(rows, g, h))
    evaluate(root)
    nodes = [root]
    root.id = 0
    heap = []
    if root.split is not None:
        heapq.heappush(heap, (-root.split.gain, 0))

    while heap:
        _, nid = heapq.heappop(heap)
        node = nodes[nid]
        s = node.split
        go_left = binned[node.rows, s.feature] <= s.bin
        lrows, rrows = node.rows[go_left], node.rows[~go_left]
        if len(lrows) <= len(rrows):
            lh = builder.build(lrows, g, h)
            rh = tuple(p - c for p, c in zip(node.hist, lh))
        else:
            rh = builder.build(rrows, g, h)
            lh = tuple(p - c for p, c in zip(node.hist, rh))
        node.hist = None
        children = (make(lrows, node.depth + 1, lh), make(rrows, node.depth + 1, rh))
        node.children = children
        for child in children:
            child.id = len(nodes)
            nodes.append(child)
            evaluate(child)
            if child.split is not None:
                heapq.heappush(heap, (-child.split.gain, child.id))
            else:
                child.hist = None

    n = len(nodes)
    feature = np.full(n, -1)
    bin_thr = np.zeros(n, dtype=np.int64)
    raw_thr = np.zeros(n)
    left = np.full(n, -1)
    right = np.full(n, -1)
    gain = np.zeros(n)
    value = np.zeros(n)
    n_samples = np.zeros(n, dtype=np.int64)
    for node in nodes:
        i = node.id
        n_samples[i] = node.C
        den = node.H + lambda_l2
        value[i] = -node.G / den if den > 0 else 0.0
        if node.children is not None:
            s = node.split
            feature[i], bin_thr[i], gain[i] = s.feature, s.bin, s.gain
            raw_thr[i] = boundaries[s.feature][s.bin]
            left[i], right[i] = node.children[0].id, node.children[1].id
    return Tree(feature, bin_thr, raw_thr, left, right, gain, value, n_samples)
