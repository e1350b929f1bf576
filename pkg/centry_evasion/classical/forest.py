#!/usr/bin/python3
# coding=utf-8

#   Copyright 2024 getcarrier.io
#
#   Licensed under the Apache License, Version 2.0 (the "License");
#   you may not use this file except in compliance with the License.
#   You may obtain a copy of the License at
#
#       http://www.apache.org/licenses/LICENSE-2.0
#
#   Unless required by applicable law or agreed to in writing, software
#   distributed under the License is distributed on an "AS IS" BASIS,
#   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#   See the License for the specific language governing permissions and
#   limitations under the License.

""" Random forest on Gini impurity """

import math
import dataclasses

import numpy as np  # pylint: disable=E0401
import joblib  # pylint: disable=E0401

from .. import log
from ..config import ForestConfig
from ..errors import ShapeError
from ..tools import files, seeding
from . import common


@dataclasses.dataclass(frozen=True)
class DecisionTree:
    """ Flat tree: feature -1 marks a leaf; x <= threshold goes left """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    depth: int

    def apply(self, X):
        """ Leaf node index per row """
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[nodes] >= 0
        while np.any(active):
            current = nodes[active]
            go_left = X[rows[active], self.feature[current]] <= self.threshold[current]
            nodes[active] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[nodes] >= 0
        return nodes

    def predict_proba(self, X):
        """ Normalized leaf histograms """
        counts = self.counts[self.apply(X)]
        return counts / counts.sum(axis=1, keepdims=True)

    def to_dict(self):
        """ JSON-safe form """
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.astype(np.int64).tolist(),
            "depth": self.depth,
        }

    @classmethod
    def from_dict(cls, data):
        """ Inverse of to_dict """
        return cls(
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=np.float64),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            counts=np.asarray(data["counts"], dtype=np.float64),
            depth=int(data["depth"]),
        )


@dataclasses.dataclass(frozen=True)
class ForestModel:
    """ Bagged decision trees with soft voting """

    trees: tuple
    n_features: int
    classes: tuple
    oob_accuracy: float = None

    @property
    def class_count(self):
        """ C """
        return len(self.classes)

    def predict_proba(self, X):
        """ Mean of per-tree distributions """
        X = common.as_matrix(X)
        common.check_width(self, X)
        total = np.zeros((X.shape[0], self.class_count))
        for tree in self.trees:
            total += tree.predict_proba(X)
        return total / len(self.trees)

    def to_dict(self):
        """ JSON-safe form """
        return {
            "kind": "forest",
            "n_features": self.n_features,
            "classes": list(self.classes),
            "oob_accuracy": self.oob_accuracy,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data):
        """ Inverse of to_dict """
        return cls(
            trees=tuple(DecisionTree.from_dict(item) for item in data["trees"]),
            n_features=int(data["n_features"]),
            classes=tuple(int(item) for item in data["classes"]),
            oob_accuracy=data.get("oob_accuracy"),
        )

#
# Growing
#

def _weighted_gini(counts, sizes):
    """ size * gini, i.e. size - sum(count^2) / size """
    return sizes - np.sum(counts * counts, axis=-1) / np.maximum(sizes, 1)


def _best_split(X, onehot, rows, features, min_samples_leaf, binary):  # pylint: disable=R0913,R0914
    """ (impurity, feature, threshold) of best valid split among features, or None """
    block = X[np.ix_(rows, features)]
    targets = onehot[rows]
    size = rows.shape[0]
    total = targets.sum(axis=0)
    #
    if binary:
        right = block.T @ targets
        right_sizes = right.sum(axis=1)
        left_sizes = size - right_sizes
        valid = (left_sizes >= min_samples_leaf) & (right_sizes >= min_samples_leaf)
        if not np.any(valid):
            return None
        impurity = _weighted_gini(total - right, left_sizes) + _weighted_gini(right, right_sizes)
        impurity = np.where(valid, impurity, np.inf)
        best = int(np.argmin(impurity))
        return float(impurity[best]), int(features[best]), 0.5
    #
    left_sizes = np.arange(1, size)
    right_sizes = size - left_sizes
    best = None
    for position, feature in enumerate(features):
        order = np.argsort(block[:, position], kind="stable")
        values = block[order, position]
        left = np.cumsum(targets[order], axis=0)[:-1]
        valid = (
            (values[:-1] < values[1:])
            & (left_sizes >= min_samples_leaf)
            & (right_sizes >= min_samples_leaf)
        )
        if not np.any(valid):
            continue
        impurity = _weighted_gini(left, left_sizes) + _weighted_gini(total - left, right_sizes)
        impurity = np.where(valid, impurity, np.inf)
        cut = int(np.argmin(impurity))
        if best is None or impurity[cut] < best[0]:
            best = (float(impurity[cut]), int(feature), float((values[cut] + values[cut + 1]) / 2.0))
    return best


def grow_tree(X, positions, class_count, rows, rng, max_depth, min_samples_leaf, binary=False):  # pylint: disable=R0913,R0914
    """ Grow one tree on rows (may repeat) with ceil(sqrt(d)) candidate features per try """
    onehot = np.eye(class_count)[positions]
    width = X.shape[1]
    chunk = max(1, math.ceil(math.sqrt(width)))
    #
    feature, threshold, left, right, counts = [], [], [], [], []
    depth_reached = 0
    stack = [(np.asarray(rows, dtype=np.int64), 0, -1, 0)]
    #
    while stack:
        node_rows, depth, parent, side = stack.pop()
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(onehot[node_rows].sum(axis=0))
        if parent >= 0:
            (left if side == 0 else right)[parent] = node
        depth_reached = max(depth_reached, depth)
        #
        if depth >= max_depth or node_rows.shape[0] < 2 * min_samples_leaf:
            continue
        if np.count_nonzero(counts[-1]) <= 1:
            continue
        #
        order = rng.permutation(width)
        split = None
        for start in range(0, width, chunk):
            split = _best_split(X, onehot, node_rows, order[start:start + chunk], min_samples_leaf, binary)
            if split is not None:
                break
        if split is None:
            continue
        #
        _, feature[node], threshold[node] = split
        goes_left = X[node_rows, feature[node]] <= threshold[node]
        stack.append((node_rows[~goes_left], depth + 1, node, 1))
        stack.append((node_rows[goes_left], depth + 1, node, 0))
    #
    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        counts=np.asarray(counts, dtype=np.float64),
        depth=depth_reached,
    )


def _fit_tree(X, positions, class_count, cfg, binary, seed):  # pylint: disable=R0913
    rng = np.random.default_rng(seed)
    count = X.shape[0]
    rows = rng.integers(0, count, size=count)
    tree = grow_tree(X, positions, class_count, rows, rng, cfg.max_depth, cfg.min_samples_leaf, binary)
    out_of_bag = np.ones(count, dtype=bool)
    out_of_bag[rows] = False
    return tree, out_of_bag


def train_forest(X, y, cfg=None, classes=None, seed=0):
    """ Bootstrap-aggregated Gini trees """
    cfg = cfg or ForestConfig()
    X = common.as_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ShapeError(f"train_forest needs equal nonzero sample counts, got {X.shape[0]} and {y.shape[0]}")
    #
    classes = common.resolve_classes(y, classes)
    positions = common.class_positions(y, classes)
    binary = bool(np.all((X == 0.0) | (X == 1.0)))
    #
    fitted = joblib.Parallel(n_jobs=cfg.n_jobs)(
        joblib.delayed(_fit_tree)(X, positions, len(classes), cfg, binary, tree_seed)
        for tree_seed in seeding.spawn_seeds(seed, cfg.n_trees)
    )
    #
    votes = np.zeros((X.shape[0], len(classes)))
    for tree, out_of_bag in fitted:
        if np.any(out_of_bag):
            votes[out_of_bag] += tree.predict_proba(X[out_of_bag])
    voted = votes.sum(axis=1) > 0
    oob_accuracy = None
    if np.any(voted):
        oob_accuracy = float(np.mean(np.argmax(votes[voted], axis=1) == positions[voted]))
    #
    model = ForestModel(
        trees=tuple(tree for tree, _ in fitted),
        n_features=X.shape[1],
        classes=classes,
        oob_accuracy=oob_accuracy,
    )
    log.info(
        "Forest trained",
        extra={
            "trees": len(model.trees), "classes": len(classes),
            "max_tree_depth": max(tree.depth for tree in model.trees), "oob_accuracy": oob_accuracy,
        },
    )
    return model


def save_forest(path, model):
    """ Write forest JSON """
    files.write_json(path, model.to_dict())


def load_forest(path):
    """ Read forest JSON """
    return ForestModel.from_dict(files.read_json(path))
