"""
Regression Trees and Random Forest

Multi-output CART written out explicitly with NumPy:
- split criterion: reduction of squared error summed over the n outputs
- candidate thresholds: midpoints between consecutive distinct values
- leaves store the mean target vector of the samples routed to them

The forest averages trees grown on bootstrap resamples, each with its own
RNG derived from ``rng_seed + tree_index`` so results do not depend on how
training is scheduled.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from .domain import DemandVector
from .errors import EmptyTrainingSetError, FeatureWidthError, ZeroVarianceError
from .features import EncoderConfig, FeatureVector


MODEL_FORMAT_VERSION = 1

FeatureSubsample = Union[float, str]


class TreeNode(BaseModel):
    """Internal node (feature, threshold, left, right) or leaf (value)."""
    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    value: Optional[List[float]] = None

    @property
    def is_leaf(self) -> bool:
        return self.value is not None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        """Raw (unrounded) outputs for each row of X."""
        if self.is_leaf:
            return np.tile(np.asarray(self.value, dtype=np.float64), (X.shape[0], 1))
        out = np.empty((X.shape[0], self._n_outputs()), dtype=np.float64)
        go_left = X[:, self.feature] <= self.threshold
        if go_left.any():
            out[go_left] = self.left.predict_matrix(X[go_left])
        if (~go_left).any():
            out[~go_left] = self.right.predict_matrix(X[~go_left])
        return out

    def _n_outputs(self) -> int:
        node = self
        while not node.is_leaf:
            node = node.left
        return len(node.value)


TreeNode.model_rebuild()


class ForestModel(BaseModel):
    """Random forest plus the metadata needed to encode inputs for it."""
    format_version: int = MODEL_FORMAT_VERSION
    trees: List[TreeNode]
    n_trees: int
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    rng_seed: int = 0
    n_features: int
    n_outputs: int
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)

    def predict_raw(self, X: np.ndarray) -> np.ndarray:
        """Per-coordinate mean over trees, before clamping and rounding."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise FeatureWidthError(
                f"Model expects {self.n_features} features, got {X.shape[1]}",
                {"expected": self.n_features, "got": int(X.shape[1])},
            )
        stacked = np.stack([tree.predict_matrix(X) for tree in self.trees])
        return np.mean(stacked, axis=0)


def resolve_feature_subsample(feature_subsample: FeatureSubsample, n_features: int) -> float:
    """Fraction of features examined per split ("sqrt", "third" or a float in (0, 1])."""
    if feature_subsample == "sqrt":
        return math.sqrt(n_features) / n_features
    if feature_subsample == "third":
        return 1.0 / 3.0
    fraction = float(feature_subsample)
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"feature_subsample must be in (0, 1], got {feature_subsample}")
    return fraction


def _as_training_arrays(X, Y):
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray([y.counts if isinstance(y, DemandVector) else y for y in Y], dtype=np.float64)
    if X.ndim != 2 or len(X) == 0 or len(X) != len(Y):
        raise EmptyTrainingSetError(
            "Training needs a non-empty X and Y of equal length",
            {"n_x": int(len(X)), "n_y": int(len(Y))},
        )
    return X, Y


def _best_split(X: np.ndarray, Y: np.ndarray, features: np.ndarray, min_samples_leaf: int):
    """
    Best (feature, threshold, sse) over the candidate features, vectorized
    across features via cumulative sums; None when no valid split exists.
    """
    m = X.shape[0]
    Xs = X[:, features]
    order = np.argsort(Xs, axis=0, kind="mergesort")
    xs = np.take_along_axis(Xs, order, axis=0)
    Ys = Y[order]                                   # (m, k, n)
    csum = np.cumsum(Ys, axis=0)
    csq = np.cumsum(Ys * Ys, axis=0)

    n_left = np.arange(1, m, dtype=np.float64)[:, None, None]
    n_right = m - n_left
    left_sum, left_sq = csum[:-1], csq[:-1]
    right_sum, right_sq = csum[-1] - left_sum, csq[-1] - left_sq

    sse = (left_sq - left_sum ** 2 / n_left).sum(axis=2) + (right_sq - right_sum ** 2 / n_right).sum(axis=2)

    valid = xs[1:] > xs[:-1]
    valid &= (n_left[:, :, 0] >= min_samples_leaf) & (n_right[:, :, 0] >= min_samples_leaf)
    if not valid.any():
        return None
    sse = np.where(valid, sse, np.inf)

    pos, col = np.unravel_index(np.argmin(sse), sse.shape)
    threshold = 0.5 * (xs[pos, col] + xs[pos + 1, col])
    return int(features[col]), float(threshold), float(sse[pos, col])


def _grow(X, Y, depth, max_depth, min_samples_leaf, n_candidates, rng) -> TreeNode:
    leaf = TreeNode(value=Y.mean(axis=0).tolist())
    m = X.shape[0]
    if max_depth is not None and depth >= max_depth:
        return leaf
    if m < 2 * min_samples_leaf or np.all(Y == Y[0]):
        return leaf

    features = np.sort(rng.choice(X.shape[1], size=n_candidates, replace=False))
    split = _best_split(X, Y, features, min_samples_leaf)
    if split is None and n_candidates < X.shape[1]:
        # drawn features are all constant here; keep searching the rest
        split = _best_split(X, Y, np.setdiff1d(np.arange(X.shape[1]), features), min_samples_leaf)
    if split is None:
        return leaf

    feature, threshold, sse = split
    parent_sse = float(((Y - Y.mean(axis=0)) ** 2).sum())
    if not sse < parent_sse - 1e-12 * max(1.0, parent_sse):
        return leaf

    go_left = X[:, feature] <= threshold
    return TreeNode(
        feature=feature,
        threshold=threshold,
        left=_grow(X[go_left], Y[go_left], depth + 1, max_depth, min_samples_leaf, n_candidates, rng),
        right=_grow(X[~go_left], Y[~go_left], depth + 1, max_depth, min_samples_leaf, n_candidates, rng),
    )


def fit_tree(
    X: Sequence[FeatureVector],
    Y: Sequence,
    max_depth: Optional[int] = None,
    min_samples_leaf: int = 1,
    feature_subsample: FeatureSubsample = 1.0,
    rng: Optional[np.random.Generator] = None,
) -> TreeNode:
    """
    Grow one multi-output regression tree.

    Args:
        X: Feature vectors (m rows)
        Y: DemandVectors or raw target rows (m rows)
        max_depth: Depth limit (None = unlimited, 0 = single leaf)
        min_samples_leaf: Minimum samples on each side of a split
        feature_subsample: Fraction of features drawn per split
        rng: Random generator for the feature draws

    Returns:
        Root TreeNode

    Raises:
        EmptyTrainingSetError: if X or Y is empty or their lengths differ
    """
    X, Y = _as_training_arrays(X, Y)
    rng = rng if rng is not None else np.random.default_rng(0)
    fraction = resolve_feature_subsample(feature_subsample, X.shape[1])
    n_candidates = max(1, min(X.shape[1], int(round(fraction * X.shape[1]))))
    return _grow(X, Y, 0, max_depth, max(1, min_samples_leaf), n_candidates, rng)


def _fit_member(X, Y, index, rng_seed, bootstrap, max_depth, min_samples_leaf, feature_subsample) -> TreeNode:
    rng = np.random.default_rng(rng_seed + index)
    if bootstrap:
        rows = rng.integers(0, len(X), size=len(X))
        X, Y = X[rows], Y[rows]
    return fit_tree(X, Y, max_depth, min_samples_leaf, feature_subsample, rng)


def fit_forest(
    X: Sequence[FeatureVector],
    Y: Sequence,
    n_trees: int = 30,
    max_depth: Optional[int] = None,
    min_samples_leaf: int = 1,
    rng_seed: int = 0,
    feature_subsample: FeatureSubsample = "sqrt",
    bootstrap: bool = True,
    jobs: int = 1,
    encoder: Optional[EncoderConfig] = None,
) -> ForestModel:
    """
    Fit a random forest; deterministic for a given ``rng_seed`` whatever ``jobs`` is.

    Raises:
        EmptyTrainingSetError: as fit_tree
    """
    X, Y = _as_training_arrays(X, Y)
    if n_trees < 1:
        raise ValueError(f"n_trees must be >= 1, got {n_trees}")

    def member(i: int) -> TreeNode:
        return _fit_member(X, Y, i, rng_seed, bootstrap, max_depth, min_samples_leaf, feature_subsample)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trees = list(pool.map(member, range(n_trees)))
    else:
        trees = [member(i) for i in range(n_trees)]

    return ForestModel(
        trees=trees,
        n_trees=n_trees,
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        rng_seed=rng_seed,
        n_features=X.shape[1],
        n_outputs=Y.shape[1],
        encoder=encoder or EncoderConfig(),
    )


def round_demand(raw: np.ndarray) -> DemandVector:
    """Clamp at zero and round to integer viewer counts."""
    return DemandVector(counts=[int(c) for c in np.rint(np.maximum(raw, 0.0))])


def predict(model: ForestModel, x: FeatureVector) -> DemandVector:
    """Demand vector for one encoded video."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise FeatureWidthError(f"Expected a 1-D feature vector, got shape {x.shape}")
    return round_demand(model.predict_raw(x[None, :])[0])


def predict_many(model: ForestModel, X: np.ndarray) -> List[DemandVector]:
    return [round_demand(row) for row in model.predict_raw(X)]


def r_squared(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """
    Coefficient of determination: 1 - SS_res / SS_tot.

    Raises:
        ValueError: if lengths differ or are zero
        ZeroVarianceError: if all actual values are identical
    """
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if a.size == 0 or a.size != p.size:
        raise ValueError(f"r_squared needs equal non-zero lengths, got {a.size} and {p.size}")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise ZeroVarianceError("R² undefined: actual values have zero variance", {"n": int(a.size)})
    ss_res = float(np.sum((a - p) ** 2))
    return 1.0 - ss_res / ss_tot


def r_squared_per_region(actual: np.ndarray, predicted: np.ndarray) -> List[Optional[float]]:
    """R² per output column; None for columns whose actuals are constant."""
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    scores: List[Optional[float]] = []
    for col in range(actual.shape[1]):
        try:
            scores.append(r_squared(actual[:, col], predicted[:, col]))
        except ZeroVarianceError:
            scores.append(None)
    return scores


def r_squared_pooled(actual: np.ndarray, predicted: np.ndarray) -> float:
    """R² over all (video, region) entries together."""
    return r_squared(np.ravel(actual), np.ravel(predicted))
