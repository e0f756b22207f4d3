"""Classical classifiers over TF-IDF features: multinomial Naive Bayes,
primal linear SVM, CART decision tree and random forest.

All trainers are deterministic given (data, hyperparameters, seed).  Scores
are the probability of the coachable class: NB posterior, logistic-squashed
SVM margin, leaf class fraction for trees, vote fraction for forests.  Exact
ties always resolve to not-coachable (class 0), keeping coachable flags
conservative.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from coachkit.corpus import Label
from coachkit.textproc import TfidfModel

N_CLASSES = 2


class BaselineError(Exception):
    pass


class SingleClassTraining(BaselineError):
    pass


class DimensionMismatch(BaselineError):
    pass


def _check_two_classes(y: np.ndarray) -> None:
    if len(np.unique(y)) < N_CLASSES:
        raise SingleClassTraining("training data must contain both classes")


def _label_from_score(score: float) -> Label:
    return Label.COACHABLE if score > 0.5 else Label.NOT_COACHABLE


# ---------------------------------------------------------------------------
# Naive Bayes
# ---------------------------------------------------------------------------


@dataclass
class NaiveBayesModel:
    variant = "NaiveBayes"
    class_log_prior: np.ndarray  # (2,)
    feature_log_prob: np.ndarray  # (2, dim)

    @property
    def dim(self) -> int:
        return self.feature_log_prob.shape[1]

    def posteriors(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"expected {self.dim} features, got {X.shape[1]}")
        joint = self.class_log_prior + X @ self.feature_log_prob.T
        joint -= joint.max(axis=1, keepdims=True)
        p = np.exp(joint)
        return p / p.sum(axis=1, keepdims=True)

    def score(self, x: np.ndarray) -> float:
        return float(self.posteriors(x)[0, Label.COACHABLE])

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "class_log_prior": self.class_log_prior.tolist(),
            "feature_log_prob": self.feature_log_prob.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "NaiveBayesModel":
        return cls(
            class_log_prior=np.asarray(doc["class_log_prior"], dtype=np.float64),
            feature_log_prob=np.asarray(doc["feature_log_prob"], dtype=np.float64),
        )


def train_naive_bayes(X: np.ndarray, y: np.ndarray, alpha: float = 1.0) -> NaiveBayesModel:
    """Multinomial NB with Laplace smoothing over nonnegative TF-IDF weights."""
    if alpha <= 0:
        raise BaselineError(f"alpha must be positive, got {alpha}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    _check_two_classes(y)
    n, dim = X.shape
    priors = np.array([(y == c).sum() / n for c in range(N_CLASSES)])
    flp = np.zeros((N_CLASSES, dim))
    for c in range(N_CLASSES):
        counts = X[y == c].sum(axis=0)
        flp[c] = np.log(counts + alpha) - math.log(counts.sum() + alpha * dim)
    return NaiveBayesModel(class_log_prior=np.log(priors), feature_log_prob=flp)


# ---------------------------------------------------------------------------
# Linear SVM
# ---------------------------------------------------------------------------


@dataclass
class LinearSvmModel:
    variant = "LinearSVM"
    w: np.ndarray
    b: float
    # Polyak-averaged (w, b) at each epoch boundary, kept so the training
    # objective trace can be audited.
    epoch_snapshots: list[tuple[np.ndarray, float]] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def margin(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected {self.dim} features, got {x.shape[-1]}")
        return float(x @ self.w + self.b)

    def score(self, x: np.ndarray) -> float:
        # Logistic squash of the margin: monotone, no Platt fitting.
        m = self.margin(x)
        if m >= 0:
            return 1.0 / (1.0 + math.exp(-m))
        e = math.exp(m)
        return e / (1.0 + e)

    def to_json(self) -> dict:
        return {"variant": self.variant, "w": self.w.tolist(), "b": self.b}

    @classmethod
    def from_json(cls, doc: dict) -> "LinearSvmModel":
        return cls(w=np.asarray(doc["w"], dtype=np.float64), b=float(doc["b"]))


def train_linear_svm(
    X: np.ndarray,
    y: np.ndarray,
    lam: float = 1e-4,
    epochs: int = 20,
    seed: int = 0,
) -> LinearSvmModel:
    """Primal hinge-loss SVM by seeded stochastic subgradient descent
    (Pegasos step sizes 1/(lam*t)); the served weights are the Polyak average
    over all steps, which also makes the per-epoch objective trace stable."""
    if lam <= 0:
        raise BaselineError(f"lam must be positive, got {lam}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    _check_two_classes(y)
    n, dim = X.shape
    signs = np.where(y == Label.COACHABLE, 1.0, -1.0)
    rng = np.random.default_rng(seed)
    w = np.zeros(dim)
    b = 0.0
    avg_w = np.zeros(dim)
    avg_b = 0.0
    t = 0
    snapshots: list[tuple[np.ndarray, float]] = []
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            if signs[i] * (X[i] @ w + b) < 1.0:
                w = (1.0 - eta * lam) * w + eta * signs[i] * X[i]
                b = b + eta * signs[i]
            else:
                w = (1.0 - eta * lam) * w
            avg_w += (w - avg_w) / t
            avg_b += (b - avg_b) / t
        snapshots.append((avg_w.copy(), avg_b))
    return LinearSvmModel(w=avg_w, b=avg_b, epoch_snapshots=snapshots)


def hinge_objective(X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, lam: float) -> float:
    """Regularized mean hinge loss of (w, b) on (X, y)."""
    signs = np.where(np.asarray(y) == Label.COACHABLE, 1.0, -1.0)
    margins = signs * (np.asarray(X, dtype=np.float64) @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins).mean()
    return float(0.5 * lam * (w @ w) + hinge)


# ---------------------------------------------------------------------------
# CART decision tree
# ---------------------------------------------------------------------------


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    counts: np.ndarray | None = None  # class counts at a leaf

    @property
    def is_leaf(self) -> bool:
        return self.counts is not None

    def to_json(self) -> dict:
        if self.is_leaf:
            return {"counts": [int(c) for c in self.counts]}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_json(),
            "right": self.right.to_json(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TreeNode":
        if "counts" in doc:
            return cls(counts=np.asarray(doc["counts"], dtype=np.int64))
        return cls(
            feature=doc["feature"],
            threshold=doc["threshold"],
            left=cls.from_json(doc["left"]),
            right=cls.from_json(doc["right"]),
        )


@dataclass
class DecisionTreeModel:
    variant = "DecisionTree"
    root: TreeNode
    dim: int

    def leaf_for(self, x: np.ndarray) -> TreeNode:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected {self.dim} features, got {x.shape[-1]}")
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node

    def score(self, x: np.ndarray) -> float:
        counts = self.leaf_for(x).counts
        return float(counts[Label.COACHABLE] / counts.sum())

    def to_json(self) -> dict:
        return {"variant": self.variant, "dim": self.dim, "root": self.root.to_json()}

    @classmethod
    def from_json(cls, doc: dict) -> "DecisionTreeModel":
        return cls(root=TreeNode.from_json(doc["root"]), dim=doc["dim"])


def _gini_best_split(
    X: np.ndarray, y: np.ndarray, features: np.ndarray, min_leaf: int
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, weighted_gini) over candidate features.

    Ties keep the earliest feature in `features` order and the lowest
    threshold within a feature.
    """
    n = len(y)
    best: tuple[float, int, float] | None = None  # (impurity, feature, threshold)
    y_is_pos = (y == Label.COACHABLE).astype(np.float64)
    for f in features:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        pos = np.cumsum(y_is_pos[order])
        # split after position i (1-based): left = first i rows
        i = np.arange(1, n)
        valid = xs[1:] > xs[:-1]
        valid &= (i >= min_leaf) & (n - i >= min_leaf)
        if not valid.any():
            continue
        nl = i.astype(np.float64)
        nr = n - nl
        pl = pos[:-1] / nl
        pr = (pos[-1] - pos[:-1]) / nr
        gini_l = 1.0 - pl**2 - (1.0 - pl) ** 2
        gini_r = 1.0 - pr**2 - (1.0 - pr) ** 2
        weighted = (nl * gini_l + nr * gini_r) / n
        weighted[~valid] = np.inf
        j = int(np.argmin(weighted))
        if best is None or weighted[j] < best[0] - 1e-15:
            threshold = (xs[j] + xs[j + 1]) / 2.0
            best = (float(weighted[j]), int(f), threshold)
    if best is None:
        return None
    impurity, f, threshold = best
    return f, threshold, impurity


def _grow(
    X: np.ndarray,
    y: np.ndarray,
    depth: int,
    max_depth: int,
    min_leaf: int,
    feature_frac: float,
    rng: np.random.Generator | None,
) -> TreeNode:
    counts = np.bincount(y, minlength=N_CLASSES)
    if depth >= max_depth or counts.max() == len(y) or len(y) < 2 * min_leaf:
        return TreeNode(counts=counts)
    dim = X.shape[1]
    if rng is not None and feature_frac < 1.0:
        k = max(1, int(round(feature_frac * dim)))
        features = np.sort(rng.choice(dim, size=k, replace=False))
    else:
        features = np.arange(dim)
    split = _gini_best_split(X, y, features, min_leaf)
    if split is None:
        return TreeNode(counts=counts)
    f, threshold, impurity = split
    parent_p = counts[Label.COACHABLE] / len(y)
    parent_gini = 1.0 - parent_p**2 - (1.0 - parent_p) ** 2
    if impurity >= parent_gini - 1e-12:  # no usable reduction
        return TreeNode(counts=counts)
    go_left = X[:, f] <= threshold
    return TreeNode(
        feature=f,
        threshold=threshold,
        left=_grow(X[go_left], y[go_left], depth + 1, max_depth, min_leaf, feature_frac, rng),
        right=_grow(X[~go_left], y[~go_left], depth + 1, max_depth, min_leaf, feature_frac, rng),
    )


def train_decision_tree(
    X: np.ndarray, y: np.ndarray, max_depth: int = 20, min_leaf: int = 2
) -> DecisionTreeModel:
    """CART with Gini impurity and binary threshold splits on feature weights."""
    if max_depth < 1:
        raise BaselineError(f"max_depth must be >= 1, got {max_depth}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    _check_two_classes(y)
    root = _grow(X, y, 0, max_depth, min_leaf, 1.0, None)
    return DecisionTreeModel(root=root, dim=X.shape[1])


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------


@dataclass
class RandomForestModel:
    variant = "RandomForest"
    trees: list[DecisionTreeModel]
    seed: int

    @property
    def dim(self) -> int:
        return self.trees[0].dim

    def votes(self, x: np.ndarray) -> int:
        """Number of trees voting coachable."""
        return sum(1 for t in self.trees if t.score(x) > 0.5)

    def score(self, x: np.ndarray) -> float:
        return self.votes(x) / len(self.trees)

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RandomForestModel":
        return cls(
            trees=[DecisionTreeModel.from_json(t) for t in doc["trees"]],
            seed=doc["seed"],
        )


def train_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 100,
    max_depth: int = 20,
    min_leaf: int = 2,
    feature_frac: float | None = None,
    seed: int = 0,
    bootstrap: bool = True,
) -> RandomForestModel:
    """Bootstrap-sampled CART trees with per-split feature subsampling.

    feature_frac defaults to sqrt(dim)/dim; per-tree seeds derive
    deterministically from the master seed.
    """
    if n_trees < 1:
        raise BaselineError(f"n_trees must be >= 1, got {n_trees}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    _check_two_classes(y)
    n, dim = X.shape
    if feature_frac is None:
        feature_frac = math.sqrt(dim) / dim
    if not 0 < feature_frac <= 1:
        raise BaselineError(f"feature_frac must be in (0, 1], got {feature_frac}")
    children = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    for child in children:
        rng = np.random.default_rng(child)
        if bootstrap:
            idx = rng.integers(0, n, size=n)
            Xb, yb = X[idx], y[idx]
        else:
            Xb, yb = X, y
        root = _grow(Xb, yb, 0, max_depth, min_leaf, feature_frac, rng)
        trees.append(DecisionTreeModel(root=root, dim=dim))
    return RandomForestModel(trees=trees, seed=seed)


# ---------------------------------------------------------------------------
# Unified prediction and artifact I/O
# ---------------------------------------------------------------------------

BaselineModel = NaiveBayesModel | LinearSvmModel | DecisionTreeModel | RandomForestModel


def predict(model: BaselineModel, x: np.ndarray) -> tuple[Label, float]:
    """(label, coachable score in [0, 1]); score 0.5 resolves to not-coachable."""
    score = model.score(np.asarray(x, dtype=np.float64))
    return _label_from_score(score), score


_VARIANTS = {
    "NaiveBayes": NaiveBayesModel,
    "LinearSVM": LinearSvmModel,
    "DecisionTree": DecisionTreeModel,
    "RandomForest": RandomForestModel,
}


def save_model_bundle(model: BaselineModel, tfidf: TfidfModel, path: str | Path) -> None:
    """Self-contained artifact: model parameters plus the TF-IDF featurizer."""
    doc = {"version": 1, "model": model.to_json(), "tfidf": tfidf.to_json()}
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_model_bundle(path: str | Path) -> tuple[BaselineModel, TfidfModel]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    variant = doc["model"].get("variant")
    if variant not in _VARIANTS:
        raise BaselineError(f"unknown baseline variant {variant!r}")
    model = _VARIANTS[variant].from_json(doc["model"])
    return model, TfidfModel.from_json(doc["tfidf"])
