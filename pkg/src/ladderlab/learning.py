"""Seeded tree-ensemble regression for cross-over bitrate prediction.

ExtraTrees draws one uniform random threshold per candidate feature;
random forests bootstrap rows and search thresholds exhaustively.
Targets are regressed in ln(kbps): cross-overs span orders of magnitude
and squared error in the log domain matches the log-rate geometry of
the BD metrics.  Everything stochastic is a pure function of
(data, hyperparameters, seed); tree t uses an RNG keyed on (seed, t) so
results do not depend on scheduling.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ValidationError
from .stats import pearson

MODEL_FORMAT_TAG = "ladderlab-model-v1"

TARGET_IDS = ("p1", "p2", "p3")
MODEL_KINDS = ("extratrees", "rf")

_VAR_EPS = 1e-12


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 100
    max_features: int | None = None  # None -> ceil(d / 3)
    min_samples_split: int = 2
    seed: int = 0

    def resolved_max_features(self, n_features):
        if self.max_features is None:
            return max(1, math.ceil(n_features / 3))
        return min(self.max_features, n_features)


@dataclass
class TrainingMatrix:
    """Feature matrix plus ln(kbps) targets, one row per clip."""

    clip_ids: list
    feature_names: list
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[0] != len(self.clip_ids):
            raise ValidationError("X rows must match clip_ids")
        if self.X.shape[1] != len(self.feature_names):
            raise ValidationError("X columns must match feature_names")
        if len(self.y) != self.X.shape[0]:
            raise ValidationError("y length must match X rows")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValidationError("duplicate feature names")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValidationError("non-finite entries in training data")

    def subset_features(self, names):
        idx = [self.feature_names.index(n) for n in names]
        return TrainingMatrix(self.clip_ids, list(names), self.X[:, idx], self.y)

    def subset_rows(self, row_idx):
        return TrainingMatrix(
            [self.clip_ids[i] for i in row_idx],
            self.feature_names,
            self.X[row_idx],
            self.y[row_idx],
        )


@dataclass
class Tree:
    """Flattened decision tree: feature < 0 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X):
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            idx = np.nonzero(active)[0]
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return self.value[node]


@dataclass
class TrainedModel:
    kind: str
    trees: list
    hyperparams: Hyperparams
    feature_names: list
    target_id: str
    metric: str
    y_min: float
    y_max: float
    feature_gains: np.ndarray = field(repr=False)  # summed impurity decrease


class _TreeBuilder:
    def __init__(self, X, y, max_features, min_samples_split, rng, extra):
        self.X = X
        self.y = y
        self.d = X.shape[1]
        self.max_features = max_features
        self.min_split = min_samples_split
        self.rng = rng
        self.extra = extra
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []
        self.gains = np.zeros(self.d)

    def _new_node(self):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def build(self, idx):
        node = self._new_node()
        y = self.y[idx]
        self.value[node] = float(y.mean())
        n = len(idx)
        if n < self.min_split or float(y.max() - y.min()) <= 0.0:
            return node
        split = self._best_split(idx)
        if split is None:
            return node
        f, thr, gain = split
        mask = self.X[idx, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.gains[f] += gain
        self.left[node] = self.build(idx[mask])
        self.right[node] = self.build(idx[~mask])
        return node

    def _candidates(self, n_valid=None):
        m = min(self.max_features, self.d)
        cand = self.rng.choice(self.d, size=m, replace=False)
        # Ties between equally good splits break toward the lowest
        # column index, so candidates are evaluated in sorted order.
        return np.sort(cand)

    def _best_split(self, idx):
        y = self.y[idx]
        n = len(idx)
        sse_parent = float(np.sum((y - y.mean()) ** 2))
        best = None
        for f in self._candidates():
            x = self.X[idx, f]
            lo = float(x.min())
            hi = float(x.max())
            if self.extra:
                if hi <= lo:
                    continue
                thr = float(self.rng.uniform(lo, hi))
                mask = x <= thr
                nl = int(mask.sum())
                if nl == 0 or nl == n:
                    continue
                yl = y[mask]
                yr = y[~mask]
                child = float(np.sum((yl - yl.mean()) ** 2)) + float(
                    np.sum((yr - yr.mean()) ** 2)
                )
                gain = sse_parent - child
                if best is None or gain > best[2]:
                    best = (int(f), thr, gain)
            else:
                cand = self._best_exhaustive(x, y, sse_parent)
                if cand is not None and (best is None or cand[1] > best[2]):
                    best = (int(f), cand[0], cand[1])
        if best is None or best[2] <= 0.0:
            return None
        return best

    @staticmethod
    def _best_exhaustive(x, y, sse_parent):
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = y[order]
        n = len(xs)
        boundaries = np.nonzero(xs[1:] > xs[:-1])[0] + 1
        if len(boundaries) == 0:
            return None
        c1 = np.cumsum(ys)
        c2 = np.cumsum(ys * ys)
        k = boundaries
        nl = k.astype(np.float64)
        nr = n - nl
        sl = c1[k - 1]
        sl2 = c2[k - 1]
        sr = c1[-1] - sl
        sr2 = c2[-1] - sl2
        child = (sl2 - sl * sl / nl) + (sr2 - sr * sr / nr)
        best = int(np.argmin(child))
        gain = sse_parent - float(child[best])
        thr = 0.5 * (xs[k[best] - 1] + xs[k[best]])
        return float(thr), gain


def _tree_rng(seed, tree_index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tree_index)]))


def train(matrix, hyperparams=Hyperparams(), kind="extratrees", target_id="p3",
          metric="ypsnr"):
    """Fit a seeded tree ensemble on a training matrix.

    A constant target yields a model that predicts the constant; that is
    not an error.
    """
    if kind not in MODEL_KINDS:
        raise ValidationError(f"unknown model kind {kind!r}")
    n, d = matrix.X.shape
    if n < 10:
        raise ContractError(f"need at least 10 rows, got {n}")
    if d < 1:
        raise ContractError("need at least one feature")
    max_features = hyperparams.resolved_max_features(d)
    trees = []
    gains = np.zeros(d)
    for t in range(hyperparams.n_trees):
        rng = _tree_rng(hyperparams.seed, t)
        if kind == "rf":
            idx = np.sort(rng.integers(0, n, size=n))
        else:
            idx = np.arange(n)
        builder = _TreeBuilder(
            matrix.X, matrix.y, max_features, hyperparams.min_samples_split,
            rng, extra=(kind == "extratrees"),
        )
        builder.build(idx)
        trees.append(
            Tree(
                np.asarray(builder.feature, dtype=np.int64),
                np.asarray(builder.threshold, dtype=np.float64),
                np.asarray(builder.left, dtype=np.int64),
                np.asarray(builder.right, dtype=np.int64),
                np.asarray(builder.value, dtype=np.float64),
            )
        )
        gains += builder.gains
    return TrainedModel(
        kind=kind,
        trees=trees,
        hyperparams=hyperparams,
        feature_names=list(matrix.feature_names),
        target_id=target_id,
        metric=metric,
        y_min=float(matrix.y.min()),
        y_max=float(matrix.y.max()),
        feature_gains=gains,
    )


def _check_schema(model, feature_names):
    if list(feature_names) != list(model.feature_names):
        missing = sorted(set(model.feature_names) - set(feature_names))
        extra = sorted(set(feature_names) - set(model.feature_names))
        raise ContractError(
            f"feature schema mismatch: missing={missing} extra={extra}"
        )


def predict_log(model, X, feature_names=None):
    """Ensemble mean in the ln(kbps) target domain."""
    if feature_names is not None:
        _check_schema(model, feature_names)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != len(model.feature_names):
        raise ContractError(
            f"expected {len(model.feature_names)} features, got {X.shape[1]}"
        )
    acc = np.zeros(X.shape[0])
    for tree in model.trees:
        acc += tree.predict(X)
    return acc / len(model.trees)


def predict(model, X, feature_names=None):
    """Predicted cross-over bitrates in kbps."""
    return np.exp(predict_log(model, X, feature_names))


def training_r2(model, matrix):
    pred = predict_log(model, matrix.X)
    sst = float(np.sum((matrix.y - matrix.y.mean()) ** 2))
    sse = float(np.sum((matrix.y - pred) ** 2))
    if sst <= _VAR_EPS:
        return 1.0 if sse <= _VAR_EPS else 0.0
    return 1.0 - sse / sst


def impurity_importance(model):
    """Per-feature total impurity decrease, normalized to sum to 1."""
    total = model.feature_gains.sum()
    if total <= 0:
        return np.zeros_like(model.feature_gains)
    return model.feature_gains / total


def permutation_importance(model, matrix, n_repeats=5, seed=0):
    """Mean squared-error increase after within-column permutation."""
    if n_repeats < 1:
        raise ContractError("n_repeats must be >= 1")
    base_pred = predict_log(model, matrix.X)
    base_mse = float(np.mean((matrix.y - base_pred) ** 2))
    n, d = matrix.X.shape
    scores = np.zeros(d)
    for f in range(d):
        acc = 0.0
        for r in range(n_repeats):
            rng = np.random.default_rng(np.random.SeedSequence([int(seed), f, r]))
            Xp = matrix.X.copy()
            Xp[:, f] = Xp[rng.permutation(n), f]
            mse = float(np.mean((matrix.y - predict_log(model, Xp)) ** 2))
            acc += mse - base_mse
        scores[f] = acc / n_repeats
    return scores


@dataclass
class SelectionReport:
    kept: list  # feature names of the best stage
    trace: list  # per-stage (n_features, validation PLCC)
    importances: list  # impurity importances aligned with `kept`


def rfe_select(matrix, kind="extratrees", hyperparams=Hyperparams(),
               validation_fraction=0.2, seed=0):
    """Recursive feature elimination with a held-out PLCC stopping rule.

    Each stage fits on the current feature set, records validation
    PLCC, and drops the ceil(10%) lowest impurity-importance features.
    The kept set is the stage with maximum PLCC; ties prefer fewer
    features.
    """
    n, d = matrix.X.shape
    if d < 2:
        raise ContractError("RFE needs at least 2 features")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xFE]))
    perm = rng.permutation(n)
    n_val = max(3, int(round(validation_fraction * n)))
    val_idx = np.sort(perm[:n_val])
    train_idx = np.sort(perm[n_val:])

    current = list(matrix.feature_names)
    trace = []
    stages = []
    while True:
        sub_train = matrix.subset_rows(train_idx).subset_features(current)
        sub_val = matrix.subset_rows(val_idx).subset_features(current)
        model = train(sub_train, hyperparams, kind)
        pred = predict_log(model, sub_val.X)
        if np.std(pred) <= _VAR_EPS or np.std(sub_val.y) <= _VAR_EPS:
            plcc = 0.0
        else:
            plcc = pearson(pred, sub_val.y)
        imp = impurity_importance(model)
        trace.append((len(current), plcc))
        stages.append((list(current), plcc, list(imp)))
        if len(current) == 1:
            break
        k = math.ceil(0.1 * len(current))
        # Stable sort: equal importances drop the later column first is
        # avoided by sorting on (importance, index) ascending.
        order = sorted(range(len(current)), key=lambda i: (imp[i], i))
        drop = {current[i] for i in order[:k]}
        current = [f for f in current if f not in drop]

    best = max(
        range(len(stages)),
        key=lambda i: (stages[i][1], -len(stages[i][0])),
    )
    kept, _, imp = stages[best]
    return SelectionReport(kept=kept, trace=trace, importances=imp)


def stratified_split(clip_ids, strata, test_fraction, seed):
    """Seeded per-stratum split with largest-remainder rounding.

    Returns (train_ids, test_ids); they are disjoint and cover all clip
    ids.  Any stratum with a single clip is an error.
    """
    if len(clip_ids) != len(strata):
        raise ContractError("clip_ids and strata must align")
    if not 0.0 < test_fraction < 1.0:
        raise ContractError("test_fraction must be in (0, 1)")
    groups = {}
    for cid, s in zip(clip_ids, strata):
        groups.setdefault(s, []).append(cid)
    singletons = sorted(str(s) for s, members in groups.items() if len(members) < 2)
    if singletons:
        raise ValidationError(f"strata with fewer than 2 clips: {singletons}")

    labels = sorted(groups, key=str)
    quotas = {s: test_fraction * len(groups[s]) for s in labels}
    base = {s: int(math.floor(quotas[s])) for s in labels}
    total_target = int(round(test_fraction * len(clip_ids)))
    leftover = total_target - sum(base.values())
    remainders = sorted(
        labels, key=lambda s: (-(quotas[s] - base[s]), str(s))
    )
    counts = dict(base)
    for s in remainders[: max(0, leftover)]:
        counts[s] += 1
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x57]))
    train_ids, test_ids = [], []
    for s in labels:
        members = list(groups[s])
        order = rng.permutation(len(members))
        k = min(counts[s], len(members) - 1)
        for j, oi in enumerate(order):
            (test_ids if j < k else train_ids).append(members[oi])
    return train_ids, test_ids


def _tree_to_dict(tree):
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
    }


def save_model(model, path):
    """Serialize to versioned JSON; floats round-trip bit-exactly."""
    doc = {
        "format": MODEL_FORMAT_TAG,
        "kind": model.kind,
        "target_id": model.target_id,
        "metric": model.metric,
        "hyperparams": {
            "n_trees": model.hyperparams.n_trees,
            "max_features": model.hyperparams.max_features,
            "min_samples_split": model.hyperparams.min_samples_split,
            "seed": model.hyperparams.seed,
        },
        "feature_names": list(model.feature_names),
        "y_min": model.y_min,
        "y_max": model.y_max,
        "feature_gains": model.feature_gains.tolist(),
        "trees": [_tree_to_dict(t) for t in model.trees],
    }
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def load_model(path):
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != MODEL_FORMAT_TAG:
        raise ValidationError(f"{path}: unknown model format {doc.get('format')!r}")
    trees = [
        Tree(
            np.asarray(t["feature"], dtype=np.int64),
            np.asarray(t["threshold"], dtype=np.float64),
            np.asarray(t["left"], dtype=np.int64),
            np.asarray(t["right"], dtype=np.int64),
            np.asarray(t["value"], dtype=np.float64),
        )
        for t in doc["trees"]
    ]
    hp = Hyperparams(**doc["hyperparams"])
    return TrainedModel(
        kind=doc["kind"],
        trees=trees,
        hyperparams=hp,
        feature_names=list(doc["feature_names"]),
        target_id=doc["target_id"],
        metric=doc["metric"],
        y_min=doc["y_min"],
        y_max=doc["y_max"],
        feature_gains=np.asarray(doc["feature_gains"], dtype=np.float64),
    )
