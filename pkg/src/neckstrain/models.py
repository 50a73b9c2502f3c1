"""Regression models predicting the EMG envelope from (roll, pitch, yaw).

Five families, all fit from scratch and deterministic under a fixed seed:

* linear          least squares with a small ridge term for conditioning
* svr_linear      epsilon-insensitive linear regression, full-batch
                  subgradient descent on standardized features
* decision_tree   CART with variance-reduction splits
* random_forest   bagged CART trees (bootstrap of size n, all features
                  candidate at every split; randomness comes from the
                  bootstrap only), predictions averaged
* gradient_boosting  stagewise depth-limited trees on residuals with
                  shrinkage

Tree split ties break deterministically: lowest feature index, then lowest
threshold. Trained models are immutable; predict is a pure function. Models
serialize to a versioned JSON document whose floats round-trip exactly, so a
loaded model reproduces predictions bit-for-bit.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._backend import grow_tree, predict_tree
from .errors import ModelError
from .ingest import AlignedRecord
from .rng import philox_stream

FEATURE_NAMES = ("roll_deg", "pitch_deg", "yaw_deg")
FAMILIES = (
    "linear", "svr_linear", "decision_tree", "random_forest", "gradient_boosting"
)

DEFAULT_HYPER: dict[str, dict[str, float | int]] = {
    "linear": {"ridge": 1e-8},
    "svr_linear": {"epsilon": 0.01, "epochs": 200},
    "decision_tree": {"max_depth": 12, "min_samples_leaf": 5},
    "random_forest": {"n_trees": 100, "max_depth": 12, "min_samples_leaf": 5},
    "gradient_boosting": {"rounds": 100, "learning_rate": 0.1, "max_depth": 3},
}

MODEL_FORMAT = "neckstrain-model"
MODEL_VERSION = 1


@dataclass
class Dataset:
    """Feature rows (roll, pitch, yaw) with envelope targets, time-ordered."""

    features: np.ndarray  # (n, 3)
    target: np.ndarray  # (n,)
    t_ms: np.ndarray  # (n,)

    def __post_init__(self) -> None:
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.target = np.ascontiguousarray(self.target, dtype=np.float64)
        self.t_ms = np.ascontiguousarray(self.t_ms, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[1] != len(FEATURE_NAMES):
            raise ModelError("features must have shape (n, 3)")
        n = self.features.shape[0]
        if self.target.shape != (n,) or self.t_ms.shape != (n,):
            raise ModelError("features, target and t_ms lengths disagree")
        for name, arr in (("features", self.features), ("target", self.target)):
            if arr.size and not np.isfinite(arr).all():
                raise ModelError(f"{name} contain non-finite values")

    def __len__(self) -> int:
        return self.features.shape[0]

    def take(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.features[idx], self.target[idx], self.t_ms[idx])


def build_dataset(records: list[AlignedRecord]) -> Dataset:
    """One row per aligned record, order preserved."""
    n = len(records)
    features = np.empty((n, 3), dtype=np.float64)
    target = np.empty(n, dtype=np.float64)
    t_ms = np.empty(n, dtype=np.float64)
    for i, r in enumerate(records):
        features[i, 0] = r.roll_deg
        features[i, 1] = r.pitch_deg
        features[i, 2] = r.yaw_deg
        target[i] = r.envelope
        t_ms[i] = r.t_ms
    return Dataset(features, target, t_ms)


def split_dataset(ds: Dataset, strategy: str = "block",
                  test_fraction: float = 0.2, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Chronological (block) or seeded-shuffle (random) train/test partition.

    Block keeps the final test_fraction of rows as the test set, avoiding
    temporal leakage in an autocorrelated signal; random mirrors a plain
    shuffled split for comparison.
    """
    n = len(ds)
    if n == 0:
        raise ModelError("cannot split an empty dataset")
    if not 0.0 < test_fraction < 1.0:
        raise ModelError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)
    if strategy == "block":
        order = np.arange(n)
    elif strategy == "random":
        order = philox_stream(seed, 0).permutation(n)
    else:
        raise ModelError(f"unknown split strategy {strategy!r}")
    return ds.take(order[: n - n_test]), ds.take(order[n - n_test:])


@dataclass(frozen=True)
class ModelSpec:
    family: str
    seed: int = 0
    hyper: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ModelError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        known = DEFAULT_HYPER[self.family]
        for key, value in self.hyper.items():
            if key not in known:
                raise ModelError(f"unknown hyperparameter {key!r} for {self.family}")
            if not math.isfinite(float(value)):
                raise ModelError(f"hyperparameter {key} must be finite")

    def resolved(self) -> dict:
        merged = dict(DEFAULT_HYPER[self.family])
        merged.update(self.hyper)
        _validate_hyper(self.family, merged)
        return merged


def _validate_hyper(family: str, h: dict) -> None:
    def need(cond: bool, msg: str) -> None:
        if not cond:
            raise ModelError(f"{family}: {msg}")

    if family == "linear":
        need(h["ridge"] >= 0, "ridge must be >= 0")
    elif family == "svr_linear":
        need(h["epsilon"] >= 0, "epsilon must be >= 0")
        need(int(h["epochs"]) >= 1, "epochs must be >= 1")
    else:
        need(1 <= int(h["max_depth"]) <= 64, "max_depth must be in 1..64")
        if family != "gradient_boosting":
            need(int(h["min_samples_leaf"]) >= 1, "min_samples_leaf must be >= 1")
        if family == "random_forest":
            need(int(h["n_trees"]) >= 1, "n_trees must be >= 1")
        if family == "gradient_boosting":
            need(int(h["rounds"]) >= 1, "rounds must be >= 1")
            need(0.0 < h["learning_rate"] <= 1.0, "learning_rate must be in (0, 1]")


@dataclass(frozen=True)
class Tree:
    """Flat CART arrays in preorder; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_node: np.ndarray
    gain: np.ndarray

    @property
    def n_train(self) -> int:
        return int(self.n_node[0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict_tree(
            self.feature, self.threshold, self.left, self.right, self.value,
            np.ascontiguousarray(X, dtype=np.float64),
        )


def _fit_tree(X: np.ndarray, y: np.ndarray, max_depth: int, min_leaf: int,
              sidx: np.ndarray | None = None) -> Tree:
    if sidx is None:
        sidx = np.stack([
            np.argsort(X[:, f], kind="stable") for f in range(X.shape[1])
        ]).astype(np.int64)
    return Tree(*grow_tree(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(sidx, dtype=np.int64),
        int(max_depth), int(min_leaf),
    ))


@dataclass(frozen=True)
class RegressionModel:
    """Immutable trained predictor; payload layout depends on the family."""

    family: str
    spec: ModelSpec
    payload: dict
    train_n: int


def fit(spec: ModelSpec, train: Dataset) -> RegressionModel:
    """Train one model; deterministic given (spec, train) including the seed."""
    if len(train) == 0:
        raise ModelError("empty training set")
    hyper = spec.resolved()
    X, y = train.features, train.target
    fitter = {
        "linear": _fit_linear,
        "svr_linear": _fit_svr,
        "decision_tree": _fit_decision_tree,
        "random_forest": _fit_forest,
        "gradient_boosting": _fit_gbm,
    }[spec.family]
    payload = fitter(X, y, hyper, spec.seed)
    return RegressionModel(spec.family, spec, payload, len(train))


def _fit_linear(X: np.ndarray, y: np.ndarray, hyper: dict, seed: int) -> dict:
    if np.all(X == X[0]):
        warnings.warn(
            "all feature rows identical; linear fit falls back to intercept only",
            stacklevel=3,
        )
        return {"coef": np.zeros(3), "intercept": float(np.mean(y))}
    n = X.shape[0]
    xm = np.hstack([np.ones((n, 1)), X])
    gram = xm.T @ xm
    ridge = float(hyper["ridge"])
    for j in range(1, 4):
        gram[j, j] += ridge  # intercept left unpenalized
    try:
        w = np.linalg.solve(gram, xm.T @ y)
    except np.linalg.LinAlgError:
        warnings.warn("singular normal equations; falling back to intercept only",
                      stacklevel=3)
        return {"coef": np.zeros(3), "intercept": float(np.mean(y))}
    return {"coef": w[1:].copy(), "intercept": float(w[0])}


def _fit_svr(X: np.ndarray, y: np.ndarray, hyper: dict, seed: int) -> dict:
    epsilon = float(hyper["epsilon"])
    epochs = int(hyper["epochs"])
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    Z = (X - center) / scale
    n = Z.shape[0]
    w = np.zeros(3)
    b = float(np.mean(y))
    y_scale = float(np.std(y))
    if y_scale == 0.0:
        y_scale = 1.0
    reg = 1e-6
    for t in range(epochs):
        r = y - (Z @ w + b)
        s = np.sign(r) * (np.abs(r) > epsilon)
        step = 0.5 * y_scale / math.sqrt(t + 1.0)
        w -= step * (-(Z.T @ s) / n + reg * w)
        b -= step * (-float(np.sum(s)) / n)
    return {"coef": w, "intercept": b, "center": center, "scale": scale}


def _fit_decision_tree(X: np.ndarray, y: np.ndarray, hyper: dict, seed: int) -> dict:
    tree = _fit_tree(X, y, hyper["max_depth"], hyper["min_samples_leaf"])
    return {"tree": tree}


def _fit_forest(X: np.ndarray, y: np.ndarray, hyper: dict, seed: int) -> dict:
    n = X.shape[0]
    trees = []
    for t in range(int(hyper["n_trees"])):
        # per-tree derived stream: sequential and parallel training agree
        idx = philox_stream(seed, t + 1).integers(0, n, size=n)
        Xb = X[idx]
        yb = y[idx]
        trees.append(_fit_tree(Xb, yb, hyper["max_depth"], hyper["min_samples_leaf"]))
    return {"trees": trees}


def _fit_gbm(X: np.ndarray, y: np.ndarray, hyper: dict, seed: int) -> dict:
    lr = float(hyper["learning_rate"])
    init = float(np.mean(y))
    Xc = np.ascontiguousarray(X, dtype=np.float64)
    sidx = np.stack([
        np.argsort(Xc[:, f], kind="stable") for f in range(Xc.shape[1])
    ]).astype(np.int64)
    current = np.full(X.shape[0], init)
    trees = []
    for _ in range(int(hyper["rounds"])):
        residual = y - current
        tree = _fit_tree(Xc, residual, hyper["max_depth"], 1, sidx=sidx)
        trees.append(tree)
        current = current + lr * tree.predict(Xc)
    return {"init": init, "learning_rate": lr, "trees": trees}


def _predict_matrix(model: RegressionModel, X: np.ndarray) -> np.ndarray:
    p = model.payload
    if model.family == "linear":
        return X @ p["coef"] + p["intercept"]
    if model.family == "svr_linear":
        return ((X - p["center"]) / p["scale"]) @ p["coef"] + p["intercept"]
    if model.family == "decision_tree":
        return p["tree"].predict(X)
    if model.family == "random_forest":
        return np.mean(np.stack([t.predict(X) for t in p["trees"]]), axis=0)
    if model.family == "gradient_boosting":
        out = np.full(X.shape[0], p["init"])
        for tree in p["trees"]:
            out = out + p["learning_rate"] * tree.predict(X)
        return out
    raise ModelError(f"unknown family {model.family!r}")


def predict(model: RegressionModel, features) -> float | np.ndarray:
    """Envelope estimate for one (roll, pitch, yaw) row or a (m, 3) matrix."""
    X = np.asarray(features, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != 3:
        raise ModelError(f"expected 3 features per row, got {X.shape[1]}")
    if X.size and not np.isfinite(X).all():
        raise ModelError("features must be finite")
    out = _predict_matrix(model, X)
    return float(out[0]) if single else out


@dataclass(frozen=True)
class Metrics:
    """r2 is None when the evaluation targets are all identical."""

    r2: float | None
    mse: float
    n: int


def evaluate(model: RegressionModel, test: Dataset) -> Metrics:
    if len(test) == 0:
        raise ModelError("empty evaluation set")
    pred = _predict_matrix(model, test.features)
    resid = test.target - pred
    mse = float(np.mean(resid * resid))
    ss_tot = float(np.sum((test.target - np.mean(test.target)) ** 2))
    if ss_tot == 0.0:
        return Metrics(None, mse, len(test))
    ss_res = float(np.sum(resid * resid))
    return Metrics(1.0 - ss_res / ss_tot, mse, len(test))


def feature_importance(model: RegressionModel) -> np.ndarray:
    """Per-feature mean decrease in weighted variance, normalized to sum 1.

    Random-forest models only; order (roll, pitch, yaw).
    """
    if model.family != "random_forest":
        raise ModelError(
            f"feature importance needs a random_forest model, got {model.family}"
        )
    trees = model.payload["trees"]
    acc = np.zeros(3)
    for tree in trees:
        per = np.zeros(3)
        internal = tree.feature >= 0
        np.add.at(per, tree.feature[internal], tree.gain[internal])
        acc += per / tree.n_train
    acc /= len(trees)
    total = float(acc.sum())
    if total <= 0.0:
        return np.full(3, 1.0 / 3.0)  # no splits anywhere: no information
    return acc / total


@dataclass(frozen=True)
class ComparisonRow:
    family: str
    r2: float | None
    mse: float
    model: RegressionModel


def compare_models(ds: Dataset, specs: list[ModelSpec], strategy: str = "block",
                   test_fraction: float = 0.2, split_seed: int = 0) -> list[ComparisonRow]:
    """Fit every spec on one shared split; rows sorted by r2 descending."""
    if not specs:
        raise ModelError("compare_models needs at least one spec")
    train, test = split_dataset(ds, strategy, test_fraction, split_seed)
    rows = []
    for spec in specs:
        model = fit(spec, train)
        metrics = evaluate(model, test)
        rows.append(ComparisonRow(spec.family, metrics.r2, metrics.mse, model))
    rows.sort(key=lambda r: -r.r2 if r.r2 is not None else math.inf)
    return rows


def _tree_to_nested(tree: Tree, node: int = 0) -> dict:
    if tree.feature[node] < 0:
        return {"n": int(tree.n_node[node]), "v": float(tree.value[node])}
    return {
        "f": int(tree.feature[node]),
        "t": float(tree.threshold[node]),
        "n": int(tree.n_node[node]),
        "g": float(tree.gain[node]),
        "v": float(tree.value[node]),
        "l": _tree_to_nested(tree, int(tree.left[node])),
        "r": _tree_to_nested(tree, int(tree.right[node])),
    }


def _tree_from_nested(root: dict) -> Tree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    n_node: list[int] = []
    gain: list[float] = []

    def walk(node: dict) -> int:
        idx = len(feature)
        is_leaf = "f" not in node
        feature.append(-1 if is_leaf else int(node["f"]))
        threshold.append(0.0 if is_leaf else float(node["t"]))
        left.append(-1)
        right.append(-1)
        value.append(float(node["v"]))
        n_node.append(int(node["n"]))
        gain.append(0.0 if is_leaf else float(node["g"]))
        if not is_leaf:
            left[idx] = walk(node["l"])
            right[idx] = walk(node["r"])
        return idx

    walk(root)
    return Tree(
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(value, dtype=np.float64),
        np.asarray(n_node, dtype=np.int32),
        np.asarray(gain, dtype=np.float64),
    )


def serialize_model(model: RegressionModel) -> str:
    """Versioned JSON text; floats use shortest round-trip repr (exact)."""
    p = model.payload
    if model.family in ("linear", "svr_linear"):
        payload = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                   for k, v in p.items()}
    elif model.family == "decision_tree":
        payload = {"tree": _tree_to_nested(p["tree"])}
    elif model.family == "random_forest":
        payload = {"trees": [_tree_to_nested(t) for t in p["trees"]]}
    else:
        payload = {
            "init": p["init"],
            "learning_rate": p["learning_rate"],
            "trees": [_tree_to_nested(t) for t in p["trees"]],
        }
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "family": model.family,
        "seed": model.spec.seed,
        "hyper": model.spec.resolved(),
        "train_n": model.train_n,
        "payload": payload,
    }
    return json.dumps(doc, indent=1)


def deserialize_model(text: str) -> RegressionModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file is not valid JSON: {exc}") from None
    if doc.get("format") != MODEL_FORMAT:
        raise ModelError(f"not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelError(f"unsupported model version {doc.get('version')}")
    family = doc["family"]
    spec = ModelSpec(family, int(doc["seed"]), dict(doc["hyper"]))
    p = doc["payload"]
    if family in ("linear", "svr_linear"):
        payload = {k: (np.asarray(v, dtype=np.float64) if isinstance(v, list) else v)
                   for k, v in p.items()}
    elif family == "decision_tree":
        payload = {"tree": _tree_from_nested(p["tree"])}
    elif family == "random_forest":
        payload = {"trees": [_tree_from_nested(t) for t in p["trees"]]}
    elif family == "gradient_boosting":
        payload = {
            "init": float(p["init"]),
            "learning_rate": float(p["learning_rate"]),
            "trees": [_tree_from_nested(t) for t in p["trees"]],
        }
    else:
        raise ModelError(f"unknown family {family!r}")
    return RegressionModel(family, spec, payload, int(doc["train_n"]))


def save_model(model: RegressionModel, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_model(model))
        fh.write("\n")


def load_model(path: str) -> RegressionModel:
    with open(path, "r", encoding="utf-8") as fh:
        return deserialize_model(fh.read())
