"""Seven binary classifiers behind one fit/predict contract.

Families (in reporting order): logistic, random_forest, svm_rbf, knn,
decision_tree, naive_bayes, gbdt_limited_depth.  Every family is
deterministic given its spec (including the seed) and the training data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import LengthMismatch, NonFiniteInput, SchemaMismatch, SingleClass
from . import _trees
from .linear import fit_logistic, logistic_margin
from .simple import fit_gaussian_nb, gaussian_nb_log_posterior, knn_votes
from .svm import rbf_kernel, smo

FAMILIES = (
    "logistic",
    "random_forest",
    "svm_rbf",
    "knn",
    "decision_tree",
    "naive_bayes",
    "gbdt_limited_depth",
)

DISPLAY_NAMES = {
    "logistic": "Logistic Regression",
    "random_forest": "Random Forest",
    "svm_rbf": "Kernel SVM (RBF)",
    "knn": "K-Nearest Neighbors",
    "decision_tree": "Decision Tree",
    "naive_bayes": "Naive Bayes (Gaussian)",
    "gbdt_limited_depth": "Gradient-Boosted Trees, depth 2",
}

DEFAULTS = {
    "logistic": {"l2": 1.0, "tol": 1e-8, "max_iter": 5000},
    "random_forest": {"n_trees": 100, "max_features": "sqrt", "max_depth": None,
                      "min_samples_split": 2, "bootstrap": True},
    "svm_rbf": {"C": 1.0, "gamma": "scale", "tol": 1e-3, "max_passes": 10000},
    "knn": {"k": 5},
    "decision_tree": {"max_depth": None, "min_samples_split": 2},
    "naive_bayes": {"var_smoothing": 1e-9},
    "gbdt_limited_depth": {"n_rounds": 200, "learning_rate": 0.1, "max_depth": 2,
                           "min_samples_split": 2},
}

SERIAL_VERSION = 1


def _check_param(family, key, value):
    def positive_int(v):
        return isinstance(v, int) and not isinstance(v, bool) and v >= 1

    def positive_float(v):
        return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0

    ok = {
        "l2": lambda v: isinstance(v, (int, float)) and v >= 0,
        "tol": positive_float,
        "max_iter": positive_int,
        "n_trees": positive_int,
        "max_features": lambda v: v in ("sqrt", "all") or positive_int(v),
        "max_depth": lambda v: v is None or (isinstance(v, int) and not isinstance(v, bool) and v >= 0),
        "min_samples_split": lambda v: isinstance(v, int) and v >= 2,
        "bootstrap": lambda v: isinstance(v, bool),
        "C": positive_float,
        "gamma": lambda v: v == "scale" or positive_float(v),
        "max_passes": positive_int,
        "k": positive_int,
        "var_smoothing": lambda v: isinstance(v, (int, float)) and v >= 0,
        "n_rounds": positive_int,
        "learning_rate": positive_float,
    }[key]
    if not ok(value):
        raise ValueError(f"{family}: invalid value {value!r} for {key}")


@dataclass(frozen=True)
class ModelSpec:
    family: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        unknown = set(self.hyperparameters) - set(DEFAULTS[self.family])
        if unknown:
            raise ValueError(f"{self.family}: unknown hyperparameters {sorted(unknown)}")
        for key, value in self.hyperparameters.items():
            _check_param(self.family, key, value)

    @property
    def params(self) -> dict:
        merged = dict(DEFAULTS[self.family])
        merged.update(self.hyperparameters)
        return merged

    def with_seed(self, seed):
        return ModelSpec(self.family, dict(self.hyperparameters), int(seed))

    def as_dict(self):
        return {"family": self.family, "hyperparameters": dict(self.hyperparameters), "seed": self.seed}

    def label(self):
        if not self.hyperparameters:
            return DISPLAY_NAMES[self.family]
        inner = ", ".join(f"{k}={v}" for k, v in sorted(self.hyperparameters.items()))
        return f"{DISPLAY_NAMES[self.family]} ({inner})"


@dataclass
class TrainedModel:
    spec: ModelSpec
    features: list
    params: dict
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    def _prepare(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.features):
            raise SchemaMismatch(
                f"expected {len(self.features)} features {self.features}, got shape {X.shape}"
            )
        if not np.all(np.isfinite(X)):
            raise NonFiniteInput("prediction input contains non-finite values")
        if self.mean is not None:
            X = (X - self.mean) / self.scale
        return X


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float

    def as_dict(self):
        return {"accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f1": self.f1}


def compute_metrics(y_true, y_pred) -> Metrics:
    """Accuracy/precision/recall/F1 with injection (1) as the positive class."""
    y_true = np.asarray(y_true).astype(int).ravel()
    y_pred = np.asarray(y_pred).astype(int).ravel()
    if y_true.size != y_pred.size:
        raise LengthMismatch(f"{y_true.size} labels vs {y_pred.size} predictions")
    if y_true.size == 0:
        raise LengthMismatch("metrics need at least one prediction")
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    accuracy = float(np.mean(y_true == y_pred))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Metrics(accuracy, precision, recall, f1)


def _standardizer(X):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return mean, np.where(std > 0, std, 1.0)


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from integer parts (order matters)."""
    state = np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts])
    return int(state.generate_state(2, dtype=np.uint32) @ np.array([1 << 31, 1], dtype=np.uint64)) & ((1 << 63) - 1)


def _max_features(setting, d):
    if setting == "sqrt":
        return max(1, math.ceil(math.sqrt(d)))
    if setting == "all":
        return d
    return min(int(setting), d)


def _depth(v):
    return -1 if v is None else int(v)


def fit(spec: ModelSpec, X, y, features=None) -> TrainedModel:
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y).astype(np.int64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise SchemaMismatch(f"X shape {X.shape} does not match {y.size} labels")
    if X.shape[0] < 2:
        raise SingleClass("need at least two training rows")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("training matrix contains non-finite values")
    if not set(np.unique(y).tolist()) <= {0, 1}:
        raise ValueError("labels must be 0/1")
    if np.unique(y).size < 2:
        raise SingleClass("training labels contain a single class")
    features = list(features) if features is not None else [f"x{i}" for i in range(X.shape[1])]
    p = spec.params
    fam = spec.family
    model = TrainedModel(spec, features, {})

    if fam in ("logistic", "svm_rbf", "knn"):
        model.mean, model.scale = _standardizer(X)
        Xs = (X - model.mean) / model.scale
    else:
        Xs = X

    if fam == "logistic":
        theta, iterations, converged = fit_logistic(Xs, y, p["l2"], p["tol"], p["max_iter"])
        model.params = {"theta": theta, "iterations": iterations, "converged": converged}
    elif fam == "decision_tree":
        arrays = _trees.build_class_tree(
            Xs, y.astype(float), np.arange(X.shape[0]), X.shape[1], _depth(p["max_depth"]),
            p["min_samples_split"], np.uint64(derive_seed(spec.seed)),
        )
        model.params = dict(zip(("feature", "threshold", "left", "right", "value"), arrays))
    elif fam == "random_forest":
        n_trees = p["n_trees"]
        seeds = np.random.SeedSequence(spec.seed).generate_state(n_trees, dtype=np.uint64)
        F, T, L, R, V, offsets = _trees.fit_forest(
            Xs, y.astype(float), n_trees, _max_features(p["max_features"], X.shape[1]),
            _depth(p["max_depth"]), p["min_samples_split"], seeds, p["bootstrap"],
        )
        model.params = {"feature": F, "threshold": T, "left": L, "right": R, "value": V,
                        "offsets": offsets}
    elif fam == "svm_rbf":
        gamma = p["gamma"]
        if gamma == "scale":
            pooled = float(Xs.var())
            gamma = 1.0 / (Xs.shape[1] * pooled) if pooled > 0 else 1.0
        ys = np.where(y == 1, 1.0, -1.0)
        K = rbf_kernel(Xs, Xs, gamma)
        alpha, rho, iterations, gap = smo(K, ys, float(p["C"]), float(p["tol"]), int(p["max_passes"]))
        sv = alpha > 0
        model.params = {"gamma": gamma, "rho": rho, "support": Xs[sv], "coef": (alpha * ys)[sv],
                        "alpha": alpha, "iterations": iterations, "gap": gap}
    elif fam == "knn":
        model.params = {"train_X": Xs, "train_y": y, "k": min(p["k"], X.shape[0])}
    elif fam == "naive_bayes":
        nb = fit_gaussian_nb(Xs, y, p["var_smoothing"])
        model.params = {"nb": nb}
    elif fam == "gbdt_limited_depth":
        base, F, T, L, R, V, offsets, losses = _trees.fit_boosting(
            Xs, y.astype(float), p["n_rounds"], float(p["learning_rate"]), int(p["max_depth"]),
            p["min_samples_split"],
        )
        model.params = {"base": base, "feature": F, "threshold": T, "left": L, "right": R,
                        "value": V, "offsets": offsets, "losses": losses}
    return model


def decision_scores(model: TrainedModel, X) -> np.ndarray:
    """Real-valued scores; a row is predicted injection when its score > 0."""
    Xs = model._prepare(X)
    fam = model.spec.family
    p = model.params
    if fam == "logistic":
        return logistic_margin(p["theta"], Xs)
    if fam == "decision_tree":
        share = _trees.apply_tree(np.ascontiguousarray(Xs), p["feature"], p["threshold"],
                                  p["left"], p["right"], p["value"])
        return share - 0.5
    if fam == "random_forest":
        votes = _trees.forest_votes(np.ascontiguousarray(Xs), p["feature"], p["threshold"],
                                    p["left"], p["right"], p["value"], p["offsets"])
        n_trees = p["offsets"].shape[0] - 1
        return votes - n_trees / 2.0
    if fam == "svm_rbf":
        if p["support"].shape[0] == 0:
            return np.full(Xs.shape[0], -p["rho"])
        return rbf_kernel(Xs, p["support"], p["gamma"]) @ p["coef"] - p["rho"]
    if fam == "knn":
        votes = knn_votes(p["train_X"], p["train_y"], Xs, p["k"])
        return votes - p["k"] / 2.0
    if fam == "naive_bayes":
        post = gaussian_nb_log_posterior(p["nb"], Xs)
        return post[:, 1] - post[:, 0]
    if fam == "gbdt_limited_depth":
        return _trees.boosting_margin(np.ascontiguousarray(Xs), p["base"], p["feature"],
                                      p["threshold"], p["left"], p["right"], p["value"],
                                      p["offsets"])
    raise ValueError(fam)


def predict(model: TrainedModel, X) -> np.ndarray:
    """0/1 predictions; exact score ties resolve to benign (0)."""
    return (decision_scores(model, X) > 0).astype(int)


# -- serialization --------------------------------------------------------

def _encode(value):
    if isinstance(value, np.ndarray):
        return {"__ndarray__": value.tolist(), "dtype": str(value.dtype)}
    if isinstance(value, dict):
        return {str(k): _encode(v) for k, v in value.items()}
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def _decode(value):
    if isinstance(value, dict):
        if "__ndarray__" in value:
            return np.array(value["__ndarray__"], dtype=value["dtype"])
        return {k: _decode(v) for k, v in value.items()}
    return value


def to_json(model: TrainedModel) -> str:
    params = dict(model.params)
    if "nb" in params:
        params["nb"] = {str(c): v for c, v in params["nb"].items()}
    doc = {
        "format": "logsentinel-model",
        "version": SERIAL_VERSION,
        "spec": model.spec.as_dict(),
        "features": model.features,
        "standardization": None if model.mean is None else
        {"mean": model.mean.tolist(), "scale": model.scale.tolist()},
        "params": _encode(params),
    }
    return json.dumps(doc, indent=1)


def from_json(text: str) -> TrainedModel:
    doc = json.loads(text)
    if doc.get("format") != "logsentinel-model" or doc.get("version") != SERIAL_VERSION:
        raise SchemaMismatch("not a supported model document")
    spec = ModelSpec(doc["spec"]["family"], doc["spec"]["hyperparameters"], doc["spec"]["seed"])
    params = _decode(doc["params"])
    if "nb" in params:
        params["nb"] = {int(c): v for c, v in params["nb"].items()}
    std = doc["standardization"]
    mean = None if std is None else np.array(std["mean"])
    scale = None if std is None else np.array(std["scale"])
    return TrainedModel(spec, doc["features"], params, mean, scale)
