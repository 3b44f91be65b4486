"""Model specs, fitting, prediction and JSON persistence."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..events import Rect
from ..synth import KeyboardLayout, key_at, nearest_key
from .features import LabeledSet
from .linear import lasso_fit, ols_fit
from .tree import TreeArrays, grow_tree

MODEL_FORMAT_VERSION = 1

REGRESSORS = ("baseline-reg", "ols", "lasso", "tree-reg", "forest-reg")
CLASSIFIERS = ("baseline-cls", "tree-cls", "forest-cls", "bagging-cls")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    lam: float = 0.0
    max_depth: Optional[int] = None
    min_leaf: int = 1
    n_trees: int = 100
    max_features: Optional[int] = None  # None: sqrt(d) / d/3 for forests, all for trees
    bootstrap: bool = True
    seed: int = 0
    layout: Optional[KeyboardLayout] = None

    def __post_init__(self) -> None:
        if self.kind not in REGRESSORS + CLASSIFIERS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_leaf < 1 or self.n_trees < 1:
            raise ValueError("min_leaf and n_trees must be >= 1")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1")
        if self.kind == "baseline-cls" and self.layout is None:
            raise ValueError("baseline-cls needs a keyboard layout")

    @property
    def task(self) -> str:
        return "regression" if self.kind in REGRESSORS else "classification"

    @property
    def label(self) -> str:
        parts = []
        if self.kind == "lasso":
            parts.append(f"lambda={self.lam:g}")
        if self.kind.startswith(("tree", "forest", "bagging")):
            if self.kind.startswith(("forest", "bagging")):
                parts.append(f"n={self.n_trees}")
            parts.append(f"depth={self.max_depth if self.max_depth is not None else 'none'}")
            parts.append(f"leaf={self.min_leaf}")
        return self.kind + (":" + ",".join(parts) if parts else "")


_ALIASES = {
    "baseline": {"regression": "baseline-reg", "classification": "baseline-cls"},
    "tree": {"regression": "tree-reg", "classification": "tree-cls"},
    "forest": {"regression": "forest-reg", "classification": "forest-cls"},
    "lr": {"regression": "ols"},
    "linear": {"regression": "ols"},
    "bagging": {"classification": "bagging-cls"},
}
_PARAM_KEYS = {
    "n": "n_trees", "n_trees": "n_trees", "depth": "max_depth", "max_depth": "max_depth",
    "leaf": "min_leaf", "min_leaf": "min_leaf", "lambda": "lam", "lam": "lam",
    "features": "max_features", "max_features": "max_features", "seed": "seed", "bootstrap": "bootstrap",
}


def parse_model_spec(text: str, task: str, layout: Optional[KeyboardLayout] = None, seed: int = 0) -> ModelSpec:
    """``"forest:n=100,depth=12"`` -> ModelSpec for *task*."""
    name, _, rest = text.strip().partition(":")
    name = name.strip().lower()
    kind = _ALIASES.get(name, {}).get(task, name)
    kw: dict = {"seed": seed}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq or key.strip() not in _PARAM_KEYS:
            raise ValueError(f"bad model parameter {item!r} in {text!r}")
        field = _PARAM_KEYS[key.strip()]
        value = value.strip()
        if field == "lam":
            kw[field] = float(value)
        elif field == "bootstrap":
            kw[field] = value.lower() in ("1", "true", "yes", "on")
        elif field == "max_depth" and value.lower() in ("none", "inf"):
            kw[field] = None
        else:
            kw[field] = int(value)
    spec = ModelSpec(kind, layout=layout if kind == "baseline-cls" else None, **kw)
    if spec.task != task:
        raise ValueError(f"model {kind!r} does not solve a {task} task")
    return spec


# -- fitted models -------------------------------------------------------------


@dataclass
class Model:
    spec: ModelSpec
    n_features: int
    classes: Optional[np.ndarray] = None
    coef: Optional[np.ndarray] = None  # (d, m)
    intercept: Optional[np.ndarray] = None
    trees: Optional[list[TreeArrays]] = None


def _forest_mtry(spec: ModelSpec, d: int) -> int:
    if spec.max_features is not None:
        return min(spec.max_features, d)
    if spec.kind == "bagging-cls":
        return d
    if spec.task == "classification":
        return math.ceil(math.sqrt(d))
    return max(1, math.ceil(d / 3))


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tree_index)]))


def fit(spec: ModelSpec, data: LabeledSet) -> Model:
    if spec.task != data.task:
        raise ValueError(f"{spec.kind} cannot be fitted on {data.task} data")
    X = data.X
    n, d = X.shape
    model = Model(spec, d)

    if spec.task == "classification":
        classes, codes = np.unique(data.y.astype(str), return_inverse=True)
        model.classes = classes
        S = np.zeros((n, len(classes)))
        S[np.arange(n), codes] = 1.0
        leaf = "sum"
    else:
        S = data.y
        leaf = "mean"

    k = spec.kind
    if k in ("baseline-reg", "baseline-cls"):
        if d < 2:
            raise ValueError("baselines need the first hover's coordinates")
    elif k == "ols":
        model.coef, model.intercept = ols_fit(X, S)
    elif k == "lasso":
        coefs, icpts = [], []
        for j in range(S.shape[1]):
            res = lasso_fit(X, S[:, j], spec.lam)
            coefs.append(res.coef)
            icpts.append(res.intercept)
        model.coef = np.column_stack(coefs)
        model.intercept = np.asarray(icpts)
    elif k in ("tree-reg", "tree-cls"):
        mtry = spec.max_features if spec.max_features is not None else d
        rng = tree_rng(spec.seed, 0) if mtry < d else None
        model.trees = [grow_tree(X, S, spec.max_depth, spec.min_leaf, mtry, rng, leaf)]
    else:  # forests and bagging
        mtry = _forest_mtry(spec, d)
        trees = []
        for t in range(spec.n_trees):
            rng = tree_rng(spec.seed, t)
            idx = rng.integers(0, n, size=n) if spec.bootstrap else np.arange(n)
            trees.append(grow_tree(X[idx], S[idx], spec.max_depth, spec.min_leaf, mtry, rng, leaf))
        model.trees = trees
    return model


def predict(model: Model, X: np.ndarray) -> np.ndarray:
    """Points ``(n, 2)`` for regressors, label array ``(n,)`` for classifiers.

    A single feature vector is accepted and yields a single prediction.
    """
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {X.shape[1]}")
    out = _predict(model, X)
    return out[0] if single else out


def _predict(model: Model, X: np.ndarray) -> np.ndarray:
    k = model.spec.kind
    if k == "baseline-reg":
        return X[:, :2].copy()
    if k == "baseline-cls":
        layout = model.spec.layout
        out = []
        for x, y in X[:, :2]:
            label = key_at(layout, x, y)
            out.append(label if label is not None else nearest_key(layout, x, y))
        return np.asarray(out, dtype=object)
    if k in ("ols", "lasso"):
        return X @ model.coef + model.intercept
    if model.spec.task == "regression":
        return np.mean([t.predict_value(X) for t in model.trees], axis=0)
    n_cls = len(model.classes)
    if len(model.trees) == 1:
        winner = np.argmax(model.trees[0].predict_value(X), axis=1)
    else:
        votes = np.zeros((len(X), n_cls))
        rows = np.arange(len(X))
        for t in model.trees:
            # np.argmax keeps the first maximum: smallest label wins ties
            votes[rows, np.argmax(t.predict_value(X), axis=1)] += 1
        winner = np.argmax(votes, axis=1)
    return model.classes[winner].astype(object)


# -- persistence ---------------------------------------------------------------


def _num(v: float) -> str:
    return repr(float(v))


def _layout_doc(layout: Optional[KeyboardLayout]):
    if layout is None:
        return None
    r = layout.region
    return {
        "region": [r.x0, r.y0, r.x1, r.y1],
        "keys": [[label, [k.x0, k.y0, k.x1, k.y1]] for label, k in layout.keys],
    }


def _layout_from_doc(doc) -> Optional[KeyboardLayout]:
    if doc is None:
        return None
    keys = tuple((label, Rect(*box)) for label, box in doc["keys"])
    return KeyboardLayout(Rect(*doc["region"]), keys)


def model_to_json(model: Model) -> str:
    spec = model.spec
    doc: dict = {
        "version": MODEL_FORMAT_VERSION,
        "spec": {
            "kind": spec.kind, "lam": _num(spec.lam), "max_depth": spec.max_depth, "min_leaf": spec.min_leaf,
            "n_trees": spec.n_trees, "max_features": spec.max_features, "bootstrap": spec.bootstrap,
            "seed": spec.seed, "layout": _layout_doc(spec.layout),
        },
        "n_features": model.n_features,
        "classes": None if model.classes is None else [str(c) for c in model.classes],
    }
    if model.coef is not None:
        doc["coef"] = [[_num(v) for v in row] for row in model.coef]
        doc["intercept"] = [_num(v) for v in np.atleast_1d(model.intercept)]
    if model.trees is not None:
        # node = [feature, threshold, left, right, [values]]
        doc["trees"] = [
            [
                [int(t.feature[i]), _num(t.threshold[i]), int(t.left[i]), int(t.right[i]), [_num(v) for v in t.value[i]]]
                for i in range(t.n_nodes)
            ]
            for t in model.trees
        ]
    return json.dumps(doc, separators=(",", ":"))


def model_from_json(text: str) -> Model:
    doc = json.loads(text)
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model document version {doc.get('version')!r}")
    s = doc["spec"]
    spec = ModelSpec(
        s["kind"], float(s["lam"]), s["max_depth"], s["min_leaf"], s["n_trees"], s["max_features"],
        s["bootstrap"], s["seed"], _layout_from_doc(s["layout"]),
    )
    model = Model(spec, doc["n_features"])
    if doc.get("classes") is not None:
        model.classes = np.asarray(doc["classes"])
    if "coef" in doc:
        model.coef = np.array([[float(v) for v in row] for row in doc["coef"]])
        model.intercept = np.array([float(v) for v in doc["intercept"]])
    if "trees" in doc:
        trees = []
        for nodes in doc["trees"]:
            trees.append(
                TreeArrays(
                    np.array([n[0] for n in nodes], dtype=np.int64),
                    np.array([float(n[1]) for n in nodes]),
                    np.array([n[2] for n in nodes], dtype=np.int64),
                    np.array([n[3] for n in nodes], dtype=np.int64),
                    np.array([[float(v) for v in n[4]] for n in nodes]),
                )
            )
        model.trees = trees
    return model
