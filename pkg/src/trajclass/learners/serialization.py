"""Versioned JSON documents for fitted classifiers.

Trees are written as nested ``{"feature", "threshold", "left", "right"}``
nodes with ``{"leaf": counts}`` terminals; SVMs as support vectors plus one
coefficient block per pairwise machine.
"""

from __future__ import annotations

import json

import numpy as np

from ..exceptions import ParseError

FORMAT = "trajclass-model"
VERSION = 1


def _tree_to_nodes(arrays, t, node=0):
    if arrays.left[t, node] == -1:
        return {"leaf": arrays.value[t, node].tolist()}
    return {
        "feature": int(arrays.feature[t, node]),
        "threshold": float(arrays.threshold[t, node]),
        "left": _tree_to_nodes(arrays, t, int(arrays.left[t, node])),
        "right": _tree_to_nodes(arrays, t, int(arrays.right[t, node])),
    }


def _nodes_to_arrays(trees, n_classes):
    from .tree import TreeArrays

    flat = []
    for root in trees:
        nodes = []

        def walk(doc):
            nid = len(nodes)
            nodes.append(None)
            if "leaf" in doc:
                nodes[nid] = (-1, 0.0, -1, -1, doc["leaf"])
            else:
                left = walk(doc["left"])
                right = walk(doc["right"])
                nodes[nid] = (doc["feature"], doc["threshold"], left, right, [0.0] * n_classes)
            return nid

        walk(root)
        flat.append(nodes)
    m = max(len(n) for n in flat)
    shape = (len(flat), m)
    feature = np.full(shape, -1, dtype=np.int64)
    threshold = np.zeros(shape)
    left = np.full(shape, -1, dtype=np.int64)
    right = np.full(shape, -1, dtype=np.int64)
    value = np.zeros(shape + (n_classes,))
    for t, nodes in enumerate(flat):
        for i, (f, thr, lft, rgt, val) in enumerate(nodes):
            feature[t, i], threshold[t, i], left[t, i], right[t, i] = f, thr, lft, rgt
            value[t, i] = val
    return TreeArrays(feature, threshold, left, right, value, np.array([len(n) for n in flat]))


def model_to_dict(model) -> dict:
    from .svm import SVC
    from .tree import DecisionTreeClassifier, RandomForestClassifier

    doc = {"format": FORMAT, "version": VERSION, "params": model.get_params(),
           "classes": np.asarray(model.classes_).tolist(), "n_features": int(model.n_features_in_)}
    if isinstance(model, DecisionTreeClassifier):
        doc.update(kind="dt", trees=[_tree_to_nodes(model.tree_, 0)])
    elif isinstance(model, RandomForestClassifier):
        doc.update(kind="rf", trees=[_tree_to_nodes(model.trees_, t) for t in range(model.trees_.n_trees)])
    elif isinstance(model, SVC):
        doc.update(kind="svm", gamma=float(model.gamma_), support_vectors=model.support_vectors_.tolist(),
                   machines=[{"positive": m.positive, "negative": m.negative, "support": m.support.tolist(),
                              "dual_coef": m.dual_coef.tolist(), "rho": m.rho}
                             for m in model.machines_])
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return doc


def model_from_dict(doc: dict):
    from .svm import SVC, BinaryMachine
    from .tree import DecisionTreeClassifier, RandomForestClassifier

    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise ParseError(f"unsupported model document (format={doc.get('format')!r}, version={doc.get('version')!r})")
    kind = doc["kind"]
    classes = np.asarray(doc["classes"])
    cls = {"dt": DecisionTreeClassifier, "rf": RandomForestClassifier, "svm": SVC}[kind]
    model = cls(**doc["params"])
    model.classes_ = classes
    model.n_features_in_ = doc["n_features"]
    if kind == "dt":
        model.tree_ = _nodes_to_arrays(doc["trees"], len(classes))
    elif kind == "rf":
        model.trees_ = _nodes_to_arrays(doc["trees"], len(classes))
    else:
        model.gamma_ = doc["gamma"]
        model.support_vectors_ = np.asarray(doc["support_vectors"], dtype=float).reshape(-1, model.n_features_in_)
        model.machines_ = [
            BinaryMachine(m["positive"], m["negative"], alpha=None, y=None, rho=m["rho"], n_iter=0,
                          support=np.asarray(m["support"], dtype=np.int64),
                          dual_coef=np.asarray(m["dual_coef"], dtype=float))
            for m in doc["machines"]
        ]
    return model


def model_to_json(model) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True)


def model_from_json(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, location=f"{exc.lineno}:{exc.colno}") from None
    return model_from_dict(doc)
