"""Cross-validated pipeline objective: 1 - mean stratified 10-fold MCC."""

from __future__ import annotations

import time
from collections import OrderedDict
from typing import Callable, Mapping, Sequence

import numpy as np
from sklearn.model_selection import StratifiedKFold

from ..exceptions import StratificationError
from ..features import FeatureSet, featurize
from ..learners import make_classifier
from ..metrics import confusion, mcc_multiclass
from ..preprocessing import MinMaxScaler
from ..trajectory import Trajectory
from .space import PipelineConfig, TrialRecord

N_FOLDS = 10


class FeatureCache:
    """Memoized :func:`featurize` output for one fixed trajectory list.

    Noise placement and segmentation have no fitted state, so the features of
    a (split, placement, window, order) combination can be computed once and
    shared by every fold and every configuration that needs them.
    """

    def __init__(self, trajectories: Sequence[Trajectory], maxsize: int = 256):
        self.trajectories = list(trajectories)
        self.maxsize = maxsize
        self._store: OrderedDict = OrderedDict()
        self.hits = self.misses = 0

    @staticmethod
    def key(config: PipelineConfig) -> tuple:
        sg = config.savgol
        return (config.split, config.placement.value,
                None if sg is None else (sg.window_length, sg.effective_polyorder))

    def get(self, config: PipelineConfig) -> FeatureSet:
        key = self.key(config)
        if key in self._store:
            self.hits += 1
            self._store.move_to_end(key)
            return self._store[key]
        self.misses += 1
        fs = featurize(self.trajectories, config.split, config.placement, config.savgol)
        fs.X.setflags(write=False)
        self._store[key] = fs
        if len(self._store) > self.maxsize:
            self._store.popitem(last=False)
        return fs


def stratified_folds(y, n_folds: int = N_FOLDS, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled stratified (train_idx, test_idx) pairs over instances."""
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if len(y) == 0 or counts.min() < n_folds:
        worst = classes[np.argmin(counts)] if len(y) else None
        raise StratificationError(f"class {worst!r} has {counts.min() if len(y) else 0} instances; "
                                  f"{n_folds}-fold stratification needs at least {n_folds} per class")
    splitter = StratifiedKFold(n_splits=n_folds, shuffle=True, random_state=seed % 2 ** 32)
    return list(splitter.split(np.zeros(len(y)), y))


def fit_pipeline_features(config: PipelineConfig, X, y, seed: int = 0):
    """Fit scaler and classifier on an already featurized training matrix."""
    scaler = MinMaxScaler().fit(X)
    model = make_classifier(config.classifier, config.classifier_params, seed=seed)
    model.fit(scaler.transform(X), y)
    return scaler, model


def cv_objective(config: PipelineConfig | Mapping, train: Sequence[Trajectory], seed: int = 0, *,
                 cache: FeatureCache | None = None, n_folds: int = N_FOLDS,
                 leakage_hook: Callable[[np.ndarray], None] | None = None) -> TrialRecord:
    """Score ``config`` by stratified ``n_folds``-fold cross-validation on ``train``.

    Parameters
    ----------
    config : PipelineConfig or flat dict
    train : list of Trajectory
    seed : int
        Seeds the fold shuffle and the classifier.
    cache : FeatureCache, optional
        Must have been built on the same ``train`` list.
    leakage_hook : callable, optional
        Called with the parent trajectory ids of every training fold.

    Returns
    -------
    TrialRecord
        ``objective = 1 - mean(fold_scores)``.
    """
    start = time.perf_counter()
    if not isinstance(config, PipelineConfig):
        config = PipelineConfig.from_dict(config)
    fs = cache.get(config) if cache is not None else featurize(train, config.split, config.placement,
                                                               config.savgol)
    classes = np.unique(fs.y)
    fold_scores = []
    for tr, te in stratified_folds(fs.y, n_folds, seed):
        if leakage_hook is not None:
            leakage_hook(fs.groups[tr])
        scaler, model = fit_pipeline_features(config, fs.X[tr], fs.y[tr], seed)
        pred = model.predict(scaler.transform(fs.X[te]))
        fold_scores.append(mcc_multiclass(confusion(fs.y[te], pred, classes)))
    objective = 1.0 - float(np.mean(fold_scores))
    return TrialRecord(config, objective, time.perf_counter() - start, tuple(fold_scores), seed)
