"""End-to-end trajectory classifier: segmentation, noise placement, features, scaling, learner."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .features import FeatureSet, featurize
from .hpo.objective import fit_pipeline_features
from .hpo.space import PipelineConfig
from .metrics import scores
from .trajectory import Trajectory


class TrajectoryPipeline(ClassifierMixin, BaseEstimator):
    """Classify trajectory segments with one :class:`PipelineConfig`.

    ``fit`` and ``predict`` take lists of trajectories; predictions are made
    per segment, in trajectory order then segment order.

    Parameters
    ----------
    config : PipelineConfig or mapping
        Flat mappings are converted with :meth:`PipelineConfig.from_dict`.
    random_state : int
    """

    def __init__(self, config=None, random_state=0):
        self.config = config
        self.random_state = random_state

    def _config(self) -> PipelineConfig:
        if isinstance(self.config, PipelineConfig):
            return self.config
        if isinstance(self.config, Mapping):
            return PipelineConfig.from_dict(self.config)
        raise TypeError("config must be a PipelineConfig or a flat mapping")

    def featurize(self, trajectories: Sequence[Trajectory]) -> FeatureSet:
        cfg = self._config()
        return featurize(trajectories, cfg.split, cfg.placement, cfg.savgol)

    def fit(self, trajectories: Sequence[Trajectory], y=None):
        return self.fit_features(self.featurize(trajectories))

    def fit_features(self, fs: FeatureSet):
        """Fit on an already featurized training set."""
        self.config_ = self._config()
        self.scaler_, self.model_ = fit_pipeline_features(self.config_, fs.X, fs.y, self.random_state)
        self.classes_ = self.model_.classes_
        return self

    def predict_features(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return self.model_.predict(self.scaler_.transform(X))

    def predict(self, trajectories: Sequence[Trajectory]) -> np.ndarray:
        return self.predict_features(self.featurize(trajectories).X)

    def evaluate(self, trajectories: Sequence[Trajectory]) -> dict[str, float]:
        """Macro precision/recall/F1 and MCC over all segments of ``trajectories``."""
        fs = self.featurize(trajectories)
        return scores(fs.y, self.predict_features(fs.X), np.union1d(self.classes_, np.unique(fs.y)))
