"""Typed, conditional hyperparameter spaces and the pipeline configuration record.

A :class:`ConfigurationSpace` is an ordered list of integer, float and
categorical parameters.  A parameter may carry a condition ``(parent,
values)``; it is active only when its parent is active and takes one of
``values``.  Parents must be declared before their children.

Spaces also carry *repairs*: ``(param, bound)`` pairs enforcing
``param <= bound - 1`` after sampling, which is how the Savitzky-Golay
polyorder is kept below the window length.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping, Sequence

import numpy as np

from ..exceptions import ConfigValidationError, ParameterError
from ..savgol import NoisePlacement, SavGolParams

INT, FLOAT, CATEGORICAL = "uniform-int", "uniform-float", "categorical"
PARAM_TYPES = (INT, FLOAT, CATEGORICAL)


@dataclass(frozen=True)
class Parameter:
    name: str
    type: str
    low: float | None = None
    high: float | None = None
    choices: tuple = ()
    condition: tuple[str, tuple] | None = None

    def __post_init__(self):
        if self.type not in PARAM_TYPES:
            raise ParameterError(f"{self.name}: unknown parameter type {self.type!r}")
        if self.type == CATEGORICAL:
            if not self.choices:
                raise ParameterError(f"{self.name}: categorical parameter needs at least one choice")
            if len(set(self.choices)) != len(self.choices):
                raise ParameterError(f"{self.name}: duplicate choices")
        else:
            if self.low is None or self.high is None or not self.low <= self.high:
                raise ParameterError(f"{self.name}: empty range [{self.low}, {self.high}]")
            if self.type == INT and (int(self.low) != self.low or int(self.high) != self.high):
                raise ParameterError(f"{self.name}: integer bounds required")

    @property
    def n_values(self) -> float:
        """Number of distinct values (``inf`` for floats)."""
        if self.type == CATEGORICAL:
            return len(self.choices)
        if self.type == INT:
            return int(self.high - self.low) + 1
        return math.inf

    def sample(self, rng: np.random.Generator):
        if self.type == CATEGORICAL:
            return self.choices[int(rng.integers(len(self.choices)))]
        if self.type == INT:
            return int(rng.integers(int(self.low), int(self.high) + 1))
        return float(rng.uniform(self.low, self.high))

    def contains(self, value) -> bool:
        if self.type == CATEGORICAL:
            return value in self.choices
        if self.type == INT:
            return isinstance(value, (int, np.integer)) and not isinstance(value, bool) \
                and self.low <= value <= self.high
        return isinstance(value, (int, float, np.number)) and not isinstance(value, bool) \
            and math.isfinite(value) and self.low <= value <= self.high

    def to_dict(self) -> dict:
        doc: dict[str, Any] = {"name": self.name, "type": self.type}
        if self.type == CATEGORICAL:
            doc["choices"] = list(self.choices)
        else:
            doc["range"] = [self.low, self.high]
        if self.condition is not None:
            doc["condition"] = {"parent": self.condition[0], "values": list(self.condition[1])}
        return doc


def _param_from_dict(doc: Mapping) -> Parameter:
    cond = doc.get("condition")
    condition = (cond["parent"], tuple(cond["values"])) if cond else None
    if doc["type"] == CATEGORICAL:
        return Parameter(doc["name"], CATEGORICAL, choices=tuple(doc["choices"]), condition=condition)
    low, high = doc["range"]
    return Parameter(doc["name"], doc["type"], low, high, condition=condition)


class ConfigurationSpace:
    """Ordered conditional parameter space.

    Parameters
    ----------
    parameters : sequence of Parameter
    repairs : sequence of (param, bound) name pairs
        After sampling, ``config[param]`` is clamped to ``config[bound] - 1``
        whenever both are active.
    """

    def __init__(self, parameters: Sequence[Parameter], repairs: Sequence[tuple[str, str]] = ()):
        self.parameters = tuple(parameters)
        self.repairs = tuple(tuple(r) for r in repairs)
        self._by_name = {}
        for p in self.parameters:
            if p.name in self._by_name:
                raise ParameterError(f"duplicate parameter name {p.name!r}")
            if p.condition is not None:
                parent = self._by_name.get(p.condition[0])
                if parent is None or parent.type != CATEGORICAL:
                    raise ParameterError(f"{p.name}: condition parent {p.condition[0]!r} must be an earlier "
                                         "categorical parameter")
                missing = [v for v in p.condition[1] if v not in parent.choices]
                if missing or not p.condition[1]:
                    raise ParameterError(f"{p.name}: condition values {missing} not among {parent.name} choices")
            self._by_name[p.name] = p
        for param, bound in self.repairs:
            if param not in self._by_name or bound not in self._by_name:
                raise ParameterError(f"repair refers to unknown parameter ({param!r}, {bound!r})")

    def __getitem__(self, name) -> Parameter:
        return self._by_name[name]

    def __contains__(self, name):
        return name in self._by_name

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parameters)

    def _is_active(self, p: Parameter, config: Mapping) -> bool:
        if p.condition is None:
            return True
        parent, values = p.condition
        return parent in config and config[parent] in values

    def active_names(self, config: Mapping) -> list[str]:
        return [p.name for p in self.parameters if self._is_active(p, config)]

    def _repair(self, config: dict) -> dict:
        for param, bound in self.repairs:
            if param in config and bound in config:
                config[param] = type(config[param])(min(config[param], config[bound] - 1))
        return config

    def _complete(self, partial: Mapping, rng) -> dict:
        """Keep active values of ``partial``, sample newly active ones, drop the rest."""
        config = {}
        for p in self.parameters:
            if not self._is_active(p, config):
                continue
            if p.name not in partial:
                config[p.name] = p.sample(rng)
            elif p.type != CATEGORICAL:
                # a previously repaired value may sit below its range; repairs are re-applied below
                config[p.name] = type(partial[p.name])(min(max(partial[p.name], p.low), p.high))
            else:
                config[p.name] = partial[p.name]
        return self._repair(config)

    def sample(self, rng: np.random.Generator) -> dict:
        """One configuration drawn uniformly per parameter, inactive ones omitted."""
        return self._complete({}, rng)

    def validate(self, config: Mapping) -> dict:
        """Return ``config`` as a plain dict or raise :class:`ParameterError`."""
        config = dict(config)
        bounds = dict(self.repairs)
        for p in self.parameters:
            active = self._is_active(p, config)
            if active and p.name not in config:
                raise ParameterError(f"missing active parameter {p.name!r}")
            if not active and p.name in config:
                raise ParameterError(f"parameter {p.name!r} is inactive and must be omitted")
            if active and not p.contains(config[p.name]):
                # a repaired value may fall below the declared range (window 1 forces order 0)
                bound = bounds.get(p.name)
                if bound is None or config[p.name] != config.get(bound, math.nan) - 1:
                    raise ParameterError(f"{p.name}={config[p.name]!r} outside its range")
        unknown = set(config) - set(self._by_name)
        if unknown:
            raise ParameterError(f"unknown parameters {sorted(unknown)}")
        for param, bound in self.repairs:
            if param in config and bound in config and config[param] >= config[bound]:
                raise ParameterError(f"{param}={config[param]} must be below {bound}={config[bound]}")
        return config

    def restrict(self, **fixed) -> "ConfigurationSpace":
        """Space with categorical parameters pinned to one value each."""
        params = []
        for p in self.parameters:
            if p.name in fixed:
                value = fixed[p.name]
                if p.type != CATEGORICAL or value not in p.choices:
                    raise ParameterError(f"cannot fix {p.name} to {value!r}")
                p = Parameter(p.name, CATEGORICAL, choices=(value,), condition=p.condition)
            params.append(p)
        unknown = set(fixed) - set(self._by_name)
        if unknown:
            raise ParameterError(f"unknown parameters {sorted(unknown)}")
        # drop parameters whose condition can no longer hold
        kept, choices = [], {}
        for p in params:
            if p.condition is not None:
                parent, values = p.condition
                if parent not in choices or not set(values) & set(choices[parent]):
                    continue
                p = Parameter(p.name, p.type, p.low, p.high, p.choices,
                              (parent, tuple(v for v in values if v in choices[parent])))
            if p.type == CATEGORICAL:
                choices[p.name] = p.choices
            kept.append(p)
        names = {p.name for p in kept}
        return ConfigurationSpace(kept, [r for r in self.repairs if r[0] in names and r[1] in names])

    # -- surrogate encoding -------------------------------------------------

    @property
    def n_encoded(self) -> int:
        n = 0
        for p in self.parameters:
            n += len(p.choices) if p.type == CATEGORICAL else 1
            n += p.condition is not None
        return n

    def encode(self, config: Mapping) -> np.ndarray:
        """Numeric vector for the surrogate.

        Numbers are min-max scaled, categoricals one-hot; an inactive
        parameter sits at its range midpoint (all-zero for categoricals)
        and conditional parameters get an extra active flag.
        """
        out = []
        for p in self.parameters:
            active = p.name in config
            if p.type == CATEGORICAL:
                hot = [0.0] * len(p.choices)
                if active:
                    hot[p.choices.index(config[p.name])] = 1.0
                out.extend(hot)
            else:
                span = p.high - p.low
                out.append((config[p.name] - p.low) / span if active and span > 0 else 0.5)
            if p.condition is not None:
                out.append(1.0 if active else 0.0)
        return np.asarray(out, dtype=float)

    def neighbor(self, config: Mapping, rng: np.random.Generator, scale: float = 0.2) -> dict:
        """Perturb one active, non-constant parameter of ``config``."""
        names = [n for n in self.active_names(config) if self[n].n_values > 1]
        if not names:
            return dict(config)
        p = self[names[int(rng.integers(len(names)))]]
        new = dict(config)
        if p.type == CATEGORICAL:
            others = [c for c in p.choices if c != config[p.name]]
            new[p.name] = others[int(rng.integers(len(others)))]
        elif p.type == INT:
            step = rng.normal(0.0, scale * (p.high - p.low))
            step = int(round(step)) or (1 if step >= 0 else -1)
            new[p.name] = int(min(max(config[p.name] + step, p.low), p.high))
        else:
            value = config[p.name] + rng.normal(0.0, scale * (p.high - p.low))
            new[p.name] = float(min(max(value, p.low), p.high))
        # re-derive conditional children and repairs
        return self._complete({k: v for k, v in new.items()}, rng)

    def key(self, config: Mapping) -> tuple:
        """Hashable identity used for duplicate detection."""
        return tuple((n, config[n]) for n in self.names if n in config)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {"parameters": [p.to_dict() for p in self.parameters],
                "repairs": [{"param": a, "less_than": b} for a, b in self.repairs]}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ConfigurationSpace":
        try:
            params = [_param_from_dict(d) for d in doc["parameters"]]
            repairs = [(r["param"], r["less_than"]) for r in doc.get("repairs", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigValidationError(f"malformed configuration space: {exc}", "/parameters") from None
        return cls(params, repairs)

    @classmethod
    def from_json(cls, text: str) -> "ConfigurationSpace":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def default_space() -> ConfigurationSpace:
    """The full pipeline search space shipped with the package."""
    text = resources.files("trajclass").joinpath("data/pipeline_space.json").read_text()
    return ConfigurationSpace.from_json(text)


CLASSIFIERS = ("DT", "RF", "SVM")
_CLASSIFIER_KEYS = {
    "DT": ("max_depth", "min_samples_leaf", "min_samples_split", "criterion"),
    "RF": ("n_estimators", "max_depth", "min_samples_leaf", "min_samples_split", "criterion"),
    "SVM": ("C", "kernel"),
}
_PLACEMENT_SLUG = {NoisePlacement.NONE: "no-noise", NoisePlacement.ON_RAW_LOCATION: "raw-noise",
                   NoisePlacement.ON_FEATURES: "feature-noise"}


@dataclass(frozen=True)
class PipelineFamily:
    """One noise placement combined with one classifier."""

    placement: NoisePlacement
    classifier: str

    def __post_init__(self):
        object.__setattr__(self, "placement", NoisePlacement(self.placement))
        if self.classifier not in CLASSIFIERS:
            raise ParameterError(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")

    @property
    def name(self) -> str:
        return f"{self.classifier.lower()}+{_PLACEMENT_SLUG[self.placement]}"

    @classmethod
    def parse(cls, name: str) -> "PipelineFamily":
        try:
            clf, slug = name.split("+")
            placement = {v: k for k, v in _PLACEMENT_SLUG.items()}[slug]
            return cls(placement, clf.upper())
        except (ValueError, KeyError):
            raise ParameterError(f"unknown pipeline family {name!r}") from None

    def space(self, base: ConfigurationSpace | None = None) -> ConfigurationSpace:
        return (base or default_space()).restrict(placement=self.placement.value, classifier=self.classifier)


ALL_FAMILIES = tuple(PipelineFamily(p, c) for c in CLASSIFIERS for p in NoisePlacement)


@dataclass(frozen=True)
class PipelineConfig:
    """One runnable assignment of every active pipeline hyperparameter."""

    split: int
    placement: NoisePlacement
    savgol: SavGolParams | None
    classifier: str
    params: tuple[tuple[str, Any], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "placement", NoisePlacement(self.placement))
        if not (isinstance(self.split, (int, np.integer)) and 1 <= self.split <= 10):
            raise ParameterError(f"split must be an integer in [1, 10], got {self.split!r}")
        if (self.savgol is None) != (self.placement is NoisePlacement.NONE):
            raise ParameterError("savgol parameters are required exactly when a noise placement is active")
        if self.classifier not in CLASSIFIERS:
            raise ParameterError(f"classifier must be one of {CLASSIFIERS}")
        params = dict(self.params)
        if set(params) != set(_CLASSIFIER_KEYS[self.classifier]):
            raise ParameterError(f"{self.classifier} needs parameters {_CLASSIFIER_KEYS[self.classifier]}, "
                                 f"got {sorted(params)}")
        from ..learners import DTParams, RFParams, SVMParams

        {"DT": DTParams, "RF": RFParams, "SVM": SVMParams}[self.classifier](**params)
        object.__setattr__(self, "params", tuple(sorted(params.items())))

    @property
    def family(self) -> PipelineFamily:
        return PipelineFamily(self.placement, self.classifier)

    @property
    def classifier_params(self) -> dict:
        return dict(self.params)

    @classmethod
    def from_dict(cls, flat: Mapping) -> "PipelineConfig":
        """Build from a flat space sample; the Savitzky-Golay order is repaired."""
        try:
            placement = NoisePlacement(flat["placement"])
            savgol = None
            if placement is not NoisePlacement.NONE:
                savgol = SavGolParams.repaired(flat["window_length"], flat["polyorder"])
            clf = flat["classifier"]
            params = {k: flat[k] for k in _CLASSIFIER_KEYS.get(clf, ())}
            return cls(int(flat["split"]), placement, savgol, clf, tuple(params.items()))
        except KeyError as exc:
            raise ParameterError(f"missing parameter {exc.args[0]!r}") from None

    def to_dict(self) -> dict:
        out = {"split": int(self.split), "placement": self.placement.value}
        if self.savgol is not None:
            out["window_length"] = self.savgol.window_length
            out["polyorder"] = self.savgol.polyorder
        out["classifier"] = self.classifier
        out.update(self.params)
        return out


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """One objective evaluation.

    ``fold_scores`` is empty for plain scalar objectives; for cross-validated
    objectives ``objective == 1 - mean(fold_scores)``.  ``failed`` marks an
    evaluation that raised and was scored with the penalty value.
    """

    config: Any
    objective: float
    wall_time: float = 0.0
    fold_scores: tuple[float, ...] = ()
    seed: int = 0
    failed: bool = False
    error: str = ""
