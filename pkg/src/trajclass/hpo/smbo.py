"""Sequential model-based optimization with a random-forest surrogate.

The loop starts with ``max(5, ceil(0.1 * max_evals))`` random configurations.
Afterwards every fourth proposal is random; the others maximize expected
improvement, with the surrogate's mean and variance taken across the trees
of a regression forest fitted to the encoded history.  EI is maximized over
500 random candidates plus 100 one-parameter perturbations of the incumbent.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.special import ndtr
from sklearn.ensemble import RandomForestRegressor

from ..exceptions import ParameterError
from .space import ConfigurationSpace, TrialRecord

FAILURE_OBJECTIVE = 1.0
N_RANDOM_CANDIDATES = 500
N_LOCAL_CANDIDATES = 100
RANDOM_EVERY = 4
_MAX_RESAMPLE = 1000


@dataclass(frozen=True)
class Budget:
    """Stop after ``max_evals`` evaluations or once ``wallclock`` seconds elapsed.

    With a wallclock budget the optimizer still evaluates at least one
    configuration; an evaluation already running is never interrupted.
    """

    max_evals: int | None = None
    wallclock: float | None = None

    def __post_init__(self):
        if self.max_evals is None and self.wallclock is None:
            raise ParameterError("a budget needs max_evals or wallclock")
        if self.max_evals is not None and self.max_evals < 1:
            raise ParameterError("max_evals must be >= 1")
        if self.wallclock is not None and not self.wallclock > 0:
            raise ParameterError("wallclock must be positive")

    @classmethod
    def coerce(cls, budget) -> "Budget":
        if isinstance(budget, Budget):
            return budget
        if isinstance(budget, Mapping):
            return cls(**budget)
        return cls(max_evals=int(budget))


def initial_design_size(budget: Budget) -> int:
    if budget.max_evals is None:
        return 5
    return max(5, math.ceil(0.1 * budget.max_evals))


def expected_improvement(mu, sigma, best) -> np.ndarray:
    """EI of minimization at predictive ``N(mu, sigma^2)`` against ``best``."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gap = best - mu
    safe = np.where(sigma > 0, sigma, 1.0)
    z = gap / safe
    ei = gap * ndtr(z) + safe * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    return np.where(sigma > 0, ei, np.maximum(gap, 0.0))


class _Surrogate:
    def __init__(self, seed):
        self.forest = RandomForestRegressor(n_estimators=10, min_samples_split=3, max_features=5 / 6,
                                            bootstrap=True, random_state=seed)

    def fit(self, X, y):
        self.forest.fit(X, y)
        return self

    def predict(self, X):
        per_tree = np.stack([t.predict(X) for t in self.forest.estimators_])
        return per_tree.mean(axis=0), per_tree.std(axis=0)


def _evaluate(objective, config, seed) -> TrialRecord:
    start = time.perf_counter()
    try:
        out = objective(config)
    except Exception as exc:  # crash-tolerant: the trial is scored with the penalty
        return TrialRecord(dict(config), FAILURE_OBJECTIVE, time.perf_counter() - start, seed=seed,
                           failed=True, error=f"{type(exc).__name__}: {exc}")
    elapsed = time.perf_counter() - start
    if isinstance(out, TrialRecord):
        return TrialRecord(out.config, float(out.objective), elapsed, out.fold_scores, out.seed,
                           out.failed, out.error)
    value = float(out)
    if not math.isfinite(value):
        return TrialRecord(dict(config), FAILURE_OBJECTIVE, elapsed, seed=seed, failed=True,
                           error=f"non-finite objective {value!r}")
    return TrialRecord(dict(config), value, elapsed, seed=seed)


def _incumbent(history):
    best = min(range(len(history)), key=lambda i: (history[i].objective, i))
    return history[best]


def smbo_optimize(space: ConfigurationSpace, objective: Callable, budget, seed: int = 0, *,
                  use_surrogate: bool = True, clock=time.perf_counter):
    """Minimize ``objective`` over ``space``.

    Parameters
    ----------
    space : ConfigurationSpace
    objective : callable
        Maps a flat configuration dict to a float or a :class:`TrialRecord`.
        Exceptions are caught and the trial is scored ``1.0``.
    budget : Budget, int or mapping
        An int is read as ``max_evals``.
    seed : int
    use_surrogate : bool
        ``False`` turns the optimizer into plain random search.

    Returns
    -------
    incumbent : dict
        Configuration with the lowest objective (earliest on ties).
    history : list of TrialRecord
        Every evaluation in order.
    """
    budget = Budget.coerce(budget)
    rng = np.random.default_rng(seed)
    n_init = initial_design_size(budget)
    history: list[TrialRecord] = []
    configs: list[dict] = []
    seen: set = set()
    start = clock()

    def random_unseen():
        for _ in range(_MAX_RESAMPLE):
            cand = space.sample(rng)
            if space.key(cand) not in seen:
                return cand
        return None

    while True:
        if budget.max_evals is not None and len(history) >= budget.max_evals:
            break
        if budget.wallclock is not None and history and clock() - start >= budget.wallclock:
            break
        i = len(history)
        model_turn = use_surrogate and i >= n_init and (i - n_init + 1) % RANDOM_EVERY != 0
        config = _propose(space, configs, history, seen, rng) if model_turn else None
        if config is None:
            config = random_unseen()
        if config is None:  # every reachable configuration has been tried
            break
        seen.add(space.key(config))
        configs.append(config)
        history.append(_evaluate(objective, config, seed))

    return _incumbent(history).config, history


def random_search(space: ConfigurationSpace, objective: Callable, budget, seed: int = 0, **kwargs):
    """Baseline with the same contract as :func:`smbo_optimize`."""
    return smbo_optimize(space, objective, budget, seed, use_surrogate=False, **kwargs)


def _propose(space, configs, history, seen, rng):
    X = np.vstack([space.encode(c) for c in configs])
    y = np.array([h.objective for h in history])
    surrogate = _Surrogate(int(rng.integers(2 ** 31))).fit(X, y)
    best = _incumbent(history)
    best_config = configs[history.index(best)]
    candidates = [space.sample(rng) for _ in range(N_RANDOM_CANDIDATES)]
    candidates += [space.neighbor(best_config, rng) for _ in range(N_LOCAL_CANDIDATES)]
    fresh, keys = [], set()
    for cand in candidates:
        key = space.key(cand)
        if key not in seen and key not in keys:
            keys.add(key)
            fresh.append(cand)
    if not fresh:
        return None
    mu, sigma = surrogate.predict(np.vstack([space.encode(c) for c in fresh]))
    ei = expected_improvement(mu, sigma, best.objective)
    return fresh[int(np.argmax(ei))]


def history_to_csv(history, space: ConfigurationSpace | None = None) -> str:
    """One row per trial: index, objective, timing, flags, then every parameter."""
    def flat(rec):
        cfg = rec.config
        return cfg.to_dict() if hasattr(cfg, "to_dict") else dict(cfg)

    names = list(space.names) if space is not None else []
    for rec in history:
        names += [k for k in flat(rec) if k not in names]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "objective", "wall_time", "seed", "failed", "fold_scores", *names])
    for i, rec in enumerate(history):
        cfg = flat(rec)
        writer.writerow([i, repr(rec.objective), f"{rec.wall_time:.6f}", rec.seed, int(rec.failed),
                         ";".join(repr(s) for s in rec.fold_scores), *(cfg.get(n, "") for n in names)])
    return buf.getvalue()
