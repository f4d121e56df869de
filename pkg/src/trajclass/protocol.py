"""Train/test splitting, the bootstrapped incumbent protocol, wallclock
calibration, family reports and the technology comparison.

A *repetition* runs the optimizer ``runs_per_rep`` times on the training
set, draws ``sample_k`` of the resulting incumbents, keeps the one with the
lowest cross-validation objective, retrains it on the whole training set and
scores it on the test set.  All randomness flows from ``master_seed``
through :class:`numpy.random.SeedSequence`, keyed by repetition and run
index, so families evaluated with the same master seed see the same seeds
and their score arrays can be paired.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .exceptions import (DegenerateSampleError, ParameterError, ParseError, ReportLookupError, SampleSizeError,
                         SplitError)
from .features import FeatureSet
from .hpo.objective import FeatureCache, cv_objective
from .hpo.smbo import Budget, smbo_optimize
from .hpo.space import ALL_FAMILIES, PipelineConfig, PipelineFamily
from .pipeline import TrajectoryPipeline
from .stats import anderson_darling_normality, is_normal, mann_whitney_u, wilcoxon_signed_rank
from .trajectory import Trajectory

METRICS = ("precision", "recall", "f1", "mcc")
METRIC_TITLES = {"precision": "precision", "recall": "recall", "f1": "F1", "mcc": "MCC"}
# penalty recorded when a repetition cannot be trained or scored
WORST_SCORES = {"precision": 0.0, "recall": 0.0, "f1": 0.0, "mcc": 0.0}
REPORT_FORMAT = "trajclass-report"
REPORT_VERSION = 1


# -- splitting ---------------------------------------------------------------

def _label(traj):
    return traj.label.value if traj.label is not None else ""


def train_test_split(dataset: Sequence[Trajectory], fraction: float = 0.67, seed: int = 0):
    """Stratified trajectory-level split.

    Each class contributes ``round(fraction * count)`` trajectories to the
    training side (half rounds up), clamped so both sides keep at least one.
    Both lists preserve dataset order.
    """
    if not 0.0 < fraction < 1.0:
        raise SplitError(f"fraction must lie strictly between 0 and 1, got {fraction}")
    by_class: dict[str, list[int]] = {}
    for i, traj in enumerate(dataset):
        by_class.setdefault(_label(traj), []).append(i)
    rng = np.random.default_rng(seed)
    train_idx = []
    for label in sorted(by_class):
        members = by_class[label]
        if len(members) < 2:
            raise SplitError(f"class {label!r} has {len(members)} trajectory; a split needs at least 2")
        n_train = min(max(math.floor(fraction * len(members) + 0.5), 1), len(members) - 1)
        chosen = rng.permutation(len(members))[:n_train]
        train_idx.extend(members[j] for j in chosen)
    in_train = set(train_idx)
    train = [t for i, t in enumerate(dataset) if i in in_train]
    test = [t for i, t in enumerate(dataset) if i not in in_train]
    return train, test


# -- bootstrapping -----------------------------------------------------------

@dataclass(frozen=True)
class RepetitionResult:
    """Test scores of one repetition plus the audit trail behind them."""

    scores: dict
    config: dict | None
    cv_objective: float | None
    failed: bool = False
    error: str = ""
    leaked_ids: tuple = ()


@dataclass
class FamilyResult:
    family: PipelineFamily
    repetitions: list[RepetitionResult] = field(default_factory=list)

    def scores(self, metric: str) -> np.ndarray:
        return np.array([r.scores[metric] for r in self.repetitions], dtype=float)

    @property
    def leaked_ids(self) -> set:
        return {i for r in self.repetitions for i in r.leaked_ids}


def _seed(*key) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0])


def _as_pipeline_config(config) -> PipelineConfig:
    return config if isinstance(config, PipelineConfig) else PipelineConfig.from_dict(config)


def _run_repetition(family, train, test, rep, runs_per_rep, sample_k, budget, master_seed, optimizer,
                    space, leakage_hook, cache) -> RepetitionResult:
    test_ids = {t.id for t in test}
    leaked: set = set()

    def audit(groups):
        leaked.update(set(np.asarray(groups).tolist()) & test_ids)
        if leakage_hook is not None:
            leakage_hook(groups)

    try:
        results = []
        for run in range(runs_per_rep):
            run_seed = _seed(master_seed, rep, run)

            def objective(config, _s=run_seed):
                return cv_objective(config, train, _s, cache=cache, leakage_hook=audit)

            incumbent, history = optimizer(space, objective, budget, run_seed)
            cfg = _as_pipeline_config(incumbent)
            best = min((h.objective for h in history), default=math.inf)
            results.append((cfg, best))
        rng = np.random.default_rng(_seed(master_seed, rep, runs_per_rep))
        drawn = sorted(rng.choice(runs_per_rep, size=min(sample_k, runs_per_rep), replace=False).tolist())
        pick = min(drawn, key=lambda i: (results[i][1], i))
        config, objective_value = results[pick]
        if config.family != family:
            raise ParameterError(f"optimizer returned a {config.family.name} configuration for {family.name}")
        fs: FeatureSet = cache.get(config)
        audit(fs.groups)
        model = TrajectoryPipeline(config, random_state=_seed(master_seed, rep, runs_per_rep + 1))
        model.fit_features(fs)
        scores = {k: float(v) for k, v in model.evaluate(test).items()}
        return RepetitionResult(scores, config.to_dict(), float(objective_value), leaked_ids=tuple(sorted(leaked)))
    except Exception as exc:  # one broken repetition must not abort the protocol
        return RepetitionResult(dict(WORST_SCORES), None, None, failed=True, error=f"{type(exc).__name__}: {exc}",
                                leaked_ids=tuple(sorted(leaked)))


def _repetition_worker(args):
    family, train, test, reps, kw = args
    cache = FeatureCache(train)
    return [_run_repetition(family, train, test, rep, cache=cache, **kw) for rep in reps]


def bootstrap_family(family: PipelineFamily | str, train: Sequence[Trajectory], test: Sequence[Trajectory],
                     reps: int = 50, runs_per_rep: int = 15, sample_k: int = 5, budget=60, master_seed: int = 0,
                     *, jobs: int = 1, optimizer: Callable = smbo_optimize, space=None,
                     leakage_hook: Callable | None = None) -> FamilyResult:
    """Run the bootstrapped incumbent protocol for one pipeline family.

    Parameters
    ----------
    family : PipelineFamily or name such as ``"rf+raw-noise"``
    train, test : lists of Trajectory
    reps, runs_per_rep, sample_k : int
    budget : Budget or int
        Optimizer budget per run; an int means that many evaluations.
    master_seed : int
    jobs : int
        Worker processes; repetitions are distributed round-robin and
        results placed by repetition index.
    optimizer : callable
        ``optimizer(space, objective, budget, seed) -> (incumbent, history)``.
    space : ConfigurationSpace, optional
        Defaults to the family's restriction of the shipped pipeline space.
    leakage_hook : callable, optional
        Receives the parent ids of every training matrix; only honoured with
        ``jobs == 1``.  Overlap with the test ids is always recorded in
        :attr:`RepetitionResult.leaked_ids`.
    """
    family = PipelineFamily.parse(family) if isinstance(family, str) else family
    if reps < 1 or runs_per_rep < 1 or sample_k < 1:
        raise ParameterError("reps, runs_per_rep and sample_k must be positive")
    if not train or not test:
        raise ParameterError("train and test sets must be non-empty")
    budget = Budget.coerce(budget)
    space = space if space is not None else family.space()
    train, test = list(train), list(test)
    kw = dict(runs_per_rep=runs_per_rep, sample_k=sample_k, budget=budget, master_seed=master_seed,
              optimizer=optimizer, space=space)
    jobs = max(1, min(int(jobs), reps))
    if jobs == 1:
        cache = FeatureCache(train)
        reps_out = [_run_repetition(family, train, test, rep, cache=cache, leakage_hook=leakage_hook, **kw)
                    for rep in range(reps)]
    else:
        chunks = [list(range(j, reps, jobs)) for j in range(jobs)]
        reps_out = [None] * reps
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            work = [(family, train, test, chunk, dict(kw, leakage_hook=None)) for chunk in chunks]
            for chunk, results in zip(chunks, pool.map(_repetition_worker, work)):
                for rep, res in zip(chunk, results):
                    reps_out[rep] = res
    return FamilyResult(family, reps_out)


# -- wallclock calibration ---------------------------------------------------

@dataclass(frozen=True)
class CalibrationResult:
    table: list[tuple[float, float]]
    chosen: float


def wallclock_calibration(family: PipelineFamily | str, train, test, step: float = 25.0, runs: int = 15,
                          max_time: float = 500.0, master_seed: int = 0, *, tolerance: float = 0.01,
                          run_once: Callable | None = None) -> CalibrationResult:
    """Mean test MCC of ``runs`` optimizations at each budget ``step, 2*step, ...``.

    ``chosen`` is the smallest budget whose mean lies within ``tolerance`` of
    the best mean.  ``run_once(budget_seconds, seed) -> mcc`` replaces the
    default optimize-retrain-score step (used for stubs in tests).
    """
    family = PipelineFamily.parse(family) if isinstance(family, str) else family
    if not step > 0 or max_time < step:
        raise ParameterError("need step > 0 and max_time >= step")
    if run_once is None:
        space = family.space()
        cache = FeatureCache(train)

        def run_once(seconds, seed):
            incumbent, _ = smbo_optimize(space, lambda c: cv_objective(c, train, seed, cache=cache),
                                         Budget(wallclock=seconds), seed)
            config = _as_pipeline_config(incumbent)
            model = TrajectoryPipeline(config, random_state=seed).fit_features(cache.get(config))
            return model.evaluate(test)["mcc"]

    table = []
    for k in range(1, int(math.floor(max_time / step + 1e-9)) + 1):
        seconds = k * step
        values = []
        for run in range(runs):
            try:
                values.append(float(run_once(seconds, _seed(master_seed, k, run))))
            except Exception:
                values.append(WORST_SCORES["mcc"])
        table.append((seconds, float(np.mean(values))))
    best = max(m for _, m in table)
    chosen = next(s for s, m in table if m >= best - tolerance)
    return CalibrationResult(table, chosen)


# -- reports -----------------------------------------------------------------

def _summary(values: np.ndarray) -> dict:
    return {"mean": float(np.mean(values)), "std": float(np.std(values, ddof=1)) if len(values) > 1 else 0.0}


def _test_doc(fn, *args) -> dict:
    try:
        res = fn(*args)
    except (DegenerateSampleError, SampleSizeError) as exc:
        return {"degenerate": True, "reason": str(exc)}
    doc = {"degenerate": False, "statistic": res.statistic, "p_value": res.p_value, "method": res.method}
    if res.p_bracket is not None:
        doc["p_bracket"] = list(res.p_bracket)
        doc["normal"] = is_normal(res)
    return doc


@dataclass
class EvaluationReport:
    """Per-family score arrays with summaries and statistical tests."""

    families: dict[str, FamilyResult]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        fams = {}
        for name, res in self.families.items():
            fams[name] = {
                "scores": {m: res.scores(m).tolist() for m in METRICS},
                "summary": {m: _summary(res.scores(m)) for m in METRICS},
                "normality": {m: _test_doc(anderson_darling_normality, res.scores(m)) for m in METRICS},
                "repetitions": [{"config": r.config, "cv_objective": r.cv_objective, "failed": r.failed,
                                 "error": r.error, "leaked_ids": list(r.leaked_ids)} for r in res.repetitions],
            }
        pairwise = {m: {} for m in METRICS}
        for a, b in combinations(sorted(self.families), 2):
            ra, rb = self.families[a], self.families[b]
            if len(ra.repetitions) != len(rb.repetitions):
                continue
            for m in METRICS:
                pairwise[m][f"{a}|{b}"] = _test_doc(wilcoxon_signed_rank, ra.scores(m), rb.scores(m))
        return {"format": REPORT_FORMAT, "version": REPORT_VERSION, "metadata": self.metadata,
                "families": fams, "wilcoxon": pairwise}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def scores(self, family: str, metric: str) -> np.ndarray:
        try:
            return self.families[family].scores(metric)
        except KeyError:
            raise ReportLookupError(f"family {family!r} not in report (has {sorted(self.families)})") from None

    def table(self, title: str = "") -> str:
        return format_table(self.to_dict(), title)


def load_report(text: str) -> dict:
    """Parse a report JSON document, checking its format tag."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed report JSON: {exc.msg}", line=exc.lineno,
                         location=f"{exc.lineno}:{exc.colno}") from None
    if not isinstance(doc, dict) or doc.get("format") != REPORT_FORMAT:
        raise ParseError("not a trajclass report document")
    return doc


def report_scores(doc: Mapping, family: str) -> dict[str, np.ndarray]:
    try:
        block = doc["families"][family]["scores"]
    except KeyError:
        raise ReportLookupError(f"family {family!r} not in report (has {sorted(doc.get('families', {}))})") from None
    return {m: np.asarray(block[m], dtype=float) for m in METRICS}


_PLACEMENT_TITLES = {"no-noise": "no noise removal", "raw-noise": "noise removal on raw location data",
                     "feature-noise": "noise removal on features"}


def format_table(doc: Mapping, title: str = "") -> str:
    """Fixed-width table: one row per family, columns "mean±std" in percent."""
    header = ["Model", "Noise Removal", *(METRIC_TITLES[m] for m in METRICS)]
    rows = []
    for fam in ALL_FAMILIES:
        block = doc["families"].get(fam.name)
        if block is None:
            continue
        slug = fam.name.split("+")[1]
        cells = [f"{100 * block['summary'][m]['mean']:.2f}±{100 * block['summary'][m]['std']:.2f}" for m in METRICS]
        rows.append([fam.classifier, _PLACEMENT_TITLES[slug], *cells])
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = [title] if title else []
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"


# -- technology comparison -----------------------------------------------------

def compare_technologies(scores_a: Mapping, scores_b: Mapping, alpha: float = 0.05, strict_alpha: float = 0.01,
                         labels=("a", "b")) -> dict:
    """Per metric: Anderson-Darling on both samples, then a two-sided Mann-Whitney U.

    ``scores_a``/``scores_b`` map metric name to score arrays (or are
    sequences of per-repetition metric dicts).  ``direction`` names the
    sample with the larger mean rank.  A metric is degenerate, with no
    p-value, when the pooled sample is constant.
    """
    a, b = _metric_arrays(scores_a), _metric_arrays(scores_b)
    out = {"alpha": alpha, "strict_alpha": strict_alpha, "labels": list(labels), "metrics": {}}
    for m in METRICS:
        xa, xb = a[m], b[m]
        entry = {"normality": {labels[0]: _test_doc(anderson_darling_normality, xa),
                               labels[1]: _test_doc(anderson_darling_normality, xb)},
                 "mean": {labels[0]: float(xa.mean()), labels[1]: float(xb.mean())}}
        pooled = np.concatenate([xa, xb])
        if np.all(pooled == pooled[0]):
            entry.update(degenerate=True, p_value=None, significant=False, significant_strict=False,
                         direction=None)
        else:
            res = mann_whitney_u(xa, xb)
            ranks = rankdata(pooled)
            mean_a, mean_b = ranks[: len(xa)].mean(), ranks[len(xa):].mean()
            direction = None if mean_a == mean_b else (labels[0] if mean_a > mean_b else labels[1])
            entry.update(degenerate=False, statistic=res.statistic, p_value=res.p_value, method=res.method,
                         significant=bool(res.p_value < alpha), significant_strict=bool(res.p_value < strict_alpha),
                         direction=direction)
        out["metrics"][m] = entry
    return out


def _metric_arrays(scores) -> dict[str, np.ndarray]:
    if isinstance(scores, Mapping):
        return {m: np.asarray(scores[m], dtype=float) for m in METRICS}
    rows = list(scores)
    return {m: np.asarray([r[m] if isinstance(r, Mapping) else r[i] for r in rows], dtype=float)
            for i, m in enumerate(METRICS)}


def verdict_lines(comparison: Mapping) -> list[str]:
    lines = []
    for m, e in comparison["metrics"].items():
        if e["degenerate"]:
            lines.append(f"{m}: degenerate (constant scores), no test")
        elif e["significant"]:
            level = comparison["strict_alpha"] if e["significant_strict"] else comparison["alpha"]
            lines.append(f"{m}: {e['direction']} significantly higher (p={e['p_value']:.3g} < {level})")
        else:
            lines.append(f"{m}: no significant difference (p={e['p_value']:.3g})")
    return lines


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


__all__ = ["METRICS", "train_test_split", "bootstrap_family", "wallclock_calibration", "compare_technologies",
           "EvaluationReport", "FamilyResult", "RepetitionResult", "CalibrationResult", "format_table",
           "load_report", "report_scores", "verdict_lines"]
