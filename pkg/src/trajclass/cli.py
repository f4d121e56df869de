"""Command-line entry point.

Every command accepts ``--config FILE`` (a JSON run configuration checked
against the schema shipped in ``trajclass/data``), and flags override the
file.  Results go to ``<out>/<command>-seed<seed>/``; an existing directory
is only replaced with ``--force``.  Output directories are assembled under a
temporary name and renamed at the end, so a failed command leaves nothing
behind.

Exit codes: 0 success, 1 runtime error, 2 usage, configuration or missing
input.  Errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
from importlib import resources
from pathlib import Path

import jsonschema

from .exceptions import ConfigValidationError, ParseError, TrajclassError
from .features import featurize
from .hpo import Budget, PipelineFamily, cv_objective, history_to_csv, random_search, smbo_optimize
from .hpo.objective import FeatureCache
from .hpo.space import ALL_FAMILIES
from .protocol import (EvaluationReport, bootstrap_family, compare_technologies, default_jobs, format_table,
                       load_report, report_scores, train_test_split, verdict_lines, wallclock_calibration)
from .savgol import NoisePlacement, SavGolParams
from .trajectory import generate_dataset, read_manifest, write_dataset

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2
COMMANDS = ("generate", "featurize", "optimize", "evaluate", "calibrate", "compare")


class UsageFailure(Exception):
    """Problems the user must fix before anything runs (exit code 2)."""

    def __init__(self, kind, message, **extra):
        super().__init__(message)
        self.kind = kind
        self.extra = extra


class OutputExists(TrajclassError):
    pass


def run_config_schema() -> dict:
    return json.loads(resources.files("trajclass").joinpath("data/run_config.schema.json").read_text())


def load_config(path) -> dict:
    """Read and validate a run configuration; errors carry a JSON pointer."""
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageFailure("FileNotFoundError", f"config file not found: {path}", path=str(path)) from None
    except json.JSONDecodeError as exc:
        raise ConfigValidationError(f"invalid JSON ({exc.msg} at {exc.lineno}:{exc.colno})", "") from None
    validate_config(doc)
    return doc


def validate_config(doc) -> None:
    validator = jsonschema.Draft202012Validator(run_config_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        err = errors[0]
        pointer = "".join(f"/{p}" for p in err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            if extra:
                pointer += f"/{extra[0]}"
        raise ConfigValidationError(err.message, pointer)


def _get(config, *keys, default=None):
    for k in keys:
        if not isinstance(config, dict) or k not in config:
            return default
        config = config[k]
    return config


def resolve_seed(flag, config) -> int:
    """--seed, then the config file, then TRAJCLASS_SEED, then 0."""
    if flag is not None:
        return int(flag)
    if "seed" in config:
        return int(config["seed"])
    env = os.environ.get("TRAJCLASS_SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise UsageFailure("ConfigValidationError", f"TRAJCLASS_SEED must be an integer, got {env!r}") from None
    return 0


# -- output handling -----------------------------------------------------------

class _Output:
    def __init__(self, root, command, seed, force):
        self.final = Path(root) / f"{command}-seed{seed}"
        self.force = force
        if self.final.exists() and not force:
            raise OutputExists(f"output directory {self.final} exists; pass --force to overwrite")
        self.tmp = None

    def __enter__(self) -> Path:
        self.final.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=f".{self.final.name}.", dir=self.final.parent))
        os.chmod(self.tmp, 0o755)
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            shutil.rmtree(self.tmp, ignore_errors=True)
            return False
        if self.final.exists():
            shutil.rmtree(self.final)
        os.replace(self.tmp, self.final)
        return False


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8", newline="")


# -- dataset ---------------------------------------------------------------------

def _manifest_path(args, config):
    path = args.manifest or _get(config, "dataset", "manifest")
    if path is None:
        raise UsageFailure("UsageError", "a dataset manifest is required (--manifest or dataset.manifest)")
    path = Path(path)
    if not path.is_file():
        raise UsageFailure("FileNotFoundError", f"manifest not found: {path}", path=str(path))
    return path


def _split(args, config, seed):
    dataset = read_manifest(args.manifest_path)
    fraction = args.fraction if args.fraction is not None else _get(config, "split", "fraction", default=0.67)
    split_seed = _get(config, "split", "seed", default=seed)
    return train_test_split(dataset, fraction, split_seed)


def _budget(args, config, section):
    if args.wallclock is not None:
        return Budget(wallclock=args.wallclock)
    if args.budget is not None:
        return Budget(max_evals=args.budget)
    doc = _get(config, section, "budget")
    return Budget(**doc) if doc else Budget(max_evals=60)


def _families(args, config):
    names = args.family or _get(config, "families") or ["all"]
    if "all" in names:
        return list(ALL_FAMILIES)
    try:
        return [PipelineFamily.parse(n) for n in names]
    except TrajclassError as exc:
        raise UsageFailure("UsageError", str(exc)) from None


# -- commands ----------------------------------------------------------------------

def cmd_generate(args, config, seed, out):
    gen = _get(config, "dataset", "generator", default={})
    preset = args.preset or gen.get("preset", "gnss-like")
    kwargs = {k: gen[k] for k in ("duration", "speed", "arena") if k in gen}
    trajectories = generate_dataset(gen.get("counts"), preset, seed, **kwargs)
    with out as d:
        write_dataset(trajectories, d)
    print(f"wrote {len(trajectories)} {preset} trajectories to {out.final}")


def cmd_featurize(args, config, seed, out):
    section = _get(config, "featurize", default={})
    split = args.split or section.get("split", 1)
    placement = NoisePlacement(args.placement or section.get("placement", "none"))
    savgol = None
    if placement is not NoisePlacement.NONE:
        savgol = SavGolParams.repaired(args.window_length or section.get("window_length", 5),
                                       args.polyorder or section.get("polyorder", 2))
    fs = featurize(read_manifest(args.manifest_path), split, placement, savgol)
    with out as d:
        _write(d / "features.csv", fs.to_csv())
    print(f"wrote {len(fs)} instances to {out.final / 'features.csv'}")


def cmd_optimize(args, config, seed, out):
    section = _get(config, "optimize", default={})
    name = (args.family or [section.get("family", "rf+raw-noise")])[0]
    family = PipelineFamily.parse(name)
    train, _ = _split(args, config, seed)
    cache = FeatureCache(train)
    optimizer = random_search if (args.random_search or section.get("random_search")) else smbo_optimize
    incumbent, history = optimizer(family.space(), lambda c: cv_objective(c, train, seed, cache=cache),
                                   _budget(args, config, "optimize"), seed)
    best = min(history, key=lambda h: h.objective)
    with out as d:
        _write(d / "history.csv", history_to_csv(history, family.space()))
        _write(d / "incumbent.json", json.dumps({"family": family.name, "config": incumbent.to_dict(),
                                                 "objective": best.objective}, indent=2, sort_keys=True) + "\n")
    print(f"{family.name}: best objective {best.objective:.4f} after {len(history)} evaluations")


def cmd_evaluate(args, config, seed, out):
    protocol = _get(config, "protocol", default={})
    reps = args.reps or protocol.get("reps", 50)
    runs = args.runs or protocol.get("runs_per_rep", 15)
    sample_k = args.sample_k or protocol.get("sample_k", 5)
    budget = _budget(args, config, "protocol")
    families = _families(args, config)
    train, test = _split(args, config, seed)
    results = {}
    for fam in families:
        results[fam.name] = bootstrap_family(fam, train, test, reps, runs, sample_k, budget, seed, jobs=args.jobs)
    meta = {"manifest": Path(args.manifest_path).name, "seed": seed, "reps": reps, "runs_per_rep": runs,
            "sample_k": sample_k, "budget": {k: v for k, v in vars(budget).items() if v is not None},
            "n_train": len(train), "n_test": len(test), "test_ids": sorted(t.id for t in test)}
    report = EvaluationReport(results, meta)
    doc = report.to_dict()
    with out as d:
        _write(d / "report.json", report.to_json())
        _write(d / "report.txt", format_table(doc))
    print(format_table(doc), end="")


def _best_family(doc):
    fams = doc.get("families", {})
    if not fams:
        raise ParseError("report has no families")
    return max(sorted(fams), key=lambda f: fams[f]["summary"]["mcc"]["mean"])


def _read_report(path):
    path = Path(path)
    if not path.is_file():
        raise UsageFailure("FileNotFoundError", f"report not found: {path}", path=str(path))
    return load_report(path.read_text(encoding="utf-8"))


def cmd_compare(args, config, seed, out):
    section = _get(config, "compare", default={})
    path_a, path_b = args.report_a or section.get("report_a"), args.report_b or section.get("report_b")
    if not path_a or not path_b:
        raise UsageFailure("UsageError", "compare needs two reports (--report-a/--report-b)")
    doc_a, doc_b = _read_report(path_a), _read_report(path_b)
    fam_a = args.family_a or section.get("family_a") or _best_family(doc_a)
    fam_b = args.family_b or section.get("family_b") or _best_family(doc_b)
    alpha = args.alpha or section.get("alpha", 0.05)
    result = compare_technologies(report_scores(doc_a, fam_a), report_scores(doc_b, fam_b), alpha,
                                  labels=(f"A:{fam_a}", f"B:{fam_b}"))
    result["reports"] = {"a": str(path_a), "b": str(path_b)}
    with out as d:
        _write(d / "comparison.json", json.dumps(result, indent=2, sort_keys=True) + "\n")
    for line in verdict_lines(result):
        print(line)


def cmd_calibrate(args, config, seed, out):
    section = _get(config, "calibrate", default={})
    family = PipelineFamily.parse((args.family or [section.get("family", "rf+raw-noise")])[0])
    step = args.step or section.get("step", 25.0)
    max_time = args.max_time or section.get("max_time", 500.0)
    runs = args.runs or section.get("runs", 15)
    train, test = _split(args, config, seed)
    result = wallclock_calibration(family, train, test, step, runs, max_time, seed)
    with out as d:
        _write(d / "calibration.json", json.dumps({"family": family.name, "chosen": result.chosen,
                                                   "table": [list(r) for r in result.table]}, indent=2) + "\n")
    for seconds, mcc in result.table:
        print(f"{seconds:8.1f} s  mean MCC {mcc:.4f}")
    print(f"chosen wallclock budget: {result.chosen:g} s")


HANDLERS = {"generate": cmd_generate, "featurize": cmd_featurize, "optimize": cmd_optimize,
            "evaluate": cmd_evaluate, "calibrate": cmd_calibrate, "compare": cmd_compare}


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (validated before any work starts)")
    common.add_argument("--seed", type=int, help="master seed (default: config, then $TRAJCLASS_SEED, then 0)")
    common.add_argument("--out", help="parent directory for run outputs (default: config output_dir or ./runs)")
    common.add_argument("--force", action="store_true", help="replace an existing output directory")
    common.add_argument("--jobs", type=int, help="worker processes (default: config jobs or all processors)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--manifest", help="dataset manifest.json")
    data.add_argument("--fraction", type=float, help="training fraction of the trajectory split (default 0.67)")

    budget = argparse.ArgumentParser(add_help=False)
    budget.add_argument("--budget", type=int, help="objective evaluations per optimization run")
    budget.add_argument("--wallclock", type=float, help="seconds per optimization run instead of --budget")

    parser = argparse.ArgumentParser(prog="trajclass", description="Trajectory movement-pattern classification")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("generate", parents=[common], help="write a synthetic dataset and manifest")
    p.add_argument("--preset", choices=["gnss-like", "uwb-like"], help="positioning technology preset")

    p = sub.add_parser("featurize", parents=[common, data], help="dump segment feature vectors as CSV")
    p.add_argument("--split", type=int, help="segments per trajectory (1-10)")
    p.add_argument("--placement", choices=[p.value for p in NoisePlacement], help="noise removal placement")
    p.add_argument("--window-length", type=int, help="Savitzky-Golay window (odd, 1-29)")
    p.add_argument("--polyorder", type=int, help="Savitzky-Golay polynomial order")

    p = sub.add_parser("optimize", parents=[common, data, budget], help="one SMBO run for one family")
    p.add_argument("--family", action="append", help="pipeline family, e.g. rf+raw-noise")
    p.add_argument("--random-search", action="store_true", help="use the random-search baseline")

    p = sub.add_parser("evaluate", parents=[common, data, budget], help="bootstrapped family evaluation")
    p.add_argument("--family", action="append", help="family to evaluate (repeatable)")
    p.add_argument("--families", dest="family", action="append", help="alias of --family; 'all' selects nine")
    p.add_argument("--reps", type=int, help="repetitions (default 50)")
    p.add_argument("--runs", type=int, help="optimization runs per repetition (default 15)")
    p.add_argument("--sample-k", type=int, help="incumbents sampled per repetition (default 5)")

    p = sub.add_parser("calibrate", parents=[common, data], help="wallclock budget sweep")
    p.add_argument("--family", action="append", help="pipeline family (default rf+raw-noise)")
    p.add_argument("--step", type=float, help="budget increment in seconds (default 25)")
    p.add_argument("--max-time", type=float, help="largest budget in seconds (default 500)")
    p.add_argument("--runs", type=int, help="optimizations per budget (default 15)")

    p = sub.add_parser("compare", parents=[common], help="Mann-Whitney comparison of two reports")
    p.add_argument("--report-a", help="first report.json")
    p.add_argument("--report-b", help="second report.json")
    p.add_argument("--family-a", help="family in the first report (default: highest mean MCC)")
    p.add_argument("--family-b", help="family in the second report (default: highest mean MCC)")
    p.add_argument("--alpha", type=float, help="significance level (default 0.05)")
    return parser


def _error(kind, message, **extra):
    doc = {"error": kind, "message": message, **{k: v for k, v in extra.items() if v is not None}}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        seed = resolve_seed(args.seed, config)
        args.jobs = args.jobs or config.get("jobs") or default_jobs()
        if getattr(args, "manifest", None) is not None or args.command in ("featurize", "optimize", "evaluate",
                                                                          "calibrate"):
            args.manifest_path = _manifest_path(args, config)
        for name in ("fraction", "budget", "wallclock", "manifest", "family", "reps", "runs", "sample_k",
                     "split", "placement", "window_length", "polyorder", "random_search", "preset", "step",
                     "max_time", "report_a", "report_b", "family_a", "family_b", "alpha"):
            if not hasattr(args, name):
                setattr(args, name, None)
        out = _Output(args.out or config.get("output_dir", "runs"), args.command, seed,
                      args.force or config.get("force", False))
        HANDLERS[args.command](args, config, seed, out)
    except ConfigValidationError as exc:
        _error("ConfigValidationError", str(exc), pointer=exc.pointer)
        return EXIT_USAGE
    except UsageFailure as exc:
        _error(exc.kind, str(exc), **exc.extra)
        return EXIT_USAGE
    except ParseError as exc:
        _error("ParseError", str(exc), line=exc.line, location=exc.location)
        return EXIT_ERROR
    except (TrajclassError, OSError, ValueError) as exc:
        _error(type(exc).__name__, str(exc))
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
