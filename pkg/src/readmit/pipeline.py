"""End-to-end stages with persisted artifacts.

Each stage reads what it needs from the output directory (or from memory
when run in the same process) and writes its own artifacts, so stages can be
run one at a time from the command line or all together with :func:`run_all`.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, kvfile, models, reference
from .codebook import diabetes_schema
from .config import SYNTHETIC_INPUT, PipelineConfig
from .evaluate import compare_sampling, evaluate_model, interaction_means
from .ingest import CohortTable, build_cohort, load_cohort, save_cohort
from .optimize import EnsembleModel, ga_tune, greedy_ensemble
from .preprocess import (Sampling, SamplingStrategy, balance, blank_outliers, impute_missing,
                         normalize, partition, stratified_holdout)
from .select import BorutaConfig, boruta, consensus, stepwise_select

log = logging.getLogger(__name__)

STAGES = ("ingest", "preprocess", "features", "train", "tune", "ensemble", "evaluate")
FIT_STAGES = ("preprocess", "features", "train", "tune", "ensemble")

COHORT_CSV, COHORT_META = "cohort.csv", "cohort.meta"
DESIGN_CSV, DESIGN_META = "design.csv", "design.meta"
SPLIT = "split.txt"
PARAMS = "preprocess_params.txt"
TRAIN_BAL = "train_balanced.csv"
FIT_BAL, VAL_BAL = "tune_fit_balanced.csv", "tune_validation_balanced.csv"
FEATURES = "features.txt"
BORUTA_CSV, STEPWISE_CSV = "fig2_boruta.csv", "fig3_stepwise.csv"
TABLE3, TABLE4 = "table3_models.csv", "table4_tuned.csv"
ENSEMBLE, ENSEMBLE_CSV = "ensemble.txt", "ensemble_metrics.csv"
FIG1 = "fig1_sampling.csv"
REFERENCE_CSV = "reference_checks.csv"
METRICS = "metrics_summary.txt"
MANIFEST, TIMINGS, ACCESS_LOG, CONFIG_SNAPSHOT = "manifest.txt", "timings.txt", "access_log.csv", "config.ini"
MODEL_DIR = "models"
EXCLUDED_FROM_BUNDLE = (TIMINGS,)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class LeakageError(RuntimeError):
    pass


class RowGuard:
    """Records which design rows each stage reads and refuses test rows to fitting stages."""

    def __init__(self, test_rows, debug: bool = False):
        self.test = np.zeros(0, dtype=bool)
        self.set_test(test_rows)
        self.debug = debug
        self.log: list[tuple[str, str, int, int]] = []

    def set_test(self, test_rows):
        test_rows = np.asarray(test_rows, dtype=np.int64)
        size = int(test_rows.max()) + 1 if test_rows.size else 0
        self.test = np.zeros(size, dtype=bool)
        self.test[test_rows] = True

    def take(self, rows, stage: str, purpose: str):
        rows = np.asarray(rows, dtype=np.int64)
        inside = rows[rows < len(self.test)]
        touched = int(self.test[inside].sum())
        self.log.append((stage, purpose, len(rows), touched))
        if touched and purpose == "fit" and stage in FIT_STAGES:
            raise LeakageError(f"stage {stage} tried to fit on {touched} test row(s)")
        return rows


# ---------------------------------------------------------------- matrix files

def _r(v) -> str:
    return repr(float(v))


def write_matrix(path: Path, X, y, names) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*names, "label"])
    for row, label in zip(np.asarray(X), np.asarray(y)):
        w.writerow([*(_r(v) for v in row), int(label)])
    path.write_text(buf.getvalue(), encoding="utf-8")


def read_matrix(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader]
    names = header[:-1]
    X = np.array([[float(v) for v in r[:-1]] for r in rows], dtype=float).reshape(len(rows), len(names))
    y = np.array([int(r[-1]) for r in rows], dtype=np.int8)
    return X, y, names


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _metric_cells(rep) -> list[str]:
    return ["" if getattr(rep, m) is None else _r(getattr(rep, m))
            for m in ("accuracy", "sensitivity", "specificity", "precision", "f1")]


METRIC_HEADER = ["accuracy", "sensitivity", "specificity", "precision", "f1"]


# ---------------------------------------------------------------- run context

@dataclass
class Run:
    config: PipelineConfig
    out: Path
    state: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    guard: RowGuard | None = None

    @property
    def debug(self) -> bool:
        return self.config.getbool("output", "debug")

    def path(self, name: str) -> Path:
        return self.out / name

    def require(self, *names: str) -> None:
        missing = [n for n in names if not self.path(n).exists()]
        if missing:
            raise FileNotFoundError(f"missing artifact(s) from an earlier stage: {', '.join(missing)}")

    # cached loaders ------------------------------------------------

    def cohort(self) -> CohortTable:
        if "cohort" not in self.state:
            self.require(COHORT_CSV, COHORT_META)
            self.state["cohort"] = load_cohort(self.path(COHORT_CSV), self.path(COHORT_META))
        return self.state["cohort"]

    def design(self) -> CohortTable:
        if "design" not in self.state:
            self.require(DESIGN_CSV, DESIGN_META)
            self.state["design"] = load_cohort(self.path(DESIGN_CSV), self.path(DESIGN_META))
        return self.state["design"]

    def split(self) -> dict:
        if "split" not in self.state:
            self.require(SPLIT)
            s = kvfile.read(self.path(SPLIT), "split")["split"]
            self.state["split"] = {k: np.asarray(v, dtype=np.int64) if isinstance(v, list) else v
                                   for k, v in s.items()}
        split = self.state["split"]
        if self.guard is None:
            self.guard = RowGuard(split["test"], self.debug)
        return split

    def matrix(self, name: str):
        if name not in self.state:
            self.require(name)
            self.state[name] = read_matrix(self.path(name))
        return self.state[name]

    def features(self) -> list[str]:
        if "features" not in self.state:
            if self.path(FEATURES).exists():
                self.state["features"] = kvfile.read(self.path(FEATURES), "features")["features"]["used"]
            else:
                self.state["features"] = self.design().names
        return self.state["features"]

    def columns(self, names_in: list[str]) -> list[int]:
        return [names_in.index(n) for n in self.features()]


def _source_bytes(cfg: PipelineConfig) -> bytes:
    if cfg.input_path == SYNTHETIC_INPUT:
        return resources.files("readmit.data").joinpath("synthetic_encounters.csv").read_bytes()
    return Path(cfg.input_path).read_bytes()


# ---------------------------------------------------------------- stages

def stage_ingest(run: Run) -> dict:
    cfg = run.config
    schema = diabetes_schema(cfg.get("data", "missing_marker"))
    table = build_cohort(_source_bytes(cfg), schema, cfg.label_policy,
                         cfg.getfloat("data", "max_missing_fraction"),
                         tuple(cfg.getlist("data", "excluded_dispositions")))
    save_cohort(table, run.path(COHORT_CSV), run.path(COHORT_META))
    run.state["cohort"] = table
    return {"rows": table.n_rows, "columns": len(table.columns), "positives": int(table.y.sum()),
            "positive_rate": float(table.y.mean()) if table.n_rows else 0.0}


def _balanced(X, y, cfg: PipelineConfig, seed_offset: int, return_index: bool = False):
    strategy = SamplingStrategy(Sampling(cfg.get("preprocess", "sampling")),
                                cfg.getfloat("preprocess", "rose_shrink"))
    return balance(X, y, strategy, cfg.getint("preprocess", "balance_seed") + seed_offset,
                   return_index=return_index)


def stage_preprocess(run: Run) -> dict:
    cfg = run.config
    table = run.cohort()
    cutoff = cfg.getfloat("preprocess", "outlier_cutoff")
    ratio = cfg.getfloat("preprocess", "split_ratio")
    split_seed = cfg.getint("preprocess", "split_seed")
    paper_order = cfg.getbool("preprocess", "paper_order")
    hold_ratio = cfg.getfloat("tune", "holdout_ratio")
    hold_seed = cfg.getint("tune", "holdout_seed")

    if paper_order:
        # impute -> normalize -> balance the whole cohort -> split the balanced rows
        order = "outliers>impute>normalize>balance>split"
        t = blank_outliers(table, cutoff)
        t, imp = impute_missing(t)
        t, norm = normalize(t)
        Xb, yb, src = _balanced(t.X, t.y, cfg, 0, return_index=True)
        eids = [t.encounter_ids[i] if i >= 0 else f"synthetic-{k}" for k, i in enumerate(src)]
        pids = [t.patient_ids[i] if i >= 0 else f"synthetic-{k}" for k, i in enumerate(src)]
        design = CohortTable(Xb, list(t.columns), yb.astype(np.int8), eids, pids,
                             t.provenance + [f"balance({cfg.get('preprocess', 'sampling')}, whole cohort)"])
        sp = partition(design.n_rows, ratio, split_seed)
        run.guard = RowGuard(sp.test, run.debug)
        train = run.guard.take(sp.train, "preprocess", "fit")
        fit_pos, val_pos = stratified_holdout(design.y[train], 1.0 - hold_ratio, hold_seed)
        Xtr, ytr = design.X[train], design.y[train]
        Xf, yf = Xtr[fit_pos], ytr[fit_pos]
        Xv, yv = Xtr[val_pos], ytr[val_pos]
    else:
        # split first so every fitted statistic comes from training rows only
        order = "split>outliers>impute>normalize>balance"
        sp = partition(table.n_rows, ratio, split_seed)
        run.guard = RowGuard(sp.test, run.debug)
        train = run.guard.take(sp.train, "preprocess", "fit")
        t = blank_outliers(table, cutoff, rows=train)
        _, imp = impute_missing(t.take(train))
        t, _ = impute_missing(t, imp)
        _, norm = normalize(t.take(train))
        design, _ = normalize(t, norm)
        Xtr, ytr = design.X[train], design.y[train]
        Xtr_b, ytr_b = _balanced(Xtr, ytr, cfg, 0)
        fit_pos, val_pos = stratified_holdout(ytr, 1.0 - hold_ratio, hold_seed)
        Xf, yf = _balanced(Xtr[fit_pos], ytr[fit_pos], cfg, 1)
        Xv, yv = _balanced(Xtr[val_pos], ytr[val_pos], cfg, 2)
    if paper_order:
        Xtr_b, ytr_b = Xtr, ytr

    design.provenance.append(f"order({order})")
    save_cohort(design, run.path(DESIGN_CSV), run.path(DESIGN_META))
    names = design.names
    write_matrix(run.path(TRAIN_BAL), Xtr_b, ytr_b, names)
    write_matrix(run.path(FIT_BAL), Xf, yf, names)
    write_matrix(run.path(VAL_BAL), Xv, yv, names)
    split = {"train": sp.train.tolist(), "test": sp.test.tolist(), "seed": sp.seed,
             "tune_fit": train[fit_pos].tolist(), "tune_validation": train[val_pos].tolist(),
             "order": order, "paper_order": paper_order}
    kvfile.write(run.path(SPLIT), "split", {"split": split})
    kvfile.write(run.path(PARAMS), "preprocess-params", {
        "outliers": {"method": "mad", "scale": 1.4826, "cutoff": cutoff},
        "imputation": imp.to_dict(),
        "normalization": norm.to_dict(),
        "order": {"steps": order, "sampling": cfg.get("preprocess", "sampling")},
    })
    run.state.update({"design": design, "split": {k: np.asarray(v) if isinstance(v, list) else v
                                                  for k, v in split.items()},
                      TRAIN_BAL: (Xtr_b, ytr_b, names), FIT_BAL: (Xf, yf, names),
                      VAL_BAL: (Xv, yv, names)})
    return {"order": order, "train": len(sp.train), "test": len(sp.test),
            "train_balanced": len(ytr_b), "balanced_positives": int(np.sum(ytr_b))}


def stage_features(run: Run) -> dict:
    cfg = run.config
    run.split()
    X, y, names = run.matrix(TRAIN_BAL)
    run.guard.take(run.state["split"]["train"], "features", "fit")
    use = cfg.get("features", "use")
    if not cfg.getbool("features", "enabled"):
        used, cons = list(names), []
        conf, step = [], []
    else:
        bcfg = BorutaConfig(cfg.getint("features", "boruta_max_iterations"),
                            models.ForestParams(n_trees=cfg.getint("features", "boruta_trees"),
                                                min_node_size=cfg.getint("features", "boruta_min_node_size")),
                            cfg.getfloat("features", "boruta_alpha"))
        report = boruta(X, y, names, bcfg, cfg.getint("features", "boruta_seed"))
        trace = stepwise_select(X, y, names, cfg.getfloat("features", "alpha_enter"),
                                cfg.getfloat("features", "alpha_remove"))
        run.path(BORUTA_CSV).write_text(report.to_csv(), encoding="utf-8")
        run.path(STEPWISE_CSV).write_text(trace.to_csv(), encoding="utf-8")
        cons = consensus(report, trace)
        conf, step = report.confirmed, trace.selected
        chosen = {"consensus": cons, "boruta": conf, "stepwise": step,
                  "union": [n for n in names if n in set(conf) | set(step)], "all": list(names)}[use]
        used = [n for n in names if n in set(chosen)] if chosen else list(names)
        run.state["boruta_iterations"] = report.iterations
    kvfile.write(run.path(FEATURES), "features", {"features": {
        "use": use, "used": used, "consensus": cons, "boruta_confirmed": conf,
        "stepwise_selected": step, "fallback_to_all": bool(not cons and use == "consensus"),
    }})
    run.state["features"] = used
    return {"used": len(used), "consensus": cons, "boruta_confirmed": len(conf),
            "stepwise_selected": len(step)}


def _test_data(run: Run, stage: str):
    design = run.design()
    test = run.guard.take(run.split()["test"], stage, "apply")
    cols = run.columns(design.names)
    return design.X[np.ix_(test, cols)], design.y[test]


def stage_train(run: Run) -> dict:
    cfg = run.config
    run.split()
    X, y, names = run.matrix(TRAIN_BAL)
    cols = run.columns(names)
    X = X[:, cols]
    run.guard.take(run.state["split"]["train"], "train", "fit")
    Xte, yte = _test_data(run, "train")
    (run.out / MODEL_DIR).mkdir(exist_ok=True)
    rows, out = [], {}
    seed = cfg.getint("models", "seed")
    for fam in cfg.families:
        model = models.train(fam, X, y, cfg.model_params(fam), seed)
        models.save_model(model, run.out / MODEL_DIR / f"{fam}.json")
        cm, rep = evaluate_model(model, Xte, yte)
        rows.append([fam, *_metric_cells(rep), cm.tp, cm.fp, cm.tn, cm.fn])
        out[fam] = rep.accuracy
    write_csv(run.path(TABLE3), ["family", *METRIC_HEADER, "tp", "fp", "tn", "fn"], rows)
    return {"test_accuracy": out}


def stage_tune(run: Run) -> dict:
    cfg = run.config
    run.split()
    run.guard.take(run.state["split"]["tune_fit"], "tune", "fit")
    run.guard.take(run.state["split"]["tune_validation"], "tune", "fit")
    Xf, yf, names = run.matrix(FIT_BAL)
    Xv, yv, _ = run.matrix(VAL_BAL)
    Xt, yt, _ = run.matrix(TRAIN_BAL)
    cols = run.columns(names)
    Xf, Xv, Xt = Xf[:, cols], Xv[:, cols], Xt[:, cols]
    Xte, yte = _test_data(run, "tune")
    (run.out / MODEL_DIR).mkdir(exist_ok=True)
    ga = cfg.ga_config()
    seed = cfg.getint("models", "seed")
    rows, out = [], {}
    for fam in cfg.tune_families:
        decoder = cfg.decoder(fam)
        res = ga_tune(fam, Xf, yf, Xv, yv, ga, decoder, seed)
        run.path(f"ga_trace_{fam}.csv").write_text(res.trace_csv(), encoding="utf-8")
        tuned = models.train(fam, Xt, yt, res.hyperparameters, seed)
        models.save_model(tuned, run.out / MODEL_DIR / f"{fam}_tuned.json")
        cm, rep = evaluate_model(tuned, Xte, yte)
        decoded = {g.name: getattr(res.hyperparameters, g.name) for g in decoder.genes}
        rows.append([fam, _r(res.best_fitness), " ".join(_r(g) for g in res.best_chromosome),
                     json.dumps(decoded, sort_keys=True), res.evaluations, *_metric_cells(rep)])
        out[fam] = {"validation_accuracy": res.best_fitness, "evaluations": res.evaluations}
    write_csv(run.path(TABLE4), ["family", "validation_accuracy", "genes", "hyperparameters",
                                 "evaluations", *(f"test_{m}" for m in METRIC_HEADER)], rows)
    return out


def stage_ensemble(run: Run) -> dict:
    cfg = run.config
    run.split()
    run.guard.take(run.state["split"]["tune_fit"], "ensemble", "fit")
    run.guard.take(run.state["split"]["tune_validation"], "ensemble", "fit")
    Xf, yf, names = run.matrix(FIT_BAL)
    Xv, yv, _ = run.matrix(VAL_BAL)
    cols = run.columns(names)
    Xf, Xv = Xf[:, cols], Xv[:, cols]
    seed = cfg.getint("models", "seed")
    pool, labels = [], []
    for fam in cfg.families:
        pool.append(models.train(fam, Xf, yf, cfg.model_params(fam), seed))
        labels.append(fam)
    tuned = {r["family"]: r for r in read_csv(run.path(TABLE4))} if run.path(TABLE4).exists() else {}
    for fam in cfg.tune_families:
        if fam in tuned:
            params = models.make_params(fam, **{**models.params_to_dict(cfg.model_params(fam)),
                                                **json.loads(tuned[fam]["hyperparameters"])})
            pool.append(models.train(fam, Xf, yf, params, seed))
            labels.append(f"{fam}_tuned")
    (run.out / MODEL_DIR).mkdir(exist_ok=True)
    for lab, m in zip(labels, pool):
        models.save_model(m, run.out / MODEL_DIR / f"pool_{lab}.json")
    ens = greedy_ensemble(pool, Xv, yv, cfg.get("ensemble", "metric"),
                          cfg.getint("ensemble", "max_rounds"))
    members = [labels[k] for k in ens.member_index]
    singles = []
    for lab, m in zip(labels, pool):
        _, rep = evaluate_model(m, Xv, yv)
        singles.append([lab, "selection", *_metric_cells(rep)])
    Xte, yte = _test_data(run, "ensemble")
    _, rep_test = evaluate_model(ens, Xte, yte)
    _, rep_sel = evaluate_model(ens, Xv, yv)
    kvfile.write(run.path(ENSEMBLE), "ensemble", {"ensemble": {
        "members": members, "pool": labels, "metric": ens.metric,
        "selection_score": ens.selection_score, "combination": "mean probability",
        "model_files": [f"{MODEL_DIR}/pool_{m}.json" for m in members],
    }})
    write_csv(run.path(ENSEMBLE_CSV), ["model", "split", *METRIC_HEADER],
              singles + [["ensemble", "selection", *_metric_cells(rep_sel)],
                         ["ensemble", "test", *_metric_cells(rep_test)]])
    run.state["ensemble"] = ens
    return {"members": members, "selection_score": ens.selection_score,
            "test_accuracy": rep_test.accuracy}


def load_ensemble(out: Path) -> EnsembleModel:
    info = kvfile.read(out / ENSEMBLE, "ensemble")["ensemble"]
    mods = tuple(models.load_model(out / f) for f in info["model_files"])
    idx = tuple(info["pool"].index(m) for m in info["members"])
    return EnsembleModel(mods, idx, info["metric"], info["selection_score"])


def stage_evaluate(run: Run) -> dict:
    cfg = run.config
    split = run.split()
    design = run.design()
    cols = run.columns(design.names)
    # the comparison balances raw training rows itself
    train = run.guard.take(split["train"], "evaluate", "fit")
    test = run.guard.take(split["test"], "evaluate", "apply")
    comp = compare_sampling(cfg.getlist("evaluate", "compare_strategies"),
                            cfg.get("evaluate", "compare_family"),
                            design.X[np.ix_(train, cols)], design.y[train],
                            design.X[np.ix_(test, cols)], design.y[test],
                            cfg.getint("preprocess", "balance_seed"),
                            cfg.model_params(cfg.get("evaluate", "compare_family")))
    run.path(FIG1).write_text(comp.to_csv(), encoding="utf-8")
    cohort = run.cohort()
    grids = []
    for pair in cfg.getlist("evaluate", "interactions"):
        a, _, b = pair.partition(":")
        if a not in cohort.names or b not in cohort.names:
            log.warning("interaction %s skipped: feature not in cohort", pair)
            continue
        X = cohort.X[:, [cohort.names.index(a), cohort.names.index(b)]]
        ok = np.isfinite(X).all(axis=1)
        grid = interaction_means(X[ok], cohort.y[ok], [a, b], a, b,
                                 cfg.getfloat("evaluate", "interaction_quantile"))
        name = f"fig4_{a}_x_{b}.csv"
        run.path(name).write_text(grid.to_csv(), encoding="utf-8")
        grids.append(name)
    confirmed = None
    if run.path(FEATURES).exists():
        confirmed = kvfile.read(run.path(FEATURES), "features")["features"]["boruta_confirmed"]
    # divergence from the public extract is expected on other inputs, so only warn for real data
    checks = reference.soft_checks(cohort, confirmed, warn=cfg.input_path != SYNTHETIC_INPUT)
    write_csv(run.path(REFERENCE_CSV), ["check", "observed", "target", "tolerance", "passed", "divergence"],
              [[c.name, c.observed, c.target, c.tolerance, c.passed, c.divergence] for c in checks])
    summary = {}
    for fname, key in ((TABLE3, "models"), (TABLE4, "tuned")):
        if run.path(fname).exists():
            for r in read_csv(run.path(fname)):
                summary[f"{key}.{r['family']}"] = {k: v for k, v in r.items() if k != "family"}
    if run.path(ENSEMBLE_CSV).exists():
        for r in read_csv(run.path(ENSEMBLE_CSV)):
            if r["model"] == "ensemble":
                summary[f"ensemble.{r['split']}"] = {k: v for k, v in r.items()
                                                     if k not in ("model", "split")}
    kvfile.write(run.path(METRICS), "metrics-summary",
                 {"summary": summary, "plot_data": {"fig1": FIG1, "fig2": BORUTA_CSV,
                                                    "fig3": STEPWISE_CSV, "fig4": grids}})
    return {"interaction_files": grids,
            "reference_checks_passed": sum(c.passed for c in checks), "reference_checks": len(checks)}


STAGE_FUNCS = {"ingest": stage_ingest, "preprocess": stage_preprocess, "features": stage_features,
               "train": stage_train, "tune": stage_tune, "ensemble": stage_ensemble,
               "evaluate": stage_evaluate}


# ---------------------------------------------------------------- manifest

def bundle_files(out: Path) -> list[Path]:
    return sorted(p for p in out.rglob("*") if p.is_file()
                  and p.name not in EXCLUDED_FROM_BUNDLE and p.name != MANIFEST)


def write_manifest(run: Run, completed: list[str]) -> None:
    cfg_path = run.path(CONFIG_SNAPSHOT)
    checksums = {str(p.relative_to(run.out)).replace("\\", "/"): sha256(p)
                 for p in bundle_files(run.out)}
    prev = {}
    if run.path(MANIFEST).exists():
        try:
            prev = kvfile.read(run.path(MANIFEST), "manifest").get("stages", {})
        except kvfile.KVFormatError:
            prev = {}
    done = [s for s in STAGES if s in set(prev.get("completed", [])) | set(completed)]
    split_order = None
    if run.path(SPLIT).exists():
        split_order = kvfile.read(run.path(SPLIT), "split")["split"]["order"]
    kvfile.write(run.path(MANIFEST), "manifest", {
        "tool": {"name": "readmit", "version": __version__},
        "config": {"snapshot": CONFIG_SNAPSHOT, "sha256": sha256(cfg_path) if cfg_path.exists() else None},
        "stages": {"completed": done, "preprocess_order": split_order,
                   "paper_order": run.config.getbool("preprocess", "paper_order")},
        "artifacts": checksums,
    })
    lines = [f"{k} = {v:.3f}" for k, v in run.timings.items()]
    run.path(TIMINGS).write_text("# seconds per stage (not part of the reproducible bundle)\n"
                                 + "\n".join(lines) + "\n", encoding="utf-8")


def run_stages(config: PipelineConfig, stages, out: Path | None = None, echo=print) -> Run:
    """Run the given stages in order; artifacts from completed stages are kept on failure."""
    out = Path(out) if out is not None else config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    run = Run(config, out)
    # the bundle should not depend on where it was written
    run.path(CONFIG_SNAPSHOT).write_text(config.to_text(include_output_dir=False), encoding="utf-8")
    completed = []
    try:
        for stage in stages:
            t0 = time.perf_counter()
            try:
                info = STAGE_FUNCS[stage](run)
            except Exception as exc:
                raise StageError(stage, exc) from exc
            run.timings[stage] = time.perf_counter() - t0
            completed.append(stage)
            echo(f"[{stage}] {json.dumps(info, sort_keys=True, default=str)}")
    finally:
        if run.debug and run.guard is not None:
            write_csv(run.path(ACCESS_LOG), ["stage", "purpose", "rows", "test_rows"], run.guard.log)
        write_manifest(run, completed)
    return run


def run_all(config: PipelineConfig, out: Path | None = None, echo=print) -> Run:
    stages = list(STAGES)
    if not config.getbool("features", "enabled"):
        stages.remove("features")
    if not config.getbool("tune", "enabled") or not config.tune_families:
        stages.remove("tune")
    if not config.getbool("ensemble", "enabled"):
        stages.remove("ensemble")
    return run_stages(config, stages, out, echo)
