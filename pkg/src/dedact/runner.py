"""Experiment orchestration: ingestion, configuration, runs, and bundles."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .core import (
    SQUARED_ERROR,
    CROSS_ENTROPY,
    DataMatrix,
    FeatureIndexSet,
    ImportanceEstimate,
    LossFunction,
    TargetVector,
    derive_seed,
    fit_ols,
)
from .decompose import (
    DecompositionTable,
    fast_decompose_pfi,
    fast_decompose_pfi_ordered,
    fast_decompose_sage,
    shapley_decompose_pfi,
    shapley_decompose_sage,
)
from .errors import ConfigError, DedactError, MissingTarget, ParseError
from .importance import ImportanceEvaluator
from .sampler import fit_gaussian
from .scm import LinearSCM, biomarker_scm, census_scm, sample_scm

BUILTIN_SCMS = {"biomarker": biomarker_scm, "census": census_scm}


def ingest_csv(path, target_column: str) -> tuple[DataMatrix, TargetVector]:
    """Read a numeric CSV with a header row; the target column is split off."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: file not found")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0]:
        raise ParseError(f"{path}: no header")
    header = rows[0]
    if target_column not in header:
        raise MissingTarget(f"{path}: target column {target_column!r} not in header")
    t_idx = header.index(target_column)
    parsed = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
        out = []
        for c, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                raise ParseError(f"{path}: row {r}, column {header[c]!r}: cannot parse {cell!r} as a finite real")
            out.append(value)
        parsed.append(out)
    values = np.asarray(parsed, dtype=float)
    feature_cols = [c for c in range(len(header)) if c != t_idx]
    data = DataMatrix(values[:, feature_cols], tuple(header[c] for c in feature_cols))
    return data, TargetVector(values[:, t_idx])


def train_eval_split(data: DataMatrix, target: TargetVector, fraction: float = 0.5, seed: int = 0):
    """Disjoint (fit, eval) split; the evaluator must never see fit rows."""
    rng = np.random.default_rng(derive_seed(seed, 90))
    perm = rng.permutation(data.n_rows)
    n_fit = int(round(data.n_rows * fraction))
    fit_rows, eval_rows = perm[:n_fit], perm[n_fit:]
    return (
        data.select_rows(fit_rows), target.select_rows(fit_rows),
        data.select_rows(eval_rows), target.select_rows(eval_rows),
    )


@dataclass(frozen=True)
class RunConfig:
    raw: dict

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        return cls(raw=raw)

    def __post_init__(self):
        if "seed" not in self.raw:
            raise ConfigError("config requires an explicit 'seed' (no wall-clock default)")
        if "data" not in self.raw:
            raise ConfigError("config requires a 'data' block")

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def split_fraction(self) -> float:
        return float(self.raw.get("split_fraction", 0.5))


def _resolve_columns(names, data: DataMatrix, block: str) -> list[int]:
    out = []
    for name in names or []:
        if name not in data.column_names:
            raise ConfigError(f"[{block}] unknown column {name!r}")
        out.append(data.index_of(name))
    return out


def _loss_from(name: str) -> LossFunction:
    if name in ("squared_error", None):
        return SQUARED_ERROR
    if name == "cross_entropy":
        return CROSS_ENTROPY
    raise ConfigError(f"unknown loss {name!r}")


@dataclass
class ResultBundle:
    config_echo: dict
    estimates: list = field(default_factory=list)
    tables: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add_estimate(self, name: str, est: ImportanceEstimate) -> None:
        self.estimates.append({
            "name": name,
            "value": est.value,
            "std_error": est.std_error,
            "n_mc": est.n_mc,
            "mode": est.mode,
            "sets": {k: list(v) if isinstance(v, tuple) else v for k, v in est.sets.items()},
            "seed": est.seed,
        })

    def add_table(self, name: str, table: DecompositionTable) -> None:
        entry = table.as_dict()
        entry["name"] = name
        entry["order_log"] = table.order_log
        self.tables.append(entry)

    def as_dict(self) -> dict:
        return {
            "config": self.config_echo,
            "estimates": self.estimates,
            "tables": self.tables,
            "metadata": self.metadata,
        }

    def write(self, outdir, formats=("csv", "json")) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        if "json" in formats:
            with open(outdir / "bundle.json", "w") as fh:
                json.dump(self.as_dict(), fh, indent=2, sort_keys=True)
        if "csv" in formats:
            with open(outdir / "estimates.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["name", "value", "std_error", "n_mc", "mode", "seed"])
                for e in self.estimates:
                    writer.writerow([e["name"], repr(e["value"]), repr(e["std_error"]),
                                     e["n_mc"], e["mode"], e["seed"]])
            for t in self.tables:
                with open(outdir / f"table_{t['name']}.csv", "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["target", "method", "source", "value", "std_error"])
                    writer.writerow([t["target"], t["method"], "__total__",
                                     repr(t["total"]), repr(t["total_se"])])
                    for source, comp in t["components"].items():
                        writer.writerow([t["target"], t["method"], source,
                                         repr(comp["value"]), repr(comp["se"])])
                    writer.writerow([t["target"], t["method"], "__remainder__",
                                     repr(t["remainder"]), ""])
        with open(outdir / "metadata.json", "w") as fh:
            json.dump(self.metadata, fh, indent=2, sort_keys=True)


def _content_hash(config: dict, data: DataMatrix, target: TargetVector) -> str:
    digest = hashlib.sha256()
    digest.update(json.dumps(config, sort_keys=True, default=str).encode())
    digest.update(np.ascontiguousarray(data.values).tobytes())
    digest.update(np.ascontiguousarray(target.values).tobytes())
    return digest.hexdigest()


def _load_data(config: RunConfig) -> tuple[DataMatrix, TargetVector, LinearSCM | None]:
    block = config.raw["data"]
    if "csv" in block:
        if "target_column" not in block:
            raise ConfigError("[data] csv source requires 'target_column'")
        data, target = ingest_csv(block["csv"], block["target_column"])
        return data, target, None
    if "scm" in block:
        name = block["scm"]
        if name in BUILTIN_SCMS:
            scm = BUILTIN_SCMS[name]()
        else:
            with open(name) as fh:
                scm = LinearSCM.from_config(yaml.safe_load(fh))
        n = int(block.get("n", 20000))
        include_observed = bool(block.get("include_observed", False))
        data, target = sample_scm(scm, n, derive_seed(config.seed, 1), include_observed)
        return data, target, scm
    raise ConfigError("[data] block needs either 'csv' or 'scm'")


def build_evaluator(config: RunConfig):
    """Shared fit pipeline: load, split, fit OLS + Gaussian, wrap evaluator."""
    data, target, scm = _load_data(config)
    fit_x, fit_y, eval_x, eval_y = train_eval_split(data, target, config.split_fraction, config.seed)
    model_block = config.raw.get("model", {})
    if "support" in model_block:
        support = FeatureIndexSet.of(_resolve_columns(model_block["support"], data, "model"))
    elif scm is not None:
        support = FeatureIndexSet.of(
            i for i, name in enumerate(data.column_names) if scm.roles.get(name) == "feature"
        )
    else:
        support = FeatureIndexSet.full(data.n_cols)
    predictor = fit_ols(fit_x, fit_y, support)
    gaussian = fit_gaussian(fit_x)
    loss = _loss_from(config.raw.get("loss", "squared_error"))
    evaluator = ImportanceEvaluator(
        eval_x, eval_y, predictor, gaussian, loss=loss,
        n_mc=int(config.raw.get("n_mc", 20)), seed=config.seed,
        exact_marginalization=bool(config.raw.get("exact_marginalization", False)),
    )
    return evaluator, data, target


def _run_measure(evaluator: ImportanceEvaluator, block: dict, data: DataMatrix) -> ImportanceEstimate:
    name = block.get("name", "?")
    kind = block.get("measure")
    interest = _resolve_columns(block.get("interest"), data, name)
    baseline = _resolve_columns(block.get("baseline"), data, name)
    aux = _resolve_columns(block.get("aux"), data, name)
    mode = block.get("mode", "original_f")
    n_mc = block.get("n_mc")
    seed = block.get("seed")
    if kind == "DI":
        return evaluator.direct_importance(interest, baseline, mode, n_mc, seed)
    if kind == "AI":
        return evaluator.associative_importance(interest, baseline, mode, n_mc, seed)
    if kind == "DI_from":
        return evaluator.di_from(interest, baseline, aux, mode, n_mc, seed)
    if kind == "AI_via":
        return evaluator.ai_via(interest, baseline, aux, mode, n_mc, seed)
    if kind == "PFI":
        return evaluator.pfi(interest[0], n_mc, seed)
    if kind == "conditional_FI":
        return evaluator.conditional_fi(interest[0], n_mc, seed)
    if kind == "SAGE_value":
        return evaluator.sage_value(interest, block.get("variant", "conditional"), n_mc, seed)
    if kind == "SAGE_attribution":
        return evaluator.sage_attribution(
            interest[0], block.get("variant", "conditional"),
            int(block.get("n_orders", 60)), n_mc, seed,
        )
    raise ConfigError(f"[{name}] unknown measure {kind!r}")


def _run_decomposition(evaluator: ImportanceEvaluator, block: dict, data: DataMatrix,
                       n_workers: int) -> DecompositionTable:
    name = block.get("name", "?")
    method = block.get("method", "fast")
    kind = block.get("kind", "pfi")
    target_cols = _resolve_columns([block["target"]], data, name)
    k = target_cols[0]
    sources = _resolve_columns(block.get("sources"), data, name) or None
    pathways = _resolve_columns(block.get("pathways"), data, name) or None
    n_mc = block.get("n_mc")
    seed = block.get("seed")
    if kind == "pfi":
        if method == "fast":
            return fast_decompose_pfi(evaluator, k, sources, n_mc, seed)
        if method == "fast_ordered":
            order = _resolve_columns(block["order"], data, name)
            return fast_decompose_pfi_ordered(evaluator, k, order, n_mc, seed)
        if method == "shapley":
            return shapley_decompose_pfi(
                evaluator, k, sources, block.get("solver", "auto"),
                int(block.get("n_orders", 50)), n_mc, seed,
            )
    if kind == "sage":
        if method == "fast":
            return fast_decompose_sage(
                evaluator, k, pathways, int(block.get("n_orders", 25)), n_mc, seed
            )
        if method == "shapley":
            return shapley_decompose_sage(
                evaluator, k, pathways, block.get("solver", "auto"),
                int(block.get("n_sage_orders", 60)), int(block.get("n_decomp_orders", 25)),
                n_mc, seed, n_workers,
            )
    raise ConfigError(f"[{name}] unknown decomposition method {method!r} for kind {kind!r}")


def run(config: RunConfig, outdir=None) -> ResultBundle:
    """Execute fit -> gaussian -> measures -> decompositions, in declared order."""
    evaluator, data, target = build_evaluator(config)
    bundle = ResultBundle(config_echo=dict(config.raw))
    bundle.metadata = {
        "seed": config.seed,
        "input_hash": _content_hash(config.raw, data, target),
        "n_rows": data.n_rows,
        "columns": list(data.column_names),
    }
    n_workers = int(config.raw.get("threads", 1))
    for block in config.raw.get("measures", []):
        name = block.get("name", block.get("measure", "?"))
        try:
            bundle.add_estimate(name, _run_measure(evaluator, block, data))
        except DedactError as exc:
            raise type(exc)(f"[{name}] {exc}") from exc
    for block in config.raw.get("decompositions", []):
        name = block.get("name", block.get("method", "?"))
        try:
            bundle.add_table(name, _run_decomposition(evaluator, block, data, n_workers))
        except DedactError as exc:
            raise type(exc)(f"[{name}] {exc}") from exc
    outdir = outdir or config.raw.get("output", {}).get("directory")
    if outdir:
        formats = tuple(config.raw.get("output", {}).get("formats", ("csv", "json")))
        bundle.write(outdir, formats)
    return bundle


def run_biomarker_demo(seed: int = 0, n: int = 20000, n_mc: int = 20, outdir=None) -> ResultBundle:
    """Tables behind the biomarker figures: AI of the hidden driver, its
    two feature-pathway components, PFI of the proxy, and its sources."""
    scm = biomarker_scm()
    data, target = sample_scm(scm, n, derive_seed(seed, 1), include_observed=True)
    fit_x, fit_y, eval_x, eval_y = train_eval_split(data, target, 0.5, seed)
    predictor = fit_ols(fit_x, fit_y, scm.model_feature_indices(include_observed=True))
    gaussian = fit_gaussian(fit_x)
    ev = ImportanceEvaluator(eval_x, eval_y, predictor, gaussian, n_mc=n_mc, seed=seed)
    b, c, p = (data.index_of(x) for x in ("B", "C", "P"))
    bundle = ResultBundle(config_echo={"demo": "biomarker", "seed": seed, "n": n, "n_mc": n_mc})
    bundle.metadata = {"seed": seed, "input_hash": _content_hash(bundle.config_echo, data, target),
                       "columns": list(data.column_names)}
    ai_total = ev.associative_importance([p], [])
    bundle.add_estimate("AI_PSA", ai_total)
    via = {}
    for label, pathway in (("B", b), ("C", c)):
        est = ev.ai_via([p], [], [pathway])
        via[label] = (est.value, est.std_error)
        bundle.add_estimate(f"AI_PSA_via_{label}", est)
    bundle.add_table("AI_PSA_pathways", DecompositionTable("P", ai_total, via, "fast"))
    bundle.add_estimate("PFI_cycling", ev.pfi(c))
    bundle.add_table("PFI_cycling_sources", fast_decompose_pfi(ev, c, sources=[b, c, p]))
    if outdir:
        bundle.write(outdir)
    return bundle


def run_census_demo(seed: int = 0, n: int = 20000, n_sage_orders: int = 60,
                    n_decomp_orders: int = 25, n_workers: int = 1, game_n_mc: int = 3,
                    outdir=None) -> ResultBundle:
    """Shapley SAGE pathway tables for the protected roots and Shapley
    PFI source tables for three mediator features."""
    scm = census_scm()
    data, target = sample_scm(scm, n, derive_seed(seed, 1))
    fit_x, fit_y, eval_x, eval_y = train_eval_split(data, target, 0.5, seed)
    predictor = fit_ols(fit_x, fit_y, scm.model_feature_indices())
    gaussian = fit_gaussian(fit_x)
    # linear model: closed-form marginalization is exact and far cheaper
    ev = ImportanceEvaluator(eval_x, eval_y, predictor, gaussian, n_mc=game_n_mc,
                             seed=seed, exact_marginalization=True)
    bundle = ResultBundle(config_echo={
        "demo": "census", "seed": seed, "n": n, "n_sage_orders": n_sage_orders,
        "n_decomp_orders": n_decomp_orders, "game_n_mc": game_n_mc,
    })
    bundle.metadata = {"seed": seed, "input_hash": _content_hash(bundle.config_echo, data, target),
                       "columns": list(data.column_names)}
    for variable in ("race", "sex", "age"):
        table = shapley_decompose_sage(
            ev, data.index_of(variable), n_sage_orders=n_sage_orders,
            n_decomp_orders=n_decomp_orders, n_workers=n_workers,
        )
        bundle.add_table(f"sage_{variable}", table)
    for feature in ("nr_educ", "work_class", "occupation"):
        k = data.index_of(feature)
        sources = [i for i in range(data.n_cols) if i != k]
        table = shapley_decompose_pfi(ev, k, players=sources, n_orders=50)
        bundle.add_table(f"pfi_{feature}", table)
    if outdir:
        bundle.write(outdir)
    return bundle
